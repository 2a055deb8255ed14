"""CHSH Bell parameter from densities and from coincidence counts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detection import AnalyzerSetting, CountRecord, coincidence_prob, point_rng, simulate_record
from .errors import ConfigurationError

TSIRELSON = 2 * math.sqrt(2)

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class ChshSetting:
    """Analyzer angles (radians) of the two arms."""

    a: float = 0.0
    a_prime: float = math.pi / 4
    b: float = math.pi / 8
    b_prime: float = 3 * math.pi / 8

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.angles):
            raise ConfigurationError("CHSH angles must be finite")

    @property
    def angles(self) -> tuple[float, float, float, float]:
        return (self.a, self.a_prime, self.b, self.b_prime)

    @property
    def pairs(self) -> dict[str, tuple[float, float]]:
        """The four angle pairs keyed by name, in the order they enter S."""
        return {
            "ab": (self.a, self.b),
            "ab'": (self.a, self.b_prime),
            "a'b": (self.a_prime, self.b),
            "a'b'": (self.a_prime, self.b_prime),
        }

    def degrees(self) -> tuple[float, ...]:
        return tuple(math.degrees(v) for v in self.angles)


# Maximal-violation angle sets per Bell state. The Phi states correlate as
# cos 2(a -/+ b) and the Psi states anticorrelate, so the sign of b, b' flips
# between the two families.
BELL_SETTINGS = {
    "phi+": ChshSetting(0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8),
    "psi-": ChshSetting(0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8),
    "phi-": ChshSetting(0.0, math.pi / 4, -math.pi / 8, -3 * math.pi / 8),
    "psi+": ChshSetting(0.0, math.pi / 4, -math.pi / 8, -3 * math.pi / 8),
}
DEFAULT_SETTING = ChshSetting()

# Outcome order within each angle pair: (++, --, +-, -+), '-' meaning the
# analyzer is turned by 90 degrees.
OUTCOMES = ("++", "--", "+-", "-+")
_SIGNS = (1, 1, -1, -1)


def _outcome_settings(a: float, b: float) -> list[AnalyzerSetting]:
    q = math.pi / 2
    return [AnalyzerSetting(pol1=a, pol2=b), AnalyzerSetting(pol1=a + q, pol2=b + q),
            AnalyzerSetting(pol1=a, pol2=b + q), AnalyzerSetting(pol1=a + q, pol2=b)]


def correlation(density, a: float, b: float) -> float:
    """E(a, b) from the four polarizer-pair coincidence probabilities."""
    p = [coincidence_prob(density, s) for s in _outcome_settings(a, b)]
    total = sum(p)
    if total <= 0:
        raise ConfigurationError("no coincidences at this angle pair")
    return sum(s * x for s, x in zip(_SIGNS, p)) / total


def _combine(e: dict[str, float]) -> float:
    return abs(e["ab"] - e["ab'"] + e["a'b"] + e["a'b'"])


def chsh_s(density, setting: ChshSetting = DEFAULT_SETTING) -> float:
    """|E(a,b) - E(a,b') + E(a',b) + E(a',b')|."""
    return _combine({k: correlation(density, *ab) for k, ab in setting.pairs.items()})


def _matrix(density) -> np.ndarray:
    return np.asarray(getattr(density, "matrix", density), dtype=complex)


def correlation_block(density) -> np.ndarray:
    """2x2 matrix M with E(a, b) = u(a)^T M u(b), u(x) = (cos 2x, sin 2x)."""
    rho = _matrix(density)
    ops = (_SZ, _SX)
    return np.array([[np.real(np.trace(rho @ np.kron(p, q))) for q in ops] for p in ops])


def optimal_chsh_setting(density) -> ChshSetting:
    """Linear-polarizer angles that maximize S for ``density``."""
    u, sig, vt = np.linalg.svd(correlation_block(density))
    v1, v2 = vt[0], vt[1]
    t = math.atan2(sig[1], sig[0])
    ub = math.cos(t) * v1 + math.sin(t) * v2
    ubp = math.cos(t) * v1 - math.sin(t) * v2

    def ang(vec):
        return math.atan2(vec[1], vec[0]) / 2

    return ChshSetting(ang(u[:, 1]), ang(u[:, 0]), ang(ub), ang(ubp))


def max_chsh(density) -> float:
    """Largest S reachable with linear polarizers: 2 sqrt(s1^2 + s2^2)."""
    sig = np.linalg.svd(correlation_block(density), compute_uv=False)
    return float(2 * math.hypot(sig[0], sig[1]))


def horodecki_max(density) -> float:
    """Largest S over arbitrary projective qubit measurements.

    Uses the two largest eigenvalues of T^T T, T being the full 3x3 Pauli
    correlation matrix; an upper bound for :func:`max_chsh`.
    """
    rho = _matrix(density)
    ops = (_SX, _SY, _SZ)
    t = np.array([[np.real(np.trace(rho @ np.kron(p, q))) for q in ops] for p in ops])
    ev = np.sort(np.linalg.eigvalsh(t.T @ t))[::-1]
    return float(2 * math.sqrt(max(ev[0] + ev[1], 0.0)))


def chsh_counts(density, setting: ChshSetting = DEFAULT_SETTING, pair_rate: float = 1e4,
                duration: float = 1.0, seed: int = 0) -> dict[str, list[CountRecord]]:
    """Sampled records for every angle pair, ordered as :data:`OUTCOMES`."""
    out = {}
    index = 0
    for key, (a, b) in setting.pairs.items():
        recs = []
        for s in _outcome_settings(a, b):
            recs.append(simulate_record(density, s, pair_rate, duration, seed=point_rng(seed, index)))
            index += 1
        out[key] = recs
    return out


def correlation_from_counts(records) -> tuple[float, float]:
    """E and its Poisson standard error from (++, --, +-, -+) coincidences."""
    n = np.array([getattr(r, "coincidences", r) for r in records], dtype=float)
    if n.shape != (4,):
        raise ConfigurationError("need exactly four outcome counts per angle pair")
    total = n.sum()
    if total <= 0:
        raise ConfigurationError("zero total coincidences for an angle pair")
    e = float((n[0] + n[1] - n[2] - n[3]) / total)
    # dE/dN for same-sign and opposite-sign outcomes
    d_same, d_opp = (1 - e) / total, -(1 + e) / total
    var = d_same ** 2 * (n[0] + n[1]) + d_opp ** 2 * (n[2] + n[3])
    return e, float(math.sqrt(var))


def chsh_from_counts(counts: dict[str, list]) -> tuple[float, float]:
    """S and its propagated Poisson uncertainty from per-angle-pair counts."""
    missing = {"ab", "ab'", "a'b", "a'b'"} - set(counts)
    if missing:
        raise ConfigurationError(f"missing angle pairs {sorted(missing)}")
    es, var = {}, 0.0
    for key in ("ab", "ab'", "a'b", "a'b'"):
        e, sd = correlation_from_counts(counts[key])
        es[key] = e
        var += sd ** 2
    return _combine(es), math.sqrt(var)
