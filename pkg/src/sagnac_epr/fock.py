"""Few-photon bosonic states over labeled (spatial path, polarization) modes.

States are stored sparsely as ``{occupation tuple: amplitude}``. All objects
are immutable; every operation returns a new value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .density import TwoQubitDensity
from .errors import ConfigurationError, DegenerateSectorError, TruncationError

PRUNE_TOL = 1e-15
EQUAL_TOL = 1e-12
DEFAULT_TRUNCATION = 2
MAX_TRUNCATION = 4


class Pol(str, Enum):
    H = "H"
    V = "V"


@dataclass(frozen=True, order=True)
class ModeLabel:
    spatial: str
    polarization: Pol

    def __post_init__(self):
        object.__setattr__(self, "polarization", Pol(self.polarization))

    def __str__(self):
        return f"{self.polarization.value}:{self.spatial}"


def path_modes(*paths: str) -> tuple[ModeLabel, ...]:
    """H and V modes for each named spatial path, in order."""
    return tuple(ModeLabel(p, pol) for p in paths for pol in (Pol.H, Pol.V))


Occupation = tuple[int, ...]


def _ket_norm_factor(occ: Occupation) -> float:
    return math.sqrt(math.prod(math.factorial(n) for n in occ))


@dataclass(frozen=True, eq=False)
class FockState:
    """Sparse complex amplitudes over occupation vectors of ``modes``.

    ``overflow`` selects what happens when an operation would create a
    component above ``truncation`` photons: ``"raise"`` (default) throws
    :class:`TruncationError`, ``"drop"`` discards the component, which is how
    first-order perturbative emission is kept first-order.
    """

    modes: tuple[ModeLabel, ...]
    amplitudes: Mapping[Occupation, complex]
    truncation: int = DEFAULT_TRUNCATION
    overflow: str = "raise"

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise ConfigurationError("a state needs at least one mode")
        if len(set(modes)) != len(modes):
            raise ConfigurationError("duplicate mode labels")
        if not 1 <= self.truncation <= MAX_TRUNCATION:
            raise ConfigurationError(f"truncation must be in [1, {MAX_TRUNCATION}]")
        if self.overflow not in ("raise", "drop"):
            raise ConfigurationError(f"unknown overflow policy {self.overflow!r}")
        clean = {}
        for occ, amp in self.amplitudes.items():
            occ = tuple(int(n) for n in occ)
            if len(occ) != len(modes) or min(occ) < 0:
                raise ConfigurationError(f"bad occupation vector {occ}")
            amp = complex(amp)
            if abs(amp) < PRUNE_TOL:
                continue
            if sum(occ) > self.truncation:
                if self.overflow == "raise":
                    raise TruncationError(
                        f"{sum(occ)} photons exceeds truncation {self.truncation}"
                    )
                continue
            clean[occ] = amp
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "amplitudes", MappingProxyType(dict(sorted(clean.items(), reverse=True))))

    def _with(self, amplitudes) -> "FockState":
        return FockState(self.modes, amplitudes, self.truncation, self.overflow)

    def index(self, mode: ModeLabel) -> int:
        try:
            return self.modes.index(mode)
        except ValueError:
            raise ConfigurationError(f"mode {mode} not in state") from None

    def amplitude(self, occupation: Mapping[ModeLabel, int] | Occupation) -> complex:
        if isinstance(occupation, Mapping):
            occ = [0] * len(self.modes)
            for m, n in occupation.items():
                occ[self.index(m)] = n
            occupation = tuple(occ)
        return self.amplitudes.get(tuple(occupation), 0j)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def normalize(self) -> "FockState":
        n = self.norm()
        if n == 0:
            raise DegenerateSectorError("cannot normalize the zero state")
        return self._with({o: a / n for o, a in self.amplitudes.items()})

    def prune(self, tol: float = PRUNE_TOL) -> "FockState":
        return self._with({o: a for o, a in self.amplitudes.items() if abs(a) >= tol})

    def sector(self, photons: int) -> "FockState":
        """Projection onto a fixed total photon number."""
        return self._with({o: a for o, a in self.amplitudes.items() if sum(o) == photons})

    def photon_number_distribution(self) -> dict[int, float]:
        dist: dict[int, float] = {}
        for occ, amp in self.amplitudes.items():
            n = sum(occ)
            dist[n] = dist.get(n, 0.0) + abs(amp) ** 2
        return dist

    def is_zero(self) -> bool:
        return not self.amplitudes

    def __add__(self, other: "FockState") -> "FockState":
        _check_same_modes(self, other)
        out = dict(self.amplitudes)
        for occ, amp in other.amplitudes.items():
            out[occ] = out.get(occ, 0j) + amp
        return self._with(out)

    def __mul__(self, scalar) -> "FockState":
        scalar = complex(scalar)
        return self._with({o: scalar * a for o, a in self.amplitudes.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, FockState):
            return NotImplemented
        return (self.modes == other.modes and self.truncation == other.truncation
                and dict(self.amplitudes) == dict(other.amplitudes))

    __hash__ = None

    def isclose(self, other: "FockState", tol: float = EQUAL_TOL) -> bool:
        """Same modes and every amplitude equal within ``tol`` (phase-sensitive)."""
        _check_same_modes(self, other)
        keys = set(self.amplitudes) | set(other.amplitudes)
        return all(abs(self.amplitude(k) - other.amplitude(k)) <= tol for k in keys)

    def __str__(self):
        if self.is_zero():
            return "0"
        show_path = len({m.spatial for m in self.modes}) > 1
        terms = []
        for occ, amp in self.amplitudes.items():
            parts = []
            for mode, n in zip(self.modes, occ):
                if n:
                    tag = f"{n}_{mode.polarization.value}"
                    parts.append(f"{tag}:{mode.spatial}" if show_path else tag)
            terms.append(f"{_format_amp(amp)}|{','.join(parts) or '0'}⟩")
        text = terms[0]
        for t in terms[1:]:
            text += f" - {t[1:]}" if t.startswith("-") else f" + {t}"
        return text


def _format_amp(a: complex) -> str:
    if abs(a.imag) < 5e-5:
        return f"{a.real:.4f}"
    if abs(a.real) < 5e-5:
        return f"{a.imag:.4f}i"
    return f"({a.real:.4f}{a.imag:+.4f}i)"


def _check_same_modes(a: FockState, b: FockState):
    if a.modes != b.modes:
        raise ConfigurationError("states are defined on different mode lists")


def vacuum(modes: Sequence[ModeLabel], truncation: int = DEFAULT_TRUNCATION,
           overflow: str = "raise") -> FockState:
    return FockState(tuple(modes), {(0,) * len(modes): 1.0}, truncation, overflow)


def basis_state(modes: Sequence[ModeLabel], occupation: Mapping[ModeLabel, int],
                truncation: int = DEFAULT_TRUNCATION) -> FockState:
    """Normalized number state, e.g. ``{H:out1: 1, V:out2: 1}``."""
    modes = tuple(modes)
    occ = [0] * len(modes)
    for m, n in occupation.items():
        if m not in modes:
            raise ConfigurationError(f"mode {m} not in mode list")
        occ[modes.index(m)] = n
    return FockState(modes, {tuple(occ): 1.0}, truncation)


@dataclass(frozen=True)
class CreationOpPoly:
    """Polynomial in creation operators: ``sum_k c_k prod_{m in ops_k} a_m^dagger``."""

    terms: tuple[tuple[complex, tuple[ModeLabel, ...]], ...]

    @classmethod
    def identity(cls) -> "CreationOpPoly":
        return cls(((1.0 + 0j, ()),))

    @classmethod
    def creation(cls, mode: ModeLabel, power: int = 1) -> "CreationOpPoly":
        return cls(((1.0 + 0j, (mode,) * power),))

    def __add__(self, other: "CreationOpPoly") -> "CreationOpPoly":
        return CreationOpPoly(self.terms + other.terms)

    def __mul__(self, other) -> "CreationOpPoly":
        if isinstance(other, CreationOpPoly):
            return CreationOpPoly(tuple(
                (c1 * c2, ops1 + ops2) for c1, ops1 in self.terms for c2, ops2 in other.terms
            ))
        s = complex(other)
        return CreationOpPoly(tuple((s * c, ops) for c, ops in self.terms))

    def __rmul__(self, other) -> "CreationOpPoly":
        return CreationOpPoly(tuple((complex(other) * c, ops) for c, ops in self.terms))

    def __pow__(self, n: int) -> "CreationOpPoly":
        out = CreationOpPoly.identity()
        for _ in range(n):
            out = out * self
        return out


def apply_poly(poly: CreationOpPoly, state: FockState) -> FockState:
    """Apply a creation-operator polynomial with exact sqrt(n+1) ladder factors.

    The result is not normalized.
    """
    out: dict[Occupation, complex] = {}
    idx = {m: i for i, m in enumerate(state.modes)}
    for coef, ops in poly.terms:
        missing = [m for m in ops if m not in idx]
        if missing:
            raise ConfigurationError(f"modes {missing} not in state")
        for occ, amp in state.amplitudes.items():
            new = list(occ)
            factor = coef * amp
            for m in ops:
                j = idx[m]
                new[j] += 1
                factor *= math.sqrt(new[j])
            key = tuple(new)
            if sum(key) > state.truncation:
                if state.overflow == "raise":
                    raise TruncationError(
                        f"{sum(key)} photons exceeds truncation {state.truncation}"
                    )
                continue
            out[key] = out.get(key, 0j) + factor
    return state._with(out)


def inner_product(a: FockState, b: FockState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    _check_same_modes(a, b)
    small, large = (a, b) if len(a.amplitudes) <= len(b.amplitudes) else (b, a)
    total = 0j
    for occ in small.amplitudes:
        if occ in large.amplitudes:
            total += a.amplitudes[occ].conjugate() * b.amplitudes[occ]
    return total


def overlap(a: FockState, b: FockState) -> float:
    """Phase-insensitive |<a|b>| / (|a| |b|)."""
    na, nb = a.norm(), b.norm()
    if na == 0 or nb == 0:
        raise DegenerateSectorError("overlap with the zero state")
    return abs(inner_product(a, b)) / (na * nb)


def apply_linear_optics(matrix: np.ndarray, on_modes: Sequence[ModeLabel],
                        state: FockState) -> FockState:
    """Passive transformation a_j^dagger -> sum_k U[k, j] a_k^dagger.

    ``matrix`` acts on ``on_modes`` (a subset of the state's modes, in that
    order); every other mode is left untouched.
    """
    u = np.asarray(matrix, dtype=complex)
    sub = [state.index(m) for m in on_modes]
    if u.shape != (len(sub), len(sub)):
        raise ConfigurationError("transform matrix does not match its mode list")
    pos = {full: k for k, full in enumerate(sub)}
    # columns of u as sparse (full-index, coefficient) lists
    images = [[(sub[k], u[k, c]) for k in range(len(sub)) if u[k, c] != 0]
              for c in range(len(sub))]
    out: dict[Occupation, complex] = {}
    for occ, amp in state.amplitudes.items():
        base = [0] * len(occ)
        moving = []
        for j, n in enumerate(occ):
            if j in pos:
                moving.extend([pos[j]] * n)
            else:
                base[j] = n
        poly = {tuple(base): amp / _ket_norm_factor(occ)}
        for c in moving:
            nxt: dict[Occupation, complex] = {}
            for mono, coef in poly.items():
                for k, uk in images[c]:
                    m = list(mono)
                    m[k] += 1
                    key = tuple(m)
                    nxt[key] = nxt.get(key, 0j) + coef * uk
            poly = nxt
        for mono, coef in poly.items():
            out[mono] = out.get(mono, 0j) + coef * _ket_norm_factor(mono)
    return state._with(out)


def coincidence_vector(state: FockState,
                       keep: tuple[str, str] = ("out1", "out2")) -> np.ndarray:
    """Unnormalized HH, HV, VH, VV amplitudes with one photon in each ``keep`` path
    and every other mode empty."""
    p1 = [state.index(ModeLabel(keep[0], pol)) for pol in (Pol.H, Pol.V)]
    p2 = [state.index(ModeLabel(keep[1], pol)) for pol in (Pol.H, Pol.V)]
    vec = np.zeros(4, dtype=complex)
    for occ, amp in state.amplitudes.items():
        if sum(occ) != 2 or occ[p1[0]] + occ[p1[1]] != 1 or occ[p2[0]] + occ[p2[1]] != 1:
            continue
        vec[2 * occ[p1[1]] + occ[p2[1]]] += amp
    return vec


def partial_trace_to_density(state: FockState,
                             keep: tuple[str, str] = ("out1", "out2")) -> TwoQubitDensity:
    """Polarization density of the one-photon-per-path coincidence sector.

    Components with exactly one photon in each of the two ``keep`` paths are
    retained (this is what a coincidence detector registers); any photons in
    other modes are traced out.
    """
    p1 = [state.index(ModeLabel(keep[0], pol)) for pol in (Pol.H, Pol.V)]
    p2 = [state.index(ModeLabel(keep[1], pol)) for pol in (Pol.H, Pol.V)]
    kept = set(p1 + p2)
    groups: dict[Occupation, np.ndarray] = {}
    for occ, amp in state.amplitudes.items():
        if occ[p1[0]] + occ[p1[1]] != 1 or occ[p2[0]] + occ[p2[1]] != 1:
            continue
        rest = tuple(n for j, n in enumerate(occ) if j not in kept)
        k = 2 * occ[p1[1]] + occ[p2[1]]
        vec = groups.setdefault(rest, np.zeros(4, dtype=complex))
        vec[k] += amp
    rho = sum((np.outer(v, v.conj()) for v in groups.values()), np.zeros((4, 4), complex))
    tr = np.trace(rho).real
    if tr < PRUNE_TOL:
        raise DegenerateSectorError("state has no weight with one photon in each output")
    return TwoQubitDensity(rho / tr)


def random_state(modes: Sequence[ModeLabel], rng: np.random.Generator,
                 truncation: int = DEFAULT_TRUNCATION, density: float = 1.0) -> FockState:
    """Random normalized state over all occupations up to ``truncation`` photons."""
    occs = [o for o in np.ndindex(*([truncation + 1] * len(modes))) if sum(o) <= truncation]
    amps = {}
    for o in occs:
        if rng.random() < density:
            amps[o] = complex(rng.normal(), rng.normal())
    if not amps:
        amps[occs[0]] = 1.0
    return FockState(tuple(modes), amps, truncation).normalize()
