"""Two-qubit polarization tomography from 16 coincidence settings."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .density import BASIS_LABELS, TwoQubitDensity, fidelity
from .detection import (AnalyzerSetting, CountRecord, coincidence_prob, marginal_probs,
                        point_rng, sample_counts, subtract_accidentals)
from .errors import ConfigurationError, ConvergenceError

_S = 1 / math.sqrt(2)

# Single-photon projection states and the analyzer (QWP, POL) that realizes them
# with the QWP convention of ``optics.qwp_jones``.
PROJECTION_STATES = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([_S, _S], dtype=complex),
    "A": np.array([_S, -_S], dtype=complex),
    "R": np.array([_S, -1j * _S], dtype=complex),
    "L": np.array([_S, 1j * _S], dtype=complex),
}
ANALYZERS = {
    "H": (None, 0.0),
    "V": (None, math.pi / 2),
    "D": (None, math.pi / 4),
    "A": (None, -math.pi / 4),
    "R": (0.0, math.pi / 4),
    "L": (0.0, -math.pi / 4),
}

# The standard 16-setting list for two-qubit polarization tomography.
STANDARD_SETTINGS = tuple(tuple(s) for s in (
    "HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH",
    "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL",
))

_PAULI = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]
_PAULI2 = [np.kron(a, b) for a in _PAULI for b in _PAULI]

MLE_GTOL = 1e-8
MLE_MAXITER = 500


def projector(setting: tuple[str, str]) -> np.ndarray:
    try:
        v = np.kron(PROJECTION_STATES[setting[0]], PROJECTION_STATES[setting[1]])
    except KeyError:
        raise ConfigurationError(f"unknown projection in setting {setting!r}") from None
    return np.outer(v, v.conj())


def analyzer_for(setting: tuple[str, str]) -> AnalyzerSetting:
    q1, p1 = ANALYZERS[setting[0]]
    q2, p2 = ANALYZERS[setting[1]]
    return AnalyzerSetting(pol1=p1, pol2=p2, qwp1=q1, qwp2=q2)


def design_matrix(settings: Sequence[tuple[str, str]]) -> np.ndarray:
    """Real map from Pauli coefficients r (rho = sum r_k G_k / 4) to probabilities."""
    return np.array([[np.real(np.trace(projector(s) @ g)) / 4 for g in _PAULI2]
                     for s in settings])


def check_settings(settings: Sequence[tuple[str, str]]) -> np.ndarray:
    settings = [tuple(s) for s in settings]
    b = design_matrix(settings)
    if np.linalg.matrix_rank(b, tol=1e-9) < 16:
        raise ConfigurationError("tomography settings are not informationally complete")
    return b


def _rates(records: Sequence[CountRecord], corrected: bool) -> tuple[np.ndarray, np.ndarray]:
    n = np.array([subtract_accidentals(r) if corrected else r.coincidences for r in records],
                 float)
    t = np.array([r.duration for r in records], float)
    return n, t


def tomo_counts(density, settings=STANDARD_SETTINGS, pair_rate: float = 1e4,
                duration: float = 1.0, seed: int = 0) -> list[CountRecord]:
    """Poisson coincidence records for each setting, realized with QWP/POL analyzers."""
    check_settings(settings)
    out = []
    for i, s in enumerate(settings):
        an = analyzer_for(s)
        out.append(sample_counts(coincidence_prob(density, an), pair_rate, duration,
                                 seed=point_rng(seed, i),
                                 marginals=marginal_probs(density, an)))
    return out


def reconstruct_linear(records: Sequence[CountRecord], settings=STANDARD_SETTINGS,
                       corrected: bool = False) -> TwoQubitDensity:
    """Exact linear inversion; the result may have negative eigenvalues.

    Normalization is by the reconstructed trace, which for the standard list
    equals the summed HH+HV+VH+VV counts.
    """
    b = check_settings(settings)
    n, t = _rates(records, corrected)
    if len(n) != len(b):
        raise ConfigurationError("need one record per setting")
    r = np.linalg.solve(b, n / t) if len(b) == 16 else np.linalg.lstsq(b, n / t, rcond=None)[0]
    rho = sum(rk * g for rk, g in zip(r, _PAULI2)) / 4
    if np.real(np.trace(rho)) <= 0:
        raise ConfigurationError("counts carry no signal")
    return TwoQubitDensity.from_unnormalized(rho)


def reconstruct_from_probabilities(probs, settings=STANDARD_SETTINGS) -> TwoQubitDensity:
    b = check_settings(settings)
    r = np.linalg.solve(b, np.asarray(probs, float))
    return TwoQubitDensity.from_unnormalized(sum(rk * g for rk, g in zip(r, _PAULI2)) / 4)


def params_to_a(x: np.ndarray) -> np.ndarray:
    """32 reals -> complex 4x4 factor A with rho proportional to A A^dagger."""
    return (x[:16] + 1j * x[16:]).reshape(4, 4)


def a_to_params(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=complex).reshape(16)
    return np.concatenate([a.real, a.imag])


@dataclass(frozen=True)
class PoissonLikelihood:
    """Negative Poisson log-likelihood per detected count, as a function of
    the factor ``A`` (``rho = A A^dagger``, trace absorbed into the intensity)."""

    projectors: np.ndarray  # (k, 4, 4)
    counts: np.ndarray
    durations: np.ndarray
    intensity: float

    def _mu(self, t):
        rho = t @ t.conj().T
        return self.intensity * self.durations * np.real(
            np.einsum("kij,ji->k", self.projectors, rho))

    def value(self, x: np.ndarray) -> float:
        mu = self._mu(params_to_a(x))
        mu = np.maximum(mu, 1e-300)
        total = self.counts.sum()
        return float(np.sum(mu - self.counts * np.log(mu)) / total)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        a = params_to_a(x)
        mu = np.maximum(self._mu(a), 1e-300)
        c = (1 - self.counts / mu) * self.intensity * self.durations / self.counts.sum()
        g = np.einsum("k,kij->ij", c, self.projectors) @ a  # d/d conj(A)
        return 2 * a_to_params(g)


def _likelihood(records, settings, corrected) -> PoissonLikelihood:
    check_settings(settings)
    n, t = _rates(records, corrected)
    if n.sum() <= 0:
        raise ConfigurationError("counts carry no signal")
    projs = np.array([projector(tuple(s)) for s in settings])
    # intensity guess from rho = I/4: mu_k = N t_k / 4
    intensity = 4 * n.sum() / t.sum()
    return PoissonLikelihood(projs, n, t, intensity)


def _mle(lik: PoissonLikelihood, x0: np.ndarray | None = None):
    if x0 is None:
        x0 = a_to_params(np.eye(4) / 2)
    res = minimize(lik.value, x0, jac=lik.gradient, method="BFGS",
                   options={"gtol": MLE_GTOL, "maxiter": MLE_MAXITER})
    gnorm = float(np.linalg.norm(lik.gradient(res.x)))
    # BFGS may stop on line-search precision loss once the gradient is at
    # rounding level; accept that, reject hitting the iteration cap.
    if not res.success and (res.nit >= MLE_MAXITER or gnorm > 1e-6):
        raise ConvergenceError(f"MLE did not converge: {res.message}",
                               last_iterate=res.x, grad_norm=gnorm)
    a = params_to_a(res.x)
    rho_un = a @ a.conj().T
    scale = float(np.real(np.trace(rho_un)))
    return TwoQubitDensity(rho_un / scale), lik.intensity * scale


def reconstruct_mle(records: Sequence[CountRecord], settings=STANDARD_SETTINGS,
                    corrected: bool = False) -> TwoQubitDensity:
    """Maximum-likelihood density under Poisson statistics.

    Parameterized as A A^dagger / Tr with a general complex 4x4 factor A, so
    the result is positive semidefinite and unit-trace by construction. A
    triangular (Cholesky) factor is equivalent in principle but converges
    poorly when the optimum is rank deficient. Starts from I/4 and runs BFGS
    with the analytic gradient.
    """
    rho, _ = _mle(_likelihood(records, settings, corrected))
    return rho


def bootstrap_fidelity(records: Sequence[CountRecord], target, settings=STANDARD_SETTINGS,
                       n_resamples: int = 100, seed: int = 0,
                       corrected: bool = False) -> tuple[float, float]:
    """MLE fidelity and its parametric-bootstrap standard deviation."""
    lik = _likelihood(records, settings, corrected)
    rho, intensity = _mle(lik)
    f0 = fidelity(rho, target)
    mu = intensity * lik.durations * np.real(
        np.einsum("kij,ji->k", lik.projectors, rho.matrix))
    rng = np.random.default_rng(seed)
    fids = []
    for _ in range(n_resamples):
        n = rng.poisson(np.maximum(mu, 0))
        if n.sum() == 0:
            continue
        boot = PoissonLikelihood(lik.projectors, n.astype(float), lik.durations,
                                 4 * n.sum() / lik.durations.sum())
        fids.append(fidelity(_mle(boot)[0], target))
    return f0, float(np.std(fids, ddof=1)) if len(fids) > 1 else float("nan")


TOMO_COLUMNS = ("setting1", "setting2", "coincidences", "duration")


def write_tomo_counts_csv(fh, settings, records: Sequence[CountRecord]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TOMO_COLUMNS)
    for s, r in zip(settings, records):
        w.writerow([s[0], s[1], r.coincidences, repr(float(r.duration))])


def read_tomo_counts_csv(fh) -> tuple[list[tuple[str, str]], list[CountRecord]]:
    lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(io.StringIO("".join(lines)))
    missing = set(TOMO_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ConfigurationError(f"tomography CSV missing columns {sorted(missing)}")
    settings, records = [], []
    for row in reader:
        settings.append((row["setting1"].strip().upper(), row["setting2"].strip().upper()))
        c = int(float(row["coincidences"]))
        records.append(CountRecord(0, 0, c, float(row["duration"])))
    return settings, records


def write_density_csv(fh, rho: TwoQubitDensity, metrics: dict[str, float] | None = None) -> None:
    """Real block then imaginary block, one row per basis label, plus a metrics comment."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("part", "row") + BASIS_LABELS)
    for part, fn in (("real", np.real), ("imag", np.imag)):
        for label, row in zip(BASIS_LABELS, fn(rho.matrix)):
            w.writerow([part, label] + [f"{round(v, 12) + 0.0:.12f}" for v in row])
    if metrics:
        fh.write("# metrics " + ",".join(f"{k}={v:.6f}" for k, v in metrics.items()) + "\n")


def read_density_csv(fh) -> tuple[np.ndarray, dict[str, float]]:
    metrics: dict[str, float] = {}
    body = []
    for ln in fh:
        head = ln.lstrip()
        if head.startswith("# metrics "):
            for item in head[len("# metrics "):].strip().split(","):
                k, v = item.split("=", 1)
                metrics[k.strip()] = float(v)
        elif head.startswith("#"):
            continue
        elif ln.strip():
            body.append(ln)
    m = np.zeros((4, 4), dtype=complex)
    for row in csv.DictReader(io.StringIO("".join(body))):
        i = BASIS_LABELS.index(row["row"])
        vals = np.array([float(row[c]) for c in BASIS_LABELS])
        if row["part"] == "real":
            m[i] += vals
        elif row["part"] == "imag":
            m[i] += 1j * vals
        else:
            raise ConfigurationError(f"unknown block {row['part']!r}")
    return m, metrics
