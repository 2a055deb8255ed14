"""Coincidence detection: analyzer projectors, count sampling, accidental
subtraction, sinusoidal fringe fitting and polarization correlation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .density import TwoQubitDensity
from .errors import ConfigurationError, FitError
from .optics import polarizer_vector, qwp_jones
from .spdc import PumpField

DEFAULT_WINDOW = 2.3e-9  # s


@dataclass(frozen=True)
class AnalyzerSetting:
    """Optional QWP followed by an optional polarizer in each output arm (radians)."""

    pol1: float | None = None
    pol2: float | None = None
    qwp1: float | None = None
    qwp2: float | None = None


def arm_projector(pol: float | None, qwp: float | None = None) -> np.ndarray:
    """Single-photon POVM element for QWP-then-polarizer; identity without a polarizer."""
    if pol is None:
        return np.eye(2, dtype=complex)
    v = polarizer_vector(pol)
    if qwp is not None:
        v = qwp_jones(qwp).conj().T @ v
    return np.outer(v, v.conj())


def setting_projector(setting: AnalyzerSetting) -> np.ndarray:
    return np.kron(arm_projector(setting.pol1, setting.qwp1),
                   arm_projector(setting.pol2, setting.qwp2))


def _rho(density) -> np.ndarray:
    return density.matrix if isinstance(density, TwoQubitDensity) else np.asarray(density)


def coincidence_prob(density, setting: AnalyzerSetting) -> float:
    """Tr(rho P1 (x) P2) for the analyzers of ``setting``."""
    p = float(np.real(np.trace(_rho(density) @ setting_projector(setting))))
    return min(max(p, 0.0), 1.0)


def marginal_probs(density, setting: AnalyzerSetting) -> tuple[float, float]:
    rho = _rho(density)
    eye = np.eye(2)
    m1 = np.real(np.trace(rho @ np.kron(arm_projector(setting.pol1, setting.qwp1), eye)))
    m2 = np.real(np.trace(rho @ np.kron(eye, arm_projector(setting.pol2, setting.qwp2))))
    return float(np.clip(m1, 0, 1)), float(np.clip(m2, 0, 1))


def pump_qwp_to_theta(qwp_angle: float, input_jones=None) -> tuple[float, PumpField]:
    """Relative pump phase theta after a QWP at ``qwp_angle``.

    The input defaults to 45 deg linear polarization. Returns theta in
    (-pi, pi] together with the normalized pump after the plate, whose
    ``|h|^2 : |v|^2`` is the clockwise/counterclockwise arm balance.
    """
    inp = np.array([1, 1], dtype=complex) / math.sqrt(2) if input_jones is None \
        else np.asarray(input_jones, dtype=complex)
    out = qwp_jones(qwp_angle) @ inp
    out = out / np.linalg.norm(out)
    h, v = out
    if abs(h) < 1e-15 or abs(v) < 1e-15:
        theta = 0.0
    else:
        theta = float(np.angle(v / h))
    return theta, PumpField(abs(h), abs(v))


@dataclass(frozen=True)
class CountRecord:
    singles1: int
    singles2: int
    coincidences: int
    duration: float
    window: float = DEFAULT_WINDOW

    def __post_init__(self):
        for name in ("singles1", "singles2", "coincidences"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ConfigurationError(f"{name} must be a nonnegative integer")
            object.__setattr__(self, name, int(v))
        if not self.duration > 0 or not self.window > 0:
            raise ConfigurationError("duration and window must be positive")


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def point_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for point ``index`` of a scan; independent of evaluation order."""
    return np.random.default_rng([int(seed), int(index)])


def sample_counts(prob: float, pair_rate: float, duration: float,
                  efficiencies: tuple[float, float] = (1.0, 1.0), seed=None, *,
                  marginals: tuple[float, float] = (1.0, 1.0),
                  window: float = DEFAULT_WINDOW, accidentals: bool = False) -> CountRecord:
    """Poisson singles and coincidences for one analyzer setting.

    True coincidences have mean ``pair_rate * prob * eta1 * eta2 * duration``.
    Singles are the coincident events plus independent one-sided detections,
    so their means are ``pair_rate * eta_i * marginal_i * duration``. With
    ``accidentals`` an uncorrelated Poisson term of mean
    ``mu1 * mu2 * window / duration`` is added to the coincidences.
    """
    if not 0 <= prob <= 1:
        raise ConfigurationError("prob must be in [0, 1]")
    if pair_rate < 0 or duration <= 0:
        raise ConfigurationError("pair_rate must be >= 0 and duration > 0")
    e1, e2 = efficiencies
    if not (0 <= e1 <= 1 and 0 <= e2 <= 1):
        raise ConfigurationError("efficiencies must be in [0, 1]")
    rng = _rng(seed)
    mu_c = pair_rate * prob * e1 * e2 * duration
    mu1 = pair_rate * e1 * max(marginals[0], prob) * duration
    mu2 = pair_rate * e2 * max(marginals[1], prob) * duration
    c = rng.poisson(mu_c)
    s1 = c + rng.poisson(max(mu1 - mu_c, 0.0))
    s2 = c + rng.poisson(max(mu2 - mu_c, 0.0))
    if accidentals:
        c += rng.poisson(mu1 * mu2 * window / duration)
    return CountRecord(int(s1), int(s2), int(c), duration, window)


def simulate_record(density, setting: AnalyzerSetting, pair_rate: float, duration: float,
                    efficiencies=(1.0, 1.0), seed=None, *, window: float = DEFAULT_WINDOW,
                    accidentals: bool = False) -> CountRecord:
    return sample_counts(coincidence_prob(density, setting), pair_rate, duration,
                         efficiencies, seed, marginals=marginal_probs(density, setting),
                         window=window, accidentals=accidentals)


def accidental_estimate(record: CountRecord) -> float:
    return record.singles1 * record.singles2 * record.window / record.duration


def subtract_accidentals(record: CountRecord, floor: bool = True) -> float:
    """Coincidences minus ``singles1 * singles2 * window / duration``.

    The floor at zero makes the estimator biased upward for weak signals;
    pass ``floor=False`` for an unbiased (possibly negative) value.
    """
    corrected = record.coincidences - accidental_estimate(record)
    return max(corrected, 0.0) if floor else corrected


@dataclass(frozen=True, eq=False)
class FringeScan:
    """Sinusoidal fit ``offset + amplitude * cos(2 (alpha - phase))`` of a scan."""

    angles: np.ndarray
    counts: np.ndarray
    offset: float
    amplitude: float
    phase: float
    covariance: np.ndarray
    visibility: float
    visibility_err: float
    records: tuple[CountRecord, ...] = field(default=())

    def model(self, alpha) -> np.ndarray:
        return fringe_model(np.asarray(alpha, float), self.offset, self.amplitude, self.phase)

    @property
    def c_max(self) -> float:
        return self.offset + self.amplitude

    @property
    def c_min(self) -> float:
        return self.offset - self.amplitude


def fringe_model(alpha, offset, amplitude, phase):
    return offset + amplitude * np.cos(2 * (alpha - phase))


def _gauss_newton(alpha, y, w, params, free, tol=1e-10, max_iter=200):
    """Weighted Gauss-Newton on (offset, amplitude, phase); ``free`` picks the
    parameterization: 'full' or 'tied' (amplitude == offset)."""
    p = np.array(params, float)
    for _ in range(max_iter):
        o, a, ph = p
        c = np.cos(2 * (alpha - ph))
        s = np.sin(2 * (alpha - ph))
        r = y - (o + a * c)
        if free == "full":
            jac = np.column_stack([np.ones_like(alpha), c, 2 * a * s])
        else:
            jac = np.column_stack([1 + c, 2 * o * s])
        jw = jac * w[:, None]
        step, *_ = np.linalg.lstsq(jw.T @ jac, jw.T @ r, rcond=None)
        if free == "full":
            p = p + step
        else:
            p = np.array([o + step[0], o + step[0], ph + step[1]])
        if np.max(np.abs(step)) < tol:
            break
    return p


REWEIGHT_ITER = 50
_MIN_OFFSET = math.sqrt(np.finfo(float).tiny)  # keeps offset**2 representable


def _fit_once(alpha, y, w, start=None):
    """Weighted fit with fixed weights; grid-initialized unless ``start`` is given."""
    if start is None:
        best = None
        for ph in np.linspace(0, np.pi, 90, endpoint=False):
            basis = np.column_stack([np.ones_like(alpha), np.cos(2 * (alpha - ph))])
            bw = basis * w[:, None]
            coef, *_ = np.linalg.lstsq(bw.T @ basis, bw.T @ y, rcond=None)
            ssr = float(np.sum(w * (y - basis @ coef) ** 2))
            if best is None or ssr < best[0]:
                best = (ssr, coef[0], coef[1], ph)
        start = best[1:]
    o, a, ph = _gauss_newton(alpha, y, w, start, "full")
    if a < 0:
        a, ph = -a, ph + np.pi / 2
    if a > o:
        o, a, ph = _gauss_newton(alpha, y, w, (o, o, ph), "tied")
    return o, a, ph


def fit_fringe(angles: Sequence[float], counts: Sequence[float], weighted: bool = True,
               records: Iterable[CountRecord] = ()) -> FringeScan:
    """Least-squares sinusoid with period pi in the analyzer angle.

    Phase is initialized on a grid (offset and amplitude solved linearly at
    each grid point) and refined by Gauss-Newton. With ``weighted`` the
    residuals use Poisson variances taken from the fitted curve (floored at
    one count) and iterated to self-consistency, which is the Poisson
    maximum-likelihood fit. The visibility
    ``amplitude / offset`` equals ``(C_max - C_min) / (C_max + C_min)`` of the
    fitted curve; its uncertainty comes from the fit covariance.
    """
    alpha = np.asarray(angles, float)
    y = np.asarray(counts, float)
    if alpha.shape != y.shape or alpha.ndim != 1:
        raise ConfigurationError("angles and counts must be equal-length 1-d sequences")
    if len(np.unique(alpha)) < 4:
        raise ConfigurationError("a fringe fit needs at least 4 distinct angles")
    design = np.column_stack([np.ones_like(alpha), np.cos(2 * alpha), np.sin(2 * alpha)])
    if np.linalg.matrix_rank(design, tol=1e-9) < 3:
        raise FitError("angles do not determine a sinusoid (all equal mod pi/2 pairs)")
    w = 1 / np.maximum(y, 1.0) if weighted else np.ones_like(y)
    o, a, ph = _fit_once(alpha, y, w)
    if weighted:
        # reweight by the fitted curve until stable: the fixed point solves
        # the Poisson likelihood equations and removes the bias of data weights
        for _ in range(REWEIGHT_ITER):
            w = 1 / np.maximum(fringe_model(alpha, o, a, ph), 1.0)
            o2, a2, ph2 = _fit_once(alpha, y, w, (o, a, ph))
            step = max(abs(o2 - o), abs(a2 - a)) / max(o2, 1e-300) + abs(ph2 - ph)
            o, a, ph = o2, a2, ph2
            if step < 1e-12:
                break
    ph = float(np.mod(ph, np.pi))
    if not o > _MIN_OFFSET:
        raise FitError("fitted offset is not positive (no signal)")

    c = np.cos(2 * (alpha - ph))
    s = np.sin(2 * (alpha - ph))
    jac = np.column_stack([np.ones_like(alpha), c, 2 * a * s])
    fisher = (jac * w[:, None]).T @ jac
    cov = np.linalg.pinv(fisher)
    if not weighted:
        dof = max(len(y) - 3, 1)
        cov = cov * float(np.sum((y - fringe_model(alpha, o, a, ph)) ** 2)) / dof
    vis = a / o
    grad = np.array([-a / o ** 2, 1 / o, 0.0])
    vis_err = float(np.sqrt(max(grad @ cov @ grad, 0.0)))
    return FringeScan(alpha, y, float(o), float(a), ph, cov, float(vis), vis_err, tuple(records))


def polarization_correlation(c_dd: float, c_da: float) -> float:
    """(C_DD - C_DA) / (C_DD + C_DA)."""
    total = c_dd + c_da
    if total <= 0:
        raise ConfigurationError("C_DD + C_DA must be positive")
    return (c_dd - c_da) / total


BASES = ("linear", "circular")


def fringe_setting(alpha: float, fixed: float, basis: str = "linear") -> AnalyzerSetting:
    """Analyzer for a mode-1 polarizer scan; the circular basis adds QWPs at 0 deg in both arms."""
    if basis == "linear":
        return AnalyzerSetting(pol1=alpha, pol2=fixed)
    if basis == "circular":
        return AnalyzerSetting(pol1=alpha, pol2=fixed, qwp1=0.0, qwp2=0.0)
    raise ConfigurationError(f"unknown basis {basis!r}; expected one of {BASES}")


def fringe_probabilities(density, angles, fixed: float, basis: str = "linear") -> np.ndarray:
    return np.array([coincidence_prob(density, fringe_setting(a, fixed, basis)) for a in angles])


def fringe_visibility(density, fixed: float, basis: str = "linear") -> float:
    """Exact visibility of the noiseless fringe.

    Coincidence probability is affine in (cos 2a, sin 2a), so four analyzer
    angles determine the whole curve.
    """
    p0, p45, p90, p135 = fringe_probabilities(
        density, [0, np.pi / 4, np.pi / 2, 3 * np.pi / 4], fixed, basis)
    offset = (p0 + p90) / 2
    if offset <= 0:
        return 0.0
    amp = math.hypot((p0 - p90) / 2, (p45 - p135) / 2)
    return float(amp / offset)


def simulate_fringe(density, angles, fixed: float, basis: str = "linear", *,
                    pair_rate: float = 1e4, duration: float = 1.0,
                    efficiencies=(1.0, 1.0), seed: int = 0, window: float = DEFAULT_WINDOW,
                    accidentals: bool = True, subtract: bool = True) -> FringeScan:
    """Sample a fringe scan and fit it (optionally after accidental subtraction)."""
    records = tuple(
        simulate_record(density, fringe_setting(a, fixed, basis), pair_rate, duration,
                        efficiencies, point_rng(seed, i), window=window, accidentals=accidentals)
        for i, a in enumerate(angles)
    )
    if subtract:
        y = [subtract_accidentals(r) for r in records]
    else:
        y = [r.coincidences for r in records]
    return fit_fringe(angles, y, records=records)


FRINGE_COLUMNS = ("angle_deg", "singles1", "singles2", "coincidences_raw",
                  "coincidences_corrected")


def write_fringe_csv(fh, angles, records: Sequence[CountRecord]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(FRINGE_COLUMNS)
    for a, r in zip(angles, records):
        w.writerow([f"{math.degrees(a):.6f}", r.singles1, r.singles2, r.coincidences,
                    f"{subtract_accidentals(r):.6f}"])


def read_fringe_csv(fh) -> dict[str, np.ndarray]:
    """Parse a fringe CSV (``#`` comment lines are skipped) into column arrays."""
    lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(io.StringIO("".join(lines)))
    missing = set(FRINGE_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ConfigurationError(f"fringe CSV missing columns {sorted(missing)}")
    rows = list(reader)
    return {c: np.array([float(r[c]) for r in rows]) for c in FRINGE_COLUMNS}
