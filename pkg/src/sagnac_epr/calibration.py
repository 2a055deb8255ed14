"""Fit the density-level noise parameters to measured visibilities, fidelity and S."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.optimize import minimize

from .bell import TSIRELSON, max_chsh
from .density import bell_state, fidelity
from .detection import fringe_visibility
from .errors import ConfigurationError, ConvergenceError
from .sagnac import ExperimentConfig, NoiseParams, output_density

OBSERVABLES = ("vis_hv", "vis_diag", "vis_circ", "fidelity", "s_param")


@dataclass(frozen=True)
class Observables:
    vis_hv: float
    vis_diag: float
    vis_circ: float
    fidelity: float
    s_param: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in OBSERVABLES])


def _default_weights() -> dict[str, float]:
    # S is reported but not fitted by default; see CalibrationTarget.
    return {"vis_hv": 1.0, "vis_diag": 1.0, "vis_circ": 1.0, "fidelity": 1.0, "s_param": 0.0}


@dataclass(frozen=True)
class CalibrationTarget:
    """Measured values to approach, with nonnegative per-observable weights.

    The S weight defaults to zero: in this noise model S is a function of the
    same coherence that fixes the visibilities, so it is left as a check.
    """

    vis_hv: float = 0.98
    vis_diag: float = 0.83
    vis_circ: float = 0.80
    fidelity: float = 0.873
    s_param: float = 2.59
    weights: dict = field(default_factory=_default_weights)

    def __post_init__(self):
        for k in ("vis_hv", "vis_diag", "vis_circ", "fidelity"):
            if not 0 <= getattr(self, k) <= 1:
                raise ConfigurationError(f"{k} must be in [0, 1]")
        if not 0 <= self.s_param <= TSIRELSON:
            raise ConfigurationError("s_param must be in [0, 2 sqrt 2]")
        w = {**{k: 0.0 for k in OBSERVABLES}, **dict(self.weights)}
        unknown = set(w) - set(OBSERVABLES)
        if unknown:
            raise ConfigurationError(f"unknown weight keys {sorted(unknown)}")
        if any(v < 0 or not math.isfinite(v) for v in w.values()):
            raise ConfigurationError("weights must be finite and nonnegative")
        if not any(w.values()):
            raise ConfigurationError("at least one weight must be positive")
        object.__setattr__(self, "weights", w)

    @classmethod
    def ideal(cls) -> "CalibrationTarget":
        return cls(1.0, 1.0, 1.0, 1.0, TSIRELSON)

    def values(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in OBSERVABLES])

    def weight_array(self) -> np.ndarray:
        return np.array([self.weights[k] for k in OBSERVABLES])


def simulate_observables(noise: NoiseParams, config: ExperimentConfig | None = None) -> Observables:
    """Noiseless visibilities (H/V, diagonal, circular), Psi+ fidelity and
    optimal-angle S of the source density under ``noise``."""
    base = ExperimentConfig() if config is None else config
    rho = output_density(base.with_(noise=noise))
    return Observables(
        vis_hv=fringe_visibility(rho, 0.0, "linear"),
        vis_diag=fringe_visibility(rho, math.pi / 4, "linear"),
        vis_circ=fringe_visibility(rho, math.pi / 4, "circular"),
        fidelity=fidelity(rho, bell_state("psi+")),
        s_param=max_chsh(rho),
    )


@dataclass(frozen=True)
class SearchConfig:
    """Grid and refine settings. ``mode_overlap`` is held fixed because only
    the product ``dephase * mode_overlap`` enters the density."""

    mode_overlap: float = 1.0
    dephase_points: int = 41
    imbalance_points: int = 21
    imbalance_range: tuple[float, float] = (-0.5, 1.0)
    # an imbalanced solution must beat the balanced one by this much
    improvement_tol: float = 1e-10


@dataclass(frozen=True)
class CalibrationResult:
    noise: NoiseParams
    observables: Observables
    target: CalibrationTarget
    objective: float

    @property
    def residuals(self) -> dict[str, float]:
        return {k: getattr(self.observables, k) - getattr(self.target, k) for k in OBSERVABLES}

    def report(self) -> dict[str, float]:
        rep = {"dephase": self.noise.dephase, "mode_overlap": self.noise.mode_overlap,
               "arm_imbalance": self.noise.arm_imbalance, "coherence": self.noise.coherence}
        for k in OBSERVABLES:
            rep[f"{k}_model"] = getattr(self.observables, k)
            rep[f"{k}_target"] = getattr(self.target, k)
            rep[f"{k}_residual"] = self.residuals[k]
        rep["objective"] = self.objective
        return rep



def calibrate(target: CalibrationTarget = CalibrationTarget(),
              search: SearchConfig = SearchConfig(),
              config: ExperimentConfig | None = None) -> CalibrationResult:
    """Weighted least squares over dephase and arm imbalance.

    A deterministic grid seeds bounded refines, first with balanced arms and
    then with the imbalance free. The imbalanced result is kept only if it
    lowers the objective by more than ``improvement_tol``, so degenerate
    targets resolve to balanced arms.
    """
    if not 0 < search.mode_overlap <= 1:
        raise ConfigurationError("mode_overlap must be in (0, 1]")
    lo, hi = search.imbalance_range
    if not -1 < lo <= 0 <= hi:
        raise ConfigurationError("imbalance_range must bracket 0 and exceed -1")
    tv, w = target.values(), target.weight_array()

    def noise_of(x) -> NoiseParams:
        return NoiseParams(dephase=float(np.clip(x[0], 0, 1)), mode_overlap=search.mode_overlap,
                           arm_imbalance=float(np.clip(x[1], lo, hi)))

    def objective(x) -> float:
        obs = simulate_observables(noise_of(x), config).as_array()
        return float(np.sum(w * (obs - tv) ** 2))

    opts = {"xtol": 1e-12, "ftol": 1e-15, "maxiter": 4000}
    dgrid = np.linspace(0, 1, search.dephase_points)
    agrid = np.unique(np.append(np.linspace(lo, hi, search.imbalance_points), 0.0))

    # balanced arms
    s0 = [objective((d, 0.0)) for d in dgrid]
    r0 = minimize(lambda x: objective((x[0], 0.0)), [dgrid[int(np.argmin(s0))]],
                  method="Powell", bounds=[(0, 1)], options=opts)
    best_x, best_f = np.array([r0.x[0], 0.0]), float(r0.fun)
    if min(s0) < best_f:
        best_x, best_f = np.array([dgrid[int(np.argmin(s0))], 0.0]), min(s0)

    # imbalance free
    grid = [(d, a) for d in dgrid for a in agrid]
    s1 = [objective(x) for x in grid]
    x1 = np.array(grid[int(np.argmin(s1))])
    r1 = minimize(objective, x1, method="Powell", bounds=[(0, 1), (lo, hi)], options=opts)
    cand_x, cand_f = (r1.x, float(r1.fun)) if r1.fun <= min(s1) else (x1, min(s1))
    if not (r0.success or r1.success):
        raise ConvergenceError(f"calibration refine failed: {r1.message}",
                               last_iterate=best_x, grad_norm=float("nan"))
    if cand_f < best_f - search.improvement_tol:
        best_x, best_f = cand_x, cand_f

    noise = noise_of(best_x)
    return CalibrationResult(noise, simulate_observables(noise, config), target, best_f)


def target_from_mapping(values: dict[str, float]) -> CalibrationTarget:
    """Build a target from flat keys (observable names and ``w_<name>`` weights)."""
    kwargs, weights = {}, _default_weights()
    names = {f.name for f in fields(CalibrationTarget)} - {"weights"}
    for k, v in values.items():
        if k in names:
            kwargs[k] = float(v)
        elif k.startswith("w_") and k[2:] in OBSERVABLES:
            weights[k[2:]] = float(v)
        else:
            raise ConfigurationError(f"unknown calibration key {k!r}")
    return CalibrationTarget(**kwargs, weights=weights)
