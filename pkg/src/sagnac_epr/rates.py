"""Pair-rate bookkeeping from singles and coincidence slopes."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError

# Nonlinear coefficients (pm/V) used for the type-0 versus type-II comparison.
D_ZZZ = 18.5
D_YYZ = 3.9


@dataclass(frozen=True)
class RateData:
    """Singles and coincidence rates per unit pump power (Hz/mW)."""

    n1: float
    n2: float
    nc: float

    def __post_init__(self):
        for name in ("n1", "n2", "nc"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ConfigurationError(f"{name} must be finite and nonnegative")


@dataclass(frozen=True)
class EfficiencyChain:
    """Per-arm collection efficiency: filter x splitter x optics-and-detector."""

    eta_if: float = 0.1
    eta_bs: float = 0.5
    eta_d: float = 0.1

    def __post_init__(self):
        for name in ("eta_if", "eta_bs", "eta_d"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ConfigurationError(f"{name}={v} outside (0, 1]")

    @property
    def total(self) -> float:
        return self.eta_if * self.eta_bs * self.eta_d

    @classmethod
    def flat(cls, eta: float) -> "EfficiencyChain":
        """Chain whose total is ``eta``, lumped into the detector factor."""
        return cls(1.0, 1.0, eta)


def _eta(chain) -> float:
    eta = chain.total if isinstance(chain, EfficiencyChain) else float(chain)
    if not 0 < eta <= 1:
        raise ConfigurationError(f"efficiency {eta} outside (0, 1]")
    return eta


def n_pair(data: RateData) -> float:
    """Loss-independent pair rate N1 N2 / NC."""
    if data.nc <= 0:
        raise ConfigurationError("coincidence rate must be positive")
    return data.n1 * data.n2 / data.nc


def n_out(nc: float, chain1, chain2) -> float:
    """Pair rate at the source outputs, NC / (eta1 eta2)."""
    if nc < 0:
        raise ConfigurationError("coincidence rate must be nonnegative")
    return nc / (_eta(chain1) * _eta(chain2))


def type0_type2_ratio(d_type0: float = D_ZZZ, d_type2: float = D_YYZ) -> float:
    """Efficiency gain of type-0 over type-II conversion, (d0 / d2)^2."""
    if d_type2 == 0:
        raise ConfigurationError("type-II coefficient must be nonzero")
    if d_type0 <= 0 or d_type2 < 0:
        raise ConfigurationError("coefficients must be positive")
    return (d_type0 / d_type2) ** 2


@dataclass(frozen=True)
class ConsistencyReport:
    direct: float
    roundtrip: float
    ratio: float
    band: tuple[float, float]
    passed: bool


def consistency_check(n_pair_direct: float, n_pair_roundtrip: float,
                      band: tuple[float, float] = (1.0, 10.0)) -> ConsistencyReport:
    """Ratio of two pair-rate estimates and whether it falls inside ``band``."""
    if n_pair_direct <= 0 or n_pair_roundtrip <= 0:
        raise ConfigurationError("rates must be positive")
    lo, hi = band
    if not lo <= hi:
        raise ConfigurationError("band must be (low, high) with low <= high")
    ratio = n_pair_direct / n_pair_roundtrip
    return ConsistencyReport(n_pair_direct, n_pair_roundtrip, ratio, (lo, hi), lo <= ratio <= hi)


def fit_slope(x: Sequence[float], y: Sequence[float], zero_intercept: bool = True) -> tuple[float, float]:
    """Least-squares slope (and intercept, 0 when forced through the origin)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.shape != y.shape or x.size < (1 if zero_intercept else 2):
        raise ConfigurationError("need matching x/y with enough points for the fit")
    if zero_intercept:
        sxx = float(x @ x)
        if sxx == 0:
            raise ConfigurationError("all powers are zero")
        return float(x @ y) / sxx, 0.0
    if np.ptp(x) == 0:
        raise ConfigurationError("powers must not all be equal")
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


@dataclass(frozen=True)
class PowerScan:
    power_mw: np.ndarray
    singles1: np.ndarray
    singles2: np.ndarray
    coincidences: np.ndarray
    window: np.ndarray | None = field(default=None)
    duration: np.ndarray | None = field(default=None)

    def corrected_coincidences(self) -> np.ndarray:
        """Coincidence rates with accidentals ``s1 s2 window`` removed when the
        window is known; raw rates otherwise. Counts are taken as rates (Hz)
        unless a duration column is present."""
        s1, s2, c = self.rates()
        if self.window is None:
            return c
        return c - s1 * s2 * self.window

    def rates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        t = 1.0 if self.duration is None else self.duration
        return self.singles1 / t, self.singles2 / t, self.coincidences / t


POWER_COLUMNS = ("power_mW", "singles1", "singles2", "coincidences")


def read_power_scan(fh) -> PowerScan:
    """Parse a power-scan CSV; optional ``window`` (s) and ``duration`` (s) columns."""
    lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(io.StringIO("".join(lines)))
    names = set(reader.fieldnames or ())
    missing = set(POWER_COLUMNS) - names
    if missing:
        raise ConfigurationError(f"power-scan CSV missing columns {sorted(missing)}")
    rows = list(reader)
    if not rows:
        raise ConfigurationError("power-scan CSV has no rows")
    try:
        cols = {c: np.array([float(r[c]) for r in rows]) for c in names}
    except ValueError as exc:
        raise ConfigurationError(f"non-numeric entry in power scan: {exc}") from None
    return PowerScan(cols["power_mW"], cols["singles1"], cols["singles2"], cols["coincidences"],
                     cols.get("window"), cols.get("duration"))


def slopes_from_scan(scan: PowerScan, zero_intercept: bool = True) -> RateData:
    """Per-mW singles and (accidental-corrected) coincidence slopes."""
    s1, s2, _ = scan.rates()
    n1, _ = fit_slope(scan.power_mw, s1, zero_intercept)
    n2, _ = fit_slope(scan.power_mw, s2, zero_intercept)
    nc, _ = fit_slope(scan.power_mw, scan.corrected_coincidences(), zero_intercept)
    return RateData(n1, n2, nc)


def rate_report(data: RateData, chain1=EfficiencyChain(), chain2=EfficiencyChain(),
                roundtrip: float | None = None, band: tuple[float, float] = (1.0, 10.0),
                d_type0: float = D_ZZZ, d_type2: float = D_YYZ) -> dict[str, float | str]:
    """All derived rates as an ordered key/value mapping."""
    rep: dict[str, float | str] = {
        "n1_hz_per_mw": data.n1,
        "n2_hz_per_mw": data.n2,
        "nc_hz_per_mw": data.nc,
        "n_pair_hz_per_mw": n_pair(data),
        "eta1": _eta(chain1),
        "eta2": _eta(chain2),
        "n_out_hz_per_mw": n_out(data.nc, chain1, chain2),
        "type0_type2_ratio": type0_type2_ratio(d_type0, d_type2),
    }
    if roundtrip is not None:
        chk = consistency_check(rep["n_pair_hz_per_mw"], roundtrip, band)
        rep["roundtrip_hz_per_mw"] = roundtrip
        rep["direct_over_roundtrip"] = chk.ratio
        rep["consistency"] = "pass" if chk.passed else "fail"
    return rep
