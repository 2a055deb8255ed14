"""Perturbative pair emission from a classical, undepleted pump."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError
from .fock import CreationOpPoly, FockState, Pol, apply_poly, path_modes, vacuum


class SpdcKind(str, Enum):
    TYPE0 = "type-0"
    TYPE2 = "type-II"


@dataclass(frozen=True)
class PumpField:
    """Classical pump Jones vector.

    Amplitudes are kept as given so that emission stays linear in them;
    :meth:`normalized` gives the unit-power version used for bookkeeping.
    """

    h: complex = 1 / math.sqrt(2)
    v: complex = 1 / math.sqrt(2)

    def __post_init__(self):
        object.__setattr__(self, "h", complex(self.h))
        object.__setattr__(self, "v", complex(self.v))
        if not (np.isfinite(self.h) and np.isfinite(self.v)):
            raise ConfigurationError("pump amplitudes must be finite")

    @classmethod
    def linear(cls, angle: float) -> "PumpField":
        return cls(math.cos(angle), math.sin(angle))

    @classmethod
    def from_jones(cls, vec) -> "PumpField":
        return cls(complex(vec[0]), complex(vec[1]))

    @property
    def jones(self) -> np.ndarray:
        return np.array([self.h, self.v], dtype=complex)

    @property
    def power(self) -> float:
        return abs(self.h) ** 2 + abs(self.v) ** 2

    def normalized(self) -> "PumpField":
        p = self.power
        if p == 0:
            return self
        return PumpField(self.h / math.sqrt(p), self.v / math.sqrt(p))

    def component(self, pol: Pol) -> complex:
        return self.h if Pol(pol) is Pol.H else self.v


@dataclass(frozen=True)
class SpdcSpec:
    """Crystal emission model.

    ``pair_amplitude`` is the dimensionless gain per pass. Type-0 pairs carry
    the polarization of the driving pump component (V pump -> VV pairs);
    type-II pairs are H+V. ``gain_imbalance`` scales the second pass of a
    double-pass configuration by ``1 + gain_imbalance``.
    """

    kind: SpdcKind = SpdcKind.TYPE0
    pair_amplitude: float = 1e-3
    pump_pol_selector: Pol = Pol.V
    gain_imbalance: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SpdcKind(self.kind))
        object.__setattr__(self, "pump_pol_selector", Pol(self.pump_pol_selector))
        if not 0 <= self.pair_amplitude < 1:
            raise ConfigurationError("pair_amplitude must be in [0, 1) (perturbative)")
        if self.gain_imbalance <= -1:
            raise ConfigurationError("gain_imbalance must exceed -1")

    def pair_poly(self, path: str) -> CreationOpPoly:
        h, v = path_modes(path)
        if self.kind is SpdcKind.TYPE0:
            m = h if self.pump_pol_selector is Pol.H else v
            return CreationOpPoly.creation(m, 2)
        return CreationOpPoly.creation(h) * CreationOpPoly.creation(v)

    @property
    def second_pass_gain(self) -> float:
        return self.pair_amplitude * (1 + self.gain_imbalance)


def spdc_pass(state: FockState, pump: PumpField, spec: SpdcSpec, path: str,
              gain: float | None = None) -> FockState:
    """One pass through the crystal to first order in the gain.

    Returns ``state + drive * gain * P state`` where ``P`` is the pair
    creation operator and ``drive`` the pump component selected by the
    crystal. Components above the truncation follow the state's overflow
    policy.
    """
    g = spec.pair_amplitude if gain is None else gain
    drive = pump.component(spec.pump_pol_selector)
    if g == 0 or drive == 0:
        return state
    return state + apply_poly((g * drive) * spec.pair_poly(path), state)


def double_pair_term(spec: SpdcSpec, path: str = "loop", order: int = 2,
                     drive: complex = 1.0, truncation: int = 4) -> FockState:
    """Order-``n`` emission term ``(g drive)^n / n! * P^n |0>`` (unnormalized).

    ``order=2`` is the double-pair contribution of the squeezing series.
    """
    if order < 1:
        raise ConfigurationError("order must be >= 1")
    modes = path_modes(path)
    coef = (spec.pair_amplitude * drive) ** order / math.factorial(order)
    return apply_poly(coef * spec.pair_poly(path) ** order, vacuum(modes, truncation))

