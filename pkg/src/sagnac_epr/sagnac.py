"""Double-pass polarization Sagnac source.

Each loop direction is simulated as an explicit sequence on a fixed
eight-mode list (``cw``, ``ccw``, ``out1``, ``out2`` x H/V):

1. pump through HWP2;
2. first crystal pass (type-0, V pump component -> VV pairs);
3. pairs and pump through HWP1; the pump picks up the dispersion phase phi
   relative to the pairs;
4. second crystal pass;
5. pairs back through HWP2 and out of the PBS (H transmitted, V reflected).

The counterclockwise beam is simulated in its own propagation frame, in
which the PBS-reflected V pump plays the role of H; its pairs are mapped
back with an H<->V swap before the PBS. Its pump amplitude also carries the
``theta`` dial. Emission is first order in the gain, and arm states are
expressed per unit gain so that a fully H-polarized pump gives a
normalized clockwise state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .density import TwoQubitDensity
from .errors import ConfigurationError, DegenerateSectorError
from .fock import FockState, coincidence_vector, path_modes, vacuum
from .optics import ModeTransform, hwp, hwp_jones, pbs
from .spdc import PumpField, SpdcSpec, spdc_pass

CW, CCW, OUT1, OUT2 = "cw", "ccw", "out1", "out2"
MODES = path_modes(CW, CCW, OUT1, OUT2)
OUTPUTS = (OUT1, OUT2)

_SWAP = np.array([[0, 1], [1, 0]], dtype=complex)
_PBS = pbs(CW, CCW, OUT1, OUT2)
_CCW_FRAME = ModeTransform(path_modes(CCW), _SWAP, "ccw frame")


@dataclass(frozen=True)
class NoiseParams:
    """Density-level imperfections; the defaults give the ideal state.

    ``dephase`` and ``mode_overlap`` both multiply the coherence between the
    two arms; ``mode_overlap`` additionally sets the distinguishability of
    first- and second-pass pairs in the single-arm tilt scan.
    ``arm_imbalance`` scales the counterclockwise amplitude by
    ``1 + arm_imbalance``.
    """

    dephase: float = 1.0
    mode_overlap: float = 1.0
    arm_imbalance: float = 0.0

    def __post_init__(self):
        for name in ("dephase", "mode_overlap"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ConfigurationError(f"{name}={v} outside [0, 1]")
        if not self.arm_imbalance > -1:
            raise ConfigurationError("arm_imbalance must exceed -1")

    @property
    def coherence(self) -> float:
        return self.dephase * self.mode_overlap


@dataclass(frozen=True)
class ExperimentConfig:
    phi: float = math.pi
    theta: float = 0.0
    pump: PumpField = field(default_factory=PumpField)
    hwp1_angle: float = math.pi / 4
    hwp2_angle: float = math.pi / 8
    noise: NoiseParams = field(default_factory=NoiseParams)
    spdc: SpdcSpec = field(default_factory=SpdcSpec)

    def __post_init__(self):
        for name in ("phi", "theta", "hwp1_angle", "hwp2_angle"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigurationError(f"{name} must be finite")

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


def _run_arm(config: ExperimentConfig, direction: str, passes=(True, True)) -> FockState:
    """Pair sector at the PBS outputs for one loop direction, per unit gain."""
    if direction not in (CW, CCW):
        raise ConfigurationError(f"unknown direction {direction!r}")
    spec = config.spdc
    pump = config.pump.normalized()
    if direction == CW:
        local = np.array([pump.h, 0], dtype=complex)
    else:
        local = np.array([pump.v * np.exp(1j * config.theta), 0], dtype=complex)
    state = vacuum(MODES, overflow="drop")
    if spec.pair_amplitude == 0 or not np.any(local):
        return state * 0

    p = hwp_jones(config.hwp2_angle) @ local
    if passes[0]:
        state = spdc_pass(state, PumpField.from_jones(p), spec, direction)
    state = hwp(config.hwp1_angle, direction).apply(state)
    p = np.exp(1j * config.phi) * (hwp_jones(config.hwp1_angle) @ p)
    if passes[1]:
        state = spdc_pass(state, PumpField.from_jones(p), spec, direction,
                          gain=spec.second_pass_gain)
    state = hwp(config.hwp2_angle, direction).apply(state)
    if direction == CCW:
        state = _CCW_FRAME.apply(state)
    state = _PBS.apply(state)
    return state.sector(2) * (1 / (spec.pair_amplitude * math.sqrt(2)))


def arm_pairs(config: ExperimentConfig, direction: str) -> FockState:
    """Unnormalized pair contribution of one arm (carries pump amplitude and phase)."""
    return _run_arm(config, direction)


def _arm_or_vacuum(config: ExperimentConfig, direction: str) -> FockState:
    pairs = arm_pairs(config, direction)
    if pairs.norm() < 1e-14:
        return vacuum(MODES)
    return pairs.normalize()


def clockwise_state(config: ExperimentConfig = ExperimentConfig()) -> FockState:
    """Normalized two-photon output of the clockwise arm (vacuum if undriven)."""
    return _arm_or_vacuum(config, CW)


def counterclockwise_state(config: ExperimentConfig = ExperimentConfig()) -> FockState:
    """Normalized two-photon output of the counterclockwise arm (vacuum if undriven)."""
    return _arm_or_vacuum(config, CCW)


def output_state(config: ExperimentConfig = ExperimentConfig()) -> FockState:
    """Normalized coherent sum of both arms; noise parameters are not applied."""
    total = arm_pairs(config, CW) + arm_pairs(config, CCW)
    if total.norm() < 1e-14:
        raise DegenerateSectorError("neither arm emits pairs (zero pump or zero gain)")
    return total.normalize()


def psi_out(theta: float) -> FockState:
    """Reference (|1_H>_1 |1_V>_2 + e^{i theta} |1_V>_1 |1_H>_2) / sqrt(2) built directly."""
    h1, v1 = path_modes(OUT1)
    h2, v2 = path_modes(OUT2)
    idx = {m: i for i, m in enumerate(MODES)}
    a = [0] * len(MODES)
    a[idx[h1]] = a[idx[v2]] = 1
    b = [0] * len(MODES)
    b[idx[v1]] = b[idx[h2]] = 1
    s = 1 / math.sqrt(2)
    return FockState(MODES, {tuple(a): s, tuple(b): s * np.exp(1j * theta)})


def output_density(config: ExperimentConfig = ExperimentConfig()) -> TwoQubitDensity:
    """Coincidence-sector polarization density with the noise model applied.

    Arm weights follow the pump split and ``arm_imbalance``; the cross-arm
    coherences are multiplied by ``dephase * mode_overlap``.
    """
    noise = config.noise
    v_cw = coincidence_vector(arm_pairs(config, CW), OUTPUTS)
    v_ccw = (1 + noise.arm_imbalance) * coincidence_vector(arm_pairs(config, CCW), OUTPUTS)
    rho = np.outer(v_cw, v_cw.conj()) + np.outer(v_ccw, v_ccw.conj())
    cross = np.outer(v_cw, v_ccw.conj())
    rho = rho + noise.coherence * (cross + cross.conj().T)
    tr = np.trace(rho).real
    if tr < 1e-14:
        raise DegenerateSectorError("no coincidences between the output paths")
    return TwoQubitDensity(rho / tr)


def clockwise_coincidence_probability(config: ExperimentConfig = ExperimentConfig()) -> float:
    """Probability that a clockwise pair leaves through different PBS outputs.

    First- and second-pass pairs interfere with visibility ``mode_overlap``;
    the distinguishable remainder is computed by running each pass alone.
    """
    coherent = arm_pairs(config, CW)
    if coherent.norm() < 1e-14:
        raise DegenerateSectorError("clockwise arm is not driven")
    p_coh = _split_fraction(coherent)
    mu = config.noise.mode_overlap
    if mu == 1:
        return p_coh
    first = _run_arm(config, CW, passes=(True, False))
    second = _run_arm(config, CW, passes=(False, True))
    w1, w2 = first.norm() ** 2, second.norm() ** 2
    split1 = _split_fraction(first) * w1 if w1 else 0.0
    split2 = _split_fraction(second) * w2 if w2 else 0.0
    p_incoh = (split1 + split2) / (w1 + w2)
    return mu * p_coh + (1 - mu) * p_incoh


def _split_fraction(state: FockState) -> float:
    v = coincidence_vector(state, OUTPUTS)
    return float(np.sum(np.abs(v) ** 2) / state.norm() ** 2)
