"""Simulation toolkit for a double-pass type-0 Sagnac source of polarization-entangled pairs."""

from .bell import ChshSetting, chsh_from_counts, chsh_s, max_chsh, optimal_chsh_setting
from .calibration import CalibrationTarget, calibrate, simulate_observables
from .density import TwoQubitDensity, bell_state, fidelity, purity, trace_distance
from .errors import (ConfigurationError, ConvergenceError, DegenerateSectorError, FitError,
                     NumericalError, TruncationError)
from .fock import FockState, ModeLabel, Pol, basis_state, vacuum
from .optics import ModeTransform, bs, hwp, pbs, qwp
from .rates import EfficiencyChain, RateData, n_out, n_pair, type0_type2_ratio
from .sagnac import ExperimentConfig, NoiseParams, output_density, output_state, psi_out
from .spdc import PumpField, SpdcKind, SpdcSpec
from .tomography import reconstruct_linear, reconstruct_mle, tomo_counts

__version__ = "0.1.0"
