"""Passive polarization optics acting on mode creation operators.

Conventions:

* A transform with matrix ``U`` over modes ``m_0..m_k`` maps
  ``a_j^dagger -> sum_k U[k, j] a_k^dagger``, so on single-photon amplitudes
  ``U`` is the ordinary Jones matrix.
* Half-wave plate at fast-axis angle ``t``: ``[[cos 2t, sin 2t], [sin 2t, -cos 2t]]``
  (determinant -1, no global phase).
* Quarter-wave plate: ``R(-t) diag(1, i) R(t)``.
* Beam splitter: ``[[t, i r], [i r, t]]`` with ``r**2`` the reflectivity,
  applied identically to H and V.
* PBS: H transmitted, V reflected.

Every element is exact up to global phase; tests compare states with
phase-insensitive overlaps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .fock import (CreationOpPoly, FockState, ModeLabel, Pol, apply_linear_optics,
                   apply_poly, path_modes, vacuum)

UNITARY_TOL = 1e-12


def hwp_jones(angle: float) -> np.ndarray:
    c, s = np.cos(2 * angle), np.sin(2 * angle)
    return np.array([[c, s], [s, -c]], dtype=complex)


def rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, s], [-s, c]])


def qwp_jones(angle: float) -> np.ndarray:
    return rotation(-angle) @ np.diag([1, 1j]) @ rotation(angle)


def polarizer_vector(angle: float) -> np.ndarray:
    return np.array([np.cos(angle), np.sin(angle)], dtype=complex)


@dataclass(frozen=True, eq=False)
class ModeTransform:
    """Unitary on a list of modes; modes not listed are untouched."""

    modes: tuple[ModeLabel, ...]
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (len(self.modes), len(self.modes)):
            raise ConfigurationError("matrix shape does not match mode list")
        if len(set(self.modes)) != len(self.modes):
            raise ConfigurationError("duplicate mode labels")
        m.setflags(write=False)
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "matrix", m)
        if self.unitarity_error() > UNITARY_TOL:
            raise ConfigurationError(f"transform {self.label!r} is not unitary")

    def unitarity_error(self) -> float:
        n = len(self.modes)
        return float(np.max(np.abs(self.matrix @ self.matrix.conj().T - np.eye(n))))

    def apply(self, state: FockState) -> FockState:
        return apply_linear_optics(self.matrix, self.modes, state)

    __call__ = apply

    def inverse(self) -> "ModeTransform":
        return ModeTransform(self.modes, self.matrix.conj().T, f"inv({self.label})")

    def __matmul__(self, other: "ModeTransform") -> "ModeTransform":
        """Composition: ``(a @ b)`` applies ``b`` first."""
        modes = list(self.modes)
        modes += [m for m in other.modes if m not in modes]
        a, b = self.embed(modes), other.embed(modes)
        return ModeTransform(tuple(modes), a @ b, f"{self.label}*{other.label}")

    def embed(self, modes) -> np.ndarray:
        """Matrix of this transform over a larger mode list."""
        modes = list(modes)
        full = np.eye(len(modes), dtype=complex)
        idx = [modes.index(m) for m in self.modes]
        full[np.ix_(idx, idx)] = self.matrix
        return full


def _pol_transform(jones: np.ndarray, path: str, label: str) -> ModeTransform:
    return ModeTransform(path_modes(path), jones, label)


def hwp(angle: float, path: str) -> ModeTransform:
    """Half-wave plate with fast axis at ``angle`` (radians from H)."""
    return _pol_transform(hwp_jones(angle), path, f"HWP({np.degrees(angle):.4g}deg)@{path}")


def qwp(angle: float, path: str) -> ModeTransform:
    """Quarter-wave plate with fast axis at ``angle``; H along the fast axis is unshifted."""
    return _pol_transform(qwp_jones(angle), path, f"QWP({np.degrees(angle):.4g}deg)@{path}")


def phase_shift(phase: float, path: str, pol: Pol | None = None) -> ModeTransform:
    """Phase ``e^{i phase}`` per photon on one polarization of ``path`` (both if None)."""
    d = np.ones(2, dtype=complex)
    if pol is None:
        d *= np.exp(1j * phase)
    else:
        d[0 if Pol(pol) is Pol.H else 1] = np.exp(1j * phase)
    return _pol_transform(np.diag(d), path, f"phase({phase:.4g})@{path}")


def pbs(in_a: str, in_b: str, out_a: str | None = None, out_b: str | None = None) -> ModeTransform:
    """Polarizing beam splitter.

    H entering port ``in_a`` is transmitted to ``out_a`` and V is reflected
    to ``out_b``; for ``in_b`` H goes to ``out_b`` and V to ``out_a``. When
    the output paths differ from the inputs the transform also maps the
    (empty) output modes back onto the inputs, which keeps it a permutation
    and therefore unitary.
    """
    out_a = in_a if out_a is None else out_a
    out_b = in_b if out_b is None else out_b
    route = {
        ModeLabel(in_a, Pol.H): ModeLabel(out_a, Pol.H),
        ModeLabel(in_a, Pol.V): ModeLabel(out_b, Pol.V),
        ModeLabel(in_b, Pol.H): ModeLabel(out_b, Pol.H),
        ModeLabel(in_b, Pol.V): ModeLabel(out_a, Pol.V),
    }
    if len(set(route.values())) != 4 or len({in_a, in_b}) != 2:
        raise ConfigurationError("PBS needs two distinct input and two distinct output paths")
    if set(route.values()) != set(route):
        if set(route.values()) & set(route):
            raise ConfigurationError("PBS output paths must equal or be disjoint from inputs")
        route.update({v: k for k, v in list(route.items())})
    modes = tuple(route)
    u = np.zeros((len(modes), len(modes)), dtype=complex)
    for j, m in enumerate(modes):
        u[modes.index(route[m]), j] = 1
    return ModeTransform(modes, u, f"PBS({in_a},{in_b})")


def bs(reflectivity: float, path_a: str, path_b: str) -> ModeTransform:
    """Nonpolarizing beam splitter, ``i`` phase on reflection."""
    if not 0 <= reflectivity <= 1:
        raise ConfigurationError(f"reflectivity {reflectivity} outside [0, 1]")
    t, r = np.sqrt(1 - reflectivity), np.sqrt(reflectivity)
    modes = path_modes(path_a, path_b)  # aH, aV, bH, bV
    u = np.zeros((4, 4), dtype=complex)
    for p in (0, 1):
        a, b = p, 2 + p
        u[a, a] = u[b, b] = t
        u[a, b] = u[b, a] = 1j * r
    return ModeTransform(modes, u, f"BS(R={reflectivity:.4g})")


@dataclass(frozen=True)
class PolarizerSetting:
    angle: float = 0.0
    present: bool = True

    def projector(self) -> np.ndarray:
        if not self.present:
            return np.eye(2, dtype=complex)
        v = polarizer_vector(self.angle)
        return np.outer(v, v.conj())


def polarizer_project(state: FockState, setting: PolarizerSetting, path: str) -> FockState:
    """Keep only the components where every photon in ``path`` passes the polarizer.

    The squared norm of the result is the transmission probability.
    """
    if not setting.present:
        return state
    modes = path_modes(path)
    for m in modes:
        state.index(m)
    # rotate into (pass, block) modes, drop anything in the block mode, rotate back
    to_axis = ModeTransform(modes, rotation(setting.angle))
    rotated = to_axis.apply(state)
    block = rotated.index(modes[1])
    kept = rotated._with({o: a for o, a in rotated.amplitudes.items() if o[block] == 0})
    return to_axis.inverse().apply(kept)


HOM_PATH = "loop"


def reverse_hom_state(phi: float, path: str = HOM_PATH) -> FockState:
    """Pair state 1/2 [(a_H^dag)^2 + e^{i phi} (a_V^dag)^2] |0>, before HWP2."""
    h, v = path_modes(path)
    poly = 0.5 * (CreationOpPoly.creation(h, 2) + np.exp(1j * phi) * CreationOpPoly.creation(v, 2))
    return apply_poly(poly, vacuum((h, v)))


def reverse_hom_check(phi: float, hwp_angle: float = np.pi / 8) -> dict[str, complex]:
    """Amplitudes of ``|2_H>``, ``|2_V>`` and ``|1_H,1_V>`` after the 22.5 deg plate."""
    out = hwp(hwp_angle, HOM_PATH).apply(reverse_hom_state(phi))
    return {
        "2H": out.amplitude((2, 0)),
        "2V": out.amplitude((0, 2)),
        "1H1V": out.amplitude((1, 1)),
    }
