"""Two-qubit polarization density matrices and the scalar metrics used on them.

Basis ordering is ``HH, HV, VH, VV`` where the first letter is the photon in
output path 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

BASIS_LABELS = ("HH", "HV", "VH", "VV")

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10


def _bell_vectors():
    s = 1 / np.sqrt(2)
    return {
        "psi+": np.array([0, s, s, 0], dtype=complex),
        "psi-": np.array([0, s, -s, 0], dtype=complex),
        "phi+": np.array([s, 0, 0, s], dtype=complex),
        "phi-": np.array([s, 0, 0, -s], dtype=complex),
    }


BELL_STATES = _bell_vectors()


def bell_state(name: str) -> np.ndarray:
    """Return a copy of the Bell vector ``psi+``, ``psi-``, ``phi+`` or ``phi-``."""
    try:
        return BELL_STATES[name.lower()].copy()
    except KeyError:
        raise ConfigurationError(f"unknown Bell state {name!r}") from None


@dataclass(frozen=True, eq=False)
class TwoQubitDensity:
    """4x4 density matrix on the ``HH, HV, VH, VV`` basis.

    Hermiticity and unit trace are enforced on construction. Positivity is
    only checked when ``require_psd`` is set, since linear-inversion
    tomography legitimately produces slightly negative eigenvalues.
    """

    matrix: np.ndarray
    require_psd: bool = False

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ConfigurationError(f"density must be 4x4, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise ConfigurationError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > TRACE_TOL:
            raise ConfigurationError(f"density trace is {np.trace(m).real:.3g}, expected 1")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.require_psd and self.min_eigenvalue < PSD_TOL:
            raise ConfigurationError(f"density has eigenvalue {self.min_eigenvalue:.3g} < 0")

    @classmethod
    def from_pure(cls, vector) -> "TwoQubitDensity":
        v = np.asarray(vector, dtype=complex)
        n = np.linalg.norm(v)
        if n == 0:
            raise ConfigurationError("cannot build a density from the zero vector")
        v = v / n
        return cls(np.outer(v, v.conj()))

    @classmethod
    def from_unnormalized(cls, matrix) -> "TwoQubitDensity":
        """Hermitize and rescale to unit trace."""
        m = np.asarray(matrix, dtype=complex)
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if tr <= 0:
            raise ConfigurationError("matrix has non-positive trace")
        return cls(m / tr)

    @classmethod
    def maximally_mixed(cls) -> "TwoQubitDensity":
        return cls(np.eye(4) / 4)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def is_physical(self) -> bool:
        return self.min_eigenvalue >= PSD_TOL

    def element(self, row: str, col: str) -> complex:
        return complex(self.matrix[BASIS_LABELS.index(row), BASIS_LABELS.index(col)])

    def __repr__(self):
        return f"TwoQubitDensity(\n{np.array2string(self.matrix, precision=4)})"


def _as_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, TwoQubitDensity) else np.asarray(rho, dtype=complex)


def fidelity(rho, target) -> float:
    """Overlap <target|rho|target> with a normalized pure target, clamped to [0, 1]."""
    t = np.asarray(target, dtype=complex)
    nt = np.linalg.norm(t)
    if abs(nt - 1) > 1e-9:
        raise ConfigurationError("fidelity target must be normalized")
    f = float(np.real(np.vdot(t, _as_matrix(rho) @ t)))
    if -1e-12 <= f < 0:
        f = 0.0
    elif 1 < f <= 1 + 1e-12:
        f = 1.0
    return f


def purity(rho) -> float:
    m = _as_matrix(rho)
    return float(np.real(np.trace(m @ m)))


def trace_distance(rho, sigma) -> float:
    d = _as_matrix(rho) - _as_matrix(sigma)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(d))))


def phase_damped_bell(coherence: float, name: str = "psi+") -> TwoQubitDensity:
    """Bell state whose off-diagonal coherence is scaled by ``coherence``."""
    v = bell_state(name)
    m = np.outer(v, v.conj())
    diag = np.diag(np.diag(m))
    return TwoQubitDensity(diag + coherence * (m - diag))


def random_density(rng: np.random.Generator, rank: int = 4) -> TwoQubitDensity:
    """Random physical density (Ginibre ensemble of the given rank)."""
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    return TwoQubitDensity.from_unnormalized(g @ g.conj().T)


def random_product_density(rng: np.random.Generator) -> TwoQubitDensity:
    """Random mixed product state rho_A (x) rho_B."""
    parts = []
    for _ in range(2):
        g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        r = g @ g.conj().T
        parts.append(r / np.trace(r))
    return TwoQubitDensity.from_unnormalized(np.kron(parts[0], parts[1]))
