"""Value types for a two-level system: parameters, states, 2x2 matrices.

Conventions
-----------
The basis is ``[1, 0]`` (state 1) and ``[0, 1]`` (state 2). The Hamiltonian is

    H(t) = -(delta_e / 2) sigma_z + V(t) sigma_x

so state 1 sits at energy ``-delta_e/2`` and state 2 at ``+delta_e/2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import NonUnitaryError, NormalizationError

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z)

NORM_TOL = 1e-12
UNITARITY_TOL = 1e-10


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SystemParams:
    """Energy splitting and the working value of hbar (natural units by default)."""

    delta_e: float
    hbar: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.delta_e) or self.delta_e < 0:
            raise ValueError(f"delta_e must be finite and >= 0, got {self.delta_e}")
        if not np.isfinite(self.hbar) or self.hbar <= 0:
            raise ValueError(f"hbar must be finite and > 0, got {self.hbar}")

    def hamiltonian(self, v: float) -> np.ndarray:
        return -0.5 * self.delta_e * SIGMA_Z + v * SIGMA_X


@dataclass(frozen=True)
class Complex2State:
    """Normalized pair of probability amplitudes ``(a1, a2)``.

    Out-of-tolerance norms raise instead of being silently renormalized.
    """

    a1: complex
    a2: complex

    def __post_init__(self):
        object.__setattr__(self, "a1", complex(self.a1))
        object.__setattr__(self, "a2", complex(self.a2))
        norm = abs(self.a1) ** 2 + abs(self.a2) ** 2
        if not abs(norm - 1.0) <= NORM_TOL:
            raise NormalizationError(f"|a1|^2 + |a2|^2 = {norm!r}, expected 1")

    @classmethod
    def from_vector(cls, v) -> "Complex2State":
        v = np.asarray(v, dtype=complex).reshape(2)
        return cls(v[0], v[1])

    @classmethod
    def basis(cls, index: int) -> "Complex2State":
        """State 1 -> ``(1, 0)``, state 2 -> ``(0, 1)``."""
        if index == 1:
            return cls(1, 0)
        if index == 2:
            return cls(0, 1)
        raise ValueError(f"basis index must be 1 or 2, got {index}")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.a1, self.a2], dtype=complex)


@dataclass(frozen=True, eq=False)
class Unitary2:
    """A 2x2 complex matrix, normally an evolution operator.

    Construction does not check unitarity; closed forms that are only unitary
    to some order (the perturbative propagator) are valid instances. Use
    :meth:`propagator` to build one with the check enforced.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def propagator(cls, matrix, tol: float = UNITARITY_TOL) -> "Unitary2":
        u = cls(matrix)
        u.check_unitary(tol)
        return u

    @classmethod
    def identity(cls) -> "Unitary2":
        return cls(IDENTITY)

    @property
    def u11(self) -> complex:
        return complex(self.matrix[0, 0])

    @property
    def u12(self) -> complex:
        return complex(self.matrix[0, 1])

    @property
    def u21(self) -> complex:
        return complex(self.matrix[1, 0])

    @property
    def u22(self) -> complex:
        return complex(self.matrix[1, 1])

    def unitarity_defect(self) -> float:
        """Frobenius norm of ``U^dagger U - I``."""
        m = self.matrix
        return float(np.linalg.norm(m.conj().T @ m - IDENTITY))

    def is_unitary(self, tol: float = UNITARITY_TOL) -> bool:
        det = np.linalg.det(self.matrix)
        return self.unitarity_defect() < tol and abs(abs(det) - 1.0) < tol

    def check_unitary(self, tol: float = UNITARITY_TOL) -> None:
        if not self.is_unitary(tol):
            raise NonUnitaryError(
                f"matrix is not unitary: defect {self.unitarity_defect():.3e} (tol {tol:.1e})"
            )

    def distance(self, other: "Unitary2") -> float:
        """Frobenius distance to another matrix."""
        return float(np.linalg.norm(self.matrix - _as_matrix(other)))

    def __matmul__(self, other: "Unitary2") -> "Unitary2":
        return Unitary2(self.matrix @ _as_matrix(other))

    def dagger(self) -> "Unitary2":
        return Unitary2(self.matrix.conj().T)

    def __eq__(self, other):
        if not isinstance(other, Unitary2):
            return NotImplemented
        return bool(np.array_equal(self.matrix, other.matrix))

    def __hash__(self):
        return hash(self.matrix.tobytes())


def _as_matrix(m) -> np.ndarray:
    return m.matrix if isinstance(m, Unitary2) else np.asarray(m, dtype=complex)


@dataclass(frozen=True)
class PauliDecomposition:
    """Coefficients of ``c_i I + c_x sigma_x + c_y sigma_y + c_z sigma_z``."""

    c_i: complex
    c_x: complex
    c_y: complex
    c_z: complex

    def coefficients(self) -> Tuple[complex, complex, complex, complex]:
        return (self.c_i, self.c_x, self.c_y, self.c_z)

    def reassemble(self) -> np.ndarray:
        return sum(c * p for c, p in zip(self.coefficients(), PAULI))

    def is_real(self, tol: float = 1e-12) -> bool:
        return all(abs(complex(c).imag) < tol for c in self.coefficients())


def decompose_pauli(m) -> PauliDecomposition:
    """Expand any 2x2 complex matrix in the Pauli basis.

    Uses ``c_k = tr(sigma_k m) / 2``, which holds because the Pauli matrices
    with the identity are orthogonal under the trace inner product.
    """
    m = _as_matrix(m)
    c = [complex(np.trace(p @ m)) / 2 for p in PAULI]
    return PauliDecomposition(*c)


def expm_pauli(phase, ax, ay, az):
    """Closed-form ``exp(-i (phase I + ax sigma_x + ay sigma_y + az sigma_z))``.

    All arguments are real and may be numpy arrays of a common shape; the
    result has that shape followed by ``(2, 2)``. Uses

        exp(-i a.sigma) = cos|a| I - i sin|a| (a_hat . sigma).
    """
    phase, ax, ay, az = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (phase, ax, ay, az))
    )
    r = np.sqrt(ax * ax + ay * ay + az * az)
    c = np.cos(r)
    # sin(r)/r, written via np.sinc to stay exact at r = 0
    s = np.sinc(r / np.pi)
    out = np.empty(r.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c - 1j * az * s
    out[..., 0, 1] = -1j * (ax - 1j * ay) * s
    out[..., 1, 0] = -1j * (ax + 1j * ay) * s
    out[..., 1, 1] = c + 1j * az * s
    out *= np.exp(-1j * phase)[..., None, None]
    return out


def apply(u: Unitary2, s: Complex2State, tol: float = UNITARITY_TOL) -> Complex2State:
    """Evolve a state: ``(a1, a2) -> U (a1, a2)``.

    Raises :class:`NonUnitaryError` for a non-unitary ``u``; that usually
    means a propagator was corrupted upstream.
    """
    u.check_unitary(tol)
    return Complex2State.from_vector(u.matrix @ s.vector)


def populations(s: Complex2State) -> Tuple[float, float]:
    """Occupation probabilities ``(|a1|^2, |a2|^2)``."""
    return abs(s.a1) ** 2, abs(s.a2) ** 2
