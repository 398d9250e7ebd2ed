"""Two-qubit states in the Pauli (Bloch) representation.

Convention: sigma_1 real symmetric, sigma_2 imaginary antisymmetric,
sigma_3 diagonal; basis order |++>, |+->, |-+>, |--> with |+>, |-> the
sigma_3 eigenvectors. In this convention transposing one factor is exactly
a sign flip of that factor's sigma_2 component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, InvalidStateError, UnknownStateError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-10
# estimators are bounded by 1; the slack only absorbs float round-off from rotations
BOUND_SLACK = 1e-12
JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 50

IDENTITY2 = np.eye(2, dtype=complex)
PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
# PAULI_A[n] = sigma_n (x) 1, PAULI_B[m] = 1 (x) sigma_m, PAULI_AB[n, m] = sigma_n (x) sigma_m
PAULI_A = np.stack([np.kron(s, IDENTITY2) for s in PAULI])
PAULI_B = np.stack([np.kron(IDENTITY2, s) for s in PAULI])
PAULI_AB = np.stack([[np.kron(s, t) for t in PAULI] for s in PAULI])


def _frozen(x, shape) -> np.ndarray:
    arr = np.array(x, dtype=float).reshape(shape)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class BlochParams:
    """Local polarizations ``a``, ``b`` and correlation tensor ``c``.

    Entries are expectations of +-1 observables, so they are checked to lie
    in [-1, 1]. Positivity of the corresponding matrix is not implied.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        try:
            a = _frozen(self.a, (3,))
            b = _frozen(self.b, (3,))
            c = _frozen(self.c, (3, 3))
        except ValueError as exc:
            raise InvalidParameterError(f"bad Bloch parameter shape: {exc}") from None
        for name, arr in (("a", a), ("b", b), ("c", c)):
            if not np.all(np.isfinite(arr)):
                raise InvalidParameterError(f"non-finite entry in {name}")
            if np.max(np.abs(arr)) > 1.0 + BOUND_SLACK:
                raise InvalidParameterError(
                    f"entry of {name} exceeds 1 in magnitude: {np.max(np.abs(arr))!r}"
                )
            object.__setattr__(self, name, arr)

    def __eq__(self, other):
        if not isinstance(other, BlochParams):
            return NotImplemented
        return (
            np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.c, other.c)
        )

    def __hash__(self):
        return hash((self.a.tobytes(), self.b.tobytes(), self.c.tobytes()))

    def allclose(self, other: BlochParams, atol: float = 1e-12) -> bool:
        return (
            np.allclose(self.a, other.a, rtol=0, atol=atol)
            and np.allclose(self.b, other.b, rtol=0, atol=atol)
            and np.allclose(self.c, other.c, rtol=0, atol=atol)
        )

    def to_dict(self) -> dict:
        return {"a": self.a.tolist(), "b": self.b.tolist(), "c": self.c.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> BlochParams:
        return cls(d["a"], d["b"], d["c"])


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace 4x4 matrix. May be indefinite."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.shape != (4, 4):
            raise InvalidStateError(f"expected a 4x4 matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidStateError("non-finite matrix entry")
        herm_err = np.max(np.abs(m - m.conj().T))
        if herm_err > HERMITIAN_TOL:
            raise InvalidStateError(f"matrix is not Hermitian (max deviation {herm_err:.3g})")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"trace {tr.real:.15g} differs from 1")
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: tuple[float, float, float, float]

    @property
    def min_eigenvalue(self) -> float:
        return self.eigenvalues[0]

    def is_positive(self, tol: float = POSITIVITY_TOL) -> bool:
        return self.min_eigenvalue >= -tol


def bloch_to_matrix(p: BlochParams) -> DensityMatrix:
    m = (
        np.eye(4, dtype=complex)
        + np.tensordot(p.a, PAULI_A, axes=1)
        + np.tensordot(p.b, PAULI_B, axes=1)
        + np.tensordot(p.c, PAULI_AB, axes=2)
    ) / 4
    return DensityMatrix(m)


def bloch_arrays_to_matrices(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Batched form of :func:`bloch_to_matrix` without validation.

    ``a`` and ``b`` have shape (..., 3) and ``c`` has shape (..., 3, 3);
    returns complex matrices of shape (..., 4, 4).
    """
    m = (
        np.einsum("...n,nij->...ij", a, PAULI_A)
        + np.einsum("...m,mij->...ij", b, PAULI_B)
        + np.einsum("...nm,nmij->...ij", c, PAULI_AB)
    )
    return (m + np.eye(4)) / 4


def matrix_to_bloch(m: DensityMatrix | np.ndarray) -> BlochParams:
    if not isinstance(m, DensityMatrix):
        m = DensityMatrix(m)
    e = m.entries
    # Tr[M P] for Hermitian P is sum(M * P^T)
    a = np.real(np.einsum("ij,nji->n", e, PAULI_A))
    b = np.real(np.einsum("ij,nji->n", e, PAULI_B))
    c = np.real(np.einsum("ij,nmji->nm", e, PAULI_AB))
    return BlochParams(a, b, c)


# parallel ordering for 4x4: each round rotates two disjoint (p, q) planes at once
_JACOBI_ROUNDS = (
    (np.array([0, 2]), np.array([1, 3])),
    (np.array([0, 1]), np.array([2, 3])),
    (np.array([0, 1]), np.array([3, 2])),
)
_OFF_DIAGONAL = ~np.eye(4, dtype=bool)


def jacobi_eigenvalues(h: np.ndarray, tol: float = JACOBI_TOL) -> np.ndarray:
    """Eigenvalues of a stack of 4x4 Hermitian matrices by complex Jacobi.

    Each rotation first removes the phase of the pivot a[p, q], then applies
    the real Jacobi rotation that zeros it. Sweeps stop when the off-diagonal
    Frobenius norm of every matrix is below ``tol``. Returns ascending
    eigenvalues with shape (..., 4).
    """
    a = np.array(h, dtype=complex)
    if a.shape[-2:] != (4, 4):
        raise InvalidParameterError(f"expected 4x4 matrices, got shape {a.shape}")
    batch_shape = a.shape[:-2]
    a = a.reshape(-1, 4, 4)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sum(np.abs(a[:, _OFF_DIAGONAL]) ** 2, axis=-1)
        if off.size == 0 or off.max() < tol * tol:
            break
        for ps, qs in _JACOBI_ROUNDS:
            apq = a[:, ps, qs]
            r = np.abs(apq)
            active = r > 1e-300
            r_safe = np.where(active, r, 1.0)
            phase = np.where(active, np.conj(apq) / r_safe, 1.0)
            tau = (a[:, qs, qs].real - a[:, ps, ps].real) / (2.0 * r_safe)
            t = np.copysign(1.0, tau) / (np.abs(tau) + np.hypot(1.0, tau))
            t[~active] = 0.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            # columns: A <- A U
            cc, ss, ph = c[:, None, :], s[:, None, :], phase[:, None, :]
            col_p, col_q = a[:, :, ps], a[:, :, qs] * ph
            a[:, :, ps] = cc * col_p - ss * col_q
            a[:, :, qs] = ss * col_p + cc * col_q
            # rows: A <- U^H A
            cc, ss, ph = c[:, :, None], s[:, :, None], np.conj(phase)[:, :, None]
            row_p, row_q = a[:, ps, :], a[:, qs, :] * ph
            a[:, ps, :] = cc * row_p - ss * row_q
            a[:, qs, :] = ss * row_p + cc * row_q
    else:
        raise ArithmeticError("Jacobi iteration did not converge")
    w = np.sort(np.diagonal(a, axis1=-2, axis2=-1).real, axis=-1)
    return w.reshape(*batch_shape, 4)


def hermitian_eigenvalues(h: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of 4x4 Hermitian matrices, shape (..., 4, 4) -> (..., 4)."""
    return jacobi_eigenvalues(h)


def min_eigenvalues(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Minimum eigenvalue for a batch of raw Bloch arrays."""
    return hermitian_eigenvalues(bloch_arrays_to_matrices(a, b, c))[..., 0]


def spectrum(m: DensityMatrix | np.ndarray) -> Spectrum:
    if isinstance(m, DensityMatrix):
        h = m.entries
    else:
        h = np.asarray(m, dtype=complex)
        herm_err = np.max(np.abs(h - h.conj().T))
        if herm_err > HERMITIAN_TOL:
            raise InvalidStateError(f"matrix is not Hermitian (max deviation {herm_err:.3g})")
    w = hermitian_eigenvalues(h)
    return Spectrum(tuple(float(x) for x in w))


def fidelity_with_pure(m: DensityMatrix, v) -> float:
    """Return <v|m|v> for a unit vector ``v``."""
    v = np.asarray(v, dtype=complex).reshape(4)
    norm = np.vdot(v, v).real
    if abs(norm - 1.0) > HERMITIAN_TOL:
        raise InvalidParameterError(f"vector is not normalized (norm^2 = {norm!r})")
    return float(np.vdot(v, m.entries @ v).real)


# ---------------------------------------------------------------------------
# presets

SINGLET_VECTOR = np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2)
PHI_MINUS_VECTOR = np.array([1, 0, 0, -1], dtype=complex) / math.sqrt(2)

PRESET_NAMES = ("singlet", "phi_minus", "mixed", "werner", "bell_diagonal", "product")


def singlet() -> BlochParams:
    return BlochParams(np.zeros(3), np.zeros(3), -np.eye(3))


def phi_minus() -> BlochParams:
    return BlochParams(np.zeros(3), np.zeros(3), np.diag([-1.0, 1.0, 1.0]))


def maximally_mixed() -> BlochParams:
    return BlochParams(np.zeros(3), np.zeros(3), np.zeros((3, 3)))


def werner(p: float) -> BlochParams:
    """``p`` * singlet + (1 - p) * maximally mixed."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"werner weight must lie in [0, 1], got {p!r}")
    return BlochParams(np.zeros(3), np.zeros(3), -p * np.eye(3))


def bell_diagonal(c1: float, c2: float, c3: float) -> BlochParams:
    return BlochParams(np.zeros(3), np.zeros(3), np.diag([c1, c2, c3]))


def product(a, b) -> BlochParams:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return BlochParams(a, b, np.outer(a, b))


def preset_state(name: str, *args) -> BlochParams:
    """Build a named state.

    ``werner`` takes the singlet weight, ``bell_diagonal`` three diagonal
    correlations and ``product`` the two local polarization vectors.
    """
    key = name.lower().replace("-", "_")
    if key == "singlet":
        return singlet()
    if key in ("phi_minus", "phi-"):
        return phi_minus()
    if key in ("mixed", "maximally_mixed"):
        return maximally_mixed()
    if key == "werner":
        return werner(*args)
    if key == "bell_diagonal":
        return bell_diagonal(*args)
    if key == "product":
        return product(*args)
    raise UnknownStateError(f"unknown preset state {name!r}")


def is_valid_state(p: BlochParams, tol: float = POSITIVITY_TOL) -> bool:
    return spectrum(bloch_to_matrix(p)).is_positive(tol)
