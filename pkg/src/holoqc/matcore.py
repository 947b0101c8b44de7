"""Dense complex matrix kernels and real spans of anti-Hermitian matrices.

Spans live in the realification of u(n): the inner product is
``Re tr(X^dagger Y)`` and all spans are real-linear.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

DEFAULT_RANK_TOL = 1e-9


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


class BranchCutError(ValueError):
    """A unitary has an eigenvalue too close to -1 for a principal logarithm."""


class SingularMatrixError(ValueError):
    """Matrix is (numerically) singular."""


def _square(X: np.ndarray, name: str = "matrix") -> np.ndarray:
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {X.shape}")
    return X


def dagger(X: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(X, -1, -2))


def commutator(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Return ``XY - YX``."""
    X = _square(X, "X")
    Y = _square(Y, "Y")
    if X.shape != Y.shape:
        raise DimensionError(f"commutator of {X.shape} and {Y.shape}")
    return X @ Y - Y @ X


def frob_inner(X: np.ndarray, Y: np.ndarray) -> float:
    """Real Frobenius pairing ``Re tr(X^dagger Y)``."""
    X = np.asarray(X, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    if X.shape != Y.shape:
        raise DimensionError(f"inner product of {X.shape} and {Y.shape}")
    return float(np.real(np.vdot(X, Y)))


def frob_norm(X: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(X, dtype=complex)))


def antihermitian_part(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X - dagger(X))


def antihermitian_defect(X: np.ndarray) -> float:
    """``max|X + X^dagger|`` scaled by ``1 + max|X|``."""
    X = np.asarray(X, dtype=complex)
    if X.size == 0:
        return 0.0
    return float(np.max(np.abs(X + dagger(X))) / (1.0 + np.max(np.abs(X))))


def is_antihermitian(X: np.ndarray, tol: float = 1e-10) -> bool:
    X = np.asarray(X, dtype=complex)
    return X.ndim == 2 and X.shape[0] == X.shape[1] and antihermitian_defect(X) <= tol


@dataclass(frozen=True)
class MatrixSpan:
    """Orthonormal basis of a real subspace of u(n).

    Instances are immutable; :func:`span_insert` returns a new span.
    """

    n: int
    basis: tuple[np.ndarray, ...] = ()
    rank_tol: float = DEFAULT_RANK_TOL
    _stack: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.basis:
            stack = np.stack([np.asarray(b, dtype=complex) for b in self.basis])
        else:
            stack = np.zeros((0, self.n, self.n), dtype=complex)
        stack.setflags(write=False)
        object.__setattr__(self, "_stack", stack)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def __len__(self) -> int:
        return len(self.basis)

    def as_array(self) -> np.ndarray:
        """Basis stacked into shape ``(dim, n, n)``."""
        return self._stack

    def coordinates(self, X: np.ndarray) -> np.ndarray:
        """Real coordinates of the orthogonal projection of ``X``."""
        X = np.asarray(X, dtype=complex)
        if X.shape != (self.n, self.n):
            raise DimensionError(f"expected {self.n}x{self.n}, got {X.shape}")
        if not self.basis:
            return np.zeros(0)
        return np.real(np.einsum("kij,ij->k", np.conj(self._stack), X))

    def project(self, X: np.ndarray) -> np.ndarray:
        c = self.coordinates(X)
        if c.size == 0:
            return np.zeros((self.n, self.n), dtype=complex)
        return np.einsum("k,kij->ij", c, self._stack)

    def residual(self, X: np.ndarray) -> np.ndarray:
        """Component of ``X`` orthogonal to the span (two Gram-Schmidt passes)."""
        X = np.asarray(X, dtype=complex)
        r = X - self.project(X)
        return r - self.project(r)

    def gram(self) -> np.ndarray:
        S = self._stack.reshape(self.dim, -1)
        return np.real(np.conj(S) @ S.T)

    def from_coordinates(self, c: np.ndarray) -> np.ndarray:
        return np.einsum("k,kij->ij", np.asarray(c, dtype=float), self._stack)


def span_insert(
    S: MatrixSpan, X: np.ndarray, floor: float = 0.0
) -> tuple[MatrixSpan, bool, float]:
    """Gram-Schmidt insertion with a relative rank tolerance.

    ``X`` is added when its orthogonal residual exceeds
    ``max(S.rank_tol * (1 + ||X||_F), floor)``. The optional ``floor`` is an
    absolute threshold used by callers that know the numerical noise level of
    ``X``.

    Returns
    -------
    (span, added, residual)
    """
    X = np.asarray(X, dtype=complex)
    if X.shape != (S.n, S.n):
        raise DimensionError(f"expected {S.n}x{S.n}, got {X.shape}")
    r = S.residual(X)
    rn = frob_norm(r)
    threshold = max(S.rank_tol * (1.0 + frob_norm(X)), floor)
    if rn <= threshold or S.dim >= S.n * S.n:
        return S, False, rn
    b = antihermitian_part(r / rn)
    b = S.residual(b)
    b = b / frob_norm(b)
    return MatrixSpan(S.n, S.basis + (b,), S.rank_tol), True, rn


def span_of(matrices, n: int, rank_tol: float = DEFAULT_RANK_TOL) -> MatrixSpan:
    S = MatrixSpan(n, (), rank_tol)
    for X in matrices:
        S, _, _ = span_insert(S, X)
    return S


def expm_antihermitian(X: np.ndarray) -> np.ndarray:
    """Exponential of an anti-Hermitian matrix via ``eigh(iX)``.

    Only the anti-Hermitian part of ``X`` is used, so the result is unitary
    to working precision.
    """
    X = _square(X, "X")
    H = 1j * antihermitian_part(X)
    H = 0.5 * (H + dagger(H))
    w, W = np.linalg.eigh(H)
    return (W * np.exp(-1j * w)) @ dagger(W)


def logm_unitary(U: np.ndarray, unitary_tol: float = 1e-8, branch_tol: float = 1e-6) -> np.ndarray:
    """Principal logarithm of a unitary matrix.

    Raises
    ------
    BranchCutError
        If an eigenvalue lies within ``branch_tol`` of -1.
    """
    U = _square(U, "U")
    n = U.shape[0]
    defect = np.max(np.abs(dagger(U) @ U - np.eye(n))) if n else 0.0
    if defect > unitary_tol:
        raise ValueError(f"matrix is not unitary (defect {defect:.2e})")
    T, Z = scipy.linalg.schur(U, output="complex")
    lam = np.diag(T)
    if np.any(np.abs(lam + 1.0) < branch_tol):
        raise BranchCutError("eigenvalue near -1; principal logarithm is ambiguous")
    phases = np.angle(lam)
    L = (Z * (1j * phases)) @ dagger(Z)
    return antihermitian_part(L)


def unitarize(M: np.ndarray) -> np.ndarray:
    """Unitary polar factor of ``M`` (nearest unitary in Frobenius norm)."""
    M = _square(M, "M")
    W, s, Vh = np.linalg.svd(M)
    if s.size and s[-1] <= 1e-14 * max(s[0], 1e-300):
        raise SingularMatrixError("cannot unitarize a singular matrix")
    return W @ Vh


def unitarity_defect(U: np.ndarray) -> float:
    U = np.asarray(U, dtype=complex)
    return float(np.max(np.abs(dagger(U) @ U - np.eye(U.shape[0]))))


def unit(n: int, i: int, j: int) -> np.ndarray:
    """Matrix unit ``E_ij`` with 1-based indices."""
    E = np.zeros((n, n), dtype=complex)
    E[i - 1, j - 1] = 1.0
    return E
