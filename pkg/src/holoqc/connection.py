"""Local connections on a trivialized bundle, curvature and covariant derivatives.

Conventions (coordinate frame, local trivialization)::

    F_ij  = d_i A_j - d_j A_i + [A_i, A_j]
    D_k T = d_k T + [A_k, T]
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .matcore import antihermitian_defect, antihermitian_part, commutator, dagger, frob_norm

# 4th-order central stencil for a first derivative
STENCIL_OFFSETS = (-2.0, -1.0, 1.0, 2.0)
STENCIL_WEIGHTS = (1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0)

PARTIAL_REL_STEP = 1e-4
# Step for differentiating curvature-derived fields. Each nested level of
# differencing multiplies the roundoff of its input by ~1.5/h, so the nested
# levels use a wider step than the coefficient partials.
FIELD_REL_STEP = 2e-3


class ConnectionError_(ValueError):
    """Invalid connection data or evaluation failure."""


class FrameError(ConnectionError_):
    """A frame supplied to :func:`connection_from_frame` is not orthonormal."""


def _as_point(p, d: int) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape[0] != d:
        raise ConnectionError_(f"point has {p.shape[0]} coordinates, connection expects {d}")
    if not np.all(np.isfinite(p)):
        raise ConnectionError_("point has non-finite coordinates")
    return p


def step_size(p: np.ndarray, j: int, rel_step: float) -> float:
    return rel_step * max(1.0, abs(float(p[j])))


def central_difference(
    f: Callable[[np.ndarray], np.ndarray], p: np.ndarray, j: int, rel_step: float = PARTIAL_REL_STEP
) -> np.ndarray:
    """4th-order central difference of ``f`` along coordinate ``j``."""
    h = step_size(p, j, rel_step)
    acc = None
    for off, w in zip(STENCIL_OFFSETS, STENCIL_WEIGHTS):
        q = np.array(p, dtype=float)
        q[j] += off * h
        term = w * np.asarray(f(q))
        acc = term if acc is None else acc + term
    return acc / h


def central_difference_with_error(
    f: Callable[[np.ndarray], np.ndarray], p: np.ndarray, j: int, rel_step: float = PARTIAL_REL_STEP
) -> tuple[np.ndarray, float]:
    """Central difference plus an error estimate.

    The estimate is the Frobenius distance between the stencils at ``h`` and
    ``2h``; the ``+-2h`` samples are shared so only two extra evaluations
    are needed.
    """
    h = step_size(p, j, rel_step)
    samples = {}
    for off in (-4.0, -2.0, -1.0, 1.0, 2.0, 4.0):
        q = np.array(p, dtype=float)
        q[j] += off * h
        samples[off] = np.asarray(f(q))
    fine = sum(w * samples[o] for o, w in zip(STENCIL_OFFSETS, STENCIL_WEIGHTS)) / h
    coarse = sum(w * samples[2 * o] for o, w in zip(STENCIL_OFFSETS, STENCIL_WEIGHTS)) / (2 * h)
    return fine, float(np.linalg.norm(fine - coarse))


class ConnectionField:
    """A u(n)-valued one-form in local coordinates.

    Parameters
    ----------
    d, n:
        Base (parameter space) and fiber dimensions.
    coefficients:
        ``p -> array (d, n, n)`` returning every ``A_i(p)``.
    names:
        Coordinate names, defaults to ``x0, x1, ...``.
    partials:
        Optional analytic hook ``p -> array (d, d, n, n)`` with
        ``out[j, i] = d_j A_i(p)``.
    batch:
        Optional vectorized ``P (K, d) -> array (K, d, n, n)``.
    """

    def __init__(
        self,
        d: int,
        n: int,
        coefficients: Callable[[np.ndarray], np.ndarray],
        names: Optional[Sequence[str]] = None,
        partials: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        name: str = "",
        batch: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ):
        if d < 1 or n < 1:
            raise ConnectionError_("dimensions must be positive")
        self.d = int(d)
        self.n = int(n)
        self._coefficients = coefficients
        self._partials = partials
        self.names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(d))
        if len(self.names) != self.d:
            raise ConnectionError_("need one name per coordinate")
        self.name = name
        self._batch = batch

    def __repr__(self):
        return f"ConnectionField(name={self.name!r}, d={self.d}, n={self.n})"

    @property
    def has_analytic_partials(self) -> bool:
        return self._partials is not None

    def point(self, p) -> np.ndarray:
        return _as_point(p, self.d)

    def coefficients(self, p) -> np.ndarray:
        p = self.point(p)
        try:
            A = np.asarray(self._coefficients(p), dtype=complex)
        except ConnectionError_:
            raise
        except Exception as exc:  # evaluation failure of user callables
            raise ConnectionError_(f"coefficient evaluation failed at {p.tolist()}: {exc}") from exc
        if A.shape != (self.d, self.n, self.n):
            raise ConnectionError_(f"coefficients have shape {A.shape}, expected {(self.d, self.n, self.n)}")
        return A

    def coefficients_many(self, P) -> np.ndarray:
        """Coefficients at each row of ``P``; shape ``(K, d, n, n)``."""
        P = np.asarray(P, dtype=float).reshape(-1, self.d)
        if self._batch is not None and len(P):
            A = np.asarray(self._batch(P), dtype=complex)
            if A.shape != (len(P), self.d, self.n, self.n):
                raise ConnectionError_(f"batched coefficients have shape {A.shape}")
            return A
        return np.stack([self.coefficients(p) for p in P]) if len(P) else np.zeros((0, self.d, self.n, self.n), complex)

    def coeff(self, p, i: int) -> np.ndarray:
        return self.coefficients(p)[i]

    def analytic_partials(self, p) -> Optional[np.ndarray]:
        if self._partials is None:
            return None
        dA = np.asarray(self._partials(self.point(p)), dtype=complex)
        if dA.shape != (self.d, self.d, self.n, self.n):
            raise ConnectionError_(f"partials have shape {dA.shape}")
        return dA

    def gauge_transformed(self, g: np.ndarray) -> "ConnectionField":
        """Connection with coefficients ``g^dagger A_i g`` for a constant unitary ``g``."""
        g = np.asarray(g, dtype=complex)
        gd = dagger(g)

        def coefficients(p):
            return gd @ self._coefficients(p) @ g

        batch = None
        if self._batch is not None:
            def batch(P):
                return gd @ self._batch(P) @ g

        partials = None
        if self._partials is not None:
            def partials(p):
                return gd @ self._partials(p) @ g

        return ConnectionField(self.d, self.n, coefficients, self.names, partials, self.name + "*g", batch)


def partial(conn: ConnectionField, p, j: int, i: int) -> np.ndarray:
    """``d_j A_i(p)`` from the analytic hook or a 4th-order central difference."""
    p = conn.point(p)
    if not (0 <= i < conn.d and 0 <= j < conn.d):
        raise IndexError("coordinate index out of range")
    dA = conn.analytic_partials(p)
    if dA is not None:
        return dA[j, i]
    return central_difference(lambda q: conn.coefficients(q)[i], p, j)


def all_partials(conn: ConnectionField, p) -> np.ndarray:
    """Array ``(d, d, n, n)`` with ``out[j, i] = d_j A_i(p)``."""
    p = conn.point(p)
    dA = conn.analytic_partials(p)
    if dA is not None:
        return dA
    return np.stack([central_difference(conn.coefficients, p, j) for j in range(conn.d)])


@dataclass(frozen=True)
class CurvatureTensor:
    at: np.ndarray
    F: np.ndarray  # (d, d, n, n), F[i, j] = -F[j, i]

    def __getitem__(self, ij) -> np.ndarray:
        i, j = ij
        return self.F[i, j]

    @property
    def d(self) -> int:
        return self.F.shape[0]

    def components(self):
        """Yield ``(i, j, F_ij)`` for ``i < j``."""
        for i in range(self.d):
            for j in range(i + 1, self.d):
                yield i, j, self.F[i, j]

    def max_norm(self) -> float:
        return float(max((np.linalg.norm(F) for _, _, F in self.components()), default=0.0))


def _curvature_from(A: np.ndarray, dA: np.ndarray, i: int, j: int) -> np.ndarray:
    return antihermitian_part(dA[i, j] - dA[j, i] + A[i] @ A[j] - A[j] @ A[i])


def curvature(conn: ConnectionField, p) -> CurvatureTensor:
    """Curvature by the structure equation at ``p``."""
    p = conn.point(p)
    A = conn.coefficients(p)
    dA = all_partials(conn, p)
    d, n = conn.d, conn.n
    F = np.zeros((d, d, n, n), dtype=complex)
    for i in range(d):
        for j in range(i + 1, d):
            F[i, j] = _curvature_from(A, dA, i, j)
            F[j, i] = -F[i, j]
    return CurvatureTensor(p, F)


class Field:
    """An adjoint-valued field ``p -> X(p)`` on parameter space.

    ``order`` counts covariant derivatives applied to a curvature component;
    ``label`` records how the field was built, e.g. ``D[theta2] F[r2,theta2]``.
    """

    def __init__(self, func: Callable[[np.ndarray], np.ndarray], label: str = "", order: int = 0):
        self._func = func
        self.label = label
        self.order = order

    def __call__(self, p) -> np.ndarray:
        return self._func(np.asarray(p, dtype=float))

    def __repr__(self):
        return f"Field({self.label!r}, order={self.order})"


def curvature_field(conn: ConnectionField, i: int, j: int) -> Field:
    """The component ``F_ij`` as a field, computing only the partials it needs."""

    def F_ij(p):
        A = conn.coefficients(p)
        dA = conn.analytic_partials(p)
        if dA is not None:
            dj_Ai, di_Aj = dA[j, i], dA[i, j]
        else:
            di_Aj = central_difference(lambda q: conn.coefficients(q)[j], p, i)
            dj_Ai = central_difference(lambda q: conn.coefficients(q)[i], p, j)
        return antihermitian_part(di_Aj - dj_Ai + A[i] @ A[j] - A[j] @ A[i])

    return Field(F_ij, f"F[{conn.names[i]},{conn.names[j]}]", 0)


def covariant_derivative(
    conn: ConnectionField, p, T: Callable[[np.ndarray], np.ndarray], k: int, rel_step: float = FIELD_REL_STEP
) -> np.ndarray:
    """``D_k T(p) = d_k T(p) + [A_k(p), T(p)]`` for an adjoint-valued field ``T``."""
    p = conn.point(p)
    dT = central_difference(T, p, k, rel_step)
    return antihermitian_part(dT + commutator(conn.coefficients(p)[k], T(p)))


def covariant_derivative_with_error(
    conn: ConnectionField, p, T: Callable[[np.ndarray], np.ndarray], k: int, rel_step: float = FIELD_REL_STEP
) -> tuple[np.ndarray, float]:
    """Covariant derivative together with a finite-difference error estimate."""
    p = conn.point(p)
    dT, err = central_difference_with_error(T, p, k, rel_step)
    return antihermitian_part(dT + commutator(conn.coefficients(p)[k], T(p))), err


def covariant_field(conn: ConnectionField, T: Field, k: int, rel_step: float = FIELD_REL_STEP) -> Field:
    return Field(
        lambda p: covariant_derivative(conn, p, T, k, rel_step),
        f"D[{conn.names[k]}] {T.label}",
        T.order + 1,
    )


def bianchi_residual(conn: ConnectionField, p, rel_step: float = FIELD_REL_STEP) -> float:
    """Largest ``|D_i F_jk + D_j F_ki + D_k F_ij|`` over ``i < j < k``, relative to ``1 + max|F|``."""
    p = conn.point(p)
    d = conn.d
    fields = {(i, j): curvature_field(conn, i, j) for i in range(d) for j in range(d) if i != j}
    worst = 0.0
    for i in range(d):
        for j in range(i + 1, d):
            for k in range(j + 1, d):
                total = (
                    covariant_derivative(conn, p, fields[j, k], i, rel_step)
                    + covariant_derivative(conn, p, fields[k, i], j, rel_step)
                    + covariant_derivative(conn, p, fields[i, j], k, rel_step)
                )
                worst = max(worst, frob_norm(total))
    return worst / (1.0 + curvature(conn, p).max_norm())


def connection_from_frame(
    frame: Callable[[np.ndarray], np.ndarray],
    d: int,
    n: int,
    names: Optional[Sequence[str]] = None,
    frame_partials: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    orthonormal_tol: float = 1e-8,
    rel_step: float = PARTIAL_REL_STEP,
    name: str = "frame",
) -> ConnectionField:
    """Wilczek-Zee connection ``A_i = V^dagger d_i V`` induced by an orthonormal frame.

    ``frame(p)`` returns the ``(N, n)`` matrix ``V`` whose columns span the
    degenerate subspace. ``frame_partials(p)``, when given, returns the
    ``(d, N, n)`` array of ``d_i V``; otherwise central differences are used.
    The raw products are projected onto their anti-Hermitian part; the size of
    the discarded Hermitian part is available via ``conn.projection_residual``.
    """

    def checked_frame(p):
        V = np.asarray(frame(p), dtype=complex)
        if V.ndim != 2 or V.shape[1] != n:
            raise FrameError(f"frame has shape {V.shape}, expected (*, {n})")
        defect = float(np.max(np.abs(dagger(V) @ V - np.eye(n))))
        if defect > orthonormal_tol:
            raise FrameError(f"frame not orthonormal at {np.round(p, 6).tolist()}: defect {defect:.2e}")
        return V

    residuals = []

    def coefficients(p):
        V = checked_frame(p)
        if frame_partials is not None:
            dV = np.asarray(frame_partials(p), dtype=complex)
        else:
            dV = np.stack([central_difference(checked_frame, p, i, rel_step) for i in range(d)])
        raw = dagger(V)[None, :, :] @ dV
        A = antihermitian_part(raw)
        residuals.append(float(np.max(np.abs(raw - A))) if raw.size else 0.0)
        del residuals[:-1]
        return A

    conn = ConnectionField(d, n, coefficients, names, None, name)
    conn.projection_residual = lambda: residuals[-1] if residuals else 0.0
    return conn


def check_antihermitian(conn: ConnectionField, points: Sequence, tol: float = 1e-9):
    """Return ``(worst_defect, point, index)`` over the sampled points."""
    worst = (0.0, None, None)
    for p in points:
        A = conn.coefficients(p)
        for i in range(conn.d):
            defect = antihermitian_defect(A[i])
            if defect > worst[0]:
                worst = (defect, np.asarray(p, dtype=float), i)
    return worst
