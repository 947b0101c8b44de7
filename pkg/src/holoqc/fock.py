"""Truncated bosonic Fock space and the optical frames built on it.

The control unitaries are products of exponentials of truncated quadratic
generators. Every complex control is written in polar form and the phase is
pulled out as a rotation by the number operator, e.g.

    M(r e^{i t}) = R(t) exp(r K) R(t)^dagger,   R(t) = exp(i t n1),

so each factor depends on a single real coordinate and its derivatives are
available in closed form. The frame ``V(p) = U(p)|vac>`` and any of its partial
derivatives are then exact up to roundoff, which is what the connection and
its analytic partials are computed from.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Optional, Sequence

import numpy as np

from .connection import ConnectionField, FrameError, connection_from_frame
from .matcore import antihermitian_part, dagger

DEFAULT_CUTOFF = 24
MIN_CUTOFF = 4
SQUEEZE_BOUND = 1.2
ORTHONORMAL_TOL = 1e-6
LEAKAGE_TOL = 1e-6

TWO_QUBIT_COORDS = ("r2", "theta2", "r3", "theta3")
SINGLE_COORDS = ("rho", "phi", "r", "theta")


class FockError(ValueError):
    pass


@dataclass(frozen=True)
class FockSpace:
    """``modes`` oscillators, each truncated at occupation ``cutoff``."""

    modes: int
    cutoff: int = DEFAULT_CUTOFF

    def __post_init__(self):
        if self.modes not in (1, 2):
            raise FockError(f"modes must be 1 or 2, got {self.modes}")
        if int(self.cutoff) != self.cutoff or self.cutoff < MIN_CUTOFF:
            raise FockError(f"cutoff must be an integer >= {MIN_CUTOFF}, got {self.cutoff}")

    @property
    def levels(self) -> int:
        return self.cutoff + 1

    @property
    def dim(self) -> int:
        return self.levels ** self.modes

    def index(self, *occupations: int) -> int:
        """Position of ``|nu_1 nu_2 ...>`` in the lexicographic basis."""
        if len(occupations) != self.modes:
            raise FockError(f"need {self.modes} occupation numbers")
        idx = 0
        for nu in occupations:
            if not 0 <= nu <= self.cutoff:
                raise FockError(f"occupation {nu} outside [0, {self.cutoff}]")
            idx = idx * self.levels + nu
        return idx

    def basis_state(self, *occupations: int) -> np.ndarray:
        v = np.zeros(self.dim, complex)
        v[self.index(*occupations)] = 1.0
        return v

    def occupations(self) -> np.ndarray:
        """``(dim, modes)`` integer array of occupation numbers per basis state."""
        grid = itertools.product(range(self.levels), repeat=self.modes)
        return np.array(list(grid), dtype=int)

    def computational_states(self) -> list[tuple[int, ...]]:
        return list(itertools.product((0, 1), repeat=self.modes))

    def vacuum_frame(self) -> np.ndarray:
        """Columns ``|0>, |1>`` (one mode) or ``|00>, |01>, |10>, |11>`` (two modes)."""
        states = self.computational_states()
        V = np.zeros((self.dim, len(states)), complex)
        for c, occ in enumerate(states):
            V[self.index(*occ), c] = 1.0
        return V


@dataclass(frozen=True)
class ModeOps:
    a: tuple
    adag: tuple
    n: tuple


def _single_mode(levels: int):
    a = np.diag(np.sqrt(np.arange(1, levels, dtype=float)), 1).astype(complex)
    return a, a.conj().T, np.diag(np.arange(levels, dtype=float)).astype(complex)


def ladder_ops(space: FockSpace) -> ModeOps:
    """Truncated ``a_k``, ``a_k^dagger`` and ``n_k`` on the full product space."""
    a1, ad1, n1 = _single_mode(space.levels)
    eye = np.eye(space.levels)
    if space.modes == 1:
        return ModeOps((a1,), (ad1,), (n1,))
    lift = (lambda X: np.kron(X, eye), lambda X: np.kron(eye, X))
    return ModeOps(
        tuple(f(a1) for f in lift),
        tuple(f(ad1) for f in lift),
        tuple(f(n1) for f in lift),
    )


def interaction_hamiltonian(space: FockSpace) -> np.ndarray:
    """Kerr term ``sum_k n_k (n_k - 1)`` in units of the coupling."""
    occ = space.occupations()
    return np.diag(np.sum(occ * (occ - 1), axis=1).astype(float)).astype(complex)


def _generators(space: FockSpace) -> dict:
    a, ad, _ = _single_mode(space.levels)
    if space.modes == 1:
        return {"displace": ad - a, "squeeze": ad @ ad - a @ a}
    # products of operators on different modes are Kronecker products
    return {"pair": np.kron(ad, ad) - np.kron(a, a), "split": np.kron(ad, a) - np.kron(a, ad)}


def _check_bound(label: str, z: complex):
    if abs(z) > SQUEEZE_BOUND:
        raise FockError(f"|{label}| = {abs(z):.3g} exceeds the truncation safety bound {SQUEEZE_BOUND}")


def _expm_ah(K: np.ndarray) -> np.ndarray:
    w, W = np.linalg.eigh(1j * K)
    return (W * np.exp(-1j * w)) @ dagger(W)


def control_unitary(space: FockSpace, params: Sequence[complex]) -> np.ndarray:
    """Full control unitary on the truncated space.

    One mode: ``params = (lam, mu)`` and ``U = D(lam) S(mu)``.
    Two modes: ``params = (zeta, xi)`` and ``U = N(xi) M(zeta)``.
    """
    if len(params) != 2:
        raise FockError("expected two complex parameters")
    ops = ladder_ops(space)
    if space.modes == 1:
        lam, mu = (complex(x) for x in params)
        _check_bound("mu", mu)
        a, ad = ops.a[0], ops.adag[0]
        D = _expm_ah(lam * ad - np.conj(lam) * a)
        S = _expm_ah(mu * ad @ ad - np.conj(mu) * a @ a)
        return D @ S
    zeta, xi = (complex(x) for x in params)
    _check_bound("zeta", zeta)
    a1, a2 = ops.a
    d1, d2 = ops.adag
    M = _expm_ah(zeta * d1 @ d2 - np.conj(zeta) * a1 @ a2)
    N = _expm_ah(xi * d1 @ a2 - np.conj(xi) * a1 @ d2)
    return N @ M


class _BlockExp:
    """``t -> K^k exp(t K)`` for an anti-Hermitian ``K`` commuting with a diagonal charge.

    The generator is diagonalized once per charge sector.
    """

    def __init__(self, K: np.ndarray, charge: np.ndarray):
        order = np.argsort(charge, kind="stable")
        q = charge[order]
        cuts = np.flatnonzero(np.diff(q)) + 1
        self.perm = order
        self.blocks = []
        for idx in np.split(np.arange(len(q)), cuts):
            sl = slice(int(idx[0]), int(idx[-1]) + 1)
            sub = K[np.ix_(order[sl], order[sl])]
            if np.allclose(sub, 0):
                self.blocks.append((sl, None, None))
                continue
            w, W = np.linalg.eigh(1j * sub)
            self.blocks.append((sl, w, W))
        leak = K.copy()
        for sl, _, _ in self.blocks:
            rows = order[sl]
            leak[np.ix_(rows, rows)] = 0
        if np.max(np.abs(leak), initial=0.0) > 1e-12:
            raise FockError("generator does not commute with the supplied charge")

    def apply(self, t: float, X: np.ndarray, orders: int) -> list[np.ndarray]:
        """``[K^k exp(tK) X for k in range(orders + 1)]``."""
        Xp = X[self.perm]
        outs = [np.zeros_like(Xp) for _ in range(orders + 1)]
        for sl, w, W in self.blocks:
            block = Xp[sl]
            if not block.any():
                continue
            if w is None:
                outs[0][sl] = block
                continue
            Y = dagger(W) @ block
            phase = np.exp(-1j * t * w)
            for k in range(orders + 1):
                outs[k][sl] = W @ (((-1j * w) ** k * phase)[:, None] * Y)
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(len(self.perm))
        return [o[inv] for o in outs]


class _Rotation:
    """``t -> (i g)^k exp(i t g)`` for a real diagonal ``g``."""

    def __init__(self, g: np.ndarray):
        self.g = np.asarray(g, dtype=float)

    def apply(self, t: float, X: np.ndarray, orders: int) -> list[np.ndarray]:
        base = np.exp(1j * t * self.g)[:, None] * X
        out = [base]
        for _ in range(orders):
            out.append((1j * self.g)[:, None] * out[-1])
        return out


class OpticalFrame:
    """Frame ``V(p) = U(p)|vac>`` with exact partial derivatives.

    ``factors`` is read right to left: each entry is ``(coordinate, operator)``
    and the frame is ``f_1(p_c1) f_2(p_c2) ... |vac>``.
    """

    def __init__(self, space: FockSpace, kind: str):
        self.space = space
        self.kind = kind
        g = _generators(space)
        occ = space.occupations()
        vac = space.vacuum_frame()
        if kind == "two-qubit":
            if space.modes != 2:
                raise FockError("the two-qubit frame needs two modes")
            n1 = occ[:, 0].astype(float)
            pair = _BlockExp(g["pair"], occ[:, 0] - occ[:, 1])
            split = _BlockExp(g["split"], occ[:, 0] + occ[:, 1])
            rot, rot_inv = _Rotation(n1), _Rotation(-n1)
            # N(xi) M(zeta) with zeta = r2 e^{i theta2}, xi = r3 e^{i theta3}
            self.factors = [(3, rot), (2, split), (3, rot_inv), (1, rot), (0, pair), (1, rot_inv)]
            self.names = TWO_QUBIT_COORDS
        elif kind == "single":
            if space.modes != 1:
                raise FockError("the single-qubit frame needs one mode")
            n = occ[:, 0].astype(float)
            displace = _BlockExp(g["displace"], np.zeros(len(n), dtype=int))
            squeeze = _BlockExp(g["squeeze"], occ[:, 0] % 2)
            # D(lam) S(mu) with lam = rho e^{i phi}, mu = r e^{i theta};
            # the squeeze phase rotates a^2, hence the factor 1/2
            self.factors = [
                (1, _Rotation(n)), (0, displace), (1, _Rotation(-n)),
                (3, _Rotation(n / 2)), (2, squeeze), (3, _Rotation(-n / 2)),
            ]
            self.names = SINGLE_COORDS
        else:
            raise FockError(f"unknown frame kind {kind!r}; expected 'single' or 'two-qubit'")
        self.vac = vac
        self.top = np.any(occ == space.cutoff, axis=1)
        self.d = 4
        self.n = vac.shape[1]

    def check_params(self, p: np.ndarray):
        squeeze = p[0] if self.kind == "two-qubit" else p[2]
        _check_bound("zeta" if self.kind == "two-qubit" else "mu", squeeze)

    def jet(self, p, order: int = 1) -> dict:
        """All partial derivatives of ``V`` up to total ``order``, keyed by multi-index."""
        p = np.asarray(p, dtype=float)
        self.check_params(p)
        zero = (0,) * self.d
        jet = {zero: self.vac.copy()}
        keys = [k for k in itertools.product(range(order + 1), repeat=self.d) if sum(k) <= order]
        for c, op in reversed(self.factors):
            # stack every entry once, apply all derivative orders of this factor
            entries = list(jet.items())
            stacked = np.concatenate([v for _, v in entries], axis=1)
            applied = op.apply(p[c], stacked, order)
            width = self.n
            pieces = {key: [a[:, i * width:(i + 1) * width] for a in applied] for i, (key, _) in enumerate(entries)}
            new = {}
            for beta in keys:
                total = None
                for k in range(beta[c] + 1):
                    src = list(beta)
                    src[c] -= k
                    src = tuple(src)
                    if src not in pieces:
                        continue
                    term = comb(beta[c], k) * pieces[src][k]
                    total = term if total is None else total + term
                if total is not None:
                    new[beta] = total
            jet = new
        return jet

    def __call__(self, p) -> np.ndarray:
        return self.jet(p, 0)[(0,) * self.d]

    def leakage(self, V: np.ndarray) -> float:
        """Largest column weight on the top occupation level of any mode."""
        return float(np.max(np.sum(np.abs(V[self.top]) ** 2, axis=0)))


def _unit(d: int, *axes: int) -> tuple:
    k = [0] * d
    for a in axes:
        k[a] += 1
    return tuple(k)


def _orthonormality_defect(V: np.ndarray) -> float:
    return float(np.max(np.abs(dagger(V) @ V - np.eye(V.shape[1]))))


def oracle_connection(
    space: FockSpace,
    model: str = "two-qubit",
    method: str = "exact",
    orthonormal_tol: float = ORTHONORMAL_TOL,
    leakage_tol: Optional[float] = LEAKAGE_TOL,
) -> ConnectionField:
    """Wilczek-Zee connection of the optical frame on the truncated space.

    ``method="exact"`` differentiates the frame in closed form and also
    provides the analytic partials ``d_j A_i``; ``method="fd"`` uses central
    differences of the frame instead.

    The truncated control unitaries are exactly unitary, so the frame is
    always orthonormal on the truncated space. What signals a cutoff that is
    too small is weight on the top occupation level, which would be lost
    (leak out of orthonormality) in the untruncated space; every evaluation
    raises :class:`FrameError` when it exceeds ``leakage_tol``.
    """
    frame = OpticalFrame(space, model)
    d, n = frame.d, frame.n
    name = f"fock-{model}(cutoff={space.cutoff})"

    def checked(V, p):
        defect = _orthonormality_defect(V)
        if defect > orthonormal_tol:
            raise FrameError(
                f"frame not orthonormal at {np.round(p, 6).tolist()}: defect {defect:.2e}; raise the cutoff"
            )
        if leakage_tol is not None:
            leak = frame.leakage(V)
            if leak > leakage_tol:
                raise FrameError(
                    f"frame weight {leak:.2e} on the cutoff level at {np.round(p, 6).tolist()} "
                    f"exceeds {leakage_tol:.0e}; raise the cutoff (now {space.cutoff})"
                )
        return V

    if method == "fd":
        conn = connection_from_frame(
            lambda p: checked(frame(p), p), d, n, frame.names, orthonormal_tol=orthonormal_tol, name=name
        )
        conn.frame = frame
        return conn
    if method != "exact":
        raise FockError(f"unknown method {method!r}")

    @lru_cache(maxsize=8)
    def jet2(key):
        return frame.jet(np.array(key), 2)

    @lru_cache(maxsize=8)
    def jet1(key):
        return frame.jet(np.array(key), 1)

    def coefficients(p):
        key = tuple(float(x) for x in p)
        j = jet1(key)
        V = checked(j[(0,) * d], p)
        Vd = dagger(V)
        return antihermitian_part(np.stack([Vd @ j[_unit(d, i)] for i in range(d)]))

    def partials(p):
        key = tuple(float(x) for x in p)
        j = jet2(key)
        V = checked(j[(0,) * d], p)
        Vd = dagger(V)
        out = np.empty((d, d, n, n), complex)
        for jj in range(d):
            dVj = dagger(j[_unit(d, jj)])
            for i in range(d):
                out[jj, i] = dVj @ j[_unit(d, i)] + Vd @ j[_unit(d, i, jj)]
        return antihermitian_part(out)

    conn = ConnectionField(d, n, coefficients, frame.names, partials, name)
    conn.frame = frame
    return conn


def degeneracy_residual(space: FockSpace) -> float:
    """Largest ``|H|vac>|`` over the computational basis states."""
    H = interaction_hamiltonian(space)
    return float(np.max(np.abs(H @ space.vacuum_frame())))


def orbit_degeneracy_residual(space: FockSpace, params: Sequence[complex]) -> float:
    """Largest ``|(U H U^dagger) U|vac>|``; zero for every control in the orbit."""
    U = control_unitary(space, params)
    H = interaction_hamiltonian(space)
    V = U @ space.vacuum_frame()
    return float(np.max(np.abs(U @ H @ dagger(U) @ V)))


def truncation_leakage(space: FockSpace, model: str, p) -> float:
    """Weight of the frame on the top occupation level of any mode."""
    frame = OpticalFrame(space, model)
    return frame.leakage(frame(p))


def cutoff_convergence(model: str, p, cutoffs: Sequence[int], step: int = 6) -> list[dict]:
    """Max-entry change of the connection between cutoffs ``N`` and ``N + step``."""
    modes = 2 if model == "two-qubit" else 1
    rows = []
    for N in cutoffs:
        lo = oracle_connection(FockSpace(modes, N), model, leakage_tol=None).coefficients(p)
        hi = oracle_connection(FockSpace(modes, N + step), model, leakage_tol=None).coefficients(p)
        rows.append({"cutoff": int(N), "max_abs_diff": float(np.max(np.abs(hi - lo)))})
    return rows


def compare_with_reference(conn: ConnectionField, reference: ConnectionField, points: Sequence) -> list[dict]:
    """Entrywise comparison of coefficients, one row per point and coordinate.

    Each row carries the raw deviation and the deviation after the best global
    phase ``e^{i a}`` (which cannot change the algebra).
    """
    rows = []
    cutoff = getattr(getattr(conn, "frame", None), "space", None)
    for p in points:
        p = np.asarray(p, dtype=float)
        A = conn.coefficients(p)
        B = reference.coefficients(p)
        for i, label in enumerate(conn.names):
            diff = A[i] - B[i]
            overlap = np.vdot(A[i], B[i])
            phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
            rows.append({
                "param_point": p.tolist(),
                "coefficient": f"A_{label}",
                "max_abs_dev": float(np.max(np.abs(diff))),
                "max_abs_dev_phase_fixed": float(np.max(np.abs(A[i] * phase - B[i]))),
                "cutoff": cutoff.cutoff if cutoff is not None else None,
            })
    return rows


__all__ = [
    "FockSpace", "ModeOps", "FockError", "OpticalFrame",
    "ladder_ops", "interaction_hamiltonian", "control_unitary", "oracle_connection",
    "degeneracy_residual", "orbit_degeneracy_residual", "truncation_leakage",
    "cutoff_convergence", "compare_with_reference",
    "DEFAULT_CUTOFF", "SQUEEZE_BOUND", "TWO_QUBIT_COORDS", "SINGLE_COORDS",
]
