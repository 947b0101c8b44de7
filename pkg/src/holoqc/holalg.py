"""Holonomy algebra at a point: curvature plus iterated covariant derivatives.

The span at ``p0`` is grown level by level. Level 0 inserts every ``F_ij``;
level ``m`` inserts ``D_k T`` for each field ``T`` that contributed a new
direction at level ``m - 1`` and every coordinate ``k``. After each level
the span is closed under brackets. Closure stops at the first level where
neither the derivatives nor the brackets add a direction.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .connection import (
    FIELD_REL_STEP,
    ConnectionField,
    Field,
    covariant_derivative_with_error,
    covariant_field,
    curvature_field,
)
from .matcore import (
    DEFAULT_RANK_TOL,
    MatrixSpan,
    antihermitian_part,
    commutator,
    frob_norm,
    span_insert,
)

log = logging.getLogger(__name__)

MAX_DEPTH = 12
CLOSURE_TOL = 1e-7
# A candidate must clear its own finite-difference error estimate by this factor.
NOISE_FACTOR = 1e3


class NotClosedError(ValueError):
    """The span is not closed under brackets."""


@dataclass
class ClosureConfig:
    depth_cap: int = 6
    rank_tol: float = DEFAULT_RANK_TOL
    bracket_check: bool = True
    sample_points: int = 1
    sample_radius: float = 0.25
    seed: int = 0
    noise_factor: float = NOISE_FACTOR
    field_step: float = FIELD_REL_STEP

    def __post_init__(self):
        if not 0 <= self.depth_cap <= MAX_DEPTH:
            raise ValueError(f"depth_cap must be in [0, {MAX_DEPTH}]")
        if self.sample_points < 1:
            raise ValueError("sample_points must be >= 1")
        if self.rank_tol <= 0:
            raise ValueError("rank_tol must be positive")


@dataclass
class Structure:
    center: MatrixSpan
    derived: MatrixSpan
    ideals: list[MatrixSpan]

    @property
    def center_dim(self) -> int:
        return self.center.dim

    @property
    def derived_dim(self) -> int:
        return self.derived.dim


@dataclass
class HolonomyAlgebraReport:
    span: MatrixSpan
    depth_used: int
    history: list[int]
    stabilized: bool
    structure: Optional[Structure]
    at: np.ndarray
    generators: list[str] = field(default_factory=list)
    bracket_added: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.span.n

    @property
    def dim(self) -> int:
        return self.span.dim

    @property
    def center_dim(self) -> int:
        return self.structure.center_dim if self.structure else 0

    @property
    def derived_dim(self) -> int:
        return self.structure.derived_dim if self.structure else 0

    @property
    def ideals(self) -> list[MatrixSpan]:
        return self.structure.ideals if self.structure else []

    @property
    def ideal_dims(self) -> list[int]:
        return sorted(I.dim for I in self.ideals)

    @property
    def irreducible(self) -> bool:
        return self.dim == self.n * self.n

    @property
    def curvature_dim(self) -> int:
        return self.history[0] if self.history else 0


def membership(S: MatrixSpan, X: np.ndarray) -> float:
    """Relative distance ``||X - proj_S X||_F / (1 + ||X||_F)``."""
    X = np.asarray(X, dtype=complex)
    return frob_norm(S.residual(X)) / (1.0 + frob_norm(X))


def bracket_closure(S: MatrixSpan, floor: float = 0.0, max_rounds: int = 64) -> tuple[MatrixSpan, int]:
    """Insert pairwise brackets until the span stops growing."""
    added = 0
    checked = 0  # brackets among the first `checked` elements are already in
    for _ in range(max_rounds):
        before = S.dim
        basis = S.basis
        for a in range(before):
            for b in range(max(a + 1, checked), before):
                S, ok, _ = span_insert(S, commutator(basis[a], basis[b]), floor)
                added += ok
        checked = before
        if S.dim == before:
            return S, added
    return S, added


def _closure_at(conn: ConnectionField, p0: np.ndarray, cfg: ClosureConfig, S: MatrixSpan):
    """Grow ``S`` at ``p0``; returns (span, history, depth_used, stabilized, generators, bracket_added)."""
    d = conn.d
    history = []
    generators = []
    bracket_added = 0
    new_fields: list[Field] = []
    floor = 0.0

    for i in range(d):
        for j in range(i + 1, d):
            T = curvature_field(conn, i, j)
            S, ok, _ = span_insert(S, T(p0))
            if ok:
                new_fields.append(T)
                generators.append(T.label)
    if cfg.bracket_check:
        S, nb = bracket_closure(S)
        bracket_added += nb
    history.append(S.dim)
    depth_used = 0
    stabilized = not new_fields
    if stabilized:
        return S, history, depth_used, stabilized, generators, bracket_added

    for m in range(1, cfg.depth_cap + 1):
        depth_used = m
        before = S.dim
        fields = []
        for T in new_fields:
            for k in range(d):
                X, err = covariant_derivative_with_error(conn, p0, T, k, cfg.field_step)
                noise = cfg.noise_factor * err
                S, ok, res = span_insert(S, X, noise)
                if ok:
                    floor = max(floor, noise)
                    fields.append(covariant_field(conn, T, k, cfg.field_step))
                    generators.append(fields[-1].label)
                elif res > S.rank_tol * (1 + frob_norm(X)):
                    log.debug("rejected %s at depth %d: residual %.2e within noise %.2e",
                              f"D[{conn.names[k]}] {T.label}", m, res, noise)
        nb = 0
        if cfg.bracket_check:
            S, nb = bracket_closure(S, floor)
            bracket_added += nb
        history.append(S.dim)
        new_fields = fields
        if S.dim == before:
            stabilized = True
            break
        if S.dim == conn.n ** 2:
            stabilized = True
            break
    return S, history, depth_used, stabilized, generators, bracket_added


def holonomy_algebra(conn: ConnectionField, p0, cfg: Optional[ClosureConfig] = None) -> HolonomyAlgebraReport:
    """Span of curvature and iterated covariant derivatives at ``p0``.

    With ``cfg.sample_points > 1`` the spans at extra random points near
    ``p0`` are parallel transported back along straight segments and merged,
    as a cross-check of the single-point computation.
    """
    cfg = cfg or ClosureConfig()
    p0 = conn.point(p0)
    S = MatrixSpan(conn.n, (), cfg.rank_tol)
    S, history, depth_used, stabilized, generators, nb = _closure_at(conn, p0, cfg, S)
    warnings = []
    if history[0] == 0:
        warnings.append("curvature vanishes at base point")
    if not stabilized:
        warnings.append(f"not stabilized: still growing at depth cap {cfg.depth_cap}")

    if cfg.sample_points > 1:
        S, extra = _sample_union(conn, p0, cfg, S)
        if extra:
            warnings.append(f"sampled points added {extra} direction(s) beyond the base-point span")
        if cfg.bracket_check:
            S, more = bracket_closure(S, 0.0)
            nb += more

    structure = None
    try:
        structure = analyze_algebra(S)
    except NotClosedError as exc:
        warnings.append(f"structure analysis skipped: {exc}")
    return HolonomyAlgebraReport(
        span=S, depth_used=depth_used, history=history, stabilized=stabilized,
        structure=structure, at=p0, generators=generators, bracket_added=nb, warnings=warnings,
    )


def _sample_union(conn, p0, cfg, S):
    from .transport import Loop, transport

    rng = np.random.default_rng(cfg.seed)
    extra = 0
    sub_cfg = ClosureConfig(cfg.depth_cap, cfg.rank_tol, cfg.bracket_check, 1, seed=cfg.seed,
                            noise_factor=cfg.noise_factor, field_step=cfg.field_step)
    for _ in range(cfg.sample_points - 1):
        q = p0 + cfg.sample_radius * rng.uniform(-1, 1, size=conn.d)
        P = transport(conn, Loop.line(p0, q, closed=False), steps=256, require_closed=False).gamma
        Sq, *_ = _closure_at(conn, q, sub_cfg, MatrixSpan(conn.n, (), cfg.rank_tol))
        for X in Sq.basis:
            S, ok, _ = span_insert(S, antihermitian_part(P.conj().T @ X @ P), 1e-7)
            extra += ok
    return S, extra


def _structure_constants(basis: np.ndarray) -> np.ndarray:
    """``C[a, c, b] = <e_c, [e_a, e_b]>`` so ``ad(e_a)`` has matrix ``C[a]``."""
    m = basis.shape[0]
    br = np.einsum("aij,bjk->abik", basis, basis) - np.einsum("bij,ajk->abik", basis, basis)
    C = np.real(np.einsum("cij,abij->acb", np.conj(basis), br))
    return C.reshape(m, m, m)


def _null_space(M: np.ndarray, rel_tol: float) -> np.ndarray:
    if M.size == 0:
        return np.eye(M.shape[1])
    _, s, Vt = np.linalg.svd(M)
    scale = max(1.0, s[0] if s.size else 0.0)
    rank = int(np.sum(s > rel_tol * scale))
    return Vt[rank:].T


def _span_from_coords(S: MatrixSpan, coords: np.ndarray) -> MatrixSpan:
    """Span of ``sum_k coords[k, j] e_k`` for the orthonormal columns of ``coords``."""
    mats = tuple(antihermitian_part(S.from_coordinates(coords[:, j])) for j in range(coords.shape[1]))
    return MatrixSpan(S.n, mats, S.rank_tol)


def analyze_algebra(S: MatrixSpan, closure_tol: float = CLOSURE_TOL, seed: int = 0) -> Structure:
    """Center, derived algebra and simple ideals of a bracket-closed span.

    Simple ideals of the derived algebra are the eigenspaces of a random
    symmetric element of the commutant of its adjoint representation.

    Raises
    ------
    NotClosedError
        If some bracket of basis elements leaves the span by more than
        ``closure_tol``.
    """
    m = S.dim
    basis = S.as_array()
    worst = 0.0
    for a in range(m):
        for b in range(a + 1, m):
            worst = max(worst, membership(S, commutator(basis[a], basis[b])))
    if worst > closure_tol:
        raise NotClosedError(f"bracket leaves the span (residual {worst:.2e} > {closure_tol:.0e})")
    if m == 0:
        empty = MatrixSpan(S.n, (), S.rank_tol)
        return Structure(empty, empty, [])

    C = _structure_constants(basis)
    # x in the center iff sum_a x_a C[a] = 0, i.e. ad(x) vanishes
    center = _null_space(C.transpose(1, 2, 0).reshape(m * m, m), 1e-6)
    center_span = _span_from_coords(S, center)

    brackets = C.transpose(0, 2, 1).reshape(m * m, m)  # rows: coords of [e_a, e_b]
    U, s, Vt = np.linalg.svd(brackets, full_matrices=False)
    rank = int(np.sum(s > 1e-6 * max(1.0, s[0] if s.size else 0.0)))
    derived_coords = Vt[:rank].T
    derived = _span_from_coords(S, derived_coords)
    ideals = _simple_ideals(derived, seed)
    return Structure(center_span, derived, ideals)


def _simple_ideals(D: MatrixSpan, seed: int) -> list[MatrixSpan]:
    k = D.dim
    if k == 0:
        return []
    C = _structure_constants(D.as_array())
    ad = [C[a] for a in range(k)]
    eye = np.eye(k)
    # commutant: X ad_a - ad_a X = 0 for all a, in row-major vec form
    system = np.concatenate([np.kron(eye, A.T) - np.kron(A, eye) for A in ad])
    null = _null_space(system, 1e-8)
    rng = np.random.default_rng(seed)
    X = (null @ rng.normal(size=null.shape[1])).reshape(k, k)
    X = 0.5 * (X + X.T)
    w, V = np.linalg.eigh(X)
    spread = max(1.0, float(np.max(np.abs(w))))
    groups: list[list[int]] = [[0]]
    for idx in range(1, k):
        if w[idx] - w[groups[-1][-1]] > 1e-6 * spread:
            groups.append([idx])
        else:
            groups[-1].append(idx)
    return [_span_from_coords(D, V[:, g]) for g in groups]


@dataclass
class IrreducibilityVerdict:
    irreducible: bool
    commentary: str

    def __bool__(self):
        return self.irreducible


def irreducibility_check(rep: HolonomyAlgebraReport, d: Optional[int] = None) -> IrreducibilityVerdict:
    """Irreducible iff the algebra is all of u(n); explains curvature-only undercounting."""
    n2 = rep.n * rep.n
    flag = rep.dim == n2
    lines = [f"holonomy algebra dim {rep.dim} of {n2} ({'irreducible' if flag else 'not irreducible'})"]
    gained = rep.dim - rep.curvature_dim
    if gained > 0:
        lines.append(
            f"covariant derivatives added {gained} directions beyond the curvature-only span "
            f"(dim {rep.curvature_dim}); curvature alone undercounts the holonomy algebra"
        )
    if d is not None:
        pairs = d * (d - 1) // 2
        verdict = "holds" if pairs >= n2 else "fails"
        lines.append(
            f"curvature-only count d(d-1)/2 = {pairs} vs n^2 = {n2} {verdict}; "
            "this count is not a necessary condition for universality"
            + (" (derivative directions exceed it)" if rep.dim > pairs else "")
        )
    if not rep.stabilized:
        lines.append("closure did not stabilize; dimension is a lower bound")
    return IrreducibilityVerdict(flag, "; ".join(lines))
