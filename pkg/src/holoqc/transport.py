"""Path-ordered holonomies along loops in parameter space.

Transport solves ``U'(t) = -A(gamma(t)) . gamma'(t) U(t)``, ``U(0) = I``,
with later times multiplying on the left. With this sign the holonomy of a
small coordinate rectangle spanned by ``eps e_i`` then ``eps e_j`` is
``exp(-eps^2 F_ij + O(eps^3))`` for ``F = dA + [A, A]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .connection import ConnectionField
from .matcore import dagger, unitarity_defect, unitarize

# sign s in logm(Gamma(rect_loop(p, i, j, eps))) ~ s eps^2 F_ij(p)
SMALL_LOOP_SIGN = -1
CLOSURE_TOL = 1e-12
JOIN_TOL = 1e-9
MAX_STEPS = 2 ** 14
REFINE_TOL = 1e-9


class LoopError(ValueError):
    pass


@dataclass(frozen=True)
class LineSegment:
    start: np.ndarray
    end: np.ndarray

    def position(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)[:, None]
        return self.start[None, :] + t * (self.end - self.start)[None, :]

    def velocity(self, t: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.end - self.start, (len(np.atleast_1d(t)), len(self.start)))

    def reversed(self) -> "LineSegment":
        return LineSegment(self.end, self.start)

    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    def to_json(self) -> dict:
        return {"type": "line", "from": self.start.tolist(), "to": self.end.tolist()}


@dataclass(frozen=True)
class SampledSegment:
    """Path through samples ``(t_k, p_k)``, ``t`` in ``[0, 1]``, cubic-spline interpolated."""

    t: np.ndarray
    points: np.ndarray
    _spline: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        P = np.asarray(self.points, dtype=float)
        if t.ndim != 1 or P.ndim != 2 or len(t) != len(P) or len(t) < 2:
            raise LoopError("sampled segment needs at least two (t, point) rows")
        if abs(t[0]) > 1e-12 or abs(t[-1] - 1.0) > 1e-12 or np.any(np.diff(t) <= 0):
            raise LoopError("sample times must increase from 0 to 1")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "points", P)
        if len(t) >= 4:
            spline = CubicSpline(t, P, axis=0)
        else:
            spline = None
        object.__setattr__(self, "_spline", spline)

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def position(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self._spline is not None:
            return self._spline(t)
        return np.stack([np.interp(t, self.t, self.points[:, k]) for k in range(self.points.shape[1])], axis=1)

    def velocity(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self._spline is not None:
            return self._spline(t, 1)
        idx = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, len(self.t) - 2)
        slope = np.diff(self.points, axis=0) / np.diff(self.t)[:, None]
        return slope[idx]

    def reversed(self) -> "SampledSegment":
        return SampledSegment(1.0 - self.t[::-1], self.points[::-1])

    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    def to_json(self) -> dict:
        return {"type": "samples", "points": np.column_stack([self.t, self.points]).tolist()}


Segment = Union[LineSegment, SampledSegment]


class Loop:
    """Piecewise-smooth path in parameter space.

    Zero-length segments are dropped. ``base`` is kept so that a loop with
    no segments left still knows where it sits.
    """

    def __init__(self, segments: Sequence[Segment], closed: bool = True, base=None):
        segs = [s for s in segments if s.length() > 0.0]
        if base is None:
            if not segments:
                raise LoopError("empty loop needs a base point")
            base = segments[0].start
        self.base = np.asarray(base, dtype=float)
        self.segments = tuple(segs)
        for a, b in zip(segs[:-1], segs[1:]):
            if np.max(np.abs(a.end - b.start)) > JOIN_TOL:
                raise LoopError("consecutive segments do not join")
        if segs and np.max(np.abs(segs[0].start - self.base)) > JOIN_TOL:
            raise LoopError("first segment does not start at the base point")
        if closed and np.max(np.abs(self.end - self.start)) > CLOSURE_TOL:
            raise LoopError(f"loop marked closed but ends {np.max(np.abs(self.end - self.start)):.2e} from its start")
        self.closed = bool(closed)

    @property
    def start(self) -> np.ndarray:
        return self.segments[0].start if self.segments else self.base

    @property
    def end(self) -> np.ndarray:
        return self.segments[-1].end if self.segments else self.base

    @property
    def dim(self) -> int:
        return len(self.base)

    def __len__(self):
        return len(self.segments)

    def sample(self, count: int = 64) -> np.ndarray:
        """Points along the loop, ``count`` per segment."""
        if not self.segments:
            return self.base[None, :]
        t = np.linspace(0.0, 1.0, count)
        return np.concatenate([s.position(t) for s in self.segments])

    @classmethod
    def line(cls, a, b, closed: bool = False) -> "Loop":
        a = np.asarray(a, dtype=float)
        return cls([LineSegment(a, np.asarray(b, dtype=float))], closed=closed, base=a)

    @classmethod
    def polygon(cls, vertices, closed: bool = True) -> "Loop":
        V = [np.asarray(v, dtype=float) for v in vertices]
        if closed and np.max(np.abs(V[0] - V[-1])) > 0:
            V.append(V[0])
        return cls([LineSegment(a, b) for a, b in zip(V[:-1], V[1:])], closed=closed, base=V[0])

    def to_json(self) -> dict:
        return {"closed": self.closed, "base": self.base.tolist(),
                "segments": [s.to_json() for s in self.segments]}

    @classmethod
    def from_json(cls, data: dict) -> "Loop":
        try:
            segs = []
            for s in data["segments"]:
                if s["type"] == "line":
                    segs.append(LineSegment(np.asarray(s["from"], float), np.asarray(s["to"], float)))
                elif s["type"] == "samples":
                    rows = np.asarray(s["points"], dtype=float)
                    segs.append(SampledSegment(rows[:, 0], rows[:, 1:]))
                else:
                    raise LoopError(f"unknown segment type {s['type']!r}")
            base = data.get("base")
            if base is None and not segs:
                raise LoopError("loop without segments needs a 'base'")
            return cls(segs, closed=bool(data.get("closed", True)), base=base)
        except (KeyError, TypeError, IndexError) as exc:
            raise LoopError(f"malformed loop JSON: {exc}") from exc


def reverse(a: Loop) -> Loop:
    return Loop([s.reversed() for s in reversed(a.segments)], closed=a.closed, base=a.end)


def compose(a: Loop, b: Loop) -> Loop:
    """Traverse ``a`` then ``b``."""
    if np.max(np.abs(a.end - b.start)) > JOIN_TOL:
        raise LoopError("endpoint mismatch: a must end where b starts")
    segs = list(a.segments) + list(b.segments)
    closed = bool(np.max(np.abs(b.end - a.start)) <= CLOSURE_TOL)
    return Loop(segs, closed=closed, base=a.start)


def rect_loop(p0, i: int, j: int, eps: float) -> Loop:
    """Coordinate rectangle ``p0 -> p0 + eps e_i -> p0 + eps e_i + eps e_j -> p0 + eps e_j -> p0``."""
    if eps < 0:
        raise LoopError("eps must be non-negative")
    p0 = np.asarray(p0, dtype=float)
    ei = np.zeros_like(p0)
    ej = np.zeros_like(p0)
    ei[i] = eps
    ej[j] = eps
    return Loop.polygon([p0, p0 + ei, p0 + ei + ej, p0 + ej, p0], closed=True)


@dataclass
class TransportResult:
    gamma: np.ndarray
    steps: int
    unitarity_drift: float
    refinement: float = 0.0


def _segment_product(conn: ConnectionField, seg: Segment, steps: int) -> np.ndarray:
    """Exponential-midpoint product over one segment (later steps on the left)."""
    h = 1.0 / steps
    tm = (np.arange(steps) + 0.5) * h
    A = conn.coefficients_many(seg.position(tm))
    Omega = -np.einsum("ki,kiab->kab", seg.velocity(tm), A)
    H = 1j * h * Omega
    H = 0.5 * (H + dagger(H))
    w, W = np.linalg.eigh(H)
    E = (W * np.exp(-1j * w)[:, None, :]) @ dagger(W)
    U = np.eye(conn.n, dtype=complex)
    for k in range(steps):
        U = E[k] @ U
    return U


def _path_product(conn: ConnectionField, loop: Loop, steps: int) -> np.ndarray:
    U = np.eye(conn.n, dtype=complex)
    for seg in loop.segments:
        U = _segment_product(conn, seg, steps) @ U
    return U


def transport(
    conn: ConnectionField,
    loop: Loop,
    steps: int = 64,
    tol: Optional[float] = REFINE_TOL,
    require_closed: bool = True,
    max_steps: int = MAX_STEPS,
) -> TransportResult:
    """Holonomy (or parallel transport for open paths) along ``loop``.

    ``steps`` is the starting number of exponential-midpoint steps per
    segment. Successive halvings are Richardson-combined (the midpoint
    exponential is symmetric, so its error is even in the step) until two
    consecutive extrapolants agree to ``tol`` or ``max_steps`` is reached;
    ``tol=None`` does a single extrapolation from ``steps`` and
    ``2 * steps``. The result is projected back onto the unitary group and
    the defect before projection is reported.
    """
    if steps < 8:
        raise ValueError("steps must be >= 8")
    if loop.dim != conn.d:
        raise LoopError(f"loop lives in dimension {loop.dim}, connection in {conn.d}")
    if require_closed and not loop.closed:
        raise LoopError("open path passed where a closed loop is required")
    if not loop.segments:
        return TransportResult(np.eye(conn.n, dtype=complex), 0, 0.0)

    coarse = _path_product(conn, loop, steps)
    n_steps = 2 * steps
    fine = _path_product(conn, loop, n_steps)
    R = (4.0 * fine - coarse) / 3.0
    change = float("inf")
    while tol is not None and n_steps * 2 <= max_steps:
        coarse, fine = fine, _path_product(conn, loop, 2 * n_steps)
        n_steps *= 2
        R_next = (4.0 * fine - coarse) / 3.0
        change = float(np.max(np.abs(R_next - R)))
        R = R_next
        if change <= tol:
            break
    drift = unitarity_defect(R)
    return TransportResult(unitarize(R), n_steps, drift, 0.0 if tol is None else change)


def inverse_check(conn: ConnectionField, loop: Loop, steps: int = 64) -> float:
    """``max|Gamma(loop^-1) Gamma(loop) - I|``."""
    g = transport(conn, loop, steps).gamma
    gi = transport(conn, reverse(loop), steps).gamma
    return float(np.max(np.abs(gi @ g - np.eye(conn.n))))


def random_smooth_loop(p0, radius: float, rng: np.random.Generator, modes: int = 3, samples: int = 65) -> Loop:
    """Closed trigonometric loop through ``p0`` with every coordinate within ``radius`` of it."""
    p0 = np.asarray(p0, dtype=float)
    d = len(p0)
    t = np.linspace(0.0, 1.0, samples)
    coef = rng.normal(size=(modes, 2, d))
    path = np.zeros((samples, d))
    for m in range(1, modes + 1):
        c, s = coef[m - 1]
        path += (np.cos(2 * np.pi * m * t)[:, None] - 1.0) * c[None, :] / m
        path += np.sin(2 * np.pi * m * t)[:, None] * s[None, :] / m
    scale = np.max(np.abs(path))
    path = p0 + path * (radius / scale if scale > 0 else 0.0)
    path[-1] = path[0]
    return Loop([SampledSegment(t, path)], closed=True, base=p0)
