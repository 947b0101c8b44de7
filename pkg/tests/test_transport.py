import numpy as np
import pytest

from holoqc.connection import curvature
from holoqc.holalg import holonomy_algebra, membership
from holoqc.matcore import logm_unitary, unitarity_defect
from holoqc.models import abelian_demo, builtin_two_qubit
from holoqc.transport import (
    SMALL_LOOP_SIGN,
    LineSegment,
    Loop,
    LoopError,
    SampledSegment,
    compose,
    inverse_check,
    random_smooth_loop,
    rect_loop,
    reverse,
    transport,
)

P0 = np.array([0.8, 0.5, 0.6, 0.4])


@pytest.fixture(scope="module")
def conn():
    return builtin_two_qubit().connection()


@pytest.fixture(scope="module")
def abelian():
    return abelian_demo().connection()


def small_loop_error(conn, eps, sign, i=0, j=1):
    G = transport(conn, rect_loop(P0, i, j, eps)).gamma
    F = curvature(conn, P0)[i, j]
    return np.linalg.norm(logm_unitary(G) - sign * eps**2 * F)


def test_degenerate_loop_is_identity(conn):
    assert np.array_equal(transport(conn, rect_loop(P0, 0, 1, 0.0)).gamma, np.eye(4))
    assert np.array_equal(transport(conn, Loop.polygon([P0, P0])).gamma, np.eye(4))


def test_reverse_gives_inverse(conn):
    loop = rect_loop(P0, 0, 2, 0.2)
    assert inverse_check(conn, loop) < 1e-8
    G = transport(conn, compose(loop, reverse(loop))).gamma
    assert np.max(np.abs(G - np.eye(4))) < 1e-8


def test_swapped_rectangle_inverts(conn):
    a = transport(conn, rect_loop(P0, 0, 1, 0.1)).gamma
    b = transport(conn, rect_loop(P0, 1, 0, 0.1)).gamma
    assert np.max(np.abs(a @ b - np.eye(4))) < 1e-8


def test_composition_later_on_left(conn):
    # (r2, r3) and (r3, theta3) loops do not commute at P0
    a = rect_loop(P0, 0, 2, 0.2)
    b = rect_loop(P0, 2, 3, 0.2)
    Ga, Gb = transport(conn, a).gamma, transport(conn, b).gamma
    Gab = transport(conn, compose(a, b)).gamma
    assert np.max(np.abs(Gab - Gb @ Ga)) < 1e-8
    assert np.max(np.abs(Gab - Ga @ Gb)) > 1e-2


def test_reverse_twice_is_samplewise_identity(conn):
    loop = random_smooth_loop(P0, 0.1, np.random.default_rng(0))
    again = reverse(reverse(loop))
    assert np.allclose(again.sample(33), loop.sample(33), atol=1e-12)


def test_abelian_stokes_unit_square(abelian):
    # F_xy = i, so the enclosed flux over the unit square is i
    G = transport(abelian, Loop.polygon([[0, 0], [1, 0], [1, 1], [0, 1]])).gamma
    assert abs(G[0, 0] - np.exp(SMALL_LOOP_SIGN * 1j)) <= 1e-6


@pytest.mark.parametrize(
    "vertices, area",
    [
        ([[0, 0], [2, 0], [0, 1]], 1.0),
        ([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]], 1.0),
        ([[0.1, 0.2], [0.4, 0.2], [0.4, 0.9]], 0.105),
    ],
)
def test_abelian_stokes_convex_polygons(abelian, vertices, area):
    G = transport(abelian, Loop.polygon(vertices)).gamma
    assert abs(G[0, 0] - np.exp(SMALL_LOOP_SIGN * 1j * area)) <= 1e-6


def test_abelian_stokes_smooth_circle(abelian):
    t = np.linspace(0, 1, 401)
    pts = np.column_stack([0.3 * np.cos(2 * np.pi * t), 0.3 * np.sin(2 * np.pi * t)])
    pts[-1] = pts[0]
    G = transport(abelian, Loop([SampledSegment(t, pts)])).gamma
    assert abs(G[0, 0] - np.exp(SMALL_LOOP_SIGN * 1j * np.pi * 0.09)) <= 1e-6


def test_small_loop_sign_and_order(conn):
    eps = np.array([0.1, 0.05, 0.025])
    errs = np.array([small_loop_error(conn, e, SMALL_LOOP_SIGN) for e in eps])
    slope = np.polyfit(np.log(eps), np.log(errs), 1)[0]
    assert slope >= 2.7
    # the opposite sign is only first-order accurate in the area
    wrong = np.array([small_loop_error(conn, e, -SMALL_LOOP_SIGN) for e in eps])
    assert np.polyfit(np.log(eps), np.log(wrong), 1)[0] < 2.3


def test_small_rectangle_cubic_remainder(conn):
    # the corner-based rectangle leaves an O(eps^3) remainder whose coefficient
    # at P0 is about 17 (Frobenius norm) in the (r2, theta2) plane
    err = small_loop_error(conn, 0.05, SMALL_LOOP_SIGN)
    assert err <= 20 * 0.05**3
    assert small_loop_error(conn, 0.05, SMALL_LOOP_SIGN, 0, 3) <= 5e-4


def test_unitarity_drift_at_512_steps(conn):
    rng = np.random.default_rng(1)
    for _ in range(3):
        loop = random_smooth_loop(P0, 0.45, rng)
        res = transport(conn, loop, steps=512, tol=None)
        assert res.unitarity_drift <= 1e-8
        assert unitarity_defect(res.gamma) <= 1e-10


def test_random_loops_stay_in_algebra(conn):
    S = holonomy_algebra(conn, P0).span
    rng = np.random.default_rng(2)
    for _ in range(10):
        G = transport(conn, random_smooth_loop(P0, 0.1, rng)).gamma
        assert membership(S, logm_unitary(G)) <= 1e-6


def test_open_loop_rejected(conn):
    path = Loop.line(P0, P0 + 0.1)
    with pytest.raises(LoopError):
        transport(conn, path)
    res = transport(conn, path, require_closed=False)
    assert unitarity_defect(res.gamma) < 1e-10


def test_loop_validation():
    a = LineSegment(np.zeros(2), np.ones(2))
    b = LineSegment(np.array([2.0, 2.0]), np.zeros(2))
    with pytest.raises(LoopError):
        Loop([a, b])
    with pytest.raises(LoopError):
        Loop([a], closed=True)
    with pytest.raises(LoopError):
        compose(Loop.line([0, 0], [1, 1]), Loop.line([0, 0], [1, 0]))
    with pytest.raises(ValueError):
        transport(abelian_demo().connection(), Loop.polygon([[0, 0], [1, 0], [0, 1]]), steps=4)


def test_loop_json_round_trip():
    t = np.linspace(0, 1, 9)
    pts = np.column_stack([np.sin(np.pi * t), t * (1 - t)])
    loop = compose(Loop([SampledSegment(t, pts)], closed=False), Loop.line(pts[-1], pts[0]))
    again = Loop.from_json(loop.to_json())
    assert again.closed
    assert np.allclose(again.sample(17), loop.sample(17))
    with pytest.raises(LoopError):
        Loop.from_json({"segments": [{"type": "arc"}]})


def test_dimension_mismatch(conn):
    with pytest.raises(LoopError):
        transport(conn, Loop.polygon([[0, 0], [1, 0], [0, 1]]))
