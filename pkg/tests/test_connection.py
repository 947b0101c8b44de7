import math

import numpy as np
import pytest

from holoqc.connection import (
    ConnectionField,
    FrameError,
    all_partials,
    bianchi_residual,
    connection_from_frame,
    covariant_derivative,
    covariant_field,
    curvature,
    curvature_field,
    partial,
)
from holoqc.matcore import antihermitian_defect, unit
from holoqc.models import abelian_demo, builtin_two_qubit

SINH_1 = sum(1 / math.factorial(2 * k + 1) for k in range(12))
E14, E41 = unit(4, 1, 4), unit(4, 4, 1)


@pytest.fixture(scope="module")
def spec():
    return builtin_two_qubit()


@pytest.fixture(scope="module")
def conn(spec):
    return spec.connection()


@pytest.fixture(scope="module")
def fd_conn(spec):
    c = spec.connection()
    return ConnectionField(c.d, c.n, spec.coefficient_array, c.names, None, "fd")


def test_constant_field_has_zero_partials():
    A = np.array([[[1j]], [[2j]]])
    c = ConnectionField(2, 1, lambda p: A)
    assert np.allclose(all_partials(c, [0.3, 0.1]), 0)
    assert curvature(c, [0.3, 0.1]).max_norm() < 1e-12


def test_partial_theta2_of_A_r2(conn, fd_conn):
    p = np.array([0.7, 0.4, 0.2, -0.3])
    expected = 1j * (np.exp(-1j * p[1]) * E14 + np.exp(1j * p[1]) * E41)
    assert np.allclose(partial(conn, p, 1, 0), expected, atol=1e-12)
    assert np.allclose(partial(fd_conn, p, 1, 0), expected, atol=1e-9)


def test_partial_r2_of_A_theta3_at_origin(fd_conn):
    d = partial(fd_conn, [0.0, 0.4, 0.3, 0.2], 0, 3)
    off = d.copy()
    np.fill_diagonal(off, 0)
    assert np.max(np.abs(off)) < 1e-9


def test_analytic_partials_match_fd(spec, conn, fd_conn):
    for p in spec.sample_points(10, seed=3):
        assert np.max(np.abs(all_partials(conn, p) - all_partials(fd_conn, p))) < 1e-8


def test_curvature_vanishes_at_r2_zero(conn):
    F = curvature(conn, [0.0, 0.3, 0.5, 1.0])
    assert F.max_norm() < 1e-12


def test_curvature_r2_theta2(conn, fd_conn):
    F = curvature(conn, [0.5, 0.3, 0.2, 0.1])[0, 1]
    assert np.allclose(F, 2j * SINH_1 * np.diag([0, 1, 1, 2]), atol=1e-12)
    assert 2 * SINH_1 == pytest.approx(2.3504, abs=1e-4)
    F_fd = curvature(fd_conn, [0.5, 0.3, 0.2, 0.1])[0, 1]
    assert np.allclose(F_fd, F, atol=1e-9)


def test_abelian_curvature():
    c = abelian_demo().connection()
    F = curvature(c, [0.4, -0.2])
    assert F[0, 1] == pytest.approx(np.array([[1j]]))
    assert F[1, 0] == pytest.approx(np.array([[-1j]]))


def test_curvature_antisymmetry_and_antihermitian(spec, conn):
    for p in spec.sample_points(50, seed=1):
        F = curvature(conn, p)
        for i in range(4):
            assert np.all(F[i, i] == 0)
            for j in range(4):
                assert np.array_equal(F[i, j], -F[j, i])
                assert antihermitian_defect(F[i, j]) < 1e-8


def test_covariant_derivative_theta2(spec, conn):
    field = curvature_field(conn, 0, 1)
    for p in spec.sample_points(5, seed=2):
        s, t = np.sinh(2 * p[0]), p[1]
        expected = 2 * s**2 * (-np.exp(-1j * t) * E14 + np.exp(1j * t) * E41)
        assert np.max(np.abs(covariant_derivative(conn, p, field, 1) - expected)) < 1e-6


def _closed_form_ddf(p):
    """D_theta2 of the closed-form D_theta2 F_r2theta2, by direct matrix algebra."""
    r, t = p[0], p[1]
    S = np.sinh(2 * r)
    G = 2 * S**2 * (-np.exp(-1j * t) * E14 + np.exp(1j * t) * E41)
    dG = 2 * S**2 * (1j * np.exp(-1j * t) * E14 + 1j * np.exp(1j * t) * E41)
    A_t = 0.5j * S * (np.exp(-1j * t) * E14 + np.exp(1j * t) * E41)
    A_t = A_t + 0.5j * (np.cosh(2 * r) - 1) * np.diag([1, 2, 2, 3])
    return dG + A_t @ G - G @ A_t


def test_second_covariant_derivative_diagonal(spec, conn):
    inner = covariant_field(conn, curvature_field(conn, 0, 1), 1)
    for p in spec.sample_points(5, seed=4):
        got = covariant_derivative(conn, p, inner, 1)
        oracle = _closed_form_ddf(p)
        assert np.max(np.abs(got - oracle)) < 1e-6
        diag = np.diag(got)
        S3 = np.sinh(2 * p[0]) ** 3
        assert np.allclose(diag, 2j * S3 * np.array([1, 0, 0, -1]), atol=1e-6)
        # the alternative sinh(r2)^3 reading is far off at these points
        assert abs(diag[0] - 2j * np.sinh(p[0]) ** 3) > 1e-3


def test_covariant_derivative_of_zero_field(conn):
    zero = lambda p: np.zeros((4, 4), complex)  # noqa: E731
    assert np.allclose(covariant_derivative(conn, [0.5, 0.1, 0.2, 0.3], zero, 2), 0)


def test_bianchi_identity(spec, conn):
    for p in spec.sample_points(20, seed=5):
        assert bianchi_residual(conn, p) <= 1e-5


def test_constant_gauge_covariance(spec, conn):
    rng = np.random.default_rng(6)
    Z = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    g, _ = np.linalg.qr(Z)
    gconn = conn.gauge_transformed(g)
    for p in spec.sample_points(5, seed=6):
        F, G = curvature(conn, p), curvature(gconn, p)
        for i in range(4):
            for j in range(4):
                assert np.max(np.abs(G[i, j] - g.conj().T @ F[i, j] @ g)) < 1e-8


def test_frame_connection_trivial_examples():
    const = connection_from_frame(lambda p: np.eye(3)[:, :2], 2, 2)
    assert np.allclose(const.coefficients([0.1, 0.2]), 0)
    phase = connection_from_frame(lambda p: np.array([[np.exp(1j * p[0])]]), 1, 1, names=["theta"])
    assert phase.coefficients([0.7])[0] == pytest.approx(np.array([[1j]]), abs=1e-9)
    assert phase.projection_residual() < 1e-9


def test_frame_connection_rejects_non_orthonormal():
    bad = connection_from_frame(lambda p: np.array([[1.0], [1.0]]), 1, 1)
    with pytest.raises(FrameError):
        bad.coefficients([0.0])


def test_frame_connection_rotating_plane():
    # V(t) = [cos t, sin t, 0; 0, 0, 1]^T rotates the first column within a real plane: A_t = 0
    def frame(p):
        c, s = np.cos(p[0]), np.sin(p[0])
        return np.array([[c, 0], [s, 0], [0, 1]], complex)

    conn = connection_from_frame(frame, 1, 2)
    assert np.allclose(conn.coefficients([0.4]), 0, atol=1e-10)
