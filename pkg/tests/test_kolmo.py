import math

import numpy as np
import pytest
import sympy as sp
from scipy.integrate import quad_vec
from scipy.linalg import expm

from mvf.errors import DimensionError, DomainError, NonFiniteError, StencilDomainError
from mvf.kernels.kolmo import (
    KolmogorovSpec, OperatorSpec, below_pole, chapman_kolmogorov, covariance, covariance_symbolic,
    expm_nilpotent, forward_gamma, gamma_eval, hermite_grid, homogeneity_residual, normalization_error, pde_residual,
)


def kolmo(*m_dims, **kw):
    return OperatorSpec(KolmogorovSpec.canonical(m_dims), **kw)


def test_determinant_of_covariance_symbolic():
    t = sp.Symbol("t", positive=True)
    C = covariance_symbolic(KolmogorovSpec.canonical([1, 1]), t)
    assert sp.simplify(C.det() - t ** 4 / 12) == 0
    assert sp.simplify(C[0, 1] + t ** 2 / 2) == 0


def test_dimensions():
    k = KolmogorovSpec.canonical([1, 1])
    assert (k.N, k.kappa, k.Q, k.Q_P) == (2, 1, 4, 6)
    assert KolmogorovSpec.heat(3).Q_P == 5
    assert KolmogorovSpec.canonical([2, 1, 1]).nilpotency_holds()


@pytest.mark.parametrize("m_dims", [(1, 1), (2, 1), (1, 1, 1)])
def test_expm_matches_scipy(m_dims):
    k = KolmogorovSpec.canonical(m_dims)
    for t in (-1.3, 0.2, 2.5):
        np.testing.assert_allclose(expm_nilpotent(k, t), expm(-t * k.B), rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("m_dims", [(1, 1), (2, 1), (1, 1, 1)])
def test_covariance_matches_direct_integral(m_dims):
    op = kolmo(*m_dims)
    k = op.kspec
    for t in (0.3, 1.0, 2.7):
        direct, _ = quad_vec(lambda s: expm(-s * k.B) @ k.J @ expm(-s * k.B).T, 0.0, t, epsabs=1e-13, epsrel=1e-12)
        np.testing.assert_allclose(covariance(op, t), direct, rtol=1e-9, atol=1e-13)


def test_unit_time_factorization_agrees_with_covariance():
    op = kolmo(1, 1, diffusion=2.0)
    for s in (1e-8, 1e-3, 0.4, 6.0):
        np.testing.assert_allclose(op.kernel_cov(s), 2.0 * covariance(op, s), rtol=1e-10)


def test_heat_kernel_closed_form():
    op = OperatorSpec(KolmogorovSpec.heat(1))
    x, t = 0.7, 0.3
    expected = math.exp(-x * x / (4 * t)) / math.sqrt(4 * math.pi * t)
    assert float(gamma_eval(op, [0.0, 0.0], [x, t]).value) == pytest.approx(expected, rel=1e-13)


def test_gamma_vanishes_at_and_above_the_pole():
    op = kolmo(1, 1)
    ev = gamma_eval(op, [[0.1, 0.2, 1.0], [0.0, 0.0, 0.0]], [0.0, 0.0, 0.0])
    np.testing.assert_array_equal(ev.value, [0.0, 0.0])
    np.testing.assert_array_equal(ev.hgrad, 0.0)


def test_gradient_against_finite_differences():
    op = kolmo(1, 1, diffusion=1.5)
    pole = np.array([0.2, -0.1, 0.0])
    z = np.array([0.1, 0.05, -0.4])
    ev = gamma_eval(op, z, pole)
    h = 1e-6

    def g(p):
        return float(gamma_eval(op, p, pole, grad=False).value)

    num = np.array([(g(z + h * e) - g(z - h * e)) / (2 * h) for e in np.eye(3)])
    np.testing.assert_allclose(ev.grad_x, num[:2], rtol=1e-6)
    drift = (op.kspec.B @ z[:2]) @ num[:2] - num[2]
    assert float(ev.hgrad[0]) == pytest.approx(num[0], rel=1e-6)
    assert float(ev.hgrad[1]) == pytest.approx(drift, rel=1e-6)


@pytest.mark.parametrize("op", [
    OperatorSpec(KolmogorovSpec.heat(2), b=(0.3, -0.2), c=-0.4),
    kolmo(1, 1),
    kolmo(2, 1, diffusion=[[2.0, 0.3], [0.3, 1.0]]),
    kolmo(1, 1, 1, diffusion=0.5),
])
def test_gaussian_normalization(op):
    rng = np.random.default_rng(7)
    for _ in range(5):
        pole = rng.standard_normal(op.dim)
        s = float(rng.uniform(0.05, 3.0))
        assert normalization_error(op, pole, s) <= 1e-10


@pytest.mark.parametrize("op", [kolmo(1, 1), kolmo(2, 1, diffusion=[[2.0, 0.3], [0.3, 1.0]]),
                                OperatorSpec(KolmogorovSpec.heat(2), c=-0.2)])
def test_adjoint_pde_residual_below_pole(op):
    pole = np.zeros(op.dim)
    rng = np.random.default_rng(8)
    pts = []
    for s in rng.uniform(0.2, 1.0, 20):
        xi = expm_nilpotent(op.kspec, -s) @ (rng.standard_normal(op.N) * op.scale_vector(s))
        pts.append(np.append(0.5 * xi, -s))
    u = lambda z: gamma_eval(op, z, pole, grad=False).value
    res = pde_residual(op, u, np.array(pts), adjoint=True, domain=below_pole(pole), relative=True)
    assert np.max(res) <= 1e-5


def test_forward_pde_residual_above_pole():
    op = kolmo(1, 1)
    zeta = np.array([0.1, 0.0, -1.0])
    u = forward_gamma(op, zeta)
    z = np.array([0.2, 0.3, -0.4])
    assert pde_residual(op, u, z, adjoint=False, relative=True) <= 1e-5


def test_stencil_leaving_domain_raises():
    op = kolmo(1, 1)
    pole = np.zeros(3)
    u = lambda z: gamma_eval(op, z, pole, grad=False).value
    with pytest.raises(StencilDomainError):
        pde_residual(op, u, [0.0, 0.0, -1e-3], h=1e-3, domain=below_pole(pole))


def test_parabolic_homogeneity():
    op = kolmo(1, 1)
    rng = np.random.default_rng(9)
    t = rng.uniform(0.2, 2.0, 30)
    z = np.column_stack([rng.standard_normal((30, 2)) * op.scale_vector(t), t])
    for lam in (0.5, 2.0, 3.0):
        assert np.max(homogeneity_residual(op, z, lam)) <= 1e-9


def test_chapman_kolmogorov():
    op = kolmo(1, 1)
    est, truth = chapman_kolmogorov(op, [0.3, 0.1, 1.0], [0.0, 0.0, 0.0], 0.5, samples=20000, seed=1)
    assert abs(est.value - truth) <= 0.01 * truth + 3 * est.std_error


def test_operator_validation():
    k = KolmogorovSpec.canonical([1, 1])
    with pytest.raises(DomainError):
        OperatorSpec(k, c=0.5)
    with pytest.raises(DomainError):
        OperatorSpec(k, diffusion=-1.0)
    with pytest.raises(DomainError):
        OperatorSpec(KolmogorovSpec.canonical([2, 1]), diffusion=[[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(DomainError):
        OperatorSpec(k, b=(0.1,))
    with pytest.raises(DomainError):
        KolmogorovSpec.from_blocks([2, 1], [[[0, 0]]])
    with pytest.raises(DomainError):
        KolmogorovSpec.canonical([1, 2])


def test_point_validation():
    op = kolmo(1, 1)
    with pytest.raises(DimensionError):
        gamma_eval(op, [0.0, 0.0], [0.0, 0.0, 1.0])
    with pytest.raises(NonFiniteError):
        gamma_eval(op, [0.0, float("nan"), 0.0], [0.0, 0.0, 1.0])


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_hermite_grid_moments(dim):
    nodes, weights = hermite_grid(dim, 6)
    assert nodes.shape == (6 ** dim, dim)
    assert weights.sum() == pytest.approx((2 * np.pi) ** (dim / 2), rel=1e-12)
    second = weights @ nodes ** 2 / weights.sum()
    np.testing.assert_allclose(second, np.ones(dim), rtol=1e-12)
