import numpy as np
import pytest
import sympy as sp

from mvf.errors import ConfigError, DimensionError, DomainError
from mvf.groups.core import coordinate_symbols
from mvf.integrate.estimate import MCConfig
from mvf.integrate.montecarlo import time_quadrature
from mvf.kernels.geometry import envelope
from mvf.kernels.kolmo import KolmogorovSpec, OperatorSpec
from mvf.meanvalue.catalog import bump, bump_from_id, solution_from_id
from mvf.meanvalue.formulas import (
    KernelEval, grid_quadrature, kernel_eval, nested_volume_oracle, nested_weight_quadrature,
    surface_formula_rhs, volume_formula_rhs, volume_weights,
)
from mvf.meanvalue.identities import apply_operator, divergence_identity_residual, random_polynomial, reproduction_limit

HEAT1 = OperatorSpec(KolmogorovSpec.heat(1))
KOLMO = OperatorSpec(KolmogorovSpec.canonical([1, 1]))


def volume(op, sid, pole, r=1.0, alpha=2.0, samples=40_000, seed=21, guard_rel=None, **kw):
    sol = solution_from_id(op, sid)
    pole = np.asarray(pole, dtype=float)
    ball = envelope(op, pole, r)
    sol.check_admissible(ball)
    cfg = MCConfig(samples=samples, seed=seed)
    if guard_rel is not None:
        cfg = cfg.model_copy(update={"guard_rel": guard_rel})
    return volume_formula_rhs(KernelEval(op, pole, alpha), sol.u, sol.f, ball, cfg, truth=sol.truth(pole), **kw)


@pytest.mark.parametrize("op,sid,pole", [
    (HEAT1, "const", [0.0, 0.0]),
    (HEAT1, "x2+2t", [0.3, 0.5]),
    (HEAT1, "gamma_pole(0.1,-0.5)", [0.0, 0.0]),
    (KOLMO, "y+xt", [0.2, -0.1, 0.0]),
    (KOLMO, "x2+2t", [0.1, 0.3, 0.2]),
    (KOLMO, "expr(x2)", [0.2, -0.1, 0.0]),
    (KOLMO, "gamma_pole(0.2,0.1,-1)", [0.0, 0.0, 0.0]),
])
def test_volume_formula_reproduces_u(op, sid, pole):
    rep = volume(op, sid, pole)
    assert rep.passed
    assert rep.error <= max(1e-3, 3 * rep.estimate.std_error)


def test_volume_formula_uses_source_term():
    rep = volume(KOLMO, "expr(x2)", [0.2, -0.1, 0.0])
    assert set(rep.correction_terms) == {"f"}
    assert rep.u_at_pole == pytest.approx(-0.1)


def test_volume_formula_with_zero_order_term():
    op = OperatorSpec(KolmogorovSpec.heat(1), c=-0.3)
    rep = volume(op, "const", [0.0, 0.0], abs_tol=0.02)
    assert "c" in rep.correction_terms
    assert rep.passed


@pytest.mark.parametrize("alpha", [1.5, 3.0])
def test_volume_formula_alpha_family(alpha):
    rep = volume(HEAT1, "x2+2t", [0.3, 0.5], alpha=alpha, abs_tol=0.02, guard_rel=1e-16)
    assert rep.alpha == alpha
    assert rep.passed


@pytest.mark.parametrize("op,sid,pole", [
    (HEAT1, "const", [0.0, 0.0]),
    (KOLMO, "y+xt", [0.2, -0.1, 0.0]),
])
def test_surface_formula_reproduces_u(op, sid, pole):
    sol = solution_from_id(op, sid)
    pole = np.asarray(pole, dtype=float)
    ball = envelope(op, pole, 1.0)
    rep = surface_formula_rhs(KernelEval(op, pole), sol.u, sol.f, ball, MCConfig(samples=20_000, seed=22),
                              truth=sol.truth(pole))
    assert not rep.flagged
    assert rep.error <= max(1e-2, 3 * rep.estimate.std_error)


def test_formula_argument_checks():
    ball = envelope(HEAT1, [0.0, 0.0], 1.0)
    sol = solution_from_id(HEAT1, "const")
    cfg = MCConfig(samples=1000, seed=0)
    with pytest.raises(DomainError):
        KernelEval(HEAT1, [0.0, 0.0], alpha=1.0)
    with pytest.raises(DomainError):
        surface_formula_rhs(KernelEval(HEAT1, [0.0, 0.0], 3.0), sol.u, sol.f, ball, cfg)
    with pytest.raises(DomainError):
        volume_formula_rhs(KernelEval(HEAT1, [0.5, 0.0]), sol.u, sol.f, ball, cfg)
    with pytest.raises(DomainError):
        grid_quadrature(envelope(KOLMO, [0.0, 0.0, 0.0], 1.0), lambda p: np.ones(len(p)))


def test_kernels_vanish_above_the_pole():
    k = KernelEval(KOLMO, [0.0, 0.0, 0.0])
    assert kernel_eval(k, [0.0, 0.0, 0.5]) == (0.0, 0.0)
    K, M = kernel_eval(k, [0.3, 0.1, -0.1])
    assert K > 0 and M > 0


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
def test_collapsed_weights_match_nested_integral(alpha):
    gam = np.array([0.5, 2.0, 5.0, 50.0])
    wf, wc = volume_weights(gam, 1.0, alpha)
    for g, a, b in zip(gam, wf, wc):
        assert a == pytest.approx(nested_weight_quadrature(g, 1.0, alpha, "f"), rel=1e-10, abs=1e-14)
        assert b == pytest.approx(nested_weight_quadrature(g, 1.0, alpha, "c"), rel=1e-10, abs=1e-14)
    assert wf[0] == 0.0 and wc[0] == 0.0
    with pytest.raises(DomainError):
        nested_weight_quadrature(2.0, 1.0, 2.0, "x")


def test_grid_quadrature_agrees_with_time_quadrature():
    ball = envelope(HEAT1, [0.2, 0.1], 1.0)
    assert grid_quadrature(ball, lambda p: np.ones(len(p))) == pytest.approx(time_quadrature(ball), rel=1e-3)


@pytest.mark.parametrize("alpha", [2.0, 3.0])
def test_nested_and_collapsed_volume_terms_agree(alpha):
    ball = envelope(HEAT1, [0.0, 0.0], 1.0)
    nested, collapsed = nested_volume_oracle(ball, lambda p: 1.0 + p[:, 0] ** 2, alpha=alpha)
    assert collapsed > 0
    assert nested == pytest.approx(collapsed, rel=1e-3)


@pytest.mark.parametrize("op", [HEAT1, KOLMO, OperatorSpec(KolmogorovSpec.heat(2), b=(0.5, -0.25), c=-0.5),
                                OperatorSpec(KolmogorovSpec.canonical([1, 1, 1]), diffusion=2.0)])
def test_divergence_identity(op):
    for p in range(4):
        u = random_polynomial(op.dim, 3, seed=23, key=2 * p)
        v = random_polynomial(op.dim, 3, seed=23, key=2 * p + 1)
        assert divergence_identity_residual(op, u, v, seed=23) <= 1e-10


def test_apply_operator_examples():
    x, y, t = coordinate_symbols(3, "z")
    assert apply_operator(KOLMO, y + x * t) == 0
    assert apply_operator(KOLMO, x ** 2 + 2 * t) == 0
    assert apply_operator(KOLMO, y) == x
    assert apply_operator(KOLMO, y, adjoint=True) == -x
    h, s = coordinate_symbols(2, "z")
    assert apply_operator(HEAT1, h ** 2 + 2 * s) == 0
    assert sp.expand(apply_operator(OperatorSpec(KolmogorovSpec.heat(1), c=-0.5), sp.Integer(2))) == -1


@pytest.mark.parametrize("op,xi", [(HEAT1, [0.2]), (KOLMO, [0.0, 0.0]), (KOLMO, [0.3, -0.2])])
def test_reproduction_limit(op, xi):
    rep = reproduction_limit(op, bump(1.0), xi, [0.1, 0.01, 0.001, 0.0001])
    assert rep.final <= 1e-3
    assert rep.error[0] > rep.final
    assert [row["eps"] for row in rep.rows()] == rep.eps


def test_reproduction_limit_arguments():
    with pytest.raises(DomainError):
        reproduction_limit(KOLMO, bump(1.0), [0.0, 0.0], [0.1, 0.0])
    with pytest.raises(DimensionError):
        reproduction_limit(KOLMO, bump(1.0), [0.0], [0.1])


def test_solution_catalog():
    sol = solution_from_id(KOLMO, "expr(x2)")
    assert sol.f(np.array([[0.5, 0.0, 0.0]]))[0] == pytest.approx(0.5)
    assert solution_from_id(KOLMO, "y+xt").f is None
    assert solution_from_id(HEAT1, "x_1").truth([0.4, 0.0]) == pytest.approx(0.4)
    assert solution_from_id(HEAT1, "const(2.5)").is_constant
    assert solution_from_id(HEAT1, "x²+2t").truth([1.0, 0.5]) == pytest.approx(2.0)
    for bad in ("nope", "x_2", "expr(sin(x1))", "expr(x3)", "gamma_pole(0.1)", "const(1,2)", "const(a)"):
        with pytest.raises(ConfigError):
            solution_from_id(HEAT1, bad)
    with pytest.raises(ConfigError):
        solution_from_id(HEAT1, "y+xt")


def test_gamma_pole_must_sit_below_the_ball():
    ball = envelope(HEAT1, [0.0, 0.0], 1.0)
    solution_from_id(HEAT1, "gamma_pole(0.1,-0.5)").check_admissible(ball)
    with pytest.raises(DomainError):
        solution_from_id(HEAT1, "gamma_pole(0.1,-0.05)").check_admissible(ball)


def test_bumps():
    phi = bump_from_id("bump(0.5)")
    vals = phi(np.array([[0.0], [0.25], [0.5], [2.0]]))
    assert vals[0] == pytest.approx(np.exp(-1.0))
    assert 0.0 < vals[1] < vals[0]
    assert vals[2] == 0.0 and vals[3] == 0.0
    assert np.all(bump_from_id("zero")(np.ones((3, 2))) == 0.0)
    for bad in ("box", "bump(1,2)", "bump()", "bump(0)", "bump(-1)"):
        with pytest.raises(ConfigError):
            bump_from_id(bad)
    with pytest.raises(DomainError):
        bump(0.0)
