import numpy as np
import pytest
import sympy as sp

from mvf.errors import DomainError
from mvf.groups.catalog import engel, euclidean, heisenberg, heisenberg_heat, kolmogorov
from mvf.groups.fields import (
    PolyVectorField, bracket_table, check_invariance_homogeneity, coordinate_divergence, field_from_sparse,
    field_to_sparse, flow_derivative, group_frame, hormander_rank, is_pyramid, jacobi_residual, lie_bracket,
    stratification_depth,
)
from mvf.kernels.kolmo import KolmogorovSpec


def test_heisenberg_bracket_is_minus_four_ds():
    fr = group_frame(heisenberg_heat(1))
    table = bracket_table(fr)
    assert table[("X1", "X2")].coeffs == (0, 0, -4, 0)
    assert table[("X1", "X3")].is_zero()

    fr2 = group_frame(heisenberg_heat(2))
    t2 = bracket_table(fr2)
    # x1, x2, y1, y2, s, t
    assert t2[("X1", "X3")].coeffs == (0, 0, 0, 0, -4, 0)
    assert t2[("X2", "X4")].coeffs == (0, 0, 0, 0, -4, 0)
    assert t2[("X1", "X2")].is_zero()


def test_kolmogorov_drift_bracket_is_dy():
    fr = group_frame(kolmogorov(KolmogorovSpec.canonical([1, 1])))
    x, y, t = sp.symbols("z0:3")
    assert fr.horizontal[0].coeffs == (1, 0, 0)
    assert fr.drift.coeffs == (0, x, -1)
    assert bracket_table(fr)[("X1", "X2")].coeffs == (0, 1, 0)


@pytest.mark.parametrize("group", [heisenberg_heat(1), heisenberg_heat(2), engel(),
                                   kolmogorov(KolmogorovSpec.canonical([1, 1])),
                                   kolmogorov(KolmogorovSpec.canonical([1, 1, 1]))])
def test_hormander_rank_is_full(group):
    fr = group_frame(group)
    pts = np.random.default_rng(5).standard_normal((20, group.dim))
    assert all(hormander_rank(fr, p, group.depth + 1) == group.dim for p in pts)


def test_rank_without_enough_brackets():
    fr = group_frame(heisenberg(1))
    assert hormander_rank(fr, np.zeros(3), 1) == 2
    assert hormander_rank(fr, np.zeros(3), 2) == 3


def test_left_invariance_and_homogeneity():
    for g in (heisenberg_heat(1), engel(), kolmogorov(KolmogorovSpec.canonical([2, 1]))):
        rep = check_invariance_homogeneity(g, group_frame(g), samples=100, seed=6)
        assert rep.passed


def test_stratification_depth():
    assert stratification_depth(group_frame(heisenberg(1))) == 2
    assert stratification_depth(group_frame(engel())) == 3
    assert stratification_depth(group_frame(euclidean(3))) == 1


def test_jacobi_and_divergence_vanish():
    fr = group_frame(heisenberg_heat(1))
    a, b, c = fr.fields
    assert jacobi_residual(a, b, c).is_zero()
    assert all(coordinate_divergence(f) == 0 for f in fr.fields)
    assert all(is_pyramid(heisenberg_heat(1), f) for f in fr.fields)


def test_non_pyramid_field():
    z = sp.symbols("z0:3")
    assert not is_pyramid(heisenberg(1), PolyVectorField((z[2], 0, 0)))


def test_flow_derivative_matches_field_action():
    X = group_frame(heisenberg(1)).horizontal[0]
    z0 = np.array([0.3, 0.7, 0.1])
    d = flow_derivative(X, lambda z: z[2] + z[0] ** 2, z0)
    # X(s + x²) = 2y + 2x
    assert d == pytest.approx(2 * 0.7 + 2 * 0.3, abs=1e-8)


def test_lie_bracket_of_coordinate_fields():
    a = PolyVectorField.coordinate(2, 0, "A")
    z = sp.symbols("z0:2")
    b = PolyVectorField((0, z[0] ** 2), "B")
    br = lie_bracket(a, b)
    assert br.name == "[A,B]"
    assert br.coeffs == (0, 2 * z[0])


def test_sparse_form_keeps_rationals():
    z = sp.symbols("z0:3")
    f = PolyVectorField((sp.Rational(1, 3) * z[1] ** 2, 0, -z[0] * z[2]), "F")
    cfg = field_to_sparse(f)
    assert cfg["coeffs"][0] == {"0,2,0": "1/3"}
    back = field_from_sparse(cfg)
    assert all(sp.expand(p - q) == 0 for p, q in zip(back.coeffs, f.coeffs))


def test_bad_coefficients_rejected():
    q = sp.Symbol("q")
    with pytest.raises(DomainError):
        PolyVectorField((q, 0))
    z = sp.symbols("z0:2")
    with pytest.raises(DomainError):
        PolyVectorField((sp.sin(z[0]), 0))
