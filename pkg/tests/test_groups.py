import numpy as np
import pytest
import sympy as sp

from mvf.errors import ConfigError, DimensionError, DomainError
from mvf.groups.catalog import BUNDLED, engel, group_from_id, heat, heisenberg, heisenberg_heat, kolmogorov
from mvf.groups.core import (
    GroupSpec, calibrate_eps, check_axioms, compose, coordinate_symbols, dilate, dilation_matrix, dist_inf,
    group_from_config, group_to_config, inverse, norm_inf,
)
from mvf.kernels.kolmo import KolmogorovSpec


@pytest.mark.parametrize("gid", sorted(BUNDLED) + ["kolmogorov(2,1)"])
def test_bundled_groups_satisfy_axioms(gid):
    rep = check_axioms(group_from_id(gid), samples=1000, seed=0)
    assert rep.passed
    assert max(rep.associativity, rep.identity, rep.inverse, rep.automorphism) <= 1e-9


def test_non_bilinear_perturbation_breaks_associativity():
    z, w = coordinate_symbols(2, "z"), coordinate_symbols(2, "w")
    bad = GroupSpec("bad", (1, 2), (z[0] + w[0], z[1] + w[1] + z[0] ** 2))
    rep = check_axioms(bad, samples=200, seed=1)
    assert not rep.passed
    assert rep.associativity > 1e-3


def test_kolmogorov_law_values():
    g = kolmogorov(KolmogorovSpec.canonical([1, 1]))
    np.testing.assert_allclose(compose(g, [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]), [1.0, -1.0, 1.0])
    np.testing.assert_allclose(compose(g, [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]), [1.0, 1.0, -1.0])


def test_heisenberg_law_value():
    g = heisenberg(1)
    # s = s + s' + 2(x'y − xy')
    np.testing.assert_allclose(compose(g, [1.0, 2.0, 0.0], [3.0, 5.0, 0.0]), [4.0, 7.0, 2.0])


def test_inverse_on_stacks():
    g = engel()
    z = np.random.default_rng(3).standard_normal((50, g.dim)) * 3.0
    np.testing.assert_allclose(compose(g, z, inverse(g, z)), 0.0, atol=1e-8)
    np.testing.assert_allclose(compose(g, inverse(g, z), z), 0.0, atol=1e-8)


def test_homogeneous_dimensions():
    assert heisenberg_heat(1).homogeneous_dim == 5
    assert heisenberg(2).homogeneous_dim == 6
    assert kolmogorov(KolmogorovSpec.canonical([1, 1])).homogeneous_dim == 4
    assert engel().homogeneous_dim == 7
    assert heat(3).layer_dims == (4,)


def test_norm_is_one_homogeneous():
    g = heisenberg_heat(1)
    z = np.array([0.3, -1.2, 0.7, 0.4])
    for lam in (0.5, 2.0, 7.0):
        assert norm_inf(g, dilate(g, lam, z)) == pytest.approx(lam * norm_inf(g, z), rel=1e-12)


def test_dilation_and_shape_errors():
    g = heat(1)
    with pytest.raises(DomainError):
        dilate(g, 0.0, [1.0, 1.0])
    with pytest.raises(DimensionError):
        compose(g, [1.0, 2.0, 3.0], [0.0, 0.0])


def test_group_spec_validation():
    z, w = coordinate_symbols(2, "z"), coordinate_symbols(2, "w")
    with pytest.raises(DomainError):
        GroupSpec("gap", (1, 3), (z[0] + w[0], z[1] + w[1]))
    with pytest.raises(DimensionError):
        GroupSpec("short", (1, 1), (z[0] + w[0],))


def test_config_keeps_the_law():
    g = heisenberg_heat(1)
    back = group_from_config(group_to_config(g))
    assert back.dilation_exps == g.dilation_exps
    assert all(sp.expand(a - b) == 0 for a, b in zip(back.law, g.law))
    assert back.time_index == g.time_index


def test_group_ids():
    assert group_from_id("heat(2)").dim == 3
    assert group_from_id(" kolmogorov( 1, 1 ) ").dim == 3
    assert group_from_id("heisenberg").dim == 3
    assert group_from_id("kolmogorov_chain").name == group_from_id("kolmogorov(1,1,1)").name
    for bad in ("nope", "heat()", "kolmogorov", "heat(1)x"):
        with pytest.raises(ConfigError):
            group_from_id(bad)


def test_calibrate_eps_picks_fewest_violations():
    cal = calibrate_eps(heisenberg(1), grid=(0.5, 1.0), samples=200, seed=4)
    assert len(cal.candidates) == 2
    assert cal.best.violations == min(c.violations for c in cal.candidates)
    assert cal.best.eps_weights[0] == 1.0


def test_dilation_determinant_is_lambda_to_q():
    for g in (heisenberg_heat(1), engel(), kolmogorov(KolmogorovSpec.canonical([1, 1]))):
        assert np.linalg.det(dilation_matrix(g, 1.7)) == pytest.approx(1.7 ** g.homogeneous_dim, rel=1e-12)


def test_distance_is_left_invariant():
    g = heisenberg_heat(1)
    rng = np.random.default_rng(5)
    z, v, w = rng.standard_normal((3, 40, g.dim))
    np.testing.assert_allclose(dist_inf(g, compose(g, w, z), compose(g, w, v)), dist_inf(g, z, v), rtol=1e-9)
    np.testing.assert_allclose(dist_inf(g, z, v), dist_inf(g, v, z), rtol=1e-12)
    assert dist_inf(g, z[0], z[0]) == 0.0
