import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbnlab import occupation as occ
from rbnlab.paths import SamplePath, generate_fbm


def test_constant_path_dirac():
    p = SamplePath.from_values(np.zeros(101))
    g = occ.SpatialGrid(-1.0, 1.0, 10)
    mu = occ.occupation_measure(p, g, 100)
    assert mu.sum() == pytest.approx(1.0)
    assert mu[g.bin_index(np.array([0.0]))[0]] == pytest.approx(1.0)


def test_linear_path_uniform(linear_path):
    g = occ.SpatialGrid(0.0, 1.0, 10)
    mu = occ.occupation_measure(linear_path, g, linear_path.n_steps)
    assert np.allclose(mu, 0.1, atol=1.0 / 1024)


def test_outside_grid_is_an_error():
    p = SamplePath.from_values(np.linspace(0, 3, 11))
    with pytest.raises(ValueError, match="outside the grid"):
        occ.local_time(p, occ.SpatialGrid(-1.0, 1.0, 8), 10)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 0.9), st.integers(0, 10_000), st.integers(1, 256))
def test_local_time_mass_is_elapsed_time(H, seed, k):
    p = generate_fbm(256, 1.0, H, seed)
    g = occ.SpatialGrid.covering(p.values, 64)
    lt = occ.local_time(p, g, [k, 256])
    assert np.allclose(lt.mass(), [k / 256, 1.0])
    assert np.all(lt.increment(0, 1) >= 0)


def test_kernel_smoothing_preserves_mass():
    p = generate_fbm(1 << 12, 1.0, 0.3, 1)
    g = occ.SpatialGrid.covering(p.values, 256, pad=0.3)
    lt = occ.local_time(p, g, p.n_steps, smoothing="kernel")
    assert lt.mass()[0] == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("H", [0.25, 0.5])
def test_occupation_formula_cos(H):
    p = generate_fbm(1 << 16, 1.0, H, 0)
    g = occ.SpatialGrid.covering(p.values, 512)
    assert occ.occupation_formula_error(p, g, np.cos)["rel_error"] < 1e-3


def test_averaged_field_routes_agree():
    p = generate_fbm(1 << 14, 1.0, 0.25, 3)
    g = occ.SpatialGrid.covering(p.values, 256)
    f = occ.truncated_power(0.4, 1e3, envelope=False)
    a = occ.averaged_field(p, f, 0, p.n_steps, g, "quadrature").values
    b = occ.averaged_field(p, f, 0, p.n_steps, g, "convolution").values
    assert np.abs(a - b).max() <= 5 * math.sqrt(g.dx)


def test_cell_kernel_constant_function():
    k = occ.cell_average_kernel(lambda x: np.ones_like(x), 0.1, 5)
    assert k.shape == (9,) and np.allclose(k, 1.0)


def test_unfinite_f_names_argument():
    p = generate_fbm(64, 1.0, 0.3, 0)
    g = occ.SpatialGrid.covering(p.values, 16)
    with pytest.raises(ValueError, match="not finite at argument"):
        occ.averaged_field(p, lambda x: np.where(x > 0, 1.0, np.inf), 0, 64, g)


def test_region_arithmetic():
    assert occ.regularity_exponents(0.25, 2)[0] == pytest.approx(1.5)
    assert occ.RegularityRegion(0.25, 2).gamma_max(1.0) == pytest.approx(0.625)
    assert occ.RegularityRegion(0.1, 1).lambda_max == pytest.approx(4.0)
    assert occ.RegularityRegion(0.999999, 2).lambda_max == pytest.approx(0.0, abs=1e-5)


def test_admissibility_values():
    a = occ.assumption_check(0.2, 1.0)
    assert a.H_bound == 0.25 and a.gamma0_bound == 0.875
    b = occ.assumption_check(0.2, 4.0)
    assert b.H_bound == pytest.approx(2 / 7)
    assert b.gamma0_bound == pytest.approx(6 / 7)
    assert not occ.assumption_check(0.3, 4.0).admissible
    assert occ.assumption_check(0.2, 2.0, 0.8).admissible
    with pytest.raises(ValueError):
        occ.assumption_check(0.2, 0.5)


@given(st.floats(1.0, 50.0))
def test_admissibility_bounds_monotone_in_p(p):
    a, b = occ.assumption_check(0.1, p), occ.assumption_check(0.1, p * 1.5)
    assert a.H_bound <= b.H_bound and a.gamma0_bound >= b.gamma0_bound
    assert a.H_bound <= 2 / 7 + 1e-15 and a.gamma0_bound >= 6 / 7 - 1e-15


def test_truncated_power_cap():
    f = occ.truncated_power(0.4, 1e3, envelope=False)
    assert f(np.array([0.0]))[0] == 1e3
    assert f(np.array([2.0]))[0] == pytest.approx(2.0 ** -0.4)


def test_lp_norm_gaussian():
    assert occ.lp_norm(lambda x: np.exp(-x * x), 2.0) == pytest.approx((math.pi / 2) ** 0.25)


def test_regularity_check_refuses_fine_levels():
    with pytest.raises(ValueError):
        occ.averaged_field_regularity_check(np.cos, 0.2, 2, 0.5, n_steps=1 << 10, levels=(1, 8))
