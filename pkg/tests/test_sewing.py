import math

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings, strategies as st

from rbnlab.paths import generate_fbm
from rbnlab.sewing import (Germ, SewingError, delta, germ_norms, richardson, sew,
                           sewing_stability_check, volterra_sew, young_germ)


def test_delta_riemann_germ():
    g = Germ(lambda s, t: s * (t - s))
    assert float(delta(g, 0.0, 0.5, 1.0)) == pytest.approx(-0.25)


def test_delta_square_germ():
    # (t-s)^2 - (u-s)^2 - (t-u)^2 = 2 (u-s)(t-u)
    g = Germ(lambda s, t: (t - s) ** 2)
    assert float(delta(g, 0.0, 0.5, 1.0)) == pytest.approx(0.5)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_delta_square_closed_form(a, b, c):
    s, u, t = sorted((a, b, c))
    g = Germ(lambda s, t: (t - s) ** 2)
    assert float(delta(g, s, u, t)) == pytest.approx(2 * (u - s) * (t - u), abs=1e-12)


def test_delta_order_error():
    with pytest.raises(ValueError):
        delta(Germ(lambda s, t: t - s), 0.5, 0.2, 1.0)


def test_diagonal_required():
    with pytest.raises(ValueError, match="diagonal"):
        Germ(lambda s, t: t - s + 1.0)


def test_germ_norms_square():
    na, nb = germ_norms(Germ(lambda s, t: (t - s) ** 2), 2.0, 2.0, depth=4)
    assert nb == pytest.approx(0.5)
    assert na == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.5, 4))
def test_additive_germ_exact(a, b, T):
    F = lambda t: a * t ** 3 + b * np.sin(t)
    res = sew(Germ.additive(F, T), tol=1e-14)
    assert res.converged
    assert float(res.value) == pytest.approx(F(T) - F(0.0), abs=1e-12)


def test_additivity_of_output():
    res = sew(Germ(lambda s, t: s * (t - s)), max_level=16, tol=1e-14)
    assert float(res.increment(0, len(res.times) - 1)) == pytest.approx(0.5, abs=1e-12)
    mid = len(res.times) // 2
    assert float(res.increment(0, mid) + res.increment(mid, len(res.times) - 1)) == \
        pytest.approx(float(res.value), abs=1e-15)
    assert float(res.values[mid]) == pytest.approx(0.125, abs=1e-10)


def test_riemann_limit_level16():
    res = sew(Germ(lambda s, t: s * (t - s), beta_hint=2.0), max_level=16, tol=1e-14)
    assert abs(float(res.value) - 0.5) < 1e-8
    assert res.level <= 16


def test_raw_sums_without_extrapolation():
    res = sew(Germ(lambda s, t: s * (t - s)), min_level=16, max_level=16, extrapolate=False,
              out_level=4)
    # left Riemann sum of r on 2^16 cells
    assert float(res.raw_value) == pytest.approx(0.5 - 0.5 / 2 ** 16, abs=1e-14)


def test_vector_germ():
    g = Germ(lambda s, t: np.stack([t - s, s * (t - s)], axis=-1))
    res = sew(g, max_level=16, tol=1e-13)
    assert np.allclose(res.value, [1.0, 0.5], atol=1e-10)


def test_nonconvergence_reports_gaps():
    rng = np.random.default_rng(0)
    w = np.concatenate([[0.0], np.cumsum(rng.standard_normal(1 << 10))]) * 2 ** -5
    g = young_germ(w, w)
    res = sew(g, tol=1e-14)
    assert not res.converged and len(res.gaps) > 0
    with pytest.raises(SewingError) as exc:
        res.require()
    assert exc.value.gaps == res.gaps


def test_young_integral_matches_chain_rule():
    p = generate_fbm(1 << 16, 1.0, 0.8, 11)
    w = p.values
    res = sew(young_germ(w, w), tol=1e-8, max_level=16)
    # left sums equal w_T^2/2 minus half the quadratic variation, which vanishes for H > 1/2
    assert float(res.raw_value) == pytest.approx(0.5 * w[-1] ** 2 - 0.5 * np.sum(np.diff(w) ** 2),
                                                 abs=1e-13)
    oracle = 0.5 * w[-1] ** 2  # trapezoid sums telescope to this on any grid
    assert float(res.value) == pytest.approx(oracle, rel=1e-3)
    assert abs(float(res.value) - oracle) < abs(float(res.raw_value) - oracle) / 10
    # gaps decay with exponent close to 2H - 1
    rates = np.array(res.rates[-8:], dtype=float)
    assert abs(np.nanmedian(rates) - 0.6) < 0.25


def test_grid_germ_off_grid_raises():
    g = Germ.on_grid(lambda i, j: (j - i) * 1.0, 8)
    with pytest.raises(ValueError, match="off its time grid"):
        g(np.array([0.01]), np.array([0.5]))


def test_richardson_removes_power():
    h = np.array([0.1, 0.05, 0.025])
    seq = 1.0 + 3 * h ** 1.5 + 2 * h ** 2
    assert richardson(seq, [1.5, 2.0]) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        richardson(seq, [1.0])


def test_volterra_constant_derivative():
    r = volterra_sew(Germ(lambda s, t: t - s), 0.5, 1.0, max_level=18, tol=1e-12)
    assert abs(float(r.value) - 2.0) < 1e-4


def test_volterra_eta_quarter():
    r = volterra_sew(Germ(lambda s, t: t - s), 0.25, 1.0, max_level=18, tol=1e-12)
    assert float(r.value) == pytest.approx(4.0 / 3.0, abs=1e-6)


def test_volterra_linear_density():
    oracle, _ = scipy.integrate.quad(lambda r: r, 0.0, 1.0, weight="alg", wvar=(0.0, -0.5))
    assert oracle == pytest.approx(4.0 / 3.0, abs=1e-10)
    r = volterra_sew(Germ(lambda s, t: 0.5 * (t * t - s * s)), 0.5, 1.0, tol=1e-12)
    assert float(r.value) == pytest.approx(oracle, abs=1e-4)


def test_volterra_eta_zero_is_plain_sum():
    g = Germ(lambda s, t: 0.5 * (t * t - s * s))
    assert float(volterra_sew(g, 0.0, 1.0).value) == pytest.approx(0.5, abs=1e-12)


def test_volterra_holder_exponent():
    r = volterra_sew(Germ(lambda s, t: t - s), 0.5, 1.0, max_level=12,
                     holder_times=[0.25, 0.5, 0.75, 1.0])
    # t -> 2 sqrt(t): values exact, exponent below 1
    assert np.allclose(r.holder["values"], 2 * np.sqrt([0.25, 0.5, 0.75, 1.0]), atol=1e-4)
    assert 0.5 < r.holder["exponent"] < 1.1


def test_volterra_bad_eta():
    with pytest.raises(ValueError):
        volterra_sew(Germ(lambda s, t: t - s), 1.0, 1.0)


def test_stability_linear_family():
    F = lambda t: np.sin(3 * t)
    A = Germ.additive(F)
    fam = [A.scaled(1 + 1 / n) for n in (1, 2, 4, 8)]
    rep = sewing_stability_check(fam, A, 1.0, level=8)
    assert rep.ok
    d = np.array(rep.distances)
    assert np.allclose(d[1:] / d[:-1], 0.5)


def test_defect_certificate_bounded():
    res = sew(Germ(lambda s, t: s * (t - s), beta_hint=2.0), max_level=14, tol=1e-13)
    # defect of s(t-s) on [u,v] is (v-u)^2/2 while ||delta A||_2 = 1/4 (midpoint)
    assert res.defect["norm_beta"] == pytest.approx(0.25)
    assert res.defect["constant"] == pytest.approx(2.0, rel=1e-6)
