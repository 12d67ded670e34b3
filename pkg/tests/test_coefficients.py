import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rbnlab.spectral import SpectralField, from_grid, grid_points
from rbnlab.spde.coefficients import (AdditiveNoise, ConstantProfile, DiffusionCoefficient,
                                      FunctionProfile, SingularProfile, SmoothProfile,
                                      TableProfile, bump, cutoff, default_mode_weights, hs_norm_sq,
                                      mollify, profile_from_spec, sigma_difference_lp)


def field(values, K=16):
    return from_grid(np.asarray(values, dtype=float), K)


def test_weights_unit_norm():
    a = default_mode_weights(32)
    assert a @ a == pytest.approx(1.0) and np.all(np.diff(a) < 0)


def test_hs_constant():
    sig = DiffusionCoefficient(ConstantProfile(1.5), 8)
    u = field(np.sin(grid_points(64)))
    assert hs_norm_sq(sig, u) == pytest.approx(2 * math.pi * 2.25)
    assert hs_norm_sq(sig, u, "modes") == pytest.approx(2 * math.pi * 2.25)


def test_hs_singular_at_zero_state():
    sig = DiffusionCoefficient(SingularProfile(0.4, 1e3), 8)
    assert hs_norm_sq(sig, SpectralField.zeros(8)) == pytest.approx(2 * math.pi * 1e3)


def test_hs_cos_square():
    sig = DiffusionCoefficient(FunctionProfile(lambda x: x * x), 4)
    u = SpectralField.mode(8, 1, math.sqrt(2 * math.pi) / 2)
    assert hs_norm_sq(sig, u) == pytest.approx(math.pi)


def test_nonfinite_names_argument():
    sig = DiffusionCoefficient(FunctionProfile(lambda x: np.where(x == 0, np.inf, 1.0)), 4)
    with pytest.raises(FloatingPointError, match=r"argument 0\.0"):
        sig.sigma2(np.array([1.0, 0.0]))


def test_bad_weights():
    with pytest.raises(ValueError):
        DiffusionCoefficient(ConstantProfile(1.0), 3, weights=[1.0, 1.0, 1.0])


def test_bump_and_cutoff():
    x = np.linspace(-1, 1, 200001)
    assert np.trapezoid(bump(x), x) == pytest.approx(1.0, rel=1e-6)
    assert cutoff(np.array([0.0, 10.0, 11.0, 12.0]), 0.1).tolist() == [1.0, 1.0, 0.0, 0.0]


def test_mollified_bounded_by_cap():
    sig = DiffusionCoefficient(SingularProfile(0.5, 1e3, envelope=False), 4)
    m = mollify(sig, 0.05)
    assert m.c_eps ** 2 <= 1e3 * 1.001
    assert np.isfinite(m.C_eps)
    assert m.sigma2(np.array([1e6]))[0] == 0.0


def test_mollified_support():
    m = mollify(DiffusionCoefficient(ConstantProfile(1.0), 4), 0.2)
    assert m.s(np.array([0.0]))[0] == pytest.approx(1.0)
    assert m.s(np.array([6.5]))[0] == 0.0  # beyond 1/eps + 1


@pytest.mark.parametrize("profile", [SmoothProfile(1.0), SingularProfile(0.4, 1e3)])
def test_mollification_converges(profile):
    sig = DiffusionCoefficient(profile, 4)
    ms = [mollify(sig, e) for e in (0.2, 0.1, 0.05, 0.025)]
    x = np.linspace(-3, 3, 6001)
    d = [np.trapezoid(np.abs(m.sigma2(x) - profile.sigma2(x)) ** 2, x) for m in ms]
    assert all(b < a for a, b in zip(d[:-1], d[1:]))
    lp = [sigma_difference_lp(a, b) for a, b in zip(ms[:-1], ms[1:])]
    assert all(b < a for a, b in zip(lp[:-1], lp[1:]))
    assert sigma_difference_lp(ms[0], ms[0]) == 0.0


@given(st.floats(0.05, 0.95), st.floats(1e-3, 5.0))
def test_singular_cell_average_exact(gamma, half):
    # average of |x|^{-gamma/2} over [-half, half] below the cap region
    prof = SingularProfile(gamma, cap=math.inf, envelope=False)
    avg = prof.cell_average_s(np.array([-half, half]))[0]
    g = gamma / 2
    assert avg == pytest.approx(half ** (-g) / (1 - g), rel=1e-10)


def test_table_profile_and_spec_roundtrip():
    t = TableProfile([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
    assert t.sigma2(np.array([0.5, 3.0])).tolist() == [0.5, 0.0]
    with pytest.raises(ValueError):
        TableProfile([0.0, 1.0], [1.0, -1.0])
    for p in (SingularProfile(0.4, 50.0), ConstantProfile(2.0), SmoothProfile(1.0, 2.0)):
        q = profile_from_spec(p.spec())
        x = np.linspace(-2, 2, 9)
        assert np.array_equal(q.sigma2(x), p.sigma2(x))


def test_additive_noise_hs():
    n = AdditiveNoise(0.5, modes=(0, 1, -1))
    x = grid_points(32)
    dens = n.hs_density(np.zeros((1, 32)), None)
    assert np.sum(dens) * 2 * math.pi / 32 == pytest.approx(0.25 * 3)


def test_lp_norms():
    assert DiffusionCoefficient(ConstantProfile(1.0), 2).lp_norm == math.inf
    sm = DiffusionCoefficient(SmoothProfile(1.0), 2, p=1.0)
    assert sm.lp_norm == pytest.approx(math.sqrt(math.pi), rel=1e-8)
    m = mollify(DiffusionCoefficient(SmoothProfile(1.0), 2, p=1.0), 0.05)
    assert m.lp_norm == pytest.approx(math.sqrt(math.pi), rel=1e-3)
