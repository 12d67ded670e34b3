import dataclasses
import math

import numpy as np
import pytest

from rbnlab.paths import generate_fbm
from rbnlab.spectral import SpectralField, load_coefficients
from rbnlab.spde.coefficients import (AdditiveNoise, ConstantProfile, DiffusionCoefficient,
                                      SingularProfile, SmoothProfile, mollify)
from rbnlab.spde.solver import (CylindricalIncrements, EnsembleSpec, run_ensemble,
                                solve_mollified)

SQRT2PI = math.sqrt(2 * math.pi)


def cos_u0(K):
    c = np.zeros(K + 1, dtype=complex)
    c[1] = SQRT2PI / 2
    return c


def test_zero_noise_is_heat_flow():
    K = 8
    u0 = cos_u0(K)
    u0[3] = 0.3 - 0.2j
    spec = EnsembleSpec(DiffusionCoefficient(ConstantProfile(0.0), 4), u0, n_t=64, n_samples=3,
                        record_every=16, record_states=True)
    res = run_ensemble(spec)
    k = np.arange(K + 1)
    for r, t in enumerate(res.record_times):
        assert np.allclose(res.states[:, r], u0 * np.exp(-k * k * t), atol=1e-14)
    assert np.all(res.noise_sq == 0) and np.all(res.hs_integral == 0)


def _discrete_ou_variance(c, k, dt, n):
    q = math.exp(-2 * k * k * dt)
    return c * c * dt * sum(q ** m for m in range(1, n + 1))


@pytest.mark.parametrize("mode", [0, 1])
def test_single_mode_ou_variance(mode):
    c, n_t, N = 0.7, 64, 4000
    spec = EnsembleSpec(AdditiveNoise(c, modes=(mode,)), np.zeros(5, dtype=complex), n_t=n_t,
                        n_samples=N, seed=3, batch=1000)
    res = run_ensemble(spec)
    x = res.final[:, mode].real * (1.0 if mode == 0 else math.sqrt(2))
    est, se = np.mean(x * x), np.std(x * x, ddof=1) / math.sqrt(N)
    exact_discrete = _discrete_ou_variance(c, mode, 1 / n_t, n_t)
    continuum = c * c if mode == 0 else c * c * (1 - math.exp(-2)) / 2
    assert abs(est - exact_discrete) <= 3 * se
    assert abs(exact_discrete - continuum) / continuum < 2 / n_t
    # the other modes stay zero
    assert np.allclose(np.delete(res.final, mode, axis=1), 0)


def test_constant_sigma_isometry_closed_form():
    c = 0.5
    spec = EnsembleSpec(DiffusionCoefficient(ConstantProfile(c), 8), cos_u0(8), n_t=32,
                        n_samples=4000, batch=1000)
    res = run_ensemble(spec)
    # the HS side is deterministic: 2 pi c^2 T
    assert np.allclose(res.hs_integral, 2 * math.pi * c * c)
    se = res.noise_sq.std(ddof=1) / math.sqrt(res.n_samples)
    assert abs(res.noise_sq.mean() - 2 * math.pi * c * c) <= 3 * se


def test_batch_and_jobs_invariance():
    sig = mollify(DiffusionCoefficient(SingularProfile(0.4), 8), 0.2)
    spec = EnsembleSpec(sig, cos_u0(8), n_t=32, n_samples=10, seed=5, batch=3, modes=(0, 1),
                        record_every=8, sobolev_alphas=(0.8,))
    a = run_ensemble(spec)
    b = run_ensemble(dataclasses.replace(spec, batch=10))
    c = run_ensemble(spec, jobs=2)
    for f in ("final", "noise_sq", "hs_integral", "mart", "sobolev_sup"):
        assert np.array_equal(getattr(a, f), getattr(c, f))
        assert np.allclose(getattr(a, f), getattr(b, f), rtol=1e-12, atol=1e-14)


def test_first_samples_do_not_depend_on_ensemble_size():
    sig = mollify(DiffusionCoefficient(SmoothProfile(1.0), 4), 0.2)
    spec = EnsembleSpec(sig, cos_u0(4), n_t=16, n_samples=4, seed=1)
    a = run_ensemble(spec)
    b = run_ensemble(dataclasses.replace(spec, n_samples=2))
    assert np.allclose(a.final[:2], b.final, rtol=1e-12, atol=1e-15)


def test_single_sample_matches_ensemble(tmp_path):
    sig = mollify(DiffusionCoefficient(SmoothProfile(1.0), 4), 0.2)
    spec = EnsembleSpec(sig, cos_u0(4), n_t=16, n_samples=2, seed=1, w_refine=2,
                        record_every=16, record_states=True)
    res = run_ensemble(spec)
    traj = solve_mollified(SpectralField(spec.u0), sig, spec.path(1), spec.increments(1),
                           record_every=4)
    assert np.allclose(traj.states.coef[-1], res.final[1], rtol=1e-12, atol=1e-15)
    files = traj.dump(tmp_path / "traj.bin")
    assert np.array_equal(load_coefficients(files[0]).coef, traj.states.coef)
    assert (tmp_path / "traj.bin.manifest.json").exists()


def test_path_grid_mismatch():
    sig = DiffusionCoefficient(ConstantProfile(1.0), 2)
    inc = CylindricalIncrements.draw(16, 2, 1 / 16, 0)
    with pytest.raises(ValueError, match="refine"):
        solve_mollified(SpectralField(cos_u0(4)), sig, generate_fbm(24, 1.0, 0.3, 0), inc)


def test_noise_refinement_sums_increments():
    a = CylindricalIncrements.draw(8, 3, 1 / 8, 0, refine=4)
    b = CylindricalIncrements.draw(32, 3, 1 / 32, 0)
    assert np.allclose(a.dbeta, b.dbeta.reshape(8, 4, 3).sum(axis=1))


class _Blowup(AdditiveNoise):
    def noise_field(self, args, dbeta):
        return np.full(args.shape, np.inf), None

    def hs_density(self, args, S):
        return np.zeros(args.shape)


def test_nonfinite_state_aborts_with_step():
    spec = EnsembleSpec(_Blowup(1.0), np.zeros(3, dtype=complex), n_t=8, n_samples=1)
    with pytest.raises(FloatingPointError, match="step 1 "):
        with np.errstate(invalid="ignore"):
            run_ensemble(spec)


def test_grid_too_small():
    spec = EnsembleSpec(DiffusionCoefficient(ConstantProfile(1.0), 2), cos_u0(8), n_t=8, M=16)
    with pytest.raises(ValueError):
        run_ensemble(spec)
