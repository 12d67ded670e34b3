import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbnlab.paths import (SamplePath, fbm_covariance, fgn_autocovariance, generate_fbm,
                          holder_norm_estimate, increment_chi_square, load_path, save_path,
                          terminal_variance)


def test_deterministic_in_seed_and_sample():
    a = generate_fbm(256, 1.0, 0.3, seed=7, sample=2)
    b = generate_fbm(256, 1.0, 0.3, seed=7, sample=2)
    c = generate_fbm(256, 1.0, 0.3, seed=7, sample=3)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


@pytest.mark.parametrize("H", [0.1, 0.25, 0.5, 0.75, 0.9])
def test_starts_at_origin_and_uses_circulant(H):
    p = generate_fbm(512, 2.0, H, 0)
    assert p.values[0] == 0.0 and p.values.shape == (513,)
    assert p.method == "circulant"
    assert p.dt == 2.0 / 512


def test_invalid_arguments():
    with pytest.raises(ValueError):
        generate_fbm(16, 1.0, 1.0, 0)
    with pytest.raises(ValueError):
        generate_fbm(1, 1.0, 0.5, 0)
    with pytest.raises(ValueError):
        generate_fbm(16, 0.0, 0.5, 0)
    with pytest.raises(ValueError):
        SamplePath.from_values([1.0, 2.0])


def test_autocovariance_brownian_is_white():
    r = fgn_autocovariance(8, 0.5)
    assert r[0] == 1.0 and np.allclose(r[1:], 0.0)


@given(st.floats(0.05, 0.95), st.integers(2, 64))
def test_autocovariance_sums_to_variance_of_sum(H, n):
    # Var(sum of n unit fGn increments) = n^{2H}
    r = fgn_autocovariance(n, H)
    total = n * r[0] + 2.0 * sum((n - k) * r[k] for k in range(1, n))
    assert total == pytest.approx(n ** (2 * H), rel=1e-9)


def test_covariance_matrix_diagonal():
    t = np.array([0.25, 0.5, 1.0])
    c = fbm_covariance(t, 0.75)
    assert np.allclose(np.diag(c), t ** 1.5)


def test_variance_at_half_H075():
    # Var(w_{1/2}) = (1/2)^{1.5}
    x = np.array([generate_fbm(64, 1.0, 0.75, s).values[32] for s in range(4000)])
    se = (x ** 2).std(ddof=1) / np.sqrt(len(x))
    assert abs((x ** 2).mean() - 0.5 ** 1.5) <= 3 * se


def test_terminal_variance_brownian_scaling():
    var, se = terminal_variance(64, 0.5, range(2000), T=2.0)
    assert abs(var - 2.0) <= 3 * se


def test_chi_square_brownian():
    stat, pv = increment_chi_square([generate_fbm(4096, 1.0, 0.5, s) for s in range(4)])
    assert pv > 0.01


def test_holder_trivial_cases(linear_path):
    zero = SamplePath.from_values(np.zeros(65))
    assert holder_norm_estimate(zero, 0.3, 64) == 0.0
    assert holder_norm_estimate(linear_path, 1.0, 1024) == pytest.approx(1.0)


def test_holder_diverges_above_H():
    grows = sum(holder_norm_estimate(generate_fbm(1 << 12, 1.0, 0.5, s), 0.6, 1 << 12)
                > holder_norm_estimate(generate_fbm(1 << 12, 1.0, 0.5, s).subsample(16), 0.6, 1 << 8)
                for s in range(40))
    assert grows >= 38


@pytest.mark.parametrize("name", ["p.csv", "p.bin"])
def test_roundtrip(tmp_path, name):
    p = generate_fbm(128, 1.5, 0.3, 5)
    files = save_path(p, tmp_path / name)
    q = load_path(files[0])
    assert np.array_equal(p.values, q.values) and q.T == 1.5
    if name.endswith(".bin"):
        assert q.hurst == 0.3 and q.seed == 5


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.95), st.sampled_from([16, 100, 257]))
def test_self_similarity_of_grid(H, n):
    # increments scale as (T/n)^H: same seed with doubled T scales the path by 2^H
    a = generate_fbm(n, 1.0, H, 3)
    b = generate_fbm(n, 2.0, H, 3)
    assert np.allclose(b.values, 2.0 ** H * a.values)


def test_cholesky_fallback_matches_covariance(monkeypatch):
    import rbnlab.paths as P

    monkeypatch.setattr(P, "_embedding_sqrt_eigs", lambda n, H: (None, -1.0))
    x = np.array([P.generate_fbm(4, 1.0, 0.3, s).values[1:] for s in range(20000)])
    assert P.generate_fbm(4, 1.0, 0.3, 0).method == "cholesky"
    emp = x.T @ x / len(x)
    assert np.allclose(emp, fbm_covariance(np.arange(1, 5) / 4, 0.3), atol=0.03)
