"""Fractional Brownian motion sample paths on uniform time grids.

Paths are generated exactly (in law) by circulant embedding of the
fractional Gaussian noise covariance, the Davies-Harte construction,
with a dense Cholesky factorisation as fallback.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.stats

from ._rng import STREAM_PATH, stream

log = logging.getLogger(__name__)

#: eigenvalues of the embedding above this (negative) level are clipped to zero
EIGEN_CLIP = -1e-10


@dataclass(frozen=True, eq=False)
class SamplePath:
    """A scalar path ``values[j] = w(j * T / n_steps)``."""

    T: float
    n_steps: int
    values: np.ndarray
    hurst: float
    seed: int
    method: str = field(default="circulant", compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] != self.n_steps + 1:
            raise ValueError(
                f"values must have length n_steps + 1 = {self.n_steps + 1}, got {values.shape}"
            )
        if values[0] != 0.0:
            raise ValueError("paths must start at the origin")
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"hurst must lie in (0, 1), got {self.hurst}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_steps + 1)

    def subsample(self, factor: int) -> "SamplePath":
        """Every ``factor``-th grid value, as a path on the coarser grid."""
        if self.n_steps % factor:
            raise ValueError(f"n_steps={self.n_steps} is not divisible by {factor}")
        return SamplePath(self.T, self.n_steps // factor, self.values[::factor],
                          self.hurst, self.seed, self.method)

    @classmethod
    def from_values(cls, values, T: float = 1.0, hurst: float = 0.5, seed: int = 0) -> "SamplePath":
        """Wrap an arbitrary array (e.g. a deterministic test path)."""
        values = np.asarray(values, dtype=float)
        return cls(T, values.shape[0] - 1, values, hurst, seed, method="user")


def fgn_autocovariance(n: int, H: float) -> np.ndarray:
    """Autocovariance of unit-step fractional Gaussian noise at lags ``0..n-1``."""
    k = np.arange(n, dtype=float)
    h2 = 2.0 * H
    return 0.5 * (np.abs(k + 1) ** h2 + np.abs(k - 1) ** h2 - 2.0 * k ** h2)


@lru_cache(maxsize=32)
def _embedding_sqrt_eigs(n: int, H: float):
    r = fgn_autocovariance(n + 1, H)
    # first row of the 2n circulant: r_0..r_n, r_{n-1}..r_1
    row = np.concatenate([r, r[-2:0:-1]])
    eig = np.fft.fft(row).real
    lo = eig.min()
    if lo < EIGEN_CLIP:
        return None, lo
    return np.sqrt(np.clip(eig, 0.0, None)), lo


@lru_cache(maxsize=8)
def _cholesky_factor(n: int, H: float) -> np.ndarray:
    cov = scipy.linalg.toeplitz(fgn_autocovariance(n, H))
    return np.linalg.cholesky(cov)


def fgn(n: int, H: float, rng: np.random.Generator) -> tuple[np.ndarray, str]:
    """Draw ``n`` unit-step fGn increments; returns ``(increments, method)``."""
    sqrt_eig, lo = _embedding_sqrt_eigs(n, H)
    if sqrt_eig is not None:
        m = sqrt_eig.shape[0]
        z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        x = np.fft.fft(sqrt_eig * z) / np.sqrt(m)
        return x.real[:n], "circulant"
    log.warning("circulant embedding eigenvalue %.3e below %.0e; using Cholesky", lo, EIGEN_CLIP)
    try:
        chol = _cholesky_factor(n, H)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(
            f"fGn covariance is not positive definite (n={n}, H={H}); cannot sample"
        ) from exc
    return chol @ rng.standard_normal(n), "cholesky"


def generate_fbm(n_steps: int, T: float, H: float, seed: int, sample: int | None = None) -> SamplePath:
    """Exact fBm sample on ``n_steps`` uniform steps of ``[0, T]``.

    Deterministic in ``(n_steps, T, H, seed, sample)``; ``sample`` selects an
    independent stream for Monte Carlo sample number ``sample``. Increments have covariance
    ``0.5 (|k+1|^{2H} + |k-1|^{2H} - 2|k|^{2H}) (T/n)^{2H}`` at lag ``k``.
    """
    if not 0.0 < H < 1.0:
        raise ValueError(f"H must lie in (0, 1), got {H}")
    if int(n_steps) != n_steps or n_steps < 2:
        raise ValueError(f"n_steps must be an integer >= 2, got {n_steps}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    n_steps = int(n_steps)
    key = (STREAM_PATH,) if sample is None else (STREAM_PATH, int(sample))
    inc, method = fgn(n_steps, H, stream(seed, *key))
    values = np.empty(n_steps + 1)
    values[0] = 0.0
    np.cumsum(inc * (T / n_steps) ** H, out=values[1:])
    return SamplePath(float(T), n_steps, values, float(H), int(seed), method)


def fbm_covariance(times: np.ndarray, H: float) -> np.ndarray:
    """Analytic covariance ``0.5 (t^{2H} + s^{2H} - |t-s|^{2H})``."""
    t = np.asarray(times, dtype=float)
    s, u = np.meshgrid(t, t, indexing="ij")
    return 0.5 * (s ** (2 * H) + u ** (2 * H) - np.abs(s - u) ** (2 * H))


def holder_norm_estimate(path: SamplePath, alpha: float, max_lag: int) -> float:
    """Discrete alpha-Hoelder seminorm over grid pairs at most ``max_lag`` apart."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if not 1 <= max_lag <= path.n_steps:
        raise ValueError(f"max_lag must lie in [1, {path.n_steps}], got {max_lag}")
    w = path.values
    best = 0.0
    for lag in range(1, max_lag + 1):
        inc = np.abs(w[lag:] - w[:-lag]).max()
        best = max(best, inc / (lag * path.dt) ** alpha)
    return float(best)


def terminal_variance(n_steps: int, H: float, seeds, T: float = 1.0) -> tuple[float, float]:
    """Empirical ``Var(w_T)`` over ``seeds`` and its standard error.

    The mean is known to be 0, so the estimator is ``mean(w_T^2)``.
    """
    x2 = np.array([generate_fbm(n_steps, T, H, s).values[-1] ** 2 for s in seeds])
    return float(x2.mean()), float(x2.std(ddof=1) / np.sqrt(len(x2)))


def increment_chi_square(paths, n_cells: int = 20) -> tuple[float, float]:
    """Chi-square goodness of fit of standardised increments to ``N(0, 1)``.

    Increments are scaled by ``dt^-H`` (unit variance for any H) and binned
    into ``n_cells`` equiprobable cells. Returns ``(statistic, p_value)``;
    independence is assumed, so only ``H = 1/2`` gives a calibrated p-value.
    """
    z = np.concatenate([np.diff(p.values) / p.dt ** p.hurst for p in paths])
    edges = scipy.stats.norm.ppf(np.linspace(0.0, 1.0, n_cells + 1))
    counts = np.histogram(z, bins=edges)[0]
    res = scipy.stats.chisquare(counts)
    return float(res.statistic), float(res.pvalue)


# -- persistence -------------------------------------------------------------

def save_path(path: SamplePath, out: str | Path, fmt: str | None = None) -> list[Path]:
    """Write a path as ``t,w`` CSV or as raw little-endian doubles + JSON sidecar.

    The format is inferred from the suffix (``.csv`` or anything else for raw)
    unless ``fmt`` is given. Returns the files written.
    """
    out = Path(out)
    fmt = fmt or ("csv" if out.suffix.lower() == ".csv" else "raw")
    if fmt == "csv":
        data = np.column_stack([path.times, path.values])
        np.savetxt(out, data, delimiter=",", header="t,w", comments="", fmt="%.17g")
        return [out]
    if fmt != "raw":
        raise ValueError(f"unknown format {fmt!r}")
    path.values.astype("<f8").tofile(out)
    sidecar = out.with_name(out.name + ".json")
    meta = {"n": path.n_steps, "T": path.T, "H": path.hurst, "seed": path.seed}
    sidecar.write_text(json.dumps(meta, indent=1))
    return [out, sidecar]


def load_path(src: str | Path) -> SamplePath:
    src = Path(src)
    if src.suffix.lower() == ".csv":
        data = np.loadtxt(src, delimiter=",", skiprows=1, ndmin=2)
        t, w = data[:, 0], data[:, 1]
        return SamplePath(float(t[-1]), len(w) - 1, w, 0.5, 0, method="file")
    meta = json.loads(src.with_name(src.name + ".json").read_text())
    w = np.fromfile(src, dtype="<f8")
    return SamplePath(meta["T"], meta["n"], w, meta["H"], meta["seed"], method="file")
