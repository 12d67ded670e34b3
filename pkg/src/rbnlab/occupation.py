"""Occupation measures, local times and averaging operators of a path.

The averaged field of ``f`` along ``w`` over ``[s, t]`` is
``x -> int_s^t f(x - w_r) dr``. It is computed two ways: by direct time
quadrature, and as the convolution of ``f`` with the histogram local time
``L_{s,t}``. The two routes share nothing beyond the path, so each checks
the other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.integrate
import scipy.ndimage
import scipy.signal

from .paths import SamplePath, generate_fbm

Func = Callable[[np.ndarray], np.ndarray]

#: margin used for every open-bound exponent check
STRICT_MARGIN = 0.02


@dataclass(frozen=True)
class SpatialGrid:
    """``n_bins`` equal bins on ``[x_min, x_max]``; values live at bin centres."""

    x_min: float
    x_max: float
    n_bins: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"need x_min < x_max, got {self.x_min}, {self.x_max}")
        if self.n_bins < 2:
            raise ValueError(f"need n_bins >= 2, got {self.n_bins}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_bins

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_bins + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_bins) + 0.5) * self.dx

    @classmethod
    def covering(cls, values, n_bins: int, pad: float = 0.05) -> "SpatialGrid":
        """Grid over ``[min - pad*range, max + pad*range]`` of ``values``."""
        lo, hi = float(np.min(values)), float(np.max(values))
        span = max(hi - lo, 1e-12)
        return cls(lo - pad * span, hi + pad * span, n_bins)

    @classmethod
    def with_spacing(cls, lo: float, hi: float, dx: float) -> "SpatialGrid":
        """Grid of spacing exactly ``dx`` covering ``[lo, hi]``."""
        n = max(2, int(math.ceil((hi - lo) / dx)))
        mid = 0.5 * (lo + hi)
        return cls(mid - 0.5 * n * dx, mid + 0.5 * n * dx, n)

    def bin_index(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        bad = (x < self.x_min) | (x > self.x_max)
        if np.any(bad):
            v = x[bad].flat[0]
            raise ValueError(
                f"path value {v:.6g} lies outside the grid [{self.x_min:.6g}, {self.x_max:.6g}];"
                " increase the padding"
            )
        idx = np.floor((x - self.x_min) / self.dx).astype(np.intp)
        return np.minimum(idx, self.n_bins - 1)


@dataclass(frozen=True, eq=False)
class LocalTimeField:
    """Local time estimates ``values[j, i] ~ L_{times[j]}(grid.centers[i])``."""

    grid: SpatialGrid
    times: np.ndarray
    values: np.ndarray
    smoothing: str = "histogram"

    def mass(self) -> np.ndarray:
        return self.values.sum(axis=-1) * self.grid.dx

    def increment(self, j0: int, j1: int) -> np.ndarray:
        """``L_{t_{j0}, t_{j1}}`` on the grid."""
        return self.values[j1] - self.values[j0]


@dataclass(frozen=True, eq=False)
class AveragedField:
    grid: SpatialGrid
    s: float
    t: float
    values: np.ndarray
    method: str


def _check_index(path: SamplePath, t_index: int) -> int:
    if not 0 <= t_index <= path.n_steps:
        raise ValueError(f"t_index must lie in [0, {path.n_steps}], got {t_index}")
    return int(t_index)


def occupation_counts(path: SamplePath, grid: SpatialGrid, t_indices: Sequence[int]) -> np.ndarray:
    """Cumulative left-endpoint counts ``#{j < t_index : w_j in bin}`` per index.

    Returns an integer array of shape ``(len(t_indices), n_bins)``.
    """
    t_indices = np.asarray([_check_index(path, int(k)) for k in np.atleast_1d(t_indices)])
    top = int(t_indices.max(initial=0))
    bins = grid.bin_index(path.values[:top])
    order = np.argsort(t_indices, kind="stable")
    out = np.zeros((len(t_indices), grid.n_bins), dtype=np.int64)
    running = np.zeros(grid.n_bins, dtype=np.int64)
    prev = 0
    for pos in order:
        k = t_indices[pos]
        if k > prev:
            running = running + np.bincount(bins[prev:k], minlength=grid.n_bins)
            prev = k
        out[pos] = running
    return out


def occupation_measure(path: SamplePath, grid: SpatialGrid, t_index: int) -> np.ndarray:
    """Occupation measure ``mu_t`` of each bin by left-endpoint time quadrature."""
    return occupation_counts(path, grid, [t_index])[0] * path.dt


def _smooth(values: np.ndarray, grid: SpatialGrid, bandwidth: float) -> np.ndarray:
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    return scipy.ndimage.gaussian_filter1d(
        values, bandwidth / grid.dx, axis=-1, mode="constant", truncate=4.0
    )


def local_time(path: SamplePath, grid: SpatialGrid, t_index, smoothing: str = "histogram",
               bandwidth: float | None = None) -> LocalTimeField:
    """Local time at one or several time indices.

    ``smoothing="histogram"`` returns ``mu_t(bin) / dx``. ``"kernel"`` further
    convolves with a normalised Gaussian of standard deviation ``bandwidth``
    (default ``2 dx``), which derivative-bearing quantities need.
    """
    idx = np.atleast_1d(t_index)
    counts = occupation_counts(path, grid, idx)
    values = counts * (path.dt / grid.dx)
    if smoothing == "kernel":
        values = _smooth(values, grid, bandwidth or 2.0 * grid.dx)
    elif smoothing != "histogram":
        raise ValueError(f"unknown smoothing {smoothing!r}")
    return LocalTimeField(grid, idx * path.dt, values, smoothing)


def occupation_formula_error(path: SamplePath, grid: SpatialGrid, f: Func,
                             t_index: int | None = None) -> dict:
    """Compare ``dt * sum_j f(w_j)`` with ``sum_i f(x_i) L_t(x_i) dx``.

    The relative error is normalised by ``dt * sum_j |f(w_j)|``.
    """
    t_index = path.n_steps if t_index is None else t_index
    direct_terms = f(path.values[:t_index]) * path.dt
    direct = float(direct_terms.sum())
    scale = float(np.abs(direct_terms).sum())
    L = local_time(path, grid, t_index).values[0]
    via_lt = float(np.sum(f(grid.centers) * L) * grid.dx)
    err = abs(direct - via_lt)
    return {"direct": direct, "local_time": via_lt, "abs_error": err,
            "rel_error": err / scale if scale > 0 else err}


# -- averaging operators -----------------------------------------------------

def _require_finite(vals: np.ndarray, args: np.ndarray, what: str):
    bad = ~np.isfinite(vals)
    if np.any(bad):
        a = np.broadcast_to(args, vals.shape)[bad].flat[0]
        raise ValueError(f"{what} is not finite at argument {float(a)!r}; truncate the singularity")


def cell_average_kernel(f: Func, dx: float, n: int) -> np.ndarray:
    """Cell averages ``(1/dx) int_{k dx - dx/2}^{k dx + dx/2} f`` for ``k = -(n-1)..n-1``."""
    centers = np.arange(-(n - 1), n) * dx
    _require_finite(np.asarray(f(centers), dtype=float), centers, "f")
    scale = float(np.max(np.abs(f(centers)))) or 1.0
    integral, _ = scipy.integrate.quad_vec(
        lambda tau: f(centers + tau), -0.5 * dx, 0.5 * dx,
        epsabs=1e-13 * scale * dx, epsrel=1e-11, norm="max", points=[0.0], limit=400,
    )
    _require_finite(integral, centers, "cell average of f")
    return integral / dx


def point_kernel(f: Func, dx: float, n: int) -> np.ndarray:
    centers = np.arange(-(n - 1), n) * dx
    vals = np.asarray(f(centers), dtype=float)
    _require_finite(vals, centers, "f")
    return vals


def convolve_measure(kernel: np.ndarray, mass: np.ndarray) -> np.ndarray:
    """``out[..., i] = sum_b kernel[i - b + n - 1] * mass[..., b]`` (same-size output)."""
    n = mass.shape[-1]
    full = scipy.signal.fftconvolve(mass, np.broadcast_to(kernel, mass.shape[:-1] + kernel.shape),
                                    mode="full", axes=-1)
    return full[..., n - 1:2 * n - 1]


def averaged_field(path: SamplePath, f: Func, s_index: int, t_index: int, grid: SpatialGrid,
                   method: str = "quadrature", kernel: str = "cell",
                   chunk: int = 4096) -> AveragedField:
    """Averaged field ``x_i -> int_s^t f(x_i - w_r) dr`` on the grid centres.

    ``method="quadrature"`` sums ``dt * f(x_i - w_j)`` over ``s_index <= j < t_index``.
    ``method="convolution"`` convolves ``f`` with the histogram local time
    ``L_{s,t}``; with ``kernel="cell"`` the kernel is the cell average of ``f``
    over each bin offset, which is exact for a bin-wise constant local time.
    """
    s_index, t_index = _check_index(path, s_index), _check_index(path, t_index)
    if s_index > t_index:
        raise ValueError("need s_index <= t_index")
    x = grid.centers
    if method == "quadrature":
        w = path.values[s_index:t_index]
        out = np.zeros(grid.n_bins)
        for k in range(0, len(w), chunk):
            args = x[:, None] - w[None, k:k + chunk]
            vals = np.asarray(f(args), dtype=float)
            _require_finite(vals, args, "f")
            out += vals.sum(axis=1)
        values = out * path.dt
    elif method == "convolution":
        counts = occupation_counts(path, grid, [s_index, t_index])
        mass = (counts[1] - counts[0]) * path.dt
        kern = (cell_average_kernel if kernel == "cell" else point_kernel)(f, grid.dx, grid.n_bins)
        values = convolve_measure(kern, mass)
    else:
        raise ValueError(f"unknown method {method!r}")
    return AveragedField(grid, s_index * path.dt, t_index * path.dt, values, method)


# -- exponent arithmetic -----------------------------------------------------

@dataclass(frozen=True)
class RegularityRegion:
    """Open region ``lambda < lambda_max``, ``gamma < gamma_max(lambda)``."""

    H: float
    p: float

    @property
    def lambda_max(self) -> float:
        return 1.0 / (2.0 * self.H) - 1.0 / min(self.p, 2.0)

    def gamma_max(self, lam: float) -> float:
        return 1.0 - (lam + 0.5) * self.H

    def contains(self, lam: float, gamma: float, margin: float = 0.0) -> bool:
        return lam < self.lambda_max - margin and gamma < self.gamma_max(lam) - margin


def regularity_exponents(H: float, p: float):
    """Return ``(lambda_max, gamma_max)`` with ``gamma_max`` a function of lambda."""
    region = RegularityRegion(H, p)
    return region.lambda_max, region.gamma_max


@dataclass(frozen=True)
class Admissibility:
    admissible: bool
    H_bound: float
    gamma0_bound: float
    H: float
    p: float
    gamma0: float | None

    def as_dict(self) -> dict:
        return dict(admissible=self.admissible, H_bound=self.H_bound,
                    gamma0_bound=self.gamma0_bound, H=self.H, p=self.p, gamma0=self.gamma0)


def assumption_check(H: float, p: float, gamma0: float | None = None) -> Admissibility:
    """Admissibility of ``(H, p, gamma0)``: both bounds are strict."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    # 1/min(p, 4/3) = max(1/p, 3/4) and 1 - 1/(4 + r) = (3 + r)/(4 + r): one rounding each
    H_bound = 0.5 / (1.0 + max(1.0 / p, 0.75))
    r = max(4.0 / p, 3.0)
    gamma0_bound = (3.0 + r) / (4.0 + r)
    ok = H < H_bound
    if gamma0 is not None:
        ok = ok and 0.5 < gamma0 < gamma0_bound
    return Admissibility(bool(ok), H_bound, gamma0_bound, H, p, gamma0)


def lp_norm(f: Func, p: float, lo: float = -50.0, hi: float = 50.0, points=(0.0,)) -> float:
    """``||f||_{L^p(R)}`` by adaptive quadrature on ``[lo, hi]``."""
    if math.isinf(p):
        xs = np.linspace(lo, hi, 200001)
        return float(np.max(np.abs(f(xs))))
    brk = sorted({lo, hi, *[x for x in points if lo < x < hi]})
    total = 0.0
    for a, b in zip(brk[:-1], brk[1:]):
        val, _ = scipy.integrate.quad(lambda x: abs(float(f(np.asarray(x)))) ** p, a, b, limit=500)
        total += val
    return total ** (1.0 / p)


# -- regularity of averaged fields -------------------------------------------

def dyadic_field_norms(path: SamplePath, f: Func, grid: SpatialGrid, levels: Sequence[int],
                       with_derivative: bool = False, bandwidth: float | None = None):
    """Max over dyadic intervals at each level of ``||T_{s,t} f||_{C^0}`` (and ``C^1`` seminorm).

    Uses the local-time convolution route; derivatives are centred differences
    of the kernel-smoothed field.
    """
    levels = np.asarray(sorted(levels))
    top = int(levels.max())
    if path.n_steps % (1 << top):
        raise ValueError(f"path n_steps={path.n_steps} not divisible by 2^{top}")
    step = path.n_steps >> top
    counts = occupation_counts(path, grid, np.arange(0, path.n_steps + 1, step))
    mass = np.diff(counts, axis=0) * path.dt  # finest dyadic intervals
    kern = cell_average_kernel(f, grid.dx, grid.n_bins)
    fine = convolve_measure(kern, mass)
    if with_derivative:
        smooth = _smooth(fine, grid, bandwidth or 2.0 * grid.dx)
    sup0, sup1 = [], []
    for lev in levels:
        group = 1 << (top - lev)
        field0 = fine.reshape(-1, group, grid.n_bins).sum(axis=1)
        sup0.append(np.abs(field0).max())
        if with_derivative:
            field1 = smooth.reshape(-1, group, grid.n_bins).sum(axis=1)
            sup1.append(np.abs(np.gradient(field1, grid.dx, axis=-1)).max())
    return levels, np.array(sup0), (np.array(sup1) if with_derivative else None)


#: fitted log2-growth per refinement level above which a constant is declared divergent
GROWTH_TOL = 0.02


@dataclass
class RegularityReport:
    H: float
    p: float
    gamma0: float
    gamma1: float | None
    levels: list
    constants0: list  # per seed: running sup over levels <= d
    constants1: list | None
    ratios0: list
    ratios1: list | None
    exponent0: float  # fitted scaling exponent of the C^0 maxima
    exponent1: float | None
    bounded0: bool  # successive ratios inside the band
    bounded1: bool | None
    growth0: float  # gamma - exponent; log2-growth of the constants per level
    growth1: float | None
    in_region0: bool
    in_region1: bool | None
    growth_tol: float = GROWTH_TOL

    @property
    def diverging0(self) -> bool:
        return self.growth0 > self.growth_tol

    @property
    def diverging1(self) -> bool | None:
        return None if self.growth1 is None else self.growth1 > self.growth_tol

    @property
    def stable0(self) -> bool:
        return self.bounded0 and not self.diverging0

    @property
    def stable1(self) -> bool | None:
        return None if self.growth1 is None else self.bounded1 and not self.diverging1

    @property
    def stable(self) -> bool:
        return self.stable0 and (self.stable1 is None or self.stable1)

    def as_dict(self) -> dict:
        out = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}
        for k in ("diverging0", "diverging1", "stable0", "stable1"):
            out[k] = getattr(self, k)
        return out


def _running(c: np.ndarray) -> np.ndarray:
    return np.maximum.accumulate(c, axis=-1)


def _fit_exponent(levels: np.ndarray, sups: np.ndarray) -> float:
    """Slope of ``log2 sup`` against ``log2 h = -level`` (pooled over seeds)."""
    y = np.log2(sups).mean(axis=0)
    return float(np.polyfit(-levels.astype(float), y, 1)[0])


def averaged_field_regularity_check(f: Func, H: float, p: float, gamma0: float,
                                    gamma1: float | None = None, seeds: Sequence[int] = range(16),
                                    n_steps: int = 1 << 18, T: float = 1.0,
                                    levels: Sequence[int] = tuple(range(1, 11)),
                                    dx: float | None = None, fit_levels: int = 5,
                                    ratio_band: tuple = (0.5, 2.0),
                                    growth_tol: float = GROWTH_TOL) -> RegularityReport:
    """Refinement behaviour of the Hoelder constants of the averaged field.

    For each seed the per-scale constants
    ``c_l = max_{|t-s| = 2^-l} ||T_{s,t} f|| / 2^{-l gamma}`` are computed and
    the estimate at mesh depth ``d`` is ``C_d = max_{l <= d} c_l``.

    Two diagnostics are reported. ``bounded`` holds when every ratio
    ``C_{d+1}/C_d`` lies in ``ratio_band`` for every seed. ``growth`` is
    ``gamma`` minus the scaling exponent of the raw maxima, fitted (pooled
    over seeds) on the ``fit_levels`` finest levels; the constant is
    *diverging* when ``growth > growth_tol`` and *stable* when it is bounded
    and not diverging. A slow power-law divergence passes the ratio band at
    every single step, hence the fitted growth.

    Keep at least ``2^8`` samples per finest interval; the maxima of
    under-resolved intervals bias the fitted exponent upwards. Fewer than
    16 samples is refused.
    """
    levels = np.asarray(sorted(levels))
    if levels.max() > np.log2(n_steps) - 4:
        raise ValueError(f"level {levels.max()} too fine for n_steps={n_steps}")
    region = RegularityRegion(H, p)
    c0s, c1s, s0s, s1s = [], [], [], []
    for seed in seeds:
        path = generate_fbm(n_steps, T, H, seed)
        grid = SpatialGrid.with_spacing(
            path.values.min() - 0.1, path.values.max() + 0.1,
            dx or (path.values.max() - path.values.min() + 0.2) / 1024)
        lv, sup0, sup1 = dyadic_field_norms(path, f, grid, levels, with_derivative=gamma1 is not None)
        h = T * 2.0 ** (-lv)
        s0s.append(sup0)
        c0s.append(_running(sup0 / h ** gamma0))
        if gamma1 is not None:
            s1s.append(sup1)
            c1s.append(_running(sup1 / h ** gamma1))
    lo, hi = ratio_band

    def ratios(cs):
        cs = np.asarray(cs)
        return cs[:, 1:] / cs[:, :-1]

    r0 = ratios(c0s)
    fit = levels[-fit_levels:]
    e0 = _fit_exponent(fit, np.asarray(s0s)[:, -fit_levels:])
    rep = RegularityReport(
        H=H, p=p, gamma0=gamma0, gamma1=gamma1, levels=levels.tolist(),
        constants0=np.asarray(c0s).tolist(), constants1=None, ratios0=r0.tolist(), ratios1=None,
        exponent0=e0, exponent1=None, bounded0=bool(np.all((r0 >= lo) & (r0 <= hi))),
        bounded1=None, growth0=gamma0 - e0, growth1=None,
        in_region0=region.contains(0.0, gamma0), in_region1=None, growth_tol=growth_tol,
    )
    if gamma1 is not None:
        r1 = ratios(c1s)
        e1 = _fit_exponent(fit, np.asarray(s1s)[:, -fit_levels:])
        rep.constants1 = np.asarray(c1s).tolist()
        rep.ratios1 = r1.tolist()
        rep.exponent1 = e1
        rep.bounded1 = bool(np.all((r1 >= lo) & (r1 <= hi)))
        rep.growth1 = gamma1 - e1
        rep.in_region1 = region.contains(1.0, gamma1)
    return rep


def truncated_power(gamma: float, cap: float = 1e3, envelope: bool = True) -> Func:
    """``x -> min(|x|^-gamma, cap) * exp(-x^2)`` (envelope optional)."""

    def f(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            val = np.minimum(np.abs(x) ** (-gamma), cap)
        return val * np.exp(-x * x) if envelope else val

    return f
