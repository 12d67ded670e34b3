"""Diffusion coefficients ``sigma_k(x) = a_k s(x)`` and their mollifications.

``Sigma^2 = sum_k sigma_k^2 = s^2`` because the mode weights satisfy
``sum_k a_k^2 = 1``. Profiles are small classes rather than closures so that
coefficients can be shipped to worker processes.
"""
from __future__ import annotations

import math
from functools import cached_property

import numpy as np
import scipy.integrate
import scipy.signal

from ..spectral import SpectralField, to_grid

# -- profiles Sigma^2 ---------------------------------------------------------


class Profile:
    """Aggregate variance density ``Sigma^2(x)``; ``s = sqrt(Sigma^2)``."""

    singular_points: tuple = ()
    bounded_support = False

    def sigma2(self, x) -> np.ndarray:
        raise NotImplementedError

    def s(self, x) -> np.ndarray:
        return np.sqrt(self.sigma2(x))

    def cell_average_s(self, edges: np.ndarray) -> np.ndarray:
        """Mean of ``s`` over each cell ``[edges[i], edges[i+1]]`` (Simpson)."""
        a, b = edges[:-1], edges[1:]
        return (self.s(a) + 4.0 * self.s(0.5 * (a + b)) + self.s(b)) / 6.0

    def lp_norm(self, p: float, lo: float = -40.0, hi: float = 40.0) -> float:
        """``||Sigma^2||_{L^p(R)}`` by adaptive quadrature."""
        brk = sorted({lo, hi, *[x for x in self.singular_points if lo < x < hi]})
        total = 0.0
        for a, b in zip(brk[:-1], brk[1:]):
            val, _ = scipy.integrate.quad(lambda x: abs(float(self.sigma2(np.asarray(x)))) ** p,
                                          a, b, limit=500)
            total += val
        return total ** (1.0 / p)

    def spec(self) -> dict:
        return {"kind": type(self).__name__}


class SingularProfile(Profile):
    """``Sigma^2(x) = min(|x|^-gamma, cap) * exp(-x^2)`` (envelope optional)."""

    singular_points = (0.0,)

    def __init__(self, gamma: float, cap: float = 1e3, envelope: bool = True):
        if not 0.0 < gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
        if not cap > 0:
            raise ValueError("cap must be positive")
        self.gamma = float(gamma)
        self.cap = float(cap)
        self.envelope = bool(envelope)

    def sigma2(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            v = np.minimum(np.abs(x) ** (-self.gamma), self.cap)
        return v * np.exp(-x * x) if self.envelope else v

    def _core_antiderivative(self, x):
        # G' = min(|x|^-g, sqrt(cap)) with g = gamma / 2, G odd
        g = 0.5 * self.gamma
        c = math.sqrt(self.cap) if math.isfinite(self.cap) else math.inf
        ax = np.abs(x)
        if math.isfinite(c):
            xc = c ** (-1.0 / g)
            inner = c * np.minimum(ax, xc)
            outer = (np.maximum(ax, xc) ** (1.0 - g) - xc ** (1.0 - g)) / (1.0 - g)
            val = inner + outer
        else:
            val = ax ** (1.0 - g) / (1.0 - g)
        return np.sign(x) * val

    def cell_average_s(self, edges):
        # exact for the power-law core, envelope taken at the cell centre
        a, b = edges[:-1], edges[1:]
        avg = (self._core_antiderivative(b) - self._core_antiderivative(a)) / (b - a)
        if self.envelope:
            m = 0.5 * (a + b)
            avg = avg * np.exp(-0.5 * m * m)
        return avg

    def spec(self):
        return {"kind": "singular", "gamma": self.gamma, "cap": self.cap, "envelope": self.envelope}


class ConstantProfile(Profile):
    """``Sigma^2 = c^2`` everywhere (infinite ``L^p`` norm on the line)."""

    def __init__(self, c: float):
        self.c = float(c)

    def sigma2(self, x):
        return np.full(np.shape(x), self.c * self.c)

    def s(self, x):
        return np.full(np.shape(x), abs(self.c))

    def lp_norm(self, p, lo=-40.0, hi=40.0):
        return 0.0 if self.c == 0 else math.inf

    def spec(self):
        return {"kind": "constant", "c": self.c}


class SmoothProfile(Profile):
    """``Sigma^2(x) = c^2 exp(-x^2 / width^2)``."""

    def __init__(self, c: float = 1.0, width: float = 1.0):
        self.c = float(c)
        self.width = float(width)

    def sigma2(self, x):
        x = np.asarray(x, dtype=float)
        return self.c * self.c * np.exp(-(x / self.width) ** 2)

    def spec(self):
        return {"kind": "smooth", "c": self.c, "width": self.width}


class TableProfile(Profile):
    """User-tabulated ``Sigma^2`` (linear interpolation, zero outside the table)."""

    def __init__(self, x, sigma2):
        self.x = np.asarray(x, dtype=float)
        self.values = np.asarray(sigma2, dtype=float)
        if self.x.shape != self.values.shape or np.any(np.diff(self.x) <= 0):
            raise ValueError("table needs increasing x and matching values")
        if np.any(self.values < 0):
            raise ValueError("Sigma^2 must be nonnegative")

    def sigma2(self, x):
        return np.interp(x, self.x, self.values, left=0.0, right=0.0)

    def spec(self):
        return {"kind": "table", "n": int(self.x.size)}


class FunctionProfile(Profile):
    """Wrap a vectorised callable ``x -> Sigma^2(x)``."""

    def __init__(self, fn, singular_points=()):
        self.fn = fn
        self.singular_points = tuple(singular_points)

    def sigma2(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)


def profile_from_spec(spec: dict) -> Profile:
    kind = spec.get("kind")
    if kind == "singular":
        return SingularProfile(spec["gamma"], spec.get("cap", 1e3), spec.get("envelope", True))
    if kind == "constant":
        return ConstantProfile(spec["c"])
    if kind == "smooth":
        return SmoothProfile(spec.get("c", 1.0), spec.get("width", 1.0))
    raise ValueError(f"unknown profile kind {kind!r}")


# -- coefficients --------------------------------------------------------------


def default_mode_weights(K_noise: int) -> np.ndarray:
    """``a_k`` proportional to ``(1 + k^2)^-1``, ``k = 1..K_noise``, unit Euclidean norm."""
    k = np.arange(1, K_noise + 1, dtype=float)
    a = 1.0 / (1.0 + k * k)
    return a / np.linalg.norm(a)


def _require_finite(vals: np.ndarray, args: np.ndarray):
    bad = ~np.isfinite(vals)
    if np.any(bad):
        x = np.asarray(args, dtype=float)[bad].ravel()[0]
        raise FloatingPointError(
            f"diffusion coefficient is not finite at argument {float(x)!r}; "
            "use a capped profile or mollify it")


class DiffusionCoefficient:
    """Noise coefficients ``sigma_k = a_k s`` for ``k = 1..K_noise``."""

    def __init__(self, profile: Profile, K_noise: int, weights=None, p: float = 2.0):
        if K_noise < 1:
            raise ValueError("K_noise must be positive")
        self.profile = profile
        self.K_noise = int(K_noise)
        a = default_mode_weights(K_noise) if weights is None else np.asarray(weights, dtype=float)
        if a.shape != (K_noise,) or not math.isclose(float(a @ a), 1.0, rel_tol=1e-12):
            raise ValueError("mode weights need length K_noise and unit Euclidean norm")
        self.a = a
        self.p = float(p)

    def s(self, x) -> np.ndarray:
        v = self.profile.s(x)
        _require_finite(v, x)
        return v

    def sigma2(self, x) -> np.ndarray:
        v = self.profile.sigma2(x)
        _require_finite(v, x)
        return v

    def sigma_k(self, x) -> np.ndarray:
        """All coefficients at ``x``; trailing axis is ``k``."""
        return self.s(x)[..., None] * self.a

    @cached_property
    def lp_norm(self) -> float:
        return self.profile.lp_norm(self.p)

    def spec(self) -> dict:
        return {"profile": self.profile.spec(), "K_noise": self.K_noise, "p": self.p}

    # solver protocol: pointwise noise field and its projections
    def noise_field(self, args: np.ndarray, dbeta: np.ndarray):
        S = self.s(args)
        return S * (dbeta @ self.a)[:, None], S

    def hs_density(self, args: np.ndarray, S: np.ndarray) -> np.ndarray:
        return S * S


# -- mollification ------------------------------------------------------------

_BUMP_MASS = scipy.integrate.quad(lambda x: math.exp(-1.0 / (1.0 - x * x)), -1.0, 1.0)[0]


def bump(x) -> np.ndarray:
    """Normalised bump ``C exp(-1/(1-x^2))`` supported on ``(-1, 1)``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2)) / _BUMP_MASS
    return out


def _smooth_step(r):
    # 1 at r <= 0, 0 at r >= 1, C-infinity in between
    r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f0 = np.where(r < 1.0, np.exp(-1.0 / np.maximum(1.0 - r, 1e-300)), 0.0)
        f1 = np.where(r > 0.0, np.exp(-1.0 / np.maximum(r, 1e-300)), 0.0)
    return f0 / (f0 + f1)


def cutoff(x, epsilon: float) -> np.ndarray:
    """Smooth cutoff: 1 on ``|x| <= 1/eps``, 0 on ``|x| >= 1/eps + 1``."""
    return _smooth_step(np.abs(np.asarray(x, dtype=float)) - 1.0 / epsilon)


class MollifiedDiffusion(DiffusionCoefficient):
    """``sigma_{k,eps} = (sigma_k * rho_eps) phi_eps`` tabulated on a uniform grid.

    Evaluation is linear interpolation in the table and exactly zero outside
    it; the table spans the support of the cutoff, so every argument is
    covered.
    """

    def __init__(self, parent: DiffusionCoefficient, epsilon: float, x0: float, h: float,
                 table: np.ndarray):
        super().__init__(parent.profile, parent.K_noise, parent.a, parent.p)
        self.parent = parent
        self.epsilon = float(epsilon)
        self.x0 = float(x0)
        self.h = float(h)
        self.table = np.asarray(table, dtype=float)

    @property
    def grid(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.table.size)

    def s(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        pos = (x - self.x0) / self.h
        n = self.table.size
        inside = (pos >= 0.0) & (pos <= n - 1)
        pos = np.where(inside, pos, 0.0)
        i = np.minimum(pos.astype(np.int64), n - 2)
        f = pos - i
        val = self.table[i] * (1.0 - f) + self.table[i + 1] * f
        return np.where(inside, val, 0.0)

    def sigma2(self, x) -> np.ndarray:
        v = self.s(x)
        return v * v

    @cached_property
    def c_eps(self) -> float:
        """``sqrt(sup Sigma_eps^2)``."""
        return float(np.abs(self.table).max())

    @cached_property
    def C_eps(self) -> float:
        """Lipschitz constant of ``x -> sigma_eps(x)`` in Hilbert-Schmidt norm."""
        return float(np.abs(np.diff(self.table)).max() / self.h)

    @cached_property
    def lp_norm(self) -> float:
        """``||Sigma_eps^2||_{L^p}`` by trapezoid quadrature on the table."""
        return float(np.trapezoid(np.abs(self.table) ** (2.0 * self.p), dx=self.h)) ** (1.0 / self.p)

    def spec(self) -> dict:
        return {**self.parent.spec(), "epsilon": self.epsilon, "table_h": self.h,
                "c_eps": self.c_eps, "C_eps": self.C_eps}


def mollify(sigma: DiffusionCoefficient, epsilon: float, resolution: int = 64) -> MollifiedDiffusion:
    """Cut-off mollification at scale ``epsilon``.

    ``s`` is averaged over cells of width ``epsilon / resolution``, convolved
    with the discretised bump ``rho_eps`` and multiplied by the cutoff.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if resolution < 8:
        raise ValueError("table spacing must be at most epsilon / 8")
    h = epsilon / resolution
    R = 1.0 / epsilon + 1.0  # cutoff support
    n_half = int(math.ceil((R + 2 * epsilon) / h))
    centers = h * np.arange(-n_half, n_half + 1)
    edges = np.concatenate([centers - 0.5 * h, [centers[-1] + 0.5 * h]])
    s_cells = sigma.profile.cell_average_s(edges)
    _require_finite(s_cells, centers)
    kx = h * np.arange(-resolution, resolution + 1)
    kern = bump(kx / epsilon)
    kern /= kern.sum()
    smooth = scipy.signal.fftconvolve(s_cells, kern, mode="same")
    table = np.clip(smooth, 0.0, None) * cutoff(centers, epsilon)
    return MollifiedDiffusion(sigma, epsilon, centers[0], h, table)


def sigma_difference_lp(a: MollifiedDiffusion, b: MollifiedDiffusion, p: float | None = None) -> float:
    """``||sum_k (sigma_{k,a} - sigma_{k,b})^2||_{L^p}`` on the finer table."""
    p = a.p if p is None else p
    fine = a if a.h <= b.h else b
    lo = min(a.grid[0], b.grid[0])
    hi = max(a.grid[-1], b.grid[-1])
    x = np.arange(lo, hi + fine.h, fine.h)
    d2 = (a.s(x) - b.s(x)) ** 2 * float(a.a @ b.a)
    return float(np.trapezoid(d2 ** p, x)) ** (1.0 / p)


# -- additive noise on real Fourier modes --------------------------------------


def real_basis(j: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal real basis on the torus: ``1/sqrt(2pi)``, ``cos(jx)/sqrt(pi)``, ``sin(|j|x)/sqrt(pi)`` (j<0)."""
    x = np.asarray(x, dtype=float)
    if j == 0:
        return np.full_like(x, 1.0 / math.sqrt(2.0 * math.pi))
    if j > 0:
        return np.cos(j * x) / math.sqrt(math.pi)
    return np.sin(-j * x) / math.sqrt(math.pi)


class AdditiveNoise:
    """State-independent noise ``sigma_k(x) = c * phi_{m_k}(x)`` on chosen real modes.

    Drives each listed Fourier coordinate with its own Brownian motion; used
    for closed-form Ornstein-Uhlenbeck checks of the solver.
    """

    def __init__(self, c: float, modes=(1,)):
        self.c = float(c)
        self.modes = tuple(int(m) for m in modes)
        self.K_noise = len(self.modes)

    def basis(self, M: int) -> np.ndarray:
        x = 2.0 * np.pi * np.arange(M) / M
        return np.stack([real_basis(m, x) for m in self.modes])

    def noise_field(self, args, dbeta):
        phi = self.basis(args.shape[-1])
        return self.c * (dbeta @ phi), None

    def hs_density(self, args, S):
        phi = self.basis(args.shape[-1])
        return np.broadcast_to(self.c ** 2 * (phi ** 2).sum(axis=0), args.shape)

    @property
    def lp_norm(self) -> float:
        return math.inf

    def spec(self) -> dict:
        return {"profile": {"kind": "additive", "c": self.c, "modes": list(self.modes)},
                "K_noise": self.K_noise}


# -- Hilbert-Schmidt norm -----------------------------------------------------


def hs_norm_sq(sigma: DiffusionCoefficient, u: SpectralField, method: str = "sigma2",
               M: int | None = None) -> np.ndarray:
    """``||sigma(u)||_HS^2 = int_T Sigma^2(u(x)) dx`` by quadrature on ``M = 4K`` points.

    ``method="modes"`` sums ``||sigma_k(u)||_{L^2}^2`` over ``k`` instead.
    """
    M = max(4 * u.K, 4) if M is None else M
    U = to_grid(u, M)
    w = 2.0 * np.pi / M
    if method == "sigma2":
        return w * sigma.sigma2(U).sum(axis=-1)
    if method == "modes":
        sk = sigma.sigma_k(U)
        return w * (sk * sk).sum(axis=(-2, -1))
    raise ValueError(f"unknown method {method!r}")
