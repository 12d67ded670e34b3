"""Sewing of two-parameter germs by dyadic refinement.

A germ is a map ``(s, t) -> A_{s,t}`` with ``A_{t,t} = 0``. Its sewing is
the limit of the Riemann sums ``S_L = sum_{[u,v]} A_{u,v}`` over the dyadic
partitions of ``[s, t]``; when ``delta A`` is small of order ``|t-s|^beta``
with ``beta > 1`` the limit exists and does not depend on the partition.

Convergence is certified empirically from the Cauchy gaps
``|S_L - S_{L-1}|``. When those gaps decay geometrically the limit is
accelerated by Richardson extrapolation, and raw and extrapolated values
are both reported.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)

GermFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

#: two successive observed decay exponents must agree this well before extrapolating
RATE_AGREEMENT = 0.1


class SewingError(RuntimeError):
    """No empirical sewing at the requested tolerance."""

    def __init__(self, msg: str, gaps: Sequence[float]):
        super().__init__(msg)
        self.gaps = list(gaps)


class Germ:
    """A vectorised two-parameter germ on ``[0, T]``.

    Parameters
    ----------
    fn : callable
        ``fn(s, t)`` for equal-shape float arrays ``s <= t``; returns an array
        of shape ``s.shape`` (scalar germ) or ``s.shape + (d,)`` (vector germ).
    T : float
        Time horizon.
    alpha_hint, beta_hint : float, optional
        Declared regularity of ``A`` and of ``delta A``.
    resolution : int, optional
        Finest dyadic level at which ``fn`` may be evaluated (germs built on a
        sampled path only make sense on that path's grid).
    check_points : int
        ``A_{t,t} = 0`` is verified at this many equispaced times.
    """

    def __init__(self, fn: GermFn, T: float = 1.0, alpha_hint: float | None = None,
                 beta_hint: float | None = None, resolution: int | None = None,
                 check_points: int = 65, atol: float = 1e-12):
        self.fn = fn
        self.T = float(T)
        self.alpha_hint = alpha_hint
        self.beta_hint = beta_hint
        self.resolution = resolution
        if resolution is not None:
            check_points = min(check_points, (1 << resolution) + 1)
        tt = np.linspace(0.0, self.T, check_points)
        diag = self(tt, tt)
        if not np.all(np.abs(diag) <= atol):
            bad = tt[np.argmax(np.abs(diag).reshape(len(tt), -1).max(axis=1))]
            raise ValueError(f"germ does not vanish on the diagonal (A_(t,t) != 0 at t={bad:g})")

    def __call__(self, s, t) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        return np.asarray(self.fn(s, t), dtype=float)

    def __sub__(self, other: "Germ") -> "Germ":
        res = _min_resolution(self.resolution, other.resolution)
        return Germ(lambda s, t: self(s, t) - other(s, t), self.T, resolution=res)

    def scaled(self, c: float) -> "Germ":
        return Germ(lambda s, t: c * self(s, t), self.T, self.alpha_hint, self.beta_hint,
                    self.resolution)

    @classmethod
    def additive(cls, F: Callable, T: float = 1.0) -> "Germ":
        """``A_{s,t} = F(t) - F(s)``."""
        return cls(lambda s, t: F(t) - F(s), T, alpha_hint=1.0, beta_hint=math.inf)

    @classmethod
    def on_grid(cls, fn: Callable[[np.ndarray, np.ndarray], np.ndarray], n_steps: int,
                T: float = 1.0, **hints) -> "Germ":
        """Germ defined through grid indices: ``fn(i, j)`` for ``t_i <= t_j``.

        ``n_steps`` must be a power of two; evaluation off the grid raises.
        """
        level = int(round(math.log2(n_steps)))
        if 1 << level != n_steps:
            raise ValueError(f"n_steps must be a power of two, got {n_steps}")
        dt = T / n_steps

        def idx(x):
            k = np.rint(x / dt)
            if np.any(np.abs(x / dt - k) > 1e-8):
                raise ValueError("grid germ evaluated off its time grid")
            return k.astype(np.int64)

        return cls(lambda s, t: fn(idx(s), idx(t)), T, resolution=level, **hints)


def _min_resolution(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def young_germ(x: np.ndarray, y: np.ndarray, T: float = 1.0) -> Germ:
    """``A_{s,t} = x_s (y_t - y_s)`` for paths sampled on a common dyadic grid."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return Germ.on_grid(lambda i, j: x[i] * (y[j] - y[i]), len(x) - 1, T)


def _norm(a: np.ndarray, ndim: int) -> np.ndarray:
    """Euclidean norm over trailing value axes (``ndim`` = dims of the time index)."""
    a = np.asarray(a, dtype=float)
    if a.ndim == ndim:
        return np.abs(a)
    return np.sqrt((a.reshape(a.shape[:ndim] + (-1,)) ** 2).sum(axis=-1))


def delta(germ: Germ, s, u, t) -> np.ndarray:
    """``(delta A)_{s,u,t} = A_{s,t} - A_{s,u} - A_{u,t}``."""
    s, u, t = (np.asarray(v, dtype=float) for v in (s, u, t))
    if np.any(s > u) or np.any(u > t):
        raise ValueError("delta needs s <= u <= t")
    return germ(s, t) - germ(s, u) - germ(u, t)


def _dyadic_points(s: float, t: float, level: int) -> np.ndarray:
    n = 1 << level
    return s + (t - s) * (np.arange(n + 1) / n)


def germ_norms(germ: Germ, alpha: float, beta: float, depth: int,
               s: float = 0.0, t: float | None = None) -> tuple[float, float]:
    """Dyadic estimates of ``||A||_alpha`` and ``||delta A||_beta`` on ``[s, t]``.

    Pairs are the dyadic intervals of levels ``0..depth``; triples split each
    such interval at its midpoint and quartiles.
    """
    if depth < 2:
        raise ValueError("mesh depth must be at least 2")
    t = germ.T if t is None else t
    na = nb = 0.0
    for lev in range(depth + 1):
        p = _dyadic_points(s, t, lev)
        a, b = p[:-1], p[1:]
        h = (t - s) / (1 << lev)
        na = max(na, float(_norm(germ(a, b), 1).max()) / h ** alpha)
        for frac in (0.25, 0.5, 0.75):
            u = a + frac * (b - a)
            nb = max(nb, float(_norm(delta(germ, a, u, b), 1).max()) / h ** beta)
    return na, nb


def richardson(seq: Sequence[np.ndarray], exponents: Sequence[float]) -> np.ndarray:
    """Eliminate error terms ``c_i h^{q_i}`` from values at halving ``h``.

    ``seq`` holds ``len(exponents) + 1`` successive values, coarsest first.
    """
    vals = [np.asarray(v, dtype=float) for v in seq]
    if len(vals) != len(exponents) + 1:
        raise ValueError("need one more value than exponents")
    for q in exponents:
        f = 2.0 ** q - 1.0
        vals = [b + (b - a) / f for a, b in zip(vals[:-1], vals[1:])]
    return vals[-1]


def _rates(gaps: Sequence[float]) -> list:
    out = [math.nan]
    for g0, g1 in zip(gaps[:-1], gaps[1:]):
        out.append(math.log2(g0 / g1) if g0 > 0 and g1 > 0 else math.nan)
    return out


@dataclass
class SewingResult:
    """Outcome of :func:`sew` on ``[s, t]``.

    ``values`` is the cumulative sewing ``(I A)_{s, times_j}`` on a dyadic
    output grid, so every increment ``values[j] - values[i]`` is additive by
    construction.
    """

    times: np.ndarray
    values: np.ndarray
    raw_values: np.ndarray
    level: int
    gaps: list  # |S_L - S_{L-1}| of the raw sums, one per level from min_level + 1
    rates: list  # observed decay exponents log2(gap_{L-1} / gap_L)
    converged: bool
    tol: float
    extrapolation_exponent: float | None
    defect: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def value(self) -> np.ndarray:
        """Best estimate of ``(I A)_{s,t}``."""
        return self.values[-1]

    @property
    def raw_value(self) -> np.ndarray:
        return self.raw_values[-1]

    def increment(self, i: int, j: int) -> np.ndarray:
        return self.values[j] - self.values[i]

    def require(self) -> "SewingResult":
        """Raise :class:`SewingError` unless converged."""
        if not self.converged:
            raise SewingError(
                f"no empirical sewing at tolerance {self.tol:g} by level {self.level}", self.gaps)
        return self


def _level_sums(germ: Germ, s: float, t: float, level: int, out_level: int) -> np.ndarray:
    """Cumulative dyadic sums at ``level`` sampled on the ``out_level`` grid."""
    p = _dyadic_points(s, t, level)
    a = germ(p[:-1], p[1:])
    n_out = 1 << out_level
    a = a.reshape((n_out, -1) + a.shape[1:]).sum(axis=1)
    out = np.zeros((n_out + 1,) + a.shape[1:])
    np.cumsum(a, axis=0, out=out[1:])
    return out


def sew(germ: Germ, s: float = 0.0, t: float | None = None, max_level: int = 20,
        tol: float = 1e-10, min_level: int = 2, out_level: int = 8,
        extrapolate: bool = True, cert_depth: int = 6) -> SewingResult:
    """Sew ``germ`` on ``[s, t]`` by dyadic refinement.

    Levels ``min_level..max_level`` are visited until the Cauchy gap of the
    returned estimate drops below ``tol``. With ``extrapolate`` the estimate is
    the Richardson extrapolant with exponent ``beta_hint - 1`` (or the
    observed decay exponent), applied only once two successive observed
    exponents agree; otherwise it is the raw sum. Non-convergence is reported
    through ``converged=False``; call :meth:`SewingResult.require` to raise.
    """
    t = germ.T if t is None else float(t)
    if not s < t:
        raise ValueError("need s < t")
    if germ.resolution is not None:
        max_level = min(max_level, germ.resolution)
    out_level = min(out_level, max_level)
    min_level = min(max(min_level, out_level), max_level)
    flags = []
    if germ.beta_hint is None:
        flags.append("no beta hint: rate certified empirically only")

    raws, gaps, best_gaps = [], [], []
    best = prev_best = None
    q_used = None
    converged = False
    level = min_level
    for level in range(min_level, max_level + 1):
        raws.append(_level_sums(germ, s, t, level, out_level))
        raws = raws[-2:]
        if len(raws) < 2:
            best = raws[-1]
            continue
        gaps.append(float(_norm(raws[-1][-1] - raws[-2][-1], 0)))
        rates = _rates(gaps)
        q = None
        if extrapolate and len(rates) >= 2 and all(map(math.isfinite, rates[-2:])) \
                and abs(rates[-1] - rates[-2]) < RATE_AGREEMENT:
            hint = None
            if germ.beta_hint is not None and math.isfinite(germ.beta_hint):
                hint = germ.beta_hint - 1.0
            q = hint if hint is not None and abs(hint - rates[-1]) < RATE_AGREEMENT else rates[-1]
            q = q if q > 0 else None
        prev_best = best
        best = richardson(raws, [q]) if q is not None else raws[-1]
        q_used = q
        gap = float(_norm(best[-1] - prev_best[-1], 0))
        best_gaps.append(gap)
        if gap < tol or gaps[-1] == 0.0:
            converged = True
            break

    times = _dyadic_points(s, t, out_level)
    res = SewingResult(times=times, values=best, raw_values=raws[-1], level=level, gaps=gaps,
                       rates=_rates(gaps), converged=converged, tol=tol,
                       extrapolation_exponent=q_used, flags=flags)
    res.defect = _defect_certificate(germ, res, min(cert_depth, out_level))
    if not converged:
        log.info("sewing not converged at level %d (gap %.3e, tol %.1e)", level,
                 best_gaps[-1] if best_gaps else math.nan, tol)
    return res


def _defect_certificate(germ: Germ, res: SewingResult, depth: int) -> dict:
    """Per-scale ``max ||(I A)_{u,v} - A_{u,v}||`` and a fitted constant ``c``.

    ``c`` bounds the defect by ``c * ||delta A||_beta * h^beta`` on every
    dyadic pair of levels ``0..depth`` of the output grid.
    """
    n_out = len(res.times) - 1
    hs, worst = [], []
    for lev in range(depth + 1):
        stride = n_out >> lev
        idx = np.arange(0, n_out + 1, stride)
        sewn = res.values[idx[1:]] - res.values[idx[:-1]]
        a = germ(res.times[idx[:-1]], res.times[idx[1:]])
        hs.append(res.times[stride] - res.times[0])
        worst.append(float(_norm(sewn - a, 1).max()))
    hs, worst = np.array(hs), np.array(worst)
    beta = germ.beta_hint
    fitted = False
    if beta is None or not math.isfinite(beta):
        pos = worst > 0
        if pos.sum() >= 2:
            beta = float(np.polyfit(np.log(hs[pos]), np.log(worst[pos]), 1)[0])
            fitted = True
        else:
            beta = None
    out = {"h": hs.tolist(), "defect": worst.tolist(), "beta": beta, "beta_fitted": fitted,
           "constant": None}
    if beta is not None and depth >= 2:
        _, nb = germ_norms(germ, 1.0, beta, depth, res.times[0], res.times[-1])
        if nb > 0:
            out["norm_beta"] = float(nb)
            out["constant"] = float((worst / (nb * hs ** beta)).max())
    return out


# -- Volterra sewing ---------------------------------------------------------

@dataclass
class VolterraResult:
    """Weighted sewing ``int_0^t (t-r)^{-eta} A_{dr}``."""

    value: np.ndarray
    raw_value: np.ndarray
    level: int
    gaps: list
    rates: list
    converged: bool
    tol: float
    exponents: tuple
    holder: dict | None = None

    def require(self) -> "VolterraResult":
        if not self.converged:
            raise SewingError(
                f"no empirical Volterra sewing at tolerance {self.tol:g} by level {self.level}",
                self.gaps)
        return self


def _volterra_sum(germ: Germ, eta: float, s: float, t: float, level: int) -> np.ndarray:
    p = _dyadic_points(s, t, level)
    u, v = p[:-1], p[1:]
    a = germ(u, v)
    w = (t - u) ** (-eta)  # left endpoint, always < t
    return np.tensordot(w, a, axes=(0, 0))


def volterra_sew(germ: Germ, eta: float, t: float, max_level: int = 18, tol: float = 1e-6,
                 min_level: int = 2, s: float = 0.0, extrapolate: bool = True,
                 exponents: Sequence[float] | None = None,
                 holder_times: Sequence[float] | None = None) -> VolterraResult:
    """Dyadic limit of ``sum_{[u,v]} (t-u)^{-eta} A_{u,v}`` over ``[s, t]``.

    The left-endpoint sums of a germ with bounded derivative carry errors of
    orders ``h^{1-eta}`` and ``h``; with ``extrapolate`` both are removed by
    Richardson extrapolation (override via ``exponents``). ``holder_times``
    optionally adds an estimate of the Hoelder exponent of ``t -> value``.
    """
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    if not s < t:
        raise ValueError("need s < t")
    if germ.resolution is not None:
        max_level = min(max_level, germ.resolution)
    exps = tuple(exponents) if exponents is not None else (
        tuple(sorted({1.0 - eta, 1.0})) if eta > 0 else (1.0,))
    if not extrapolate:
        exps = ()
    min_level = min(min_level, max_level)
    sums, gaps, history = [], [], []
    converged = False
    level = min_level
    for level in range(min_level, max_level + 1):
        sums.append(_volterra_sum(germ, eta, s, t, level))
        if len(sums) >= 2:
            gaps.append(float(_norm(sums[-1] - sums[-2], 0)))
        k = min(len(exps), len(sums) - 1)
        history.append(richardson(sums[-(k + 1):], exps[:k]))
        if len(history) >= 2 and k == len(exps):
            if float(_norm(history[-1] - history[-2], 0)) < tol:
                converged = True
                break
    res = VolterraResult(value=history[-1], raw_value=sums[-1], level=level, gaps=gaps,
                         rates=_rates(gaps), converged=converged, tol=tol, exponents=exps)
    if holder_times is not None:
        res.holder = _volterra_holder(germ, eta, s, sorted(holder_times), level, exps)
    return res


def _volterra_holder(germ, eta, s, times, level, exps) -> dict:
    vals = []
    for tt in times:
        seq = [_volterra_sum(germ, eta, s, tt, lev) for lev in range(level - len(exps), level + 1)]
        vals.append(float(np.asarray(richardson(seq, exps)).ravel()[0]))
    vals = np.array(vals)
    times = np.array(times)
    dt = np.abs(times[:, None] - times[None, :])
    dv = np.abs(vals[:, None] - vals[None, :])
    iu = np.triu_indices(len(times), 1)
    ok = dv[iu] > 0
    expo = float(np.polyfit(np.log(dt[iu][ok]), np.log(dv[iu][ok]), 1)[0]) if ok.sum() >= 2 else None
    return {"times": times.tolist(), "values": vals.tolist(), "exponent": expo}


# -- stability under germ approximation ---------------------------------------

@dataclass
class StabilityReport:
    distances: list  # ||I(A - A^n)||_alpha along the family
    monotone: bool
    noise_tol: float

    @property
    def ok(self) -> bool:
        return self.monotone


def sewn_holder_norm(res: SewingResult, alpha: float, depth: int | None = None) -> float:
    """``max |(I A)_{u,v}| / |v-u|^alpha`` over dyadic pairs of the output grid."""
    n_out = len(res.times) - 1
    depth = int(math.log2(n_out)) if depth is None else depth
    best = 0.0
    for lev in range(depth + 1):
        stride = n_out >> lev
        idx = np.arange(0, n_out + 1, stride)
        inc = _norm(res.values[idx[1:]] - res.values[idx[:-1]], 1)
        best = max(best, float(inc.max()) / (res.times[stride] - res.times[0]) ** alpha)
    return best


def sewing_stability_check(germs: Sequence[Germ], limit: Germ, alpha: float,
                           level: int = 12, noise_tol: float = 0.1) -> StabilityReport:
    """Check ``||I(A - A^n)||_alpha`` decreases along ``germs``.

    All sewings use the same fixed level so that only the germs vary. A step
    is accepted when it does not exceed the previous distance by more than
    the relative ``noise_tol``.
    """
    dists = []
    for g in germs:
        res = sew(limit - g, min_level=level, max_level=level, extrapolate=False, cert_depth=0)
        dists.append(sewn_holder_norm(res, alpha))
    mono = all(b <= a * (1.0 + noise_tol) for a, b in zip(dists[:-1], dists[1:]))
    return StabilityReport(distances=dists, monotone=bool(mono), noise_tol=noise_tol)
