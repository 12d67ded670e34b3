"""Monte Carlo and sewing checks on ensembles of the mollified equation."""
from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from ..occupation import SpatialGrid, cell_average_kernel, convolve_measure, occupation_counts
from ..sewing import Germ, sew, volterra_sew
from ..spectral import SpectralField, sobolev_norm, to_grid
from ..verdict import Check
from .coefficients import MollifiedDiffusion, sigma_difference_lp
from .solver import EnsembleResult, EnsembleSpec, _integrate_batch, run_ensemble

TWO_PI = 2.0 * math.pi


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf


# -- Ito isometry and BDG ratios ----------------------------------------------


def ito_isometry_check(res: EnsembleResult, tol: float = 0.05, ms: Sequence[int] = (2, 4),
                       name: str = "ito isometry") -> Check:
    """Compare ``E||int sigma dW||^2`` with ``E int int Sigma^2 dx dr`` at time ``T``.

    The gap is relative to the Hilbert-Schmidt side; its standard error is
    that of the paired per-sample difference. The BDG ratios
    ``E sup_t ||I_t||^m / E (int ||sigma||_HS^2)^{m/2}`` are reported.
    """
    lhs, lhs_se = _mean_se(res.noise_sq)
    rhs, rhs_se = _mean_se(res.hs_integral)
    d, d_se = _mean_se(res.noise_sq - res.hs_integral)
    if rhs == 0.0:
        gap, se = (0.0 if lhs == 0.0 else math.inf), 0.0
    else:
        gap, se = abs(d) / rhs, d_se / rhs
    bdg = {}
    for m in ms:
        den = float(np.mean(res.hs_integral ** (m / 2)))
        bdg[m] = float(np.mean(res.noise_sup_sq ** (m / 2))) / den if den > 0 else math.nan
    return Check(name, bool(gap < tol), gap, tol, se, details={
        "lhs": lhs, "lhs_se": lhs_se, "rhs": rhs, "rhs_se": rhs_se, "n_samples": res.n_samples,
        "bdg_ratio": bdg})


# -- local-time germ of the identification ------------------------------------


class LocalTimeGerm:
    """Germ ``A_{s,t} = int_T (Sigma^2 * L_{s,t})(u_s(x)) dx`` for one sample.

    ``L`` is the histogram local time of the fine path ``w``; averaged fields
    ``Sigma^2 * L`` are formed once per interval of the scheme grid and summed
    (by cumulative differences) for coarser intervals. ``u_s`` is the scheme
    state at the left endpoint, evaluated on the ``M``-point torus grid.
    """

    def __init__(self, spec: EnsembleSpec, sample: int, dx: float | None = None):
        if not hasattr(spec.sigma, "sigma2"):
            raise TypeError("identification needs a state-dependent coefficient")
        level = int(round(math.log2(spec.n_t)))
        if 1 << level != spec.n_t:
            raise ValueError("identification needs n_t a power of two")
        self.spec = spec
        self.level = level
        fixed = dataclasses.replace(spec, n_samples=1, batch=1, record_every=1, record_states=True,
                                    modes=(), sobolev_alphas=(), diff_sigmas=())
        out = _integrate_batch(_Shifted(fixed, sample), 0, 1)
        self.U = to_grid(SpectralField(out["states"][0]), spec.grid_size)  # (n_t + 1, M)
        self.w = spec.path(sample)
        wv = self.w.values
        lo = min(wv.min(), self.U.min()) - 0.5
        hi = max(wv.max(), self.U.max()) + 0.5
        eps = getattr(spec.sigma, "epsilon", 0.1)
        self.grid = SpatialGrid.with_spacing(lo, hi, dx or eps / 32)
        counts = occupation_counts(self.w, self.grid, np.arange(0, self.w.n_steps + 1, spec.w_refine))
        mass = np.diff(counts, axis=0) * self.w.dt
        kern = cell_average_kernel(spec.sigma.sigma2, self.grid.dx, self.grid.n_bins)
        fields = convolve_measure(kern, mass)
        self.cum = np.zeros((spec.n_t + 1, self.grid.n_bins))
        np.cumsum(fields, axis=0, out=self.cum[1:])

    def _eval(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        F = self.cum[j] - self.cum[i]  # (P, n_bins)
        y = self.U[i]  # (P, M)
        g = self.grid
        pos = (y - g.centers[0]) / g.dx
        if np.any(pos < 0) or np.any(pos > g.n_bins - 1):
            raise ValueError("state left the local-time grid")
        k = np.minimum(pos.astype(np.int64), g.n_bins - 2)
        f = pos - k
        vals = np.take_along_axis(F, k, axis=1) * (1 - f) + np.take_along_axis(F, k + 1, axis=1) * f
        return (TWO_PI / self.U.shape[1]) * vals.sum(axis=1)

    def germ(self) -> Germ:
        return Germ.on_grid(self._eval, self.spec.n_t, self.spec.T)

    def direct(self, s: float, t: float, eta: float = 0.0) -> float:
        """``int_s^t (t-r)^-eta int_T Sigma^2(u_r - w_r) dx dr`` on the fine path grid.

        ``u`` is piecewise constant on scheme steps; ``w`` uses its own grid.
        """
        R = self.spec.w_refine
        dtf = self.w.dt
        a = int(round(s / dtf))
        b = int(round(t / dtf))
        r = np.arange(a, b)
        Un = self.U[r // R]  # (P, M)
        vals = self.spec.sigma.sigma2(Un - self.w.values[r, None]).mean(axis=1) * TWO_PI
        weight = (t - r * dtf) ** (-eta) if eta else 1.0
        return float((vals * weight).sum() * dtf)


class _Shifted(EnsembleSpec):
    """Spec whose sample 0 is sample ``offset`` of the parent."""

    def __init__(self, spec: EnsembleSpec, offset: int):
        super().__init__(**{f.name: getattr(spec, f.name) for f in dataclasses.fields(spec)})
        self._offset = offset

    def path(self, i):
        return EnsembleSpec.path(self, i + self._offset)

    def increments(self, i):
        return EnsembleSpec.increments(self, i + self._offset)


def identification_sewing(spec: EnsembleSpec, samples: Sequence[int] = range(16),
                          tol: float = 0.02, m: int = 2, dx: float | None = None) -> Check:
    """Sewn local-time germ against the direct time integral on ``[0, T]``.

    Sewing runs over dyadic levels up to ``log2(n_t)`` without extrapolation
    (the germ is random). The check passes when every per-sample relative gap
    is below ``tol``; ``L^{m/2}(Omega)`` norms of both sides are reported.
    """
    sewn, direct, gaps, hist = [], [], [], []
    for i in samples:
        lg = LocalTimeGerm(spec, i, dx)
        res = sew(lg.germ(), 0.0, spec.T, max_level=lg.level, tol=0.0, extrapolate=False,
                  cert_depth=0)
        d = lg.direct(0.0, spec.T)
        sewn.append(float(res.raw_value))
        direct.append(d)
        gaps.append(float(abs(res.raw_value - d) / abs(d) if d else abs(res.raw_value)))
        hist.append(res.gaps)
    sewn, direct = np.array(sewn), np.array(direct)
    q = m / 2.0
    worst = float(max(gaps))
    return Check("identification sewing", bool(worst < tol), worst, tol, details={
        "mean_rel_gap": float(np.mean(gaps)), "per_sample_gap": gaps,
        "sewn_norm": float(np.mean(np.abs(sewn) ** q) ** (1 / q)),
        "direct_norm": float(np.mean(np.abs(direct) ** q) ** (1 / q)),
        "level": int(round(math.log2(spec.n_t))), "gap_history": hist})


def volterra_bound_check(specs: dict, eta: float, gamma0: float, delta: float = 0.02,
                         st_pairs: Sequence[tuple] = ((0.0, 1.0), (0.5, 1.0), (0.75, 1.0)),
                         samples: Sequence[int] = range(8), m: int = 2,
                         factor: float = 2.0) -> Check:
    """Fitted constant of the Volterra-sewing bound across ``(s, t)`` and ``epsilon``.

    ``specs`` maps ``epsilon`` to an ensemble spec. For each pair the
    ``L^{m/2}(Omega)`` norm of the weighted sewing is divided by
    ``(t-s)^{gamma0-eta-delta} ||Sigma_eps^2||_{L^p} (1 + [u]_{gamma0/2})``
    with ``[u]`` the ``L^m``-averaged Hoelder seminorm of ``t -> u_t`` in
    ``L^2``. The check passes when the per-epsilon maxima stay within
    ``factor`` of each other.
    """
    if not eta < gamma0 - delta:
        raise ValueError("need eta < gamma0 - delta")
    fitted, table = {}, []
    q = m / 2.0
    for eps, spec in specs.items():
        vals = {st: [] for st in st_pairs}
        hold = []
        for i in samples:
            lg = LocalTimeGerm(spec, i)
            g = lg.germ()
            for s, t in st_pairs:
                r = volterra_sew(g, eta, t, s=s, max_level=lg.level - _depth(s, t, spec.T),
                                 tol=0.0, extrapolate=False)
                vals[(s, t)].append(float(r.raw_value))
            hold.append(_holder_seminorm(lg.U, spec.dt, gamma0 / 2.0))
        hnorm = float(np.mean(np.array(hold) ** m) ** (1 / m))
        cs = []
        for (s, t), v in vals.items():
            nrm = float(np.mean(np.abs(v) ** q) ** (1 / q))
            c = nrm / ((t - s) ** (gamma0 - eta - delta) * spec.sigma.lp_norm * (1.0 + hnorm))
            cs.append(c)
            table.append({"epsilon": eps, "s": s, "t": t, "norm": nrm, "C": c})
        fitted[eps] = max(cs)
    spread = max(fitted.values()) / min(fitted.values())
    return Check("volterra bound constant", bool(spread <= factor), spread, factor,
                 mandatory=False, details={"fitted": fitted, "table": table, "eta": eta})


def _depth(s: float, t: float, T: float) -> int:
    d = math.log2(T / (t - s))
    if abs(d - round(d)) > 1e-9:
        raise ValueError("interval length must be T / 2^j")
    return int(round(d))


def _holder_seminorm(U: np.ndarray, dt: float, alpha: float) -> float:
    """Dyadic-lag Hoelder seminorm of ``t -> U_t`` in ``L^2(T)`` (grid values)."""
    n = U.shape[0] - 1
    quad = TWO_PI / U.shape[1]
    best = 0.0
    lag = 1
    while lag <= n:
        d = np.sqrt(quad * ((U[lag:] - U[:-lag]) ** 2).sum(axis=1)).max()
        best = max(best, d / (lag * dt) ** alpha)
        lag *= 2
    return float(best)


# -- a-priori bounds ---------------------------------------------------------


def holder_lm_estimate(states: np.ndarray, times: np.ndarray, alpha: float, m: float) -> float:
    """``sup_{dyadic lags} (E||u_t - u_s||_{L^2}^m)^{1/m} / |t-s|^alpha``."""
    n = states.shape[1] - 1
    best = 0.0
    lag = 1
    while lag <= n:
        diff = SpectralField(states[:, lag:] - states[:, :-lag])
        nrm = sobolev_norm(diff, 0.0)  # (N, n - lag + 1)
        lm = np.mean(nrm ** m, axis=0) ** (1.0 / m)
        best = max(best, float(lm.max()) / (times[lag] - times[0]) ** alpha)
        lag *= 2
    return best


def apriori_holder(results: dict, gamma0: float, ms: Sequence[float] = (2, 8),
                   factor: float = 2.0) -> list[Check]:
    """Hoelder-``L^m`` estimates of ``u^eps`` with exponent ``gamma0/2`` across the ladder."""
    checks = []
    for m in ms:
        est = {eps: holder_lm_estimate(r.states, r.record_times, gamma0 / 2.0, m)
               for eps, r in results.items()}
        checks.append(_ladder_check(f"a-priori hoelder m={m}", est, factor))
    return checks


def apriori_sobolev(results: dict, gamma0: float, ms: Sequence[float] = (2, 8),
                    factor: float = 2.0) -> list[Check]:
    """``(E sup_t ||u_t||_{H^gamma0}^m)^{1/m}`` across the ladder.

    Needs ensembles run with ``sobolev_alphas`` containing ``gamma0``.
    """
    checks = []
    for m in ms:
        est = {}
        for eps, r in results.items():
            col = list(r.spec.sobolev_alphas).index(gamma0)
            est[eps] = float(np.mean(r.sobolev_sup[:, col] ** m) ** (1.0 / m))
        checks.append(_ladder_check(f"a-priori sobolev m={m}", est, factor))
    return checks


def _ladder_check(name: str, est: dict, factor: float) -> Check:
    vals = np.array(list(est.values()))
    if np.all(vals == 0):
        spread = 1.0
    else:
        spread = float(vals.max() / vals.min()) if vals.min() > 0 else math.inf
    return Check(name, bool(spread <= factor), spread, factor, details={"estimates": est})


# -- Cauchy property in epsilon ------------------------------------------------


def cauchy_in_epsilon(base: EnsembleSpec, ladder: Sequence[MollifiedDiffusion],
                      min_decrease: float = 0.3, noise_tol: float = 0.1,
                      jobs: int = 1) -> Check:
    """Coupled distances ``E sup_t ||int (sigma_eps - sigma_eps')(u - w) dW||^2`` down a ladder.

    One ensemble is integrated with the coefficient of the smallest epsilon
    (the frozen ``u``); the differences of successive rungs are integrated
    along it against the same increments. Passes when each rung shrinks the
    distance by at least ``min_decrease`` and the ``||Sigma^2_{eps,eps'}||_{L^p}``
    column does not grow by more than ``noise_tol``.
    """
    eps = [m.epsilon for m in ladder]
    if eps != sorted(eps, reverse=True):
        raise ValueError("ladder must be sorted by decreasing epsilon")
    for m in ladder[1:]:
        if m.K_noise != ladder[0].K_noise or not np.array_equal(m.a, ladder[0].a):
            raise ValueError("coupling needs identical noise modes and weights on every rung")
    pairs = tuple(zip(ladder[:-1], ladder[1:]))
    spec = dataclasses.replace(base, sigma=ladder[-1], diff_sigmas=pairs)
    res = run_ensemble(spec, jobs=jobs)
    dist, dist_se = zip(*(_mean_se(res.diff_sup_sq[:, i]) for i in range(len(pairs))))
    lp = [sigma_difference_lp(a, b) for a, b in pairs]
    ratios = [b / a if a > 0 else math.nan for a, b in zip(dist[:-1], dist[1:])]
    lp_ok = all(b <= a * (1 + noise_tol) for a, b in zip(lp[:-1], lp[1:]))
    ok = all(r <= 1.0 - min_decrease for r in ratios) and lp_ok
    worst = max(ratios) if ratios else 0.0
    return Check("cauchy in epsilon", bool(ok), worst, 1.0 - min_decrease, details={
        "pairs": [(a.epsilon, b.epsilon) for a, b in pairs], "distance": list(dist),
        "distance_se": list(dist_se), "sigma_diff_lp": lp, "ratios": ratios,
        "lp_decreasing": lp_ok, "hs_difference": res.diff_hs.mean(axis=0).tolist()})


# -- martingale defects ------------------------------------------------------


def martingale_check(res: EnsembleResult, s: float, t: float, n_se: float = 3.0) -> list[Check]:
    """Three martingale defects per tracked mode for ``Phi = 1`` and ``Phi = tanh(u_s(0))``.

    With ``M^j`` the ``j``-th real coordinate of ``u_t - u_0 - int Delta u``
    (the accumulated noise), the defects are the means of
    ``Phi (M_t - M_s)``, ``Phi (M_t^2 - M_s^2 - <M>_s^t)`` and
    ``Phi (M_t beta_t - M_s beta_s - <M, beta>_s^t)``. Each passes when it is
    within ``n_se`` standard errors of 0 (or exactly 0).
    """
    times = res.record_times
    a = int(np.argmin(np.abs(times - s)))
    b = int(np.argmin(np.abs(times - t)))
    if not (math.isclose(times[a], s, abs_tol=1e-12) and math.isclose(times[b], t, abs_tol=1e-12)):
        raise ValueError("s and t must be record times")
    phis = {"1": np.ones(res.n_samples), "tanh(u_s(0))": np.tanh(res.point0[:, a])}
    Ms, Mt = res.mart[:, a], res.mart[:, b]
    d_qv = res.qv[:, b] - res.qv[:, a]
    d_x = res.cross[:, b] - res.cross[:, a]
    Bs, Bt = res.beta[:, a, None], res.beta[:, b, None]
    defects = {
        "increment": Mt - Ms,
        "quadratic variation": Mt ** 2 - Ms ** 2 - d_qv,
        "cross bracket": Mt * Bt - Ms * Bs - d_x,
    }
    checks = []
    for pname, phi in phis.items():
        for dname, arr in defects.items():
            for jj, j in enumerate(res.spec.modes):
                x = phi * arr[:, jj]
                mean, se = _mean_se(x)
                ok = mean == 0.0 or abs(mean) <= n_se * se
                checks.append(Check(f"martingale {dname} j={j} phi={pname}", bool(ok), mean,
                                    n_se * se, se))
    return checks


# -- noiseless and scheme checks ----------------------------------------------


def heat_flow_check(res: EnsembleResult, tol: float = 1e-12) -> Check:
    """With zero noise the final state equals ``P_T u_0`` exactly."""
    spec = res.spec
    k = np.arange(spec.K + 1, dtype=float)
    exact = np.asarray(spec.u0) * np.exp(-k * k * spec.T)
    err = float(np.abs(res.final - exact).max())
    return Check("noiseless heat flow", err <= tol * max(1.0, float(np.abs(exact).max())) * spec.n_t,
                 err, tol * spec.n_t)


def scheme_convergence_check(spec: EnsembleSpec, halvings: int = 3, min_order: float = 0.5,
                             n_se: float = 3.0, jobs: int = 1) -> Check:
    """Weak error of ``E||u_T||^2`` as the time step halves (coupled noise).

    All runs share the Brownian and path samples (drawn on the finest grid).
    Successive paired differences ``d_j`` decay like ``2^{-j q}``; the
    observed order ``q`` is the least-squares slope of ``-log2 |d_j|``.
    Start from a coarse ``spec.n_t``: the first two differences must exceed
    ``n_se`` standard errors to say anything. Advisory.
    """
    finest = 1 << halvings
    vals = []
    for j in range(halvings + 1):
        f = 1 << j
        sp = dataclasses.replace(spec, n_t=spec.n_t * f, w_refine=spec.w_refine * finest // f,
                                 noise_refine=spec.noise_refine * finest // f, record_every=0,
                                 record_states=False, modes=(), sobolev_alphas=(), diff_sigmas=())
        r = run_ensemble(sp, jobs=jobs)
        vals.append(sobolev_norm(SpectralField(r.final), 0.0) ** 2)
    diffs = [_mean_se(b - a) for a, b in zip(vals[:-1], vals[1:])]
    d = [abs(m) for m, _ in diffs]
    resolved = all(abs(m) > n_se * se for m, se in diffs[:2])
    if len(d) < 2 or min(d) == 0.0:
        order = math.inf
    else:
        order = -float(np.polyfit(np.arange(len(d)), np.log2(d), 1)[0])
    return Check("scheme weak order", bool(resolved and order >= min_order), order, min_order,
                 mandatory=False, details={
                     "estimates": [float(np.mean(v)) for v in vals],
                     "differences": [m for m, _ in diffs], "difference_se": [se for _, se in diffs],
                     "resolved": resolved})
