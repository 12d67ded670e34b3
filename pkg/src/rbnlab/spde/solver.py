"""Exponential-Euler scheme for the mollified stochastic heat equation.

One step on the spectral state reads

    u^{n+1} = exp(-k^2 dt) (u^n + g^n),
    g^n(x) = sum_k sigma_k(u^n(x) - w_{t_n}) dbeta^k_n,

with ``g^n`` formed pointwise on ``M = 4K`` torus points. Monte Carlo
ensembles are integrated in batches; every sample draws its path and noise
from its own seeded stream, so results are bit-identical for any number of
worker processes and agree to rounding (batched FFTs) across batch sizes.

Besides (optionally) the recorded states, the integrator keeps per-sample
running accumulators:

* the stochastic integral ``I_t = sum_n g^n`` on the grid (no semigroup),
  its final squared norm and its running supremum;
* the Hilbert-Schmidt integral ``dt sum_n int Sigma^2(u^n - w_n) dx``;
* running suprema of Sobolev norms of the state;
* Fourier coordinates of ``I`` and the bracket integrands needed for the
  martingale checks;
* stochastic integrals of coefficient differences along the same ``u``.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .._rng import STREAM_NOISE, stream
from ..paths import SamplePath, generate_fbm
from ..spectral import SpectralField, dump_coefficients, sobolev_norm

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CylindricalIncrements:
    """Brownian increments ``dbeta^k_n ~ N(0, dt)`` for one sample."""

    n_t: int
    K_noise: int
    dt: float
    seed: int
    sample: int
    dbeta: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def draw(cls, n_t: int, K_noise: int, dt: float, seed: int, sample: int = 0,
             refine: int = 1):
        """Draw on a ``refine`` times finer grid and sum, so that schemes with
        different steps can share one Brownian path."""
        rng = stream(seed, STREAM_NOISE, sample)
        z = rng.standard_normal((n_t * refine, K_noise)) * math.sqrt(dt / refine)
        if refine > 1:
            z = z.reshape(n_t, refine, K_noise).sum(axis=1)
        z.setflags(write=False)
        return cls(n_t, K_noise, dt, seed, sample, z)


def _real_coords(coef: np.ndarray, modes) -> np.ndarray:
    """Coordinates on ``1/sqrt(2pi)`` (j=0) and ``cos(jx)/sqrt(pi)`` (j>0)."""
    out = [coef[..., 0].real if j == 0 else math.sqrt(2.0) * coef[..., j].real for j in modes]
    return np.stack(out, axis=-1)


@dataclass
class EnsembleSpec:
    """Everything that determines an ensemble; picklable for worker processes."""

    sigma: object  # DiffusionCoefficient, MollifiedDiffusion or AdditiveNoise
    u0: np.ndarray  # spectral coefficients k = 0..K
    n_t: int
    T: float = 1.0
    H: float = 0.2
    n_samples: int = 1
    seed: int = 0
    w_refine: int = 1  # path resolution = n_t * w_refine
    w_zero: bool = False
    noise_refine: int = 1  # increments aggregated from a grid this much finer
    batch: int = 256
    record_every: int = 0  # 0: record nothing in time
    record_states: bool = False
    modes: tuple = ()  # real Fourier coordinates tracked for the martingale checks
    cross_index: int = 0  # noise index i of the cross bracket
    sobolev_alphas: tuple = ()
    diff_sigmas: tuple = ()  # pairs (sigma_a, sigma_b) integrated along the same u
    M: int | None = None

    @property
    def K(self) -> int:
        return len(self.u0) - 1

    @property
    def dt(self) -> float:
        return self.T / self.n_t

    @property
    def grid_size(self) -> int:
        return self.M or 4 * self.K

    def path(self, i: int) -> SamplePath:
        n = self.n_t * self.w_refine
        if self.w_zero:
            return SamplePath.from_values(np.zeros(n + 1), self.T, self.H, self.seed)
        return generate_fbm(n, self.T, self.H, self.seed, sample=i)

    def increments(self, i: int) -> CylindricalIncrements:
        return CylindricalIncrements.draw(self.n_t, self.sigma.K_noise, self.dt, self.seed, i,
                                          self.noise_refine)

    def record_indices(self) -> np.ndarray:
        if not self.record_every:
            return np.array([], dtype=int)
        if self.n_t % self.record_every:
            raise ValueError("record_every must divide n_t")
        return np.arange(0, self.n_t + 1, self.record_every)

    def manifest(self) -> dict:
        return {"K": self.K, "K_noise": self.sigma.K_noise, "dt": self.dt, "n_t": self.n_t,
                "T": self.T, "H": self.H, "seed": self.seed, "n_samples": self.n_samples,
                "w_refine": self.w_refine, "sigma": self.sigma.spec()}


@dataclass
class EnsembleResult:
    """Per-sample outputs of :func:`run_ensemble` (leading axis = sample)."""

    spec: EnsembleSpec
    record_times: np.ndarray
    noise_sq: np.ndarray  # ||I_T||^2
    noise_sup_sq: np.ndarray  # sup_t ||I_t||^2
    hs_integral: np.ndarray  # dt sum_n int Sigma^2
    final: np.ndarray  # spectral state at T
    states: np.ndarray | None = None  # (N, n_rec, K+1)
    point0: np.ndarray | None = None  # u_t(0) at record times
    hs_records: np.ndarray | None = None  # cumulative HS integral at record times
    mart: np.ndarray | None = None  # (N, n_rec, J) coordinates of I
    qv: np.ndarray | None = None  # (N, n_rec, J) cumulative bracket integrands
    cross: np.ndarray | None = None  # (N, n_rec, J)
    beta: np.ndarray | None = None  # (N, n_rec) cumulative beta^i
    sobolev_sup: np.ndarray | None = None  # (N, n_alpha)
    diff_sup_sq: np.ndarray | None = None  # (N, n_pairs)
    diff_hs: np.ndarray | None = None  # (N, n_pairs)

    @property
    def n_samples(self) -> int:
        return self.noise_sq.shape[0]


def _integrate_batch(spec: EnsembleSpec, start: int, stop: int) -> dict:
    B = stop - start
    K, M, dt = spec.K, spec.grid_size, spec.dt
    if M < 2 * K + 1:
        raise ValueError(f"grid of {M} points too small for K={K}")
    quad = TWO_PI / M
    k = np.arange(K + 1, dtype=float)
    damp = np.exp(-k * k * dt)
    fwd = math.sqrt(TWO_PI) / M
    inv = M / math.sqrt(TWO_PI)
    half = M // 2 + 1

    W = np.stack([spec.path(i).values[:: spec.w_refine] for i in range(start, stop)])
    dB = np.stack([spec.increments(i).dbeta for i in range(start, stop)])
    sigma = spec.sigma

    u = np.broadcast_to(np.asarray(spec.u0, dtype=complex), (B, K + 1)).copy()
    I = np.zeros((B, M))
    noise_sup = np.zeros(B)
    hs = np.zeros(B)
    rec_idx = spec.record_indices()
    rec_pos = {int(n): r for r, n in enumerate(rec_idx)}
    n_rec = len(rec_idx)
    modes = tuple(spec.modes)
    J = len(modes)
    out = {}
    if spec.record_states:
        out["states"] = np.zeros((B, n_rec, K + 1), dtype=complex)
    if n_rec:
        out["point0"] = np.zeros((B, n_rec))
        out["hs_records"] = np.zeros((B, n_rec))
    if J:
        out["mart"] = np.zeros((B, n_rec, J))
        out["qv"] = np.zeros((B, n_rec, J))
        out["cross"] = np.zeros((B, n_rec, J))
        out["beta"] = np.zeros((B, n_rec))
        qv = np.zeros((B, J))
        cross = np.zeros((B, J))
        beta_i = np.zeros(B)
        basis = np.stack([_basis_values(j, M) for j in modes])  # (J, M)
        if hasattr(sigma, "a"):
            a_i = sigma.a[spec.cross_index]
    alphas = tuple(spec.sobolev_alphas)
    sob = np.zeros((B, len(alphas)))
    pairs = tuple(spec.diff_sigmas)
    D = np.zeros((len(pairs), B, M))
    d_sup = np.zeros((B, len(pairs)))
    d_hs = np.zeros((B, len(pairs)))

    def grid_of(c):
        h = np.zeros((B, half), dtype=complex)
        h[:, : K + 1] = c
        return np.fft.irfft(h, n=M, axis=-1) * inv

    def record(n, U):
        r = rec_pos.get(n)
        if r is None:
            return
        if spec.record_states:
            out["states"][:, r] = u
        out["point0"][:, r] = U[:, 0]
        out["hs_records"][:, r] = hs
        if J:
            Ic = np.fft.rfft(I, axis=-1)[:, : K + 1] * fwd
            out["mart"][:, r] = _real_coords(Ic, modes)
            out["qv"][:, r] = qv
            out["cross"][:, r] = cross
            out["beta"][:, r] = beta_i

    def track_sobolev():
        if alphas:
            f = SpectralField(u)
            for a_i_, al in enumerate(alphas):
                np.maximum(sob[:, a_i_], sobolev_norm(f, al), out=sob[:, a_i_])

    U = grid_of(u)
    track_sobolev()
    record(0, U)
    for n in range(spec.n_t):
        args = U - W[:, n, None]
        db = dB[:, n]
        g, S = sigma.noise_field(args, db)
        hs_dens = sigma.hs_density(args, S)
        if J:
            # <sigma_k(args), phi_j> for every noise index k
            if S is not None:
                proj = quad * (S @ basis.T)  # (B, J)
                qv += dt * proj ** 2 * float(sigma.a @ sigma.a)
                cross += dt * a_i * proj
            else:
                P = quad * (sigma.basis(M) @ basis.T) * sigma.c  # (K_noise, J)
                qv += dt * (P ** 2).sum(axis=0)
                cross += dt * P[spec.cross_index]
            beta_i += db[:, spec.cross_index]
        for p_i, (sa, sb) in enumerate(pairs):
            diff = sa.s(args) - sb.s(args)
            D[p_i] += diff * (db @ sa.a)[:, None]
            d_hs[:, p_i] += dt * quad * (diff * diff).sum(axis=-1)
            np.maximum(d_sup[:, p_i], quad * (D[p_i] ** 2).sum(axis=-1), out=d_sup[:, p_i])
        hs += dt * quad * hs_dens.sum(axis=-1)
        I += g
        np.maximum(noise_sup, quad * (I * I).sum(axis=-1), out=noise_sup)
        gh = np.fft.rfft(g, axis=-1)[:, : K + 1] * fwd
        u = damp * (u + gh)
        u[:, 0] = u[:, 0].real
        if not np.all(np.isfinite(u)):
            bad = start + int(np.argmax(~np.all(np.isfinite(u), axis=-1)))
            raise FloatingPointError(
                f"non-finite state at step {n + 1} (sample {bad}); "
                "reduce the time step or raise the singularity cap")
        U = grid_of(u)
        track_sobolev()
        record(n + 1, U)
    out.update(noise_sq=quad * (I * I).sum(axis=-1), noise_sup_sq=noise_sup, hs_integral=hs,
               final=u)
    if alphas:
        out["sobolev_sup"] = sob
    if pairs:
        out["diff_sup_sq"] = d_sup
        out["diff_hs"] = d_hs
    return out


def _basis_values(j: int, M: int) -> np.ndarray:
    x = TWO_PI * np.arange(M) / M
    if j == 0:
        return np.full(M, 1.0 / math.sqrt(TWO_PI))
    return np.cos(j * x) / math.sqrt(math.pi)


def _run_chunk(args):
    spec, start, stop = args
    return _integrate_batch(spec, start, stop)


def run_ensemble(spec: EnsembleSpec, jobs: int = 1) -> EnsembleResult:
    """Integrate ``spec.n_samples`` independent samples.

    Batches are concatenated in sample order, so outputs are bit-identical
    for any ``jobs``; changing ``batch`` only changes FFT rounding.
    """
    if spec.sigma.K_noise > spec.K and not hasattr(spec.sigma, "modes"):
        raise ValueError(f"K_noise={spec.sigma.K_noise} exceeds K={spec.K}")
    bounds = [(s, min(s + spec.batch, spec.n_samples)) for s in range(0, spec.n_samples, spec.batch)]
    tasks = [(spec, a, b) for a, b in bounds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_run_chunk, tasks))
    else:
        parts = [_run_chunk(t) for t in tasks]
    merged = {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}
    times = spec.record_indices() * spec.dt
    return EnsembleResult(spec=spec, record_times=times, **merged)


# -- single-sample interface ---------------------------------------------------


@dataclass
class SpdeTrajectory:
    times: np.ndarray
    states: SpectralField  # batch axis = time
    w: SamplePath
    meta: dict

    def dump(self, out: str | Path) -> list[Path]:
        """Coefficient records plus a manifest ``<out>.manifest.json``."""
        out = Path(out)
        files = dump_coefficients(self.states, out, times=self.times.tolist())
        man = out.with_name(out.name + ".manifest.json")
        man.write_text(json.dumps(self.meta, indent=1, default=float))
        return files + [man]


def solve_mollified(u0: SpectralField, sigma, w: SamplePath, increments: CylindricalIncrements,
                    record_every: int = 1) -> SpdeTrajectory:
    """Integrate one sample driven by the given path and increments.

    The path grid must be the scheme grid or an integer refinement of it.
    """
    n_t = increments.n_t
    if w.n_steps % n_t:
        raise ValueError(f"path grid ({w.n_steps} steps) does not refine the scheme grid ({n_t})")
    if not math.isclose(w.T, n_t * increments.dt, rel_tol=1e-12):
        raise ValueError("path horizon and scheme horizon differ")

    class _Fixed(EnsembleSpec):
        def path(self, i):
            return w

        def increments(self, i):
            return increments

    spec = _Fixed(sigma=sigma, u0=u0.coef, n_t=n_t, T=w.T, H=w.hurst, n_samples=1,
                  seed=increments.seed, w_refine=w.n_steps // n_t, batch=1,
                  record_every=record_every, record_states=True)
    res = _integrate_batch(spec, 0, 1)
    times = spec.record_indices() * spec.dt
    meta = {**spec.manifest(), "sample": increments.sample, "path_seed": w.seed}
    return SpdeTrajectory(times, SpectralField(res["states"][0]), w, meta)
