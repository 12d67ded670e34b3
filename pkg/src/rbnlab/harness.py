"""Experiment configuration, orchestration and reports.

A configuration is an INI file with the sections ``[experiment]``,
``[physics]``, ``[discretization]`` and ``[ladder]``; every key is optional
and defaults to the values of :class:`ExperimentConfig`. Example::

    [experiment]
    kind = isometry
    samples = 10000
    seed = 0

    [physics]
    H = 0.2
    p = 2
    gamma = 0.4
    gamma0 = 0.8

    [discretization]
    n_t = 1024
    K = 32
    K_noise = 32

    [ladder]
    epsilons = 0.2, 0.1, 0.05

Reports are JSON documents carrying ``schema_version``; artifacts (CSV, raw
dumps) are written next to them. See ``docs/formats.md``.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import occupation as occ
from . import sewing, spectral
from .paths import generate_fbm, increment_chi_square, save_path, terminal_variance
from .spde import checks as sc
from .spde.coefficients import (ConstantProfile, DiffusionCoefficient, SingularProfile,
                                SmoothProfile, mollify)
from .spde.solver import EnsembleSpec, run_ensemble, solve_mollified
from .verdict import Check, clean

SCHEMA_VERSION = 1
OUT_ENV = "RBNLAB_OUT"

KINDS = ("paths", "localtime", "region", "sew-demo", "schauder", "spde-run", "isometry",
         "apriori", "cauchy", "martingale", "full-suite")
SPDE_KINDS = {"spde-run", "isometry", "apriori", "cauchy", "martingale", "full-suite"}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


class InadmissibleConfig(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    kind: str = "full-suite"
    # physics
    H: float = 0.2
    p: float = 2.0
    gamma: float = 0.4  # exponent of the singular profile
    cap: float = 1e3
    envelope: bool = True
    profile: str = "singular"  # singular | smooth | constant
    c: float = 1.0  # amplitude of smooth / constant profiles
    gamma0: float = 0.8
    gamma1: float = 0.68
    eta: float = 0.5
    delta: float = 0.02  # margin below open exponent bounds
    m: int = 8
    p_prime: float = 2.0  # conjugate integrability exponent, recorded in reports
    T: float = 1.0
    u0_amplitude: float = 1.0  # u0(x) = amplitude * cos(x)
    # discretisation
    n_t: int = 1024
    K: int = 32
    K_noise: int = 32
    n_bins: int = 512
    n_steps: int = 1 << 16  # path resolution for path / local-time experiments
    w_refine: int = 16  # path refinement of the scheme grid in sewing checks
    levels: tuple = tuple(range(1, 11))
    # ladder and Monte Carlo
    epsilons: tuple = (0.2, 0.1, 0.05)
    samples: int = 1000
    seed: int = 0
    batch: int = 256
    strict: bool = False  # treat advisory checks as mandatory
    out: str | None = None

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError("kind", f"unknown kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if not 0.0 < self.H < 1.0:
            raise ConfigError("H", "must lie in (0, 1)")
        if self.p < 1.0:
            raise ConfigError("p", "must be >= 1")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma", "must lie in (0, 1)")
        if not self.T > 0:
            raise ConfigError("T", "must be positive")
        if self.profile not in ("singular", "smooth", "constant"):
            raise ConfigError("profile", "must be singular, smooth or constant")
        for name in ("n_t", "n_steps"):
            v = getattr(self, name)
            if v < 2 or v & (v - 1):
                raise ConfigError(name, f"must be a power of two >= 2, got {v}")
        if self.K < 1:
            raise ConfigError("K", "must be positive")
        if not 1 <= self.K_noise <= self.K:
            raise ConfigError("K_noise", f"must lie in [1, K={self.K}]")
        if self.n_bins < 2:
            raise ConfigError("n_bins", "must be >= 2")
        if self.samples < 2:
            raise ConfigError("samples", "need at least 2 samples")
        eps = list(self.epsilons)
        if not eps or any(e <= 0 for e in eps):
            raise ConfigError("epsilons", "need positive values")
        if eps != sorted(eps, reverse=True) or len(set(eps)) != len(eps):
            raise ConfigError("epsilons", "ladder must be strictly decreasing")
        if self.m < 2:
            raise ConfigError("m", "must be >= 2")
        if self.out is not None:
            try:
                Path(self.out).mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise ConfigError("out", f"not writable ({exc})") from exc
            if not os.access(self.out, os.W_OK):
                raise ConfigError("out", "not writable")
        return self

    def as_dict(self) -> dict:
        return clean(dataclasses.asdict(self))

    # -- derived objects --------------------------------------------------
    def coefficient(self) -> DiffusionCoefficient:
        if self.profile == "singular":
            prof = SingularProfile(self.gamma, self.cap, self.envelope)
        elif self.profile == "smooth":
            prof = SmoothProfile(self.c)
        else:
            prof = ConstantProfile(self.c)
        return DiffusionCoefficient(prof, self.K_noise, p=self.p)

    def u0(self) -> np.ndarray:
        c = np.zeros(self.K + 1, dtype=complex)
        if self.K >= 1:
            c[1] = self.u0_amplitude * math.sqrt(2.0 * math.pi) / 2.0
        return c

    def spec(self, sigma, **kw) -> EnsembleSpec:
        base = dict(sigma=sigma, u0=self.u0(), n_t=self.n_t, T=self.T, H=self.H,
                    n_samples=self.samples, seed=self.seed, batch=self.batch)
        base.update(kw)
        return EnsembleSpec(**base)


_SECTIONS = {
    "experiment": ("kind", "samples", "seed", "batch", "strict", "out"),
    "physics": ("H", "p", "gamma", "cap", "envelope", "profile", "c", "gamma0", "gamma1", "eta",
                "delta", "m", "p_prime", "T", "u0_amplitude"),
    "discretization": ("n_t", "K", "K_noise", "n_bins", "n_steps", "w_refine", "levels"),
    "ladder": ("epsilons",),
}


def _parse_value(name: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            for prefix in ("2**", "2^"):
                if raw.startswith(prefix):
                    return 2 ** int(raw[len(prefix):])
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            if "-" in raw and "," not in raw and name == "levels":
                a, b = raw.split("-")
                return tuple(range(int(a), int(b) + 1))
            vals = [v for v in raw.replace(";", ",").split(",") if v.strip()]
            return tuple(int(v) if name == "levels" else float(v) for v in vals)
        return raw or None
    except ValueError as exc:
        raise ConfigError(name, f"cannot parse {raw!r}") from exc


def load_config(path: str | Path | None = None, **overrides) -> ExperimentConfig:
    """Read an INI file (missing keys take defaults) and apply ``overrides``."""
    cfg = ExperimentConfig()
    defaults = dataclasses.asdict(cfg)
    values = {}
    if path is not None:
        cp = configparser.ConfigParser()
        cp.optionxform = str  # keep the case of H, K, ...
        if not cp.read(path):
            raise ConfigError("config", f"cannot read {path}")
        known = {k for keys in _SECTIONS.values() for k in keys}
        for section in cp.sections():
            if section not in _SECTIONS:
                raise ConfigError(section, "unknown section")
            for key, raw in cp.items(section):
                if key not in known:
                    raise ConfigError(key, f"unknown key in [{section}]")
                values[key] = _parse_value(key, raw, defaults[key])
    values.update({k: v for k, v in overrides.items() if v is not None})
    return dataclasses.replace(cfg, **values).validate()


# -- reports -----------------------------------------------------------------


@dataclass
class ExperimentReport:
    config: dict
    kind: str
    checks: list = field(default_factory=list)
    admissibility: dict | None = None
    wall_clock: float = 0.0
    samples: int = 0
    artifacts: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    path: str | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.mandatory)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def as_dict(self) -> dict:
        return clean({
            "schema_version": SCHEMA_VERSION, "kind": self.kind, "passed": self.passed,
            "config": self.config, "admissibility": self.admissibility,
            "checks": [c.as_dict() for c in self.checks], "wall_clock_s": self.wall_clock,
            "samples": self.samples, "artifacts": self.artifacts, "notes": self.notes})

    def write(self, out: Path) -> Path:
        out.mkdir(parents=True, exist_ok=True)
        p = out / "report.json"
        self.path = str(p)
        p.write_text(json.dumps(self.as_dict(), indent=1))
        return p

    def summary(self) -> str:
        lines = [c.line() for c in self.checks]
        lines.append(f"{self.kind}: {'PASS' if self.passed else 'FAIL'} ({self.wall_clock:.1f} s)")
        return "\n".join(lines)


def default_out_root() -> Path:
    return Path(os.environ.get(OUT_ENV, "rbnlab_out"))


class _Run:
    """Mutable context shared by the suite functions of one run."""

    def __init__(self, cfg: ExperimentConfig, out: Path, jobs: int):
        self.cfg = cfg
        self.out = out
        self.jobs = jobs
        self.checks: list[Check] = []
        self.artifacts: list[str] = []
        self.samples = 0
        self.notes: list[str] = []

    def add(self, check: Check):
        if self.cfg.strict:
            check.mandatory = True
        self.checks.append(check)

    def artifact(self, name: str) -> Path:
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.artifacts.append(str(p.relative_to(self.out)))
        return p

    def csv(self, name: str, header: Sequence[str], rows) -> Path:
        p = self.artifact(name)
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        return p


# -- suites ------------------------------------------------------------------


def _suite_paths(r: _Run):
    cfg = r.cfg
    path = generate_fbm(cfg.n_steps, cfg.T, cfg.H, cfg.seed)
    save_path(path, r.artifact("path.csv"))
    seeds = range(cfg.seed, cfg.seed + cfg.samples)
    var, se = terminal_variance(min(cfg.n_steps, 4096), cfg.H, seeds, cfg.T)
    target = cfg.T ** (2 * cfg.H)
    r.add(Check(f"fbm variance H={cfg.H}", abs(var - target) <= 3 * se, var, 3 * se, se,
                details={"target": target, "n_samples": len(seeds)}))
    r.samples += len(seeds)
    if cfg.H == 0.5:
        stat, pv = increment_chi_square([generate_fbm(4096, cfg.T, 0.5, s)
                                         for s in range(cfg.seed, cfg.seed + 16)])
        r.add(Check("brownian increments chi-square", pv > 0.01, pv, 0.01,
                    details={"statistic": stat}))


def _suite_localtime(r: _Run):
    cfg = r.cfg
    path = generate_fbm(cfg.n_steps, cfg.T, cfg.H, cfg.seed)
    grid = occ.SpatialGrid.covering(path.values, cfg.n_bins)
    lt = occ.local_time(path, grid, path.n_steps)
    r.csv("localtime.csv", ["x", "L"], zip(grid.centers, lt.values))
    mass = float(lt.mass()[0])
    r.add(Check("local time mass", abs(mass - cfg.T) <= 1e-12 * cfg.T, mass, 1e-12))
    for name, f in (("one", np.ones_like), ("cos", np.cos), ("gauss", lambda x: np.exp(-x * x))):
        err = occ.occupation_formula_error(path, grid, f)["rel_error"]
        r.add(Check(f"occupation formula f={name}", err < 1e-3, err, 1e-3))
    f = occ.truncated_power(cfg.gamma, cfg.cap, envelope=False)
    q = occ.averaged_field(path, f, 0, path.n_steps, grid, "quadrature")
    cv = occ.averaged_field(path, f, 0, path.n_steps, grid, "convolution")
    gap = float(np.abs(q.values - cv.values).max())
    tol = 5 * math.sqrt(grid.dx)
    r.csv("avgfield.csv", ["x", "Tf_quadrature", "Tf_convolution"], zip(grid.centers, q.values, cv.values))
    r.add(Check("averaged field duality", gap <= tol, gap, tol))


def _suite_region(r: _Run):
    cfg = r.cfg
    adm = occ.assumption_check(cfg.H, cfg.p, cfg.gamma0)
    reg = occ.RegularityRegion(cfg.H, cfg.p)
    info = {**adm.as_dict(), "lambda_max": reg.lambda_max, "gamma_max_0": reg.gamma_max(0.0),
            "gamma_max_1": reg.gamma_max(1.0) if reg.lambda_max > 1 else None}
    p = r.artifact("region.json")
    p.write_text(json.dumps(clean(info), indent=1))
    r.add(Check("assumption admissible", adm.admissible, cfg.H, adm.H_bound, mandatory=False,
                details=info))
    f = occ.truncated_power(cfg.gamma, cfg.cap)
    seeds = range(cfg.seed, cfg.seed + min(cfg.samples, 16))
    g0 = reg.gamma_max(0.0) - occ.STRICT_MARGIN
    g1 = reg.gamma_max(1.0) - occ.STRICT_MARGIN if reg.lambda_max > 1 else None
    rep = occ.averaged_field_regularity_check(f, cfg.H, cfg.p, g0, g1, seeds=seeds,
                                              levels=cfg.levels)
    r.add(Check("averaged field C0 constant stable", rep.stable0, rep.growth0, rep.growth_tol,
                mandatory=False, details=rep.as_dict()))
    if g1 is not None:
        r.add(Check("averaged field C1 constant stable", bool(rep.stable1), rep.growth1,
                    rep.growth_tol, mandatory=False))


def sew_demo_cases() -> dict:
    """The documented sewing examples: name -> (runner, exact value)."""
    return {
        "additive": (lambda: sewing.sew(sewing.Germ.additive(lambda t: t * t), max_level=16,
                                        tol=1e-14), 1.0, 1e-12),
        "riemann": (lambda: sewing.sew(sewing.Germ(lambda s, t: s * (t - s), beta_hint=2.0),
                                       max_level=16, tol=1e-14), 0.5, 1e-8),
        "volterra": (lambda: sewing.volterra_sew(sewing.Germ(lambda s, t: t - s), 0.5, 1.0,
                                                 max_level=18, tol=1e-12), 2.0, 1e-4),
    }


def _suite_sew_demo(r: _Run):
    for name, (runner, exact, tol) in sew_demo_cases().items():
        res = runner()
        err = float(abs(np.asarray(res.value).ravel()[0] - exact))
        levels = range(res.level - len(res.gaps) + 1, res.level + 1)
        r.csv(f"sew_{name}.csv", ["level", "gap"], zip(levels, res.gaps))
        r.add(Check(f"sewing {name}", err <= tol, err, tol, details={"level": res.level}))


def _suite_schauder(r: _Run):
    grid = spectral.default_st_grid()
    rows = []
    for rho, theta in ((0.0, 0.5), (1.0, 0.25), (1.0, 0.5)):
        rep = spectral.schauder_check(rho, theta, grid)
        rows += [(rho, theta, K, q) for K, q in zip(rep.Ks, rep.sup_q)]
        r.add(Check(f"schauder rho={rho} theta={theta}", rep.stable,
                    max(abs(x - 1) for x in rep.ratios), 0.1, mandatory=False, details=rep.as_dict()))
    r.csv("schauder.csv", ["rho", "theta", "K", "sup_Q"], rows)


def _ladder(cfg: ExperimentConfig):
    sig = cfg.coefficient()
    return [mollify(sig, e) for e in cfg.epsilons]


def _suite_spde_run(r: _Run):
    cfg = r.cfg
    lad = _ladder(cfg)
    m = lad[-1]
    spec = cfg.spec(m, sobolev_alphas=(cfg.gamma0,))
    res = run_ensemble(spec, jobs=r.jobs)
    r.samples += res.n_samples
    l2 = spectral.sobolev_norm(spectral.SpectralField(res.final), 0.0)
    r.csv("spde_summary.csv", ["sample", "l2_T", "noise_sq", "hs_integral", "sobolev_sup"],
          zip(range(res.n_samples), l2, res.noise_sq, res.hs_integral, res.sobolev_sup[:, 0]))
    # one trajectory dump and a determinism check on it
    traj = solve_mollified(spectral.SpectralField(spec.u0), m, spec.path(0), spec.increments(0),
                           record_every=max(1, cfg.n_t // 64))
    again = solve_mollified(spectral.SpectralField(spec.u0), m, spec.path(0), spec.increments(0),
                            record_every=max(1, cfg.n_t // 64))
    files = traj.dump(r.artifact("trajectory0.bin"))
    r.artifacts += [str(f.relative_to(r.out)) for f in files[1:]]
    same = bool(np.array_equal(traj.states.coef, again.states.coef))
    r.add(Check("bit-identical rerun", same))
    n_t = min(cfg.n_t, 1 << 12)
    sew_spec = dataclasses.replace(spec, n_t=n_t, w_refine=cfg.w_refine, sobolev_alphas=())
    r.add(sc.identification_sewing(sew_spec, samples=range(min(16, cfg.samples))))
    specs = {mm.epsilon: dataclasses.replace(sew_spec, sigma=mm) for mm in lad}
    eta = min(cfg.eta, cfg.gamma0 - 0.1)
    r.add(sc.volterra_bound_check(specs, eta, cfg.gamma0, cfg.delta, samples=range(min(4, cfg.samples))))
    coarse = dataclasses.replace(spec, n_t=4, n_samples=min(cfg.samples, 2000), sobolev_alphas=())
    r.add(sc.scheme_convergence_check(coarse, halvings=3, jobs=r.jobs))


def _suite_isometry(r: _Run):
    cfg = r.cfg
    const = DiffusionCoefficient(ConstantProfile(cfg.c), cfg.K_noise)
    res = run_ensemble(cfg.spec(const), jobs=r.jobs)
    chk = sc.ito_isometry_check(res, name="ito isometry constant sigma")
    exact = 2 * math.pi * cfg.c ** 2 * cfg.T
    chk.details["closed_form"] = exact
    r.add(chk)
    r.add(Check("constant sigma closed form", abs(chk.details["lhs"] - exact) <= 0.05 * exact,
                abs(chk.details["lhs"] - exact) / exact, 0.05, chk.details["lhs_se"] / exact))
    rows = []
    bdg = {}
    for m in _ladder(cfg):
        res = run_ensemble(cfg.spec(m), jobs=r.jobs)
        r.samples += res.n_samples
        chk = sc.ito_isometry_check(res, name=f"ito isometry eps={m.epsilon}")
        r.add(chk)
        bdg[m.epsilon] = chk.details["bdg_ratio"]
        rows.append((m.epsilon, chk.details["lhs"], chk.details["rhs"], chk.value, chk.se,
                     chk.details["bdg_ratio"][2], chk.details["bdg_ratio"][4]))
    r.csv("isometry.csv", ["epsilon", "noise_sq", "hs_integral", "rel_gap", "rel_gap_se", "bdg_m2",
                           "bdg_m4"], rows)
    for mm in (2, 4):
        vals = [b[mm] for b in bdg.values()]
        spread = max(vals) / min(vals)
        r.add(Check(f"bdg ratio m={mm} bounded across epsilon", spread <= 2.0, spread, 2.0,
                    mandatory=False))


def _suite_apriori(r: _Run):
    cfg = r.cfg
    results = {}
    for m in _ladder(cfg):
        spec = cfg.spec(m, record_every=max(1, cfg.n_t // 64), record_states=True,
                        sobolev_alphas=(cfg.gamma0,))
        results[m.epsilon] = run_ensemble(spec, jobs=r.jobs)
        r.samples += spec.n_samples
    ms = sorted({2, cfg.m})
    hol = sc.apriori_holder(results, cfg.gamma0, ms)
    sob = sc.apriori_sobolev(results, cfg.gamma0, ms)
    for c in hol + sob:
        c.mandatory = False
        r.add(c)
    rows = [(eps, c.name, est) for c in hol + sob for eps, est in c.details["estimates"].items()]
    r.csv("apriori.csv", ["epsilon", "estimate", "value"], rows)
    r.notes.append(f"m in {ms}; factorisation exponent alpha = 1/m + 0.01")


def _suite_cauchy(r: _Run):
    cfg = r.cfg
    lad = _ladder(cfg)
    chk = sc.cauchy_in_epsilon(cfg.spec(lad[-1]), lad, jobs=r.jobs)
    r.samples += cfg.samples
    r.add(chk)
    d = chk.details
    r.csv("cauchy.csv", ["epsilon", "epsilon_prime", "distance", "distance_se", "sigma_diff_lp"],
          [(a, b, x, s, l) for (a, b), x, s, l in zip(d["pairs"], d["distance"], d["distance_se"],
                                                     d["sigma_diff_lp"])])


def _suite_martingale(r: _Run):
    cfg = r.cfg
    m = _ladder(cfg)[-1]
    spec = cfg.spec(m, record_every=max(1, cfg.n_t // 16), modes=(0, 1, 2))
    res = run_ensemble(spec, jobs=r.jobs)
    r.samples += res.n_samples
    checks = sc.martingale_check(res, cfg.T / 2, cfg.T)
    for c in checks:
        r.add(c)
    r.csv("martingale.csv", ["defect", "mean", "three_se"], [(c.name, c.value, c.tol) for c in checks])
    zero = DiffusionCoefficient(ConstantProfile(0.0), cfg.K_noise)
    z = run_ensemble(dataclasses.replace(spec, sigma=zero, n_samples=min(64, cfg.samples)))
    exact = all(c.value == 0.0 for c in sc.martingale_check(z, cfg.T / 2, cfg.T))
    r.add(Check("martingale defects vanish for zero noise", exact))
    r.add(sc.heat_flow_check(z))


_SUITES = {
    "paths": [_suite_paths],
    "localtime": [_suite_localtime],
    "region": [_suite_region],
    "sew-demo": [_suite_sew_demo],
    "schauder": [_suite_schauder],
    "spde-run": [_suite_spde_run],
    "isometry": [_suite_isometry],
    "apriori": [_suite_apriori],
    "cauchy": [_suite_cauchy],
    "martingale": [_suite_martingale],
}
_SUITES["full-suite"] = [f for k in KINDS[:-1] for f in _SUITES[k]]


def run(cfg: ExperimentConfig, override_inadmissible: bool = False, jobs: int = 1,
        out: str | Path | None = None) -> ExperimentReport:
    """Run the suite named by ``cfg.kind`` and write its report.

    Admissibility of ``(H, p, gamma0)`` is recorded first; SPDE suites refuse
    inadmissible parameters unless ``override_inadmissible``.
    """
    cfg.validate()
    out = Path(out or cfg.out or default_out_root() / cfg.kind)
    out.mkdir(parents=True, exist_ok=True)
    adm = occ.assumption_check(cfg.H, cfg.p, cfg.gamma0)
    report = ExperimentReport(config=cfg.as_dict(), kind=cfg.kind, admissibility=adm.as_dict())
    if cfg.kind in SPDE_KINDS and not adm.admissible:
        if not override_inadmissible:
            report.notes.append("inadmissible parameters; rerun with --override-inadmissible")
            report.write(out)
            raise InadmissibleConfig(
                f"(H={cfg.H}, p={cfg.p}, gamma0={cfg.gamma0}) is inadmissible "
                f"(H_bound={adm.H_bound:.6g}, gamma0_bound={adm.gamma0_bound:.6g})")
        report.notes.append("inadmissible parameters run under override")
    ctx = _Run(cfg, out, jobs)
    t0 = time.perf_counter()
    for suite in _SUITES[cfg.kind]:
        suite(ctx)
    report.wall_clock = time.perf_counter() - t0
    report.checks = ctx.checks
    report.artifacts = ctx.artifacts
    report.samples = ctx.samples
    report.notes += ctx.notes + [f"p_prime={cfg.p_prime}"]
    report.write(out)
    return report


def sweep(base: ExperimentConfig, axis: str, values: Sequence, jobs: int = 1,
          override_inadmissible: bool = False,
          out: str | Path | None = None) -> tuple[list[ExperimentReport], Path]:
    """Run ``base`` once per value of ``axis`` (same seed base); write a combined CSV."""
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    if axis not in names or axis in ("kind", "out"):
        raise ConfigError("axis", f"unknown sweep parameter {axis!r}")
    root = Path(out or base.out or default_out_root() / f"sweep_{axis}")
    root.mkdir(parents=True, exist_ok=True)
    reports = []
    for v in values:
        cfg = dataclasses.replace(base, **{axis: v}, out=None).validate()
        sub = root / f"{axis}={v}"
        try:
            rep = run(cfg, override_inadmissible, jobs, sub)
        except InadmissibleConfig as exc:
            rep = ExperimentReport(config=cfg.as_dict(), kind=cfg.kind,
                                   admissibility=occ.assumption_check(cfg.H, cfg.p, cfg.gamma0).as_dict(),
                                   notes=[str(exc)], checks=[Check("admissible", False)])
            rep.write(sub)
        reports.append(rep)
    combined = root / "sweep.csv"
    with open(combined, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([axis, "admissible", "check", "passed", "mandatory", "value", "tol", "se"])
        for v, rep in zip(values, reports):
            adm = rep.admissibility["admissible"] if rep.admissibility else None
            for c in rep.checks:
                w.writerow([v, adm, c.name, c.passed, c.mandatory, c.value, c.tol, c.se])
    return reports, combined
