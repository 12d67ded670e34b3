"""Truncated Fourier fields on the torus ``[0, 2 pi)``.

Convention: ``u(x) = sum_{|k| <= K} u_k e_k(x)`` with the orthonormal basis
``e_k(x) = exp(ikx) / sqrt(2 pi)``, so Parseval reads
``||u||_{L^2}^2 = sum_k |u_k|^2`` and the Laplacian acts on ``e_k`` as
``-k^2``. Real fields are stored by their modes ``k = 0..K``; the negative
modes are the conjugates and are never stored, so real-valuedness is
preserved by construction. Leading axes are batch axes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

SQRT2PI = np.sqrt(2.0 * np.pi)
CONVENTION = "exp/sqrt(2pi)"


class SpectralField:
    """Real field with Fourier modes ``0..K`` along the last axis."""

    __slots__ = ("coef",)

    def __init__(self, coef):
        coef = np.array(coef, dtype=complex)
        if coef.ndim == 0 or coef.shape[-1] < 1:
            raise ValueError("need at least the zero mode")
        if np.any(np.abs(coef[..., 0].imag) > 1e-12 * (1.0 + np.abs(coef[..., 0].real))):
            raise ValueError("the zero mode of a real field must be real")
        coef[..., 0] = coef[..., 0].real
        coef.setflags(write=False)
        self.coef = coef

    @property
    def K(self) -> int:
        return self.coef.shape[-1] - 1

    @property
    def batch_shape(self) -> tuple:
        return self.coef.shape[:-1]

    @property
    def k(self) -> np.ndarray:
        return np.arange(self.K + 1)

    @classmethod
    def zeros(cls, K: int, batch_shape: tuple = ()) -> "SpectralField":
        return cls(np.zeros(tuple(batch_shape) + (K + 1,), dtype=complex))

    @classmethod
    def mode(cls, K: int, k: int, value: complex = 1.0) -> "SpectralField":
        """Single Fourier mode ``value * e_k + conj(value) * e_{-k}``."""
        c = np.zeros(K + 1, dtype=complex)
        c[k] = value
        return cls(c)

    def full(self) -> np.ndarray:
        """Coefficients for ``k = -K..K`` (last axis)."""
        neg = np.conj(self.coef[..., :0:-1])
        return np.concatenate([neg, self.coef], axis=-1)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.coef + other.coef)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.coef - other.coef)

    def __mul__(self, c: float) -> "SpectralField":
        return SpectralField(self.coef * float(c))

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"SpectralField(K={self.K}, batch_shape={self.batch_shape})"


def _mode_weights(K: int) -> np.ndarray:
    # each stored mode k >= 1 stands for k and -k
    w = np.full(K + 1, 2.0)
    w[0] = 1.0
    return w


def l2_norm(u: SpectralField) -> np.ndarray:
    return sobolev_norm(u, 0.0)


def sobolev_norm(u: SpectralField, alpha: float) -> np.ndarray:
    """``(sum_{|k| <= K} (1 + k^2)^alpha |u_k|^2)^{1/2}``."""
    k = u.k.astype(float)
    w = _mode_weights(u.K) * (1.0 + k * k) ** alpha
    return np.sqrt((w * np.abs(u.coef) ** 2).sum(axis=-1))


def heat_apply(u: SpectralField, t: float) -> SpectralField:
    """Heat semigroup ``P_t``: mode ``k`` is damped by ``exp(-k^2 t)``."""
    if t < 0:
        raise ValueError(f"heat semigroup needs t >= 0, got {t}")
    k = u.k.astype(float)
    return SpectralField(u.coef * np.exp(-k * k * t))


def heat_multiplier(K: int, t: float) -> np.ndarray:
    k = np.arange(K + 1, dtype=float)
    return np.exp(-k * k * t)


def fractional_laplacian(u: SpectralField, rho: float) -> SpectralField:
    """``(-Delta)^{rho/2}``; the zero mode is mapped to 0 for ``rho > 0``."""
    k = u.k.astype(float)
    mult = k ** rho if rho != 0 else np.ones_like(k)
    if rho > 0:
        mult[0] = 0.0
    return SpectralField(u.coef * mult)


# -- grid transforms ---------------------------------------------------------

def grid_points(M: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(M) / M


def _check_grid(K: int, M: int):
    if M < 2 * K + 1:
        raise ValueError(f"grid of {M} points cannot resolve K={K} (need M >= 2K+1 = {2 * K + 1})")


def to_grid(u: SpectralField, M: int | None = None) -> np.ndarray:
    """Point values on ``M`` (default ``4K``) equispaced torus points."""
    M = 4 * u.K if M is None else M
    M = max(M, 1)
    _check_grid(u.K, M)
    half = np.zeros(u.batch_shape + (M // 2 + 1,), dtype=complex)
    half[..., : u.K + 1] = u.coef
    return np.fft.irfft(half, n=M, axis=-1) * (M / SQRT2PI)


def from_grid(values: np.ndarray, K: int) -> SpectralField:
    """Project point values on the last axis onto modes ``0..K``."""
    values = np.asarray(values, dtype=float)
    M = values.shape[-1]
    _check_grid(K, M)
    c = np.fft.rfft(values, axis=-1)[..., : K + 1] * (SQRT2PI / M)
    return SpectralField(c)


def basis_projection(values: np.ndarray, K: int) -> np.ndarray:
    """Real coordinates ``<u, phi_j>`` in the orthonormal real basis.

    ``phi_0 = 1/sqrt(2 pi)``, ``phi_j = cos(jx)/sqrt(pi)`` and
    ``phi_{-j} = sin(jx)/sqrt(pi)``; returned as ``(cos part j=0..K, sin part j=1..K)``.
    """
    c = from_grid(values, K).coef
    cos = np.sqrt(2.0) * c.real
    cos[..., 0] = c[..., 0].real
    sin = -np.sqrt(2.0) * c[..., 1:].imag
    return cos, sin


# -- Schauder estimate -------------------------------------------------------

@dataclass
class SchauderReport:
    rho: float
    theta: float
    Ks: list
    sup_q: list  # sup over the (s, t) grid for each K
    ratios: list
    stable: bool
    argmax: tuple  # (s, t, k) attaining the sup at the largest K

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def schauder_quotient(rho: float, theta: float, K: int, s, t) -> np.ndarray:
    """``Q(s,t) = max_{1<=k<=K} k^rho |e^{-k^2 t} - e^{-k^2 s}| / ((t-s)^theta s^{-(rho/2+theta)})``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    k = np.arange(1, K + 1, dtype=float)[:, None]
    num = k ** rho * np.abs(np.exp(-k * k * t) - np.exp(-k * k * s))
    den = (t - s) ** theta * s ** (-(rho / 2.0 + theta))
    return num.max(axis=0) / den


def schauder_check(rho: float, theta: float, st_grid: Sequence[tuple], Ks: Sequence[int] = (1024, 2048, 4096),
                   band: tuple = (0.9, 1.1)) -> SchauderReport:
    """Sup of the Schauder quotient over ``st_grid`` as the cutoff doubles.

    Stable when every ratio of successive sups lies in ``band``.
    """
    if rho / 2.0 + theta < 0:
        raise ValueError("need rho/2 + theta >= 0")
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    st = np.asarray(st_grid, dtype=float)
    s, t = st[:, 0], st[:, 1]
    if np.any(s <= 0) or np.any(t <= s):
        raise ValueError("need 0 < s < t on the grid")
    sups = []
    for K in Ks:
        q = schauder_quotient(rho, theta, K, s, t)
        sups.append(float(q.max()))
    # locate the maximiser at the largest cutoff
    K = Ks[-1]
    q = schauder_quotient(rho, theta, K, s, t)
    i = int(q.argmax())
    kk = np.arange(1, K + 1, dtype=float)
    terms = kk ** rho * np.abs(np.exp(-kk * kk * t[i]) - np.exp(-kk * kk * s[i]))
    ratios = [b / a for a, b in zip(sups[:-1], sups[1:])]
    ok = all(band[0] <= r <= band[1] for r in ratios)
    return SchauderReport(rho, theta, list(Ks), sups, ratios, bool(ok),
                          (float(s[i]), float(t[i]), int(terms.argmax()) + 1))


def default_st_grid(s_min: float = 0.01, n_s: int = 40, n_d: int = 40) -> list:
    """Log-spaced ``s`` in ``[s_min, 1]`` and gaps ``t - s`` in ``[1e-4, 1]``."""
    ss = np.geomspace(s_min, 1.0, n_s)
    ds = np.geomspace(1e-4, 1.0, n_d)
    return [(s, s + d) for s in ss for d in ds]


# -- persistence -------------------------------------------------------------

def dump_coefficients(u: SpectralField, out: str | Path, **meta) -> list[Path]:
    """Raw dump: interleaved ``(re, im)`` little-endian doubles per record.

    Modes are ordered ``k = 0..K`` then ``-1..-K``; records follow the batch
    axes in C order. A JSON sidecar ``<out>.json`` carries ``K``, the
    convention tag, the batch shape and any extra ``meta``.
    """
    out = Path(out)
    c = u.coef.reshape(-1, u.K + 1)
    ordered = np.concatenate([c, np.conj(c[:, 1:])], axis=1)
    inter = np.empty(ordered.shape + (2,), dtype="<f8")
    inter[..., 0] = ordered.real
    inter[..., 1] = ordered.imag
    inter.tofile(out)
    side = out.with_name(out.name + ".json")
    info = {"K": u.K, "convention": CONVENTION, "batch_shape": list(u.batch_shape), **meta}
    side.write_text(json.dumps(info, indent=1))
    return [out, side]


def load_coefficients(src: str | Path) -> SpectralField:
    src = Path(src)
    info = json.loads(src.with_name(src.name + ".json").read_text())
    if info.get("convention") != CONVENTION:
        raise ValueError(f"unsupported convention {info.get('convention')!r}")
    K = int(info["K"])
    raw = np.fromfile(src, dtype="<f8").reshape(-1, 2 * K + 1, 2)
    c = raw[:, : K + 1, 0] + 1j * raw[:, : K + 1, 1]
    return SpectralField(c.reshape(tuple(info.get("batch_shape", [])) + (K + 1,)))
