"""Empirical characteristic functions and the band-limited flat-top kernel."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property

import finufft
import numpy as np

from .errors import ValidationError
from .models import LevyModel, char_fn, char_fn_deriv

__all__ = [
    "frequency_grid",
    "ecf",
    "ecf_deriv",
    "default_clip_floor",
    "SpectralData",
    "BandKernel",
    "flat_top_kernel",
    "invert_kernel",
    "log_deriv_ratio",
    "clipped_phi",
]

_NUFFT_EPS = 1e-13
_CHUNK = 2**22


def frequency_grid(h: float, size: int, offset: bool = True) -> np.ndarray:
    """Uniform grid of ``size`` points covering ``[-1/h, 1/h]``.

    With ``offset`` the nodes sit at half steps, ``(j - size/2 + 1/2) du``,
    so 0 is not a node and the grid is exactly symmetric. Without it the
    nodes are ``(j - size/2) du`` and include 0.
    """
    if not h > 0:
        raise ValidationError("bandwidth must be positive")
    if size < 2 or size % 2:
        raise ValidationError("grid size must be an even count >= 2")
    du = 2.0 / (h * size)
    j = np.arange(size) - size // 2
    return (j + (0.5 if offset else 0.0)) * du


def _as_sample(sample) -> np.ndarray:
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise ValidationError("sample must be nonempty")
    return x


def _direct(x: np.ndarray, u: np.ndarray, weights: np.ndarray | None) -> np.ndarray:
    out = np.zeros(u.shape, dtype=complex)
    step = max(1, _CHUNK // max(u.size, 1))
    for lo in range(0, x.size, step):
        xs = x[lo:lo + step]
        e = np.exp(1j * np.multiply.outer(xs, u))
        if weights is None:
            out += e.sum(axis=0)
        else:
            out += weights[lo:lo + step] @ e
    return out / x.size


def ecf(sample, u_grid) -> np.ndarray:
    """``phi_n(u) = mean_k exp(i u X_k)`` by direct summation."""
    x = _as_sample(sample)
    u = np.asarray(u_grid, dtype=float)
    return _direct(x, u, None)


def ecf_deriv(sample, u_grid) -> np.ndarray:
    """``phi_n'(u) = mean_k i X_k exp(i u X_k)`` by direct summation."""
    x = _as_sample(sample)
    u = np.asarray(u_grid, dtype=float)
    return _direct(x, u, 1j * x)


def _uniform_step(u: np.ndarray) -> float | None:
    if u.size < 8:
        return None
    d = np.diff(u)
    du = (u[-1] - u[0]) / (u.size - 1)
    if du > 0 and np.max(np.abs(d - du)) <= 1e-9 * du:
        return du
    return None


def _ecf_pair_nufft(x: np.ndarray, u: np.ndarray, du: float):
    m = u.size
    # u_j = shift + k du with k = -m/2 .. m/2-1 (finufft mode order 0)
    shift = u[0] + (m // 2) * du
    theta = np.mod(du * x + np.pi, 2 * np.pi) - np.pi
    base = np.exp(1j * shift * x)
    c = np.stack([base, 1j * x * base])
    f = finufft.nufft1d1(theta, c, m, eps=_NUFFT_EPS, isign=1, modeord=0)
    return f[0] / x.size, f[1] / x.size


def default_clip_floor(n: int, kappa: float = 0.1, rho: float = 1.5) -> float:
    """``kappa * n^(-1/4) * (log n)^(-rho/2)``; ``kappa`` alone for n < 3."""
    if n < 3:
        return float(kappa)
    return float(kappa * n ** -0.25 * np.log(n) ** (-rho / 2))


@dataclass(frozen=True)
class SpectralData:
    """``phi_n`` and ``phi_n'`` sampled on a frequency grid.

    ``n`` is the sample size (0 for oracle data built from a model).
    ``clip_count`` is the number of grid points where ``|phi_n|`` falls
    below ``clip_floor``; the ratio used downstream floors the modulus there.
    """

    u_grid: np.ndarray
    phi_n: np.ndarray
    dphi_n: np.ndarray
    n: int
    clip_floor: float = 0.0
    sample_mean: float | None = None

    def __post_init__(self):
        if not (self.u_grid.shape == self.phi_n.shape == self.dphi_n.shape):
            raise ValidationError("grid and spectral values are misaligned")
        if self.clip_floor < 0:
            raise ValidationError("clip_floor must be >= 0")

    @cached_property
    def clip_mask(self) -> np.ndarray:
        return np.abs(self.phi_n) < self.clip_floor

    @property
    def clip_count(self) -> int:
        return int(self.clip_mask.sum())

    @cached_property
    def du(self) -> float | None:
        return _uniform_step(self.u_grid)

    # builders -------------------------------------------------------------

    @classmethod
    def from_sample(cls, sample, u_grid, clip_floor: float | None = None,
                    kappa: float = 0.1, rho: float = 1.5) -> "SpectralData":
        x = _as_sample(sample)
        u = np.asarray(u_grid, dtype=float)
        du = _uniform_step(u)
        if du is not None and u.size % 2 == 0:
            phi, dphi = _ecf_pair_nufft(x, u, du)
        else:
            phi, dphi = _direct(x, u, None), _direct(x, u, 1j * x)
        if clip_floor is None:
            clip_floor = default_clip_floor(x.size, kappa, rho)
        return cls(u, phi, dphi, int(x.size), float(clip_floor), float(x.mean()))

    @classmethod
    def from_model(cls, model: LevyModel, delta: float, u_grid) -> "SpectralData":
        """Oracle data: the true ``phi`` and ``phi'`` with clipping disabled."""
        u = np.asarray(u_grid, dtype=float)
        return cls(u, char_fn(model, delta, u), char_fn_deriv(model, delta, u), 0, 0.0)

    # serialisation ----------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["u", "re_phi", "im_phi", "re_dphi", "im_dphi"])
        for row in zip(self.u_grid, self.phi_n.real, self.phi_n.imag,
                       self.dphi_n.real, self.dphi_n.imag):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, n: int, clip_floor: float = 0.0) -> "SpectralData":
        rows = list(csv.reader(line for line in io.StringIO(text) if not line.startswith("#")))
        if not rows or rows[0] != ["u", "re_phi", "im_phi", "re_dphi", "im_dphi"]:
            raise ValidationError("spectral CSV must have columns u,re_phi,im_phi,re_dphi,im_dphi")
        a = np.array(rows[1:], dtype=float)
        return cls(a[:, 0], a[:, 1] + 1j * a[:, 2], a[:, 3] + 1j * a[:, 4], n, clip_floor)


# --------------------------------------------------------------------------
# kernel


def _transition(s: np.ndarray) -> np.ndarray:
    # C-infinity step from 1 (s = 0) to 0 (s = 1): psi(1-s) / (psi(1-s) + psi(s)),
    # psi(x) = exp(-1/x)
    out = np.empty_like(s)
    lo = s <= 0
    hi = s >= 1
    mid = ~(lo | hi)
    sm = s[mid]
    out[lo] = 1.0
    out[hi] = 0.0
    with np.errstate(over="ignore"):
        out[mid] = 1.0 / (1.0 + np.exp(1.0 / (1.0 - sm) - 1.0 / sm))
    return out


@dataclass(frozen=True)
class BandKernel:
    """Flat-top kernel with Fourier transform supported in ``[-1/h, 1/h]``."""

    h: float
    flat_radius: float = 0.5

    def ft_unit(self, u) -> np.ndarray:
        """``FK(u)``: 1 on ``|u| <= flat_radius``, 0 on ``|u| >= 1``."""
        a = np.abs(np.asarray(u, dtype=float))
        s = (a - self.flat_radius) / (1.0 - self.flat_radius)
        return _transition(np.atleast_1d(s)).reshape(a.shape)

    def ft(self, u) -> np.ndarray:
        """``FK_h(u) = FK(h u)``."""
        return self.ft_unit(self.h * np.asarray(u, dtype=float))

    @property
    def band_limit(self) -> float:
        return 1.0 / self.h


def flat_top_kernel(h: float, flat_radius: float = 0.5) -> BandKernel:
    if not (np.isfinite(h) and h > 0):
        raise ValidationError("bandwidth h must be positive")
    if not 0 < flat_radius < 1:
        raise ValidationError("flat_radius must lie in (0, 1)")
    return BandKernel(float(h), float(flat_radius))


def invert_kernel(kernel: BandKernel, x_max: float, size: int = 2**14):
    """``K`` and ``K'`` (unit bandwidth) on a symmetric x-grid by inverse FFT.

    Returns ``(x, K, dK)`` with ``x`` spanning roughly ``[-x_max, x_max]``.
    """
    # x-period twice the requested span keeps wrap-around away from |x| <= x_max
    period = 4.0 * x_max
    du = 2 * np.pi / period
    m = size
    if m * du < 2.0:
        raise ValidationError("grid too small to cover the kernel support")
    u = (np.arange(m) - m // 2) * du
    fk = kernel.ft_unit(u)
    dx = period / m
    x = (np.arange(m) - m // 2) * dx
    # K(x) = (1/2pi) int e^{-iux} FK(u) du ; K'(x) uses -iu FK(u)
    def inv(g):
        shifted = np.fft.ifftshift(g)
        vals = np.fft.fft(shifted) * du / (2 * np.pi)
        return np.fft.fftshift(vals)
    k = inv(fk).real
    dk = inv(-1j * u * fk).real
    return x, k, dk


# --------------------------------------------------------------------------
# ratio


def clipped_phi(data: SpectralData) -> np.ndarray:
    """``phi_n`` with its modulus floored at ``clip_floor``, phase kept."""
    phi = data.phi_n
    if data.clip_floor <= 0:
        return phi
    mod = np.abs(phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(mod < data.clip_floor,
                         data.clip_floor / np.where(mod > 0, mod, 1.0), 1.0)
    out = phi * scale
    # exact zeros carry no phase: put them on the positive real axis
    out = np.where(mod == 0, data.clip_floor + 0j, out)
    return out


def log_deriv_ratio(data: SpectralData) -> np.ndarray:
    """``phi_n' / phi_n`` with the clipped denominator."""
    return data.dphi_n / clipped_phi(data)
