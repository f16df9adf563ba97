"""Limit covariance of ``sqrt(n) (N_hat - N)``: plug-in, Monte-Carlo oracle
and the closed form for Gamma processes.

All three are built on the influence function

    h_t(x) / i = x A_t(x) - i B_t(x),
    A_t = F^-1[ phi^-1(-u)    Fg_t(u) FK_h(u) ],
    B_t = F^-1[ (phi^-1)'(-u) Fg_t(u) FK_h(u) ],

so that ``Sigma_{t,s} = delta^-2 E[(h_t/i)(X) (h_s/i)(X)]``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any

import finufft
import numpy as np
from scipy import integrate, special

from .errors import ValidationError
from .estimator import (
    EstimateConfig,
    _check_grid,
    _check_t,
    _fg_neg_on,
    alias_tail,
    choose_grid_size,
    prepare,
    required_span,
)
from .models import LevyModel, sample_increments
from .spectral import BandKernel, SpectralData, clipped_phi, flat_top_kernel, frequency_grid

__all__ = [
    "CovarianceMatrix",
    "h_fn_plugin",
    "covariance_plugin",
    "covariance_from_data",
    "gamma_sigma_closed_form",
    "oracle_covariance",
]

_NUFFT_EPS = 1e-13


@dataclass
class CovarianceMatrix:
    t_grid: np.ndarray
    sigma: np.ndarray
    h_used: float
    n_used: int
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "s", "sigma"])
        for i, t in enumerate(self.t_grid):
            for j, s in enumerate(self.t_grid):
                w.writerow([repr(float(t)), repr(float(s)), repr(float(self.sigma[i, j]))])
        return buf.getvalue()

    def to_dict(self) -> dict[str, Any]:
        return {
            "t_grid": [float(t) for t in self.t_grid],
            "sigma": self.sigma.tolist(),
            "h_used": self.h_used,
            "n_used": self.n_used,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _evaluate_at(coeffs: np.ndarray, u: np.ndarray, du: float, x: np.ndarray) -> np.ndarray:
    """``(du/2 pi) sum_j c_j exp(i u_j x)`` at arbitrary ``x`` (type-2 NUFFT)."""
    m = u.size
    shift = u[0] + (m // 2) * du
    theta = np.mod(du * x + np.pi, 2 * np.pi) - np.pi
    vals = finufft.nufft1d2(theta, coeffs, eps=_NUFFT_EPS, isign=1, modeord=0)
    return du / (2 * np.pi) * np.exp(1j * shift * x) * vals


def _h_over_i(data: SpectralData, kernel: BandKernel, t: float, x: np.ndarray):
    du = _check_grid(data, kernel)
    u = data.u_grid
    phic = clipped_phi(data)
    inv = 1.0 / phic
    dinv = -data.dphi_n / phic**2
    w = _fg_neg_on(t, u) * kernel.ft(u)
    # substituting u -> -u turns phi^-1(-u) Fg_t(u) into phi^-1(u) Fg_t(-u)
    coeffs = np.stack([inv * w, dinv * w])
    ab = _evaluate_at(coeffs, u, du, x)
    a, b = ab[0], ab[1]
    m = u.size // 2
    ratio0 = 0.5 * (data.dphi_n[m - 1] / phic[m - 1] + data.dphi_n[m] / phic[m])
    corr = alias_tail(t, x, 2 * np.pi / du)
    val = x * a - 1j * b + (x + 1j * ratio0) * corr
    return val


def h_fn_plugin(data: SpectralData, kernel: BandKernel, t: float, x_points, delta: float = 1.0,
                with_residual: bool = False):
    """Real-valued ``h_t(x) / i`` at ``x_points`` from (clipped) spectral data.

    ``delta`` does not enter ``h_t`` itself; it scales only the covariance.
    With ``with_residual`` the relative size of the discarded imaginary part
    is returned as well.
    """
    del delta
    t = float(_check_t([t])[0])
    x = np.atleast_1d(np.asarray(x_points, dtype=float))
    val = _h_over_i(data, kernel, t, x)
    if with_residual:
        scale = float(np.max(np.abs(val.real))) if x.size else 0.0
        resid = float(np.max(np.abs(val.imag))) / scale if scale > 0 else 0.0
        return val.real, resid
    return val.real


def covariance_from_data(data: SpectralData, kernel: BandKernel, t_grid, x: np.ndarray,
                         delta: float) -> CovarianceMatrix:
    """``delta^-2 * mean_k (h_t/i)(X_k) (h_s/i)(X_k)`` over the points ``x``."""
    t = _check_t(t_grid)
    rows = []
    resid = 0.0
    for ti in t:
        v, r = h_fn_plugin(data, kernel, ti, x, delta, with_residual=True)
        rows.append(v)
        resid = max(resid, r)
    hmat = np.vstack(rows)
    sigma = hmat @ hmat.T / (x.size * delta**2)
    sigma = 0.5 * (sigma + sigma.T)
    centring = hmat.mean(axis=1)
    return CovarianceMatrix(t, sigma, kernel.h, int(x.size), {
        "imag_residual": resid,
        "h_mean": centring.tolist(),
        "h_sd": hmat.std(axis=1, ddof=1).tolist() if x.size > 1 else [0.0] * t.size,
        "clip_count": data.clip_count,
        "grid_size": int(data.u_grid.size),
    })


def covariance_plugin(sample, config: EstimateConfig, t_grid) -> CovarianceMatrix:
    """Plug-in estimate of ``Sigma`` from the sample's own spectra and empirical law."""
    x, t, data, kernel = prepare(sample, config, t_grid)
    return covariance_from_data(data, kernel, t, x, config.delta)


# --------------------------------------------------------------------------
# Gamma closed form


def _sigma_unit_scale(beta: float, t: float, epsrel: float) -> float:
    g_b = special.gamma(beta)
    g_c = special.gamma(1.0 - beta)

    def h_scaled(s):
        # s^beta * (1 - Gamma_{1-beta}(s) - gamma_{1-beta}(s)), bounded as s -> 0
        return s**beta * (1.0 - special.gammainc(1.0 - beta, s)) - np.exp(-s) / g_c

    def near_zero(r):
        # x = r^(1/beta): gamma_beta(x) dx = exp(-x) / (beta Gamma(beta)) dr
        x = r ** (1.0 / beta)
        s = t - x
        hv = h_scaled(s) / s**beta
        return hv * hv * np.exp(-x) / (beta * g_b)

    k = 1.0 - 2.0 * beta

    def near_t(r):
        # x = t - r^(1/k): (t-x)^(-2 beta) dx = dr / k
        s = r ** (1.0 / k)
        x = t - s
        hv = h_scaled(s)
        return hv * hv * x ** (beta - 1.0) * np.exp(-x) / g_b / k

    mid = 0.5 * t
    opts = dict(epsabs=0.0, epsrel=epsrel, limit=500)
    i1 = integrate.quad(near_zero, 0.0, mid**beta, **opts)[0]
    i2 = integrate.quad(near_t, 0.0, (t - mid) ** k, **opts)[0]
    # x > t: h = 1
    tail = float(special.gammaincc(beta, t))
    return i1 + i2 + tail


def gamma_sigma_closed_form(alpha: float, delta: float, t: float, lam: float = 1.0,
                            epsrel: float = 1e-10) -> float:
    """Asymptotic variance ``Sigma_{t,t}`` of a Gamma process, t > 0.

    ``integral_0^inf (1 - G(t-x) - g(t-x))^2 gamma_{alpha delta}(x) dx / delta^2``
    with ``G``, ``g`` the distribution function and density of
    ``Gamma(1 - alpha delta, 1)``. Rate ``lam`` enters by evaluating the unit
    rate formula at ``lam * t``.
    """
    beta = alpha * delta
    if not 0 < beta < 0.5:
        raise ValidationError("the variance is finite only for 0 < alpha*delta < 1/2")
    if not t > 0:
        raise ValidationError("closed form is for t > 0")
    if not lam > 0:
        raise ValidationError("lambda must be positive")
    return _sigma_unit_scale(beta, lam * t, epsrel) / delta**2


# --------------------------------------------------------------------------
# Monte-Carlo oracle


def oracle_covariance(model: LevyModel, config: EstimateConfig, t_grid, m_samples: int = 10**5,
                      h: float = 1e-3, seed: int = 0, refine: bool = False) -> CovarianceMatrix:
    """Brute-force ``Sigma``: true ``phi`` in ``h_t``, averaged over fresh draws from P.

    With ``refine`` the computation is repeated at ``h/2`` on the same draws
    and the relative change of the diagonal is stored in the diagnostics.
    """
    if m_samples < 10**4:
        raise ValidationError("oracle covariance needs m_samples >= 1e4")
    t = _check_t(t_grid)
    delta = config.delta
    x = sample_increments(model, int(m_samples), delta, seed)

    def at(hh):
        m = choose_grid_size(hh, config.grid_size, required_span(x, t))
        u = frequency_grid(hh, m)
        data = SpectralData.from_model(model, delta, u)
        return covariance_from_data(data, flat_top_kernel(hh, config.flat_radius), t, x, delta)

    cov = at(h)
    cov.diagnostics["seed"] = int(seed)
    if refine:
        fine = at(h / 2)
        d0, d1 = np.diag(cov.sigma), np.diag(fine.sigma)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(d0 > 0, np.abs(d1 - d0) / d0, 0.0)
        cov.diagnostics["h_refinement_change"] = rel.tolist()
    return cov
