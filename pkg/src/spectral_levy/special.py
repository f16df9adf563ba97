"""Exponential integral of purely imaginary argument.

Everything here is vectorised over numpy arrays. The routines compute

    E1(-i y) = int_1^inf exp(i y s) / s ds = -Ci(|y|) + i sgn(y) (pi/2 - Si(|y|))

for real ``y != 0``, with power series for ``|y| <= 4`` and a continued
fraction (modified Lentz) beyond.
"""

from __future__ import annotations

import numpy as np

EULER_GAMMA = 0.57721566490153286061
SERIES_SWITCH = 4.0

_EPS = 1e-16
_MAX_SERIES_TERMS = 80
_MAX_CF_ITER = 500


def _sici_series(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Si and Ci by their Maclaurin series, for 0 < x <= 4."""
    si = x.copy()
    ci = np.zeros_like(x)
    # term = x^k / k!; odd k feed Si, even k feed Ci, sign (-1)^(k // 2)
    term = x.copy()
    for k in range(2, _MAX_SERIES_TERMS):
        term = term * x / k
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            ci += sign * term / k
        else:
            si += sign * term / k
        if np.all(np.abs(term) < _EPS * 1e-3):
            break
    ci += EULER_GAMMA + np.log(x)
    return si, ci


def _e1_cf(x: np.ndarray) -> np.ndarray:
    """E1(i x) for x > 4 by the even continued fraction, modified Lentz."""
    # E1(z) = exp(-z) / (z + 1 - 1^2/(z + 3 - 2^2/(z + 5 - ...)))
    z = 1j * x
    tiny = 1e-300
    b = z + 1.0
    c = np.full_like(z, 1.0 / tiny)
    d = 1.0 / b
    f = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, _MAX_CF_ITER):
        a = -float(k * k)
        b = b + 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        f = np.where(active, f * delta, f)
        active &= np.abs(delta - 1.0) > _EPS
        if not active.any():
            break
    return f * np.exp(-z)


def sici(x) -> tuple[np.ndarray, np.ndarray]:
    """Sine and cosine integrals Si(x), Ci(x) for x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("sici requires x > 0")
    si = np.empty_like(x)
    ci = np.empty_like(x)
    small = x <= SERIES_SWITCH
    if small.any():
        si[small], ci[small] = _sici_series(x[small])
    if (~small).any():
        e1 = _e1_cf(x[~small])
        # E1(ix) = -Ci(x) + i (Si(x) - pi/2)
        ci[~small] = -e1.real
        si[~small] = e1.imag + np.pi / 2
    return si, ci


def e1_neg_imag(y) -> np.ndarray:
    """Return E1(-i y) for real nonzero ``y`` (array-like)."""
    y = np.asarray(y, dtype=float)
    if np.any(y == 0):
        raise ValueError("E1(-iy) has a logarithmic singularity at y = 0")
    ay = np.abs(y)
    si, ci = sici(ay)
    return -ci + 1j * np.sign(y) * (np.pi / 2 - si)
