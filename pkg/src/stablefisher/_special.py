"""Special functions behind the analytic power-tail corrections."""

from __future__ import annotations

import numpy as np
from scipy.special import exp1, gamma, roots_laguerre, zeta

_SERIES_CUT = 4.0
_SERIES_TERMS = 60
_ASYMPTOTIC_CUT = 400.0
_ASYMPTOTIC_TERMS = 14
_LAGUERRE_X, _LAGUERRE_W = roots_laguerre(64)


def _series(y: np.ndarray, nu: float) -> np.ndarray:
    # E_nu(z) = z^(nu-1) Gamma(1-nu) - sum_k (-z)^k / (k! (1-nu+k)),  z = -iy
    z = -1j * y
    out = np.zeros(y.shape, dtype=complex)
    term = np.ones(y.shape, dtype=complex)
    for k in range(_SERIES_TERMS):
        if k:
            term = term * (-z) / k
        out -= term / (1.0 - nu + k)
    nz = y != 0
    out[nz] += gamma(1.0 - nu) * np.exp((nu - 1.0) * np.log(z[nz]))
    return out


def _integer_order(y: np.ndarray, m: int) -> np.ndarray:
    z = -1j * y
    out = np.empty(y.shape, dtype=complex)
    zero = y == 0
    out[zero] = 1.0 / (m - 1)
    zz = z[~zero]
    e = exp1(zz)
    for j in range(1, m):
        e = (np.exp(-zz) - zz * e) / j
    out[~zero] = e
    return out


def _contour(y: np.ndarray, nu: float) -> np.ndarray:
    # u = 1 + i s / y turns the oscillatory integral into a Laplace transform
    s = _LAGUERRE_X[None, :]
    g = np.exp(-nu * np.log1p(1j * s / y[:, None]))
    return 1j * np.exp(1j * y) / y * (g @ _LAGUERRE_W)


def _asymptotic(y: np.ndarray, nu: float) -> np.ndarray:
    # int_0^inf e^-s (1 + i s/y)^-nu ds ~ sum_k (nu)_k (-i/y)^k
    w = -1j / y
    acc = np.ones(y.shape, dtype=complex)
    term = np.ones(y.shape, dtype=complex)
    for k in range(_ASYMPTOTIC_TERMS):
        term = term * (nu + k) * w
        acc += term
    return 1j * np.exp(1j * y) / y * acc


def oscillatory_power_integral(y, nu: float) -> np.ndarray:
    """Return ``int_1^inf exp(i*y*u) * u**(-nu) du`` for real ``y`` and ``nu > 1``.

    Equivalent to the generalized exponential integral ``E_nu(-i*y)``.
    """
    if not nu > 1.0:
        raise ValueError(f"power tail u^-{nu} is not integrable")
    y = np.asarray(y, dtype=float)
    flat = np.abs(y.ravel())
    out = np.empty(flat.shape, dtype=complex)
    m = int(round(nu))
    small = flat <= _SERIES_CUT
    large = flat > _ASYMPTOTIC_CUT
    middle = ~small & ~large
    if abs(nu - m) < 1e-12:
        out[small] = _integer_order(flat[small], m)
    else:
        out[small] = _series(flat[small], nu)
    if middle.any():
        out[middle] = _contour(flat[middle], nu)
    if large.any():
        out[large] = _asymptotic(flat[large], nu)
    neg = y.ravel() < 0
    out[neg] = np.conj(out[neg])
    return out.reshape(y.shape)


def power_tail_fourier(t, edge: float, nu: float) -> np.ndarray:
    """``int_edge^inf exp(i t x) x**(-nu) dx`` for ``edge > 0``."""
    t = np.asarray(t, dtype=float)
    return edge ** (1.0 - nu) * oscillatory_power_integral(t * edge, nu)


def periodic_tail_sum(x, period: float, nu: float, order: int = 0) -> tuple:
    """Sums ``sum_{m>=1} (m*P + x)^-(nu+order)`` and ``sum_{m>=1} (m*P - x)^-(nu+order)``.

    These are the aliased copies of right and left power tails produced by a
    Riemann sum in frequency with spacing ``2*pi/P``.
    """
    x = np.asarray(x, dtype=float)
    s = nu + order
    scale = period ** (-s)
    return scale * zeta(s, 1.0 + x / period), scale * zeta(s, 1.0 - x / period)
