"""Chirp-z evaluation of Fourier sums on uniform grids.

The phases are formed with error-free products so that large values of
t*x do not cost accuracy; only the FFT convolution itself rounds.
"""
from __future__ import annotations

import numpy as np
from scipy import fft as sfft

_SPLITTER = 134217729.0  # 2**27 + 1


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def two_prod(a, b):
    """Return (p, e) with p = fl(a*b) and p + e == a*b exactly."""
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def _phase(coef, j, sign):
    # exp(i*sign*coef*j) for a double-double coef and exactly representable j
    hi, lo = coef
    p, e = two_prod(hi, j)
    return np.exp(1j * sign * p) * np.exp(1j * sign * (e + lo * j))


def fourier_sum(values, x0: float, dx: float, t0: float, dt: float, m: int,
                sign: int = 1, workers: int | None = None) -> np.ndarray:
    """Return S_k = sum_n values[n] exp(i*sign*(t0 + k*dt)*(x0 + n*dx)).

    ``k`` runs over ``0..m-1``. The cost is a few FFTs of length about
    ``len(values) + m``.
    """
    values = np.asarray(values, dtype=complex)
    n = values.size
    kmax = max(n, m)
    kk = np.arange(kmax, dtype=float)
    chirp = _phase(two_prod(dt, dx), 0.5 * kk * kk, sign)
    a = values * chirp[:n] * _phase(two_prod(t0, dx), kk[:n], sign)
    size = sfft.next_fast_len(n + m - 1)
    b = np.zeros(size, dtype=complex)
    b[:m] = np.conj(chirp[:m])
    if n > 1:
        b[size - n + 1:] = np.conj(chirp[1:n])[::-1]
    conv = sfft.ifft(sfft.fft(a, size, workers=workers) * sfft.fft(b, workers=workers),
                     workers=workers)[:m]
    const = _phase(two_prod(t0, x0), 1.0, sign)
    return conv * chirp[:m] * _phase(two_prod(dt, x0), kk[:m], sign) * const
