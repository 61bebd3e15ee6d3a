"""Uniform grids carrying densities and characteristic functions.

A density lives on a uniform window and, for heavy tails, carries a power
model ``c * |x|**-(1 + alpha)`` for the mass outside the window. All
integrals are trapezoid sums over the window plus closed-form tail terms.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.signal import fftconvolve

from ._dft import fourier_sum
from ._special import periodic_tail_sum, power_tail_fourier
from .errors import (GridMismatch, NonFiniteIntegrand, NotADensity,
                     NotIntegrable, TailUnbounded)
from .tolerances import DEFAULT_TOLERANCES, DENSITY_FLOOR

TOL_NEG = DEFAULT_TOLERANCES["tol_neg"]
TOL_EDGE = DEFAULT_TOLERANCES["tol_edge"]
TAIL_FRACTION = DEFAULT_TOLERANCES["tail_fraction"]
EDGE_SHARE = 0.02  # share of a t-grid inspected by the decay check
MAX_FREQUENCIES = 2 ** 24


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


@dataclass(frozen=True)
class Grid:
    """Nodes ``x_lo + i*dx`` for ``0 <= i < count``."""

    x_lo: float
    dx: float
    count: int

    def __post_init__(self):
        if not (self.dx > 0 and np.isfinite(self.dx) and np.isfinite(self.x_lo)):
            raise ValueError(f"grid spacing must be positive, got {self.dx}")
        if self.count < 16 or not _is_pow2(self.count):
            raise ValueError(f"grid count must be a power of two >= 16, got {self.count}")
        object.__setattr__(self, "x_lo", float(self.x_lo))
        object.__setattr__(self, "dx", float(self.dx))
        object.__setattr__(self, "count", int(self.count))

    @classmethod
    def symmetric(cls, half_width: float, count: int) -> "Grid":
        """Grid from ``-half_width`` in ``count`` steps; node ``count//2`` is 0."""
        return cls(-half_width, 2.0 * half_width / count, count)

    @classmethod
    def from_nodes(cls, x) -> "Grid":
        x = np.asarray(x, dtype=float)
        dx = (x[-1] - x[0]) / (x.size - 1)
        g = cls(x[0], dx, x.size)
        if np.max(np.abs(g.nodes() - x)) > 1e-9 * max(1.0, np.max(np.abs(x))):
            raise GridMismatch("nodes are not uniformly spaced")
        return g

    def nodes(self) -> np.ndarray:
        return self.x_lo + self.dx * np.arange(self.count)

    @property
    def x_hi(self) -> float:
        return self.x_lo + self.dx * (self.count - 1)

    @property
    def nyquist(self) -> float:
        return np.pi / self.dx

    def index_of(self, x: float) -> int:
        return int(round((x - self.x_lo) / self.dx))

    def same_as(self, other: "Grid", rtol: float = 1e-12) -> bool:
        return (self.count == other.count
                and abs(self.dx - other.dx) <= rtol * self.dx
                and abs(self.x_lo - other.x_lo) <= rtol * max(self.dx, abs(self.x_lo)))


def trapezoid_weights(count: int) -> np.ndarray:
    w = np.ones(count)
    w[0] = w[-1] = 0.5
    return w


def power_log_integral(c: float, edge: float, s: float, j: int = 0) -> float:
    """Return the integral of ``c * x**-s * log(x)**j`` over ``[edge, inf)``.

    Closed forms for ``j`` in 0, 1, 2. Raises TailUnbounded for ``s <= 1``.
    """
    if c == 0.0:
        return 0.0
    if s <= 1.0:
        raise TailUnbounded(f"integrand decays like x^-{s:g}, not integrable")
    if edge <= 0:
        raise GridMismatch("tail edge must be positive")
    m = s - 1.0
    lg = np.log(edge)
    base = c * edge ** (-m)
    if j == 0:
        return base / m
    if j == 1:
        return base * (lg / m + 1.0 / m ** 2)
    if j == 2:
        return base * (lg * lg / m + 2.0 * lg / m ** 2 + 2.0 / m ** 3)
    raise ValueError("only log powers 0, 1, 2 are supported")


@dataclass(frozen=True)
class TailModel:
    """Power tails ``c_left*|x-center|**-(1+alpha)`` and ``c_right*(x-center)**-(1+alpha)``."""

    alpha: float = 2.0
    c_left: float = 0.0
    c_right: float = 0.0
    active: bool = False
    center: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise ValueError(f"tail exponent must lie in (0, 2], got {self.alpha}")
        if self.c_left < 0 or self.c_right < 0:
            raise ValueError("tail constants must be nonnegative")

    @property
    def nu(self) -> float:
        return 1.0 + self.alpha

    @property
    def heavy(self) -> bool:
        return self.active and self.alpha < 2

    def sides(self, grid: Grid):
        """Yield ``(sign, constant, edge)`` for each modeled side.

        ``edge`` is the distance of the window end from ``center``.
        """
        if not self.heavy:
            return
        if self.c_left > 0:
            if grid.x_lo >= self.center:
                raise GridMismatch("left tail needs a window reaching below the center")
            yield -1.0, self.c_left, self.center - grid.x_lo
        if self.c_right > 0:
            if grid.x_hi <= self.center:
                raise GridMismatch("right tail needs a window reaching above the center")
            yield 1.0, self.c_right, grid.x_hi - self.center

    def mass(self, grid: Grid) -> float:
        return sum(power_log_integral(c, e, self.nu) for _, c, e in self.sides(grid))

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float) - self.center
        ax = np.abs(x)
        with np.errstate(divide="ignore"):
            mag = np.where(ax > 0, ax ** -self.nu, np.inf)
        return np.where(x < 0, self.c_left, self.c_right) * mag

    def scaled(self, b: float) -> "TailModel":
        """Tail model of ``X / b`` given the model of ``X``."""
        k = b ** -self.alpha
        return replace(self, c_left=self.c_left * k, c_right=self.c_right * k,
                       center=self.center / b)

    def shifted(self, a: float) -> "TailModel":
        return replace(self, center=self.center + a)

    def reflected(self) -> "TailModel":
        return replace(self, c_left=self.c_right, c_right=self.c_left, center=-self.center)


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Density samples on a grid plus a tail model.

    ``derivative`` optionally holds exact samples of ``p'``; without it a
    finite-difference derivative is used.
    """

    grid: Grid
    values: np.ndarray
    tail: TailModel = field(default_factory=TailModel)
    derivative: np.ndarray | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.count,):
            raise GridMismatch(f"expected {self.grid.count} values, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.derivative is not None:
            d = np.array(self.derivative, dtype=float)
            if d.shape != v.shape:
                raise GridMismatch("derivative length differs from values")
            d.setflags(write=False)
            object.__setattr__(self, "derivative", d)

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes()

    def window_mass(self) -> float:
        return float(self.grid.dx * np.dot(trapezoid_weights(self.grid.count), self.values))

    def tail_mass(self) -> float:
        return self.tail.mass(self.grid)

    def mass(self) -> float:
        return self.window_mass() + self.tail_mass()

    def mean(self) -> float:
        if self.tail.heavy and self.tail.alpha <= 1:
            raise TailUnbounded("mean does not exist for alpha <= 1")
        return quadrature(self, lambda x, p: x * p, tail=_first_moment_tail(self.tail))

    def slope(self) -> np.ndarray:
        """Exact derivative when available, else finite differences."""
        if self.derivative is not None:
            return self.derivative
        return finite_difference(self.values, self.grid.dx)

    def with_values(self, values, derivative=None) -> "DensityGrid":
        return DensityGrid(self.grid, values, self.tail, derivative)

    def check(self, tol_mass: float = DEFAULT_TOLERANCES["tol_mass"],
              tol_neg: float = TOL_NEG) -> "DensityGrid":
        """Raise NotADensity unless values are nonnegative and mass is one."""
        if np.min(self.values) < -tol_neg:
            raise NotADensity(f"minimum value {np.min(self.values):.3g} is negative")
        m = self.mass()
        if abs(m - 1.0) > tol_mass:
            raise NotADensity(f"total mass {m:.12g} differs from 1")
        return self


def _first_moment_tail(tail: TailModel):
    # x*p in the tails: sign * c * |x|^(1 - nu)
    def part(c, edge, sign):
        return sign * power_log_integral(c, edge, tail.nu - 1.0)
    return part


def quadrature(d: DensityGrid, integrand: Callable | None = None,
               tail="auto", floor: float = DENSITY_FLOOR) -> float:
    """Integrate ``integrand(x, p)`` against the density's window and tails.

    ``integrand`` defaults to ``p`` itself. Nodes with ``p <= floor`` are
    skipped. The tail part is controlled by ``tail``:

    * ``"auto"``: the integrand is probed on the tail model at the window
      edge and at twice the edge, fitted by a power of ``|x|`` and
      integrated in closed form.
    * a callable ``tail(c, edge, sign)`` returning the integral over one
      side, where ``edge > 0`` is the distance of the window edge from 0.
    * ``None``: the tails are ignored.
    """
    x = d.x
    p = d.values
    mask = p > floor
    if integrand is None:
        g = np.where(mask, p, 0.0)
    else:
        with np.errstate(all="ignore"):
            g = np.zeros_like(p)
            g[mask] = np.asarray(integrand(x[mask], p[mask]), dtype=float)
        if not np.all(np.isfinite(g)):
            bad = x[~np.isfinite(g)][0]
            raise NonFiniteIntegrand(f"integrand is not finite at x = {bad:g}")
    total = d.grid.dx * float(np.dot(trapezoid_weights(p.size), g))
    if tail is None or not d.tail.heavy:
        return total
    for sign, c, edge in d.tail.sides(d.grid):
        if callable(tail):
            total += float(tail(c, edge, sign))
        elif integrand is None:
            total += power_log_integral(c, edge, d.tail.nu)
        else:
            total += _probe_tail(integrand, d.tail, c, edge, sign)
    return total


def _probe_tail(integrand, tail: TailModel, c: float, edge: float, sign: float) -> float:
    xs = tail.center + sign * edge * np.array([1.0, 2.0])
    ps = c * edge ** -tail.nu * np.array([1.0, 2.0 ** -tail.nu])
    with np.errstate(all="ignore"):
        g = np.asarray(integrand(xs, ps), dtype=float)
    if not np.all(np.isfinite(g)):
        raise NonFiniteIntegrand("integrand is not finite on the tail model")
    if g[0] == 0.0 and g[1] == 0.0:
        return 0.0
    if g[0] * g[1] <= 0:
        raise TailUnbounded("integrand changes sign in the tail; pass an explicit tail")
    s = np.log(g[0] / g[1]) / np.log(2.0)
    if s <= 1.0 + 1e-9:
        raise TailUnbounded(f"integrand decays like |x|^-{s:.3g} in the tail")
    return g[0] * edge / (s - 1.0)


@dataclass(frozen=True, eq=False)
class CharFnGrid:
    """Characteristic function values on a frequency grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.grid.count,):
            raise GridMismatch(f"expected {self.grid.count} values, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes()

    def at_zero(self) -> complex:
        i = self.grid.index_of(0.0)
        if abs(self.grid.x_lo + i * self.grid.dx) > 1e-12 * self.grid.dx:
            raise GridMismatch("frequency grid has no node at t = 0")
        return complex(self.values[i])

    def hermitian_error(self) -> float:
        """Largest ``|f(-t) - conj f(t)|`` over mirrored node pairs."""
        i0 = self.grid.index_of(0.0)
        k = min(i0, self.grid.count - 1 - i0)
        right = self.values[i0:i0 + k + 1]
        left = self.values[i0 - k:i0 + 1][::-1]
        return float(np.max(np.abs(left - np.conj(right))))


def frequency_grid(half_width: float, dt: float, limit: float | None = None) -> Grid:
    """Frequency grid with spacing at most ``dt`` covering ``[-half_width, half_width)``.

    The node at index ``count//2`` is ``t = 0``. With ``limit`` the grid
    never reaches beyond ``+-limit``; the spacing shrinks instead.
    Raises GridMismatch when more than ``MAX_FREQUENCIES`` nodes are needed.
    """
    need = 2.0 * half_width / dt
    if not need <= MAX_FREQUENCIES:
        raise GridMismatch(f"frequency grid would need {need:.3g} nodes")
    count = max(16, next_pow2(int(np.ceil(need))))
    if limit is not None and dt * (count // 2) > limit:
        dt = limit / (count // 2)
    return Grid(-dt * (count // 2), dt, count)


def charfn_values(d: DensityGrid, t0: float, dt: float, m: int,
                  workers: int | None = None) -> np.ndarray:
    """Characteristic function of ``d`` at ``t0 + k*dt`` for ``k < m``.

    A density that is still positive at the window ends gets the first
    end correction of the trapezoid rule, ``-h^2/12 [g'(x_hi) - g'(x_lo)]``
    with ``g = p exp(itx)``; otherwise that error grows like ``t p(x_hi)``.
    """
    g = d.grid
    if max(abs(t0), abs(t0 + (m - 1) * dt)) > g.nyquist * (1 + 1e-9):
        raise GridMismatch("frequency grid extends beyond the Nyquist band pi/dx")
    w = trapezoid_weights(g.count) * d.values * g.dx
    f = fourier_sum(w, g.x_lo, g.dx, t0, dt, m, sign=1, workers=workers)
    t = t0 + dt * np.arange(m)
    if d.values[0] != 0 or d.values[-1] != 0:
        s = d.slope()
        ends = []
        for i, x in ((0, g.x_lo), (-1, g.x_hi)):
            ends.append((s[i] + 1j * t * d.values[i]) * np.exp(1j * t * x))
        f -= g.dx ** 2 / 12.0 * (ends[1] - ends[0])
    if d.tail.heavy:
        phase = np.exp(1j * t * d.tail.center) if d.tail.center else 1.0
        for sign, c, edge in d.tail.sides(g):
            f += c * phase * power_tail_fourier(sign * t, edge, d.tail.nu)
    return f


def density_to_charfn(d: DensityGrid, tgrid: Grid, workers: int | None = None) -> CharFnGrid:
    """Fourier transform ``f(t) = int exp(itx) p(x) dx`` including the tails."""
    return CharFnGrid(tgrid, charfn_values(d, tgrid.x_lo, tgrid.dx, tgrid.count, workers))


def _check_edges(g: np.ndarray, tol_edge: float, what: str) -> None:
    k = max(1, int(EDGE_SHARE * g.size))
    scale = max(1.0, float(np.max(np.abs(g))))
    edge = max(np.max(np.abs(g[:k])), np.max(np.abs(g[-k:])))
    if not np.isfinite(edge) or edge > tol_edge * scale:
        raise NotIntegrable(f"{what} does not decay at the grid edges (|.| = {edge:.3g})")


def _rising(nu: float, k: int) -> float:
    out = 1.0
    for j in range(k):
        out *= nu + j
    return out


def _invert(f: CharFnGrid, xgrid: Grid, order: int, tail: TailModel | None,
            tol_edge: float, workers: int | None) -> np.ndarray:
    # (1/2pi) int (-it)^order exp(-itx) f(t) dt, with periodic tail copies removed
    t = f.t
    g = f.values * (-1j * t) ** order if order else np.asarray(f.values)
    _check_edges(g, tol_edge, "(-it)^%d f(t)" % order if order else "f(t)")
    dt = f.grid.dx
    w = g * trapezoid_weights(t.size) * dt
    s = fourier_sum(w, f.grid.x_lo, dt, xgrid.x_lo, xgrid.dx, xgrid.count, sign=-1,
                    workers=workers)
    out = s.real / (2.0 * np.pi)
    if tail is not None and tail.heavy:
        out -= alias_copies(xgrid, 2.0 * np.pi / dt, tail, order)
    return out


def alias_copies(xgrid: Grid, period: float, tail: TailModel, order: int = 0) -> np.ndarray:
    """Sum of the tail model's ``order``-th derivative over shifts ``x + m*period``, m != 0."""
    x = xgrid.nodes() - tail.center
    if period <= 2.0 * np.max(np.abs(x)):
        raise GridMismatch("frequency spacing too coarse for the spatial window")
    right, left = periodic_tail_sum(x, period, tail.nu, order)
    k = _rising(tail.nu, order)
    return k * ((-1) ** order * tail.c_right * right + tail.c_left * left)


def fit_tail_constants(values, grid: Grid, alpha: float,
                       fraction: float = TAIL_FRACTION,
                       floor: float = DENSITY_FLOOR) -> tuple[float, float]:
    """Least-squares constants of ``c*|x|**-(1+alpha)`` on the outer window parts."""
    x = grid.nodes()
    p = np.asarray(values)
    span = fraction * (grid.x_hi - grid.x_lo)
    out = []
    for side in (x <= grid.x_lo + span, x >= grid.x_hi - span):
        m = side & (p > floor) & (x != 0)
        if not np.any(m):
            out.append(0.0)
            continue
        out.append(float(np.exp(np.mean(np.log(p[m]) + (1 + alpha) * np.log(np.abs(x[m]))))))
    return out[0], out[1]


def fit_tail_exponent(d: DensityGrid, fraction: float = TAIL_FRACTION,
                      floor: float = DENSITY_FLOOR) -> tuple[float, float, float]:
    """Joint log-log regression on both outer parts of the window.

    Returns ``(alpha, c_left, c_right)`` with a common decay exponent.
    """
    x, p, g = d.x, d.values, d.grid
    span = fraction * (g.x_hi - g.x_lo)
    left = (x <= g.x_lo + span) & (p > floor) & (x < 0)
    right = (x >= g.x_hi - span) & (p > floor) & (x > 0)
    m = left | right
    a = np.column_stack([left[m].astype(float), right[m].astype(float), -np.log(np.abs(x[m]))])
    coef, *_ = np.linalg.lstsq(a, np.log(p[m]), rcond=None)
    cl = float(np.exp(coef[0])) if left.any() else 0.0
    cr = float(np.exp(coef[1])) if right.any() else 0.0
    return float(coef[2] - 1.0), cl, cr


def _mass_matched(tail: TailModel, grid: Grid, p: np.ndarray, total: float | None) -> TailModel:
    # The log-log fit is biased by the next asymptotic term; rescale both
    # constants so that window plus tail mass reproduces f(0).
    model = tail.mass(grid)
    if total is None or model <= 0:
        return tail
    need = total - grid.dx * float(np.dot(trapezoid_weights(p.size), p))
    ratio = need / model
    if not 0.5 < ratio < 2.0:
        return tail
    return replace(tail, c_left=tail.c_left * ratio, c_right=tail.c_right * ratio)


def charfn_to_density(f: CharFnGrid, xgrid: Grid, tail_alpha: float | None = None,
                      tol_neg: float = TOL_NEG, tol_edge: float = TOL_EDGE,
                      iterations: int = 3, workers: int | None = None) -> DensityGrid:
    """Invert ``f`` onto ``xgrid``.

    With ``tail_alpha < 2`` the result carries a fitted power tail, and
    the periodic copies of that tail introduced by the discrete frequency
    sum are subtracted; the fit and the correction are iterated.
    Small negative values are clamped to zero.
    """
    raw = _invert(f, xgrid, 0, None, tol_edge, workers)
    p = raw
    tail = TailModel()
    if tail_alpha is not None and tail_alpha < 2:
        tail = TailModel(tail_alpha, 0.0, 0.0, True)
        period = 2.0 * np.pi / f.grid.dx
        try:
            total = f.at_zero().real
        except GridMismatch:
            total = None
        for _ in range(iterations):
            cl, cr = fit_tail_constants(np.maximum(p, 0.0), xgrid, tail_alpha)
            tail = _mass_matched(TailModel(tail_alpha, cl, cr, True), xgrid, p, total)
            p = raw - alias_copies(xgrid, period, tail)
    lo = float(np.min(p))
    if lo < -tol_neg:
        raise NotADensity(f"inversion produced {lo:.3g} (frequency window too small?)")
    return DensityGrid(xgrid, np.maximum(p, 0.0), tail)


def charfn_to_density_derivative(f: CharFnGrid, xgrid: Grid, tail: TailModel | None = None,
                                 tol_edge: float = TOL_EDGE, order: int = 1,
                                 workers: int | None = None) -> np.ndarray:
    """Invert ``(-it)**order * f`` onto ``xgrid``; ``order=1`` gives ``p'``."""
    return _invert(f, xgrid, order, tail, tol_edge, workers)


def tv_norm(d: DensityGrid) -> float:
    """Total variation of the sampled density, counting the drop to zero at both ends."""
    v = d.values
    return float(abs(v[0]) + np.sum(np.abs(np.diff(v))) + abs(v[-1]))


_CENTRAL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_FORWARD = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0


def finite_difference(values, dx: float, floor: float = DENSITY_FLOOR) -> np.ndarray:
    """Fourth-order derivative of grid samples.

    Central stencils are used where all five points are inside the grid
    and above ``floor``; otherwise one-sided stencils that stay on the
    positive part, so that edges of a support are not smeared.
    """
    p = np.asarray(values, dtype=float)
    n = p.size
    pos = p > floor
    pad = np.concatenate([np.zeros(4), p, np.zeros(4)])
    ok = np.concatenate([np.zeros(4, bool), pos, np.zeros(4, bool)])

    def window(offsets):
        idx = np.arange(n)[:, None] + 4 + np.asarray(offsets)[None, :]
        return pad[idx], np.all(ok[idx], axis=1)

    vc, okc = window([-2, -1, 0, 1, 2])
    vf, okf = window([0, 1, 2, 3, 4])
    vb, okb = window([0, -1, -2, -3, -4])
    v1f, ok1f = window([0, 1])
    v1b, ok1b = window([0, -1])
    out = np.zeros(n)
    out = np.where(ok1b, v1b[:, 0] - v1b[:, 1], out)
    out = np.where(ok1f, v1f[:, 1] - v1f[:, 0], out)
    out = np.where(okb, -(vb @ _FORWARD), out)
    out = np.where(okf, vf @ _FORWARD, out)
    out = np.where(okc, vc @ _CENTRAL, out)
    return np.where(pos, out, 0.0) / dx


def _same_spacing(a: Grid, b: Grid) -> None:
    if abs(a.dx - b.dx) > 1e-12 * a.dx:
        raise GridMismatch(f"grid spacings differ: {a.dx} vs {b.dx}")


def combined_tail(a: TailModel, b: TailModel) -> TailModel:
    """Tail model of a sum of independent variables: the heavier tail wins."""
    if not (a.heavy or b.heavy):
        return TailModel()
    if a.heavy and b.heavy and abs(a.alpha - b.alpha) < 1e-12:
        return TailModel(a.alpha, a.c_left + b.c_left, a.c_right + b.c_right, True,
                         a.center + b.center)
    heavier = a if (a.heavy and (not b.heavy or a.alpha < b.alpha)) else b
    return heavier


PROBE_OFFSET = (np.sqrt(5.0) - 1.0) / 2.0


def probe_frequencies(band: float, count: int) -> np.ndarray:
    """``count`` frequencies in ``(0, band)`` spaced ``band/count`` apart.

    They are offset by an irrational share of the step so that they do not
    line up with the regularly spaced zeros of box-like transforms.
    """
    return band / count * (np.arange(count) + PROBE_OFFSET)


def product_band(d1: DensityGrid, d2: DensityGrid, level: float = 1e-15) -> float:
    """Frequency beyond which ``|f1*f2|`` stays small, capped at Nyquist.

    Small means below ``level`` or, when the transforms of the windowed
    densities bottom out above that, within a factor 100 of their floor.
    """
    band = min(d1.grid.nyquist, d2.grid.nyquist)
    probe = probe_frequencies(band, 256)
    t0, dt = probe[0], probe[1] - probe[0]
    f = (np.abs(charfn_values(d1, t0, dt, probe.size))
         * np.abs(charfn_values(d2, t0, dt, probe.size)))
    envelope = np.maximum.accumulate(f[::-1])[::-1]
    floor = envelope[-probe.size // 10]
    below = np.nonzero(envelope < max(level, 100.0 * floor))[0]
    if below.size == 0:
        return float(band)
    return float(probe[min(below[0] + 1, probe.size - 1)])


def convolve(d1: DensityGrid, d2: DensityGrid, method: str = "auto",
             xgrid: Grid | None = None, workers: int | None = None) -> DensityGrid:
    """Density of the sum of independent variables with densities ``d1`` and ``d2``.

    ``"direct"`` is the discrete convolution of the samples; derivative
    samples of ``d1`` (if present) are carried along. ``"spectral"``
    multiplies the characteristic functions (tails included) and inverts,
    which is the right choice for heavy tails. ``"auto"`` picks spectral
    exactly when a heavy tail is present.
    """
    _same_spacing(d1.grid, d2.grid)
    dx = d1.grid.dx
    if xgrid is None:
        xgrid = Grid(d1.grid.x_lo + d2.grid.x_lo, dx,
                     next_pow2(d1.grid.count + d2.grid.count - 1))
    if method == "auto":
        method = "spectral" if (d1.tail.heavy or d2.tail.heavy) else "direct"
    if method == "direct":
        return _direct_convolution(d1, d2, xgrid)
    if method != "spectral":
        raise ValueError(f"unknown convolution method {method!r}")
    f = spectral_product(d1, d2, xgrid, workers=workers)
    tail = combined_tail(d1.tail, d2.tail)
    alpha = tail.alpha if tail.heavy else None
    dens = charfn_to_density(f, xgrid, tail_alpha=alpha, workers=workers)
    deriv = charfn_to_density_derivative(f, xgrid, dens.tail, workers=workers)
    return DensityGrid(xgrid, dens.values, dens.tail, deriv)


def spectral_product(d1: DensityGrid, d2: DensityGrid, xgrid: Grid,
                     oversample: float = 16.0, workers: int | None = None) -> CharFnGrid:
    """``f1*f2`` on a frequency grid fine enough for inversion onto ``xgrid``."""
    width = xgrid.x_hi - xgrid.x_lo
    dt = 2.0 * np.pi / (oversample * width)
    band = product_band(d1, d2)
    tg = frequency_grid(band, dt, limit=min(d1.grid.nyquist, d2.grid.nyquist))
    f1 = charfn_values(d1, tg.x_lo, tg.dx, tg.count, workers)
    f2 = charfn_values(d2, tg.x_lo, tg.dx, tg.count, workers)
    return CharFnGrid(tg, f1 * f2)


def _direct_convolution(d1: DensityGrid, d2: DensityGrid, xgrid: Grid) -> DensityGrid:
    dx = d1.grid.dx
    offset = (d1.grid.x_lo + d2.grid.x_lo - xgrid.x_lo) / dx
    shift = int(round(offset))
    if abs(offset - shift) > 1e-6:
        raise GridMismatch("output grid is not aligned with the input nodes")

    def place(a):
        full = fftconvolve(a[0], a[1]) * dx
        out = np.zeros(xgrid.count)
        lo = max(0, shift)
        hi = min(xgrid.count, shift + full.size)
        if hi > lo:
            out[lo:hi] = full[lo - shift:hi - shift]
        return out

    vals = np.maximum(place((d1.values, d2.values)), 0.0)
    deriv = None
    if d1.derivative is not None:
        deriv = place((d1.derivative, d2.values))
    elif d2.derivative is not None:
        deriv = place((d1.values, d2.derivative))
    return DensityGrid(xgrid, vals, combined_tail(d1.tail, d2.tail), deriv)


def scaled(d: DensityGrid, b: float) -> DensityGrid:
    """Density of ``X / b`` for ``b > 0``."""
    g = Grid(d.grid.x_lo / b, d.grid.dx / b, d.grid.count)
    deriv = None if d.derivative is None else d.derivative * b * b
    return DensityGrid(g, d.values * b, d.tail.scaled(b), deriv)


def shifted(d: DensityGrid, a: float) -> DensityGrid:
    """Density of ``X + a``."""
    return DensityGrid(Grid(d.grid.x_lo + a, d.grid.dx, d.grid.count), d.values,
                       d.tail.shifted(a), d.derivative)


def resample(d: DensityGrid, xgrid: Grid) -> DensityGrid:
    """Linear interpolation onto ``xgrid``; outside the window the tail model (or 0) is used."""
    x = xgrid.nodes()
    inside = (x >= d.grid.x_lo) & (x <= d.grid.x_hi)
    outside = d.tail.evaluate(x) if d.tail.heavy else np.zeros_like(x)
    vals = np.where(inside, np.interp(x, d.x, d.values), outside)
    deriv = None
    if d.derivative is not None:
        z = x - d.tail.center
        out_d = -d.tail.nu * outside / np.where(z == 0, 1.0, z) if d.tail.heavy else 0.0
        deriv = np.where(inside, np.interp(x, d.x, d.derivative), out_d)
    return DensityGrid(xgrid, vals, d.tail, deriv)


def uniform_density(a: float, b: float, dx: float, pad: int = 64) -> DensityGrid:
    """Uniform density on ``[a, b]`` with half values at the two jump nodes.

    ``(b - a) / dx`` must be an integer so that both ends are nodes.
    """
    steps = (b - a) / dx
    if abs(steps - round(steps)) > 1e-9:
        raise GridMismatch("interval length must be a multiple of dx")
    steps = int(round(steps))
    count = next_pow2(steps + 1 + 2 * pad)
    g = Grid(a - pad * dx, dx, count)
    v = np.zeros(count)
    v[pad:pad + steps + 1] = 1.0 / (b - a)
    v[pad] = v[pad + steps] = 0.5 / (b - a)
    return DensityGrid(g, v)


def write_density_csv(d: DensityGrid, path) -> None:
    np.savetxt(path, np.column_stack([d.x, d.values]), fmt="%.17g", delimiter=",",
               header="x,value", comments="", newline="\n", encoding="utf-8")


def read_density_csv(path, tail: TailModel | None = None) -> DensityGrid:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return DensityGrid(Grid.from_nodes(data[:, 0]), data[:, 1], tail or TailModel())


def write_charfn_csv(f: CharFnGrid, path) -> None:
    np.savetxt(path, np.column_stack([f.t, f.values.real, f.values.imag]), fmt="%.17g",
               delimiter=",", header="t,re,im", comments="", newline="\n", encoding="utf-8")


def read_charfn_csv(path) -> CharFnGrid:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return CharFnGrid(Grid.from_nodes(data[:, 0]), data[:, 1] + 1j * data[:, 2])
