"""Stable laws: characteristic function, density, derivative and score."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ExtremalLaw
from .grid import (CharFnGrid, DensityGrid, Grid, charfn_to_density,
                   charfn_to_density_derivative, frequency_grid)
from .tolerances import DEFAULT_TOLERANCES, DENSITY_FLOOR

BAND_LEVEL = 1e-18      # |f| at the edge of the frequency window
OVERSAMPLE = 16.0       # frequency period as a multiple of the window width
LOG_CUTOFF = 1e-8       # relative level below which log-densities come from asymptotics


@dataclass(frozen=True)
class StableLaw:
    """Stable law with ``f(t) = exp(i*a*t - c*|t|**alpha * (1 + i*beta*sign(t)*omega))``.

    ``omega = tan(pi*alpha/2)`` for ``alpha != 1`` and ``(2/pi)*log|t|`` for
    ``alpha == 1``.
    """

    alpha: float
    beta: float = 0.0
    c: float = 1.0
    a: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not -1 <= self.beta <= 1:
            raise ValueError(f"beta must lie in [-1, 1], got {self.beta}")
        if not self.c > 0:
            raise ValueError(f"scale c must be positive, got {self.c}")
        if not np.isfinite(self.a):
            raise ValueError("location must be finite")
        for name in ("alpha", "beta", "c", "a"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def non_extremal(self) -> bool:
        return self.alpha == 2 or -1 < self.beta < 1

    @property
    def gaussian(self) -> bool:
        return self.alpha == 2

    def to_fields(self) -> str:
        return ",".join(f"{v:.17g}" for v in (self.alpha, self.beta, self.c, self.a))

    @classmethod
    def from_fields(cls, text: str) -> "StableLaw":
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError("expected four fields alpha,beta,c,a")
        return cls(*parts)

    def _exponent_parts(self, t):
        # returns |t|^alpha, sign(t), omega(t) with omega = 0 at t = 0
        at = np.abs(t)
        s = np.sign(t)
        if self.alpha == 2:
            om = np.zeros_like(at)
        elif self.alpha == 1:
            with np.errstate(divide="ignore"):
                om = np.where(at > 0, (2.0 / np.pi) * np.log(np.where(at > 0, at, 1.0)), 0.0)
        else:
            om = np.full_like(at, np.tan(np.pi * self.alpha / 2.0))
        return at ** self.alpha, s, om

    def log_charfn(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        ta, s, om = self._exponent_parts(t)
        return 1j * self.a * t - self.c * ta * (1.0 + 1j * self.beta * s * om)

    def charfn(self, t) -> np.ndarray:
        return np.exp(self.log_charfn(t))

    def charfn_derivative(self, t) -> np.ndarray:
        """``f'(t)`` in closed form (``f'(0)`` is taken as ``i*a`` when ``alpha > 1``)."""
        t = np.asarray(t, dtype=float)
        at = np.abs(t)
        s = np.sign(t)
        safe = np.where(at > 0, at, 1.0)
        if self.alpha == 1:
            inner = s + 1j * self.beta * (2.0 / np.pi) * (np.log(safe) + 1.0)
            g = 1j * self.a - self.c * inner
        else:
            om = 0.0 if self.alpha == 2 else np.tan(np.pi * self.alpha / 2.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                g = 1j * self.a - self.c * self.alpha * safe ** (self.alpha - 1.0) * (
                    s + 1j * self.beta * om)
        g = np.where(at > 0, g, 1j * self.a if self.alpha > 1 else np.nan)
        return self.charfn(t) * g

    def band(self, level: float = BAND_LEVEL) -> float:
        """Frequency beyond which ``|f| < level``."""
        return (-np.log(level) / self.c) ** (1.0 / self.alpha)


def stable_charfn(law: StableLaw, tgrid: Grid) -> CharFnGrid:
    return CharFnGrid(tgrid, law.charfn(tgrid.nodes()))


def default_grid(alpha: float) -> Grid:
    """Standard spatial window: wider for alpha < 1."""
    if alpha >= 1:
        return Grid.symmetric(64.0, 2 ** 14)
    return Grid.symmetric(256.0, 2 ** 16)


def stable_frequency_grid(law: StableLaw, xgrid: Grid, oversample: float = OVERSAMPLE,
                          level: float = BAND_LEVEL) -> Grid:
    """Frequency grid fine enough for ``xgrid`` and wide enough that ``|f| < level``."""
    width = xgrid.x_hi - xgrid.x_lo
    reach = 2.0 * max(abs(xgrid.x_lo), abs(xgrid.x_hi))
    period = oversample * max(width, reach)
    return frequency_grid(law.band(level), 2.0 * np.pi / period)


@dataclass(frozen=True, eq=False)
class StableDensity:
    """Density, derivative, score and log-density of a stable law on a grid."""

    law: StableLaw
    density: DensityGrid
    derivative: np.ndarray
    score: np.ndarray
    log_density: np.ndarray

    @property
    def grid(self) -> Grid:
        return self.density.grid

    @property
    def values(self) -> np.ndarray:
        return self.density.values


def asymptotic_score(law: StableLaw, x) -> np.ndarray:
    """Score implied by the tail shape: ``-(1+alpha)/x``, or the Gaussian score."""
    x = np.asarray(x, dtype=float)
    if law.gaussian:
        return -(x - law.a) / (2.0 * law.c)
    with np.errstate(divide="ignore"):
        return -(1.0 + law.alpha) / x


def stable_density(law: StableLaw, xgrid: Grid | None = None,
                   score_cutoff: float = DEFAULT_TOLERANCES["score_cutoff"],
                   workers: int | None = None) -> StableDensity:
    """Invert the characteristic function of ``law`` onto ``xgrid``.

    Where the density falls below ``score_cutoff`` times its maximum the
    score comes from the tail asymptotics instead of the noisy ratio; the
    log-density switches over earlier, below ``LOG_CUTOFF`` times the
    maximum.
    """
    if not law.non_extremal:
        raise ExtremalLaw(f"beta = {law.beta} is extremal for alpha = {law.alpha}")
    xgrid = xgrid or default_grid(law.alpha)
    f = stable_charfn(law, stable_frequency_grid(law, xgrid))
    alpha = None if law.gaussian else law.alpha
    dens = charfn_to_density(f, xgrid, tail_alpha=alpha, workers=workers)
    deriv = charfn_to_density_derivative(f, xgrid, dens.tail, workers=workers)
    dens = DensityGrid(xgrid, dens.values, dens.tail, deriv)
    x = xgrid.nodes()
    p = dens.values
    good = p > max(score_cutoff * np.max(p), DENSITY_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = deriv / p
        logp = np.log(p)
    score = np.where(good, ratio, asymptotic_score(law, x))
    if law.gaussian:
        far = -(x - law.a) ** 2 / (4.0 * law.c) - 0.5 * np.log(4.0 * np.pi * law.c)
    else:
        with np.errstate(divide="ignore"):
            far = np.log(np.maximum(dens.tail.evaluate(x), DENSITY_FLOOR))
    exact = p > LOG_CUTOFF * np.max(p)
    logd = np.where(exact, logp, far)
    return StableDensity(law, dens, deriv, score, logd)


def stable_score_at(sd: StableDensity, x):
    """Score by linear interpolation; asymptotic score outside the window."""
    xa = np.asarray(x, dtype=float)
    g = sd.grid
    inside = (xa >= g.x_lo) & (xa <= g.x_hi)
    out = np.where(inside, np.interp(xa, g.nodes(), sd.score), asymptotic_score(sd.law, xa))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ScoreBounds:
    """Constants with ``c1/(1+|x|) <= |score| <= c2/(1+|x|)``.

    ``c2`` is taken over the whole window, ``c1`` only over ``|x| >= x_min``
    because the score vanishes at the mode.
    """

    c1: float
    c2: float
    x_min: float

    @property
    def c_of_z(self) -> float:
        return 2.0 * self.c2 ** 2


def score_bounds(sd: StableDensity, x_min: float = 5.0) -> ScoreBounds:
    if not sd.law.non_extremal:
        raise ExtremalLaw("score bounds need a non-extremal law")
    x = sd.grid.nodes()
    r = np.abs(sd.score) * (1.0 + np.abs(x))
    far = np.abs(x - sd.law.a) >= x_min
    return ScoreBounds(float(np.min(r[far])), float(np.max(r)), x_min)
