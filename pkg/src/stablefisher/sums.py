"""Sources, normalizing sequences and densities of normalized sums.

The density of ``Z_n = (X_1 + ... + X_n)/b_n - a_n`` is obtained by
inverting ``exp(-i t a_n) * f1(t/b_n)**n``, where ``f1`` is the
characteristic function of one summand.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import least_squares
from scipy.special import beta as beta_fn, stdtr, zeta

from .errors import FitFailed, GridMismatch, StableFisherError
from .grid import (CharFnGrid, DensityGrid, Grid, TailModel, charfn_to_density,
                   charfn_to_density_derivative, charfn_values, frequency_grid,
                   probe_frequencies, quadrature, resample, trapezoid_weights)
from ._special import power_tail_fourier
from .info import InequalityReport, fisher, relative_entropy, relative_fisher
from .stable import (BAND_LEVEL, OVERSAMPLE, StableDensity, StableLaw, default_grid,
                     stable_density)
from .tolerances import DEFAULT_TOLERANCES

KINDS = ("gaussian", "cauchy", "stable", "student_t", "custom")
WIDE_HALF_WIDTH = 4096.0   # window of the numerically transformed sources
WIDE_COUNT = 2 ** 17


@dataclass(frozen=True, eq=False)
class SourceModel:
    """Distribution of one summand.

    Use the constructors ``gaussian``, ``cauchy``, ``exact_stable``,
    ``student_t`` and ``custom`` rather than the raw fields.
    """

    kind: str
    law: StableLaw | None = None
    alpha: float | None = None
    density: DensityGrid | None = None
    mean: float = 0.0
    scale: float = 1.0
    symmetric: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown source kind {self.kind!r}")

    @classmethod
    def gaussian(cls, mean: float = 0.0, variance: float = 1.0) -> "SourceModel":
        if variance <= 0:
            raise ValueError("variance must be positive")
        return cls("gaussian", mean=mean, scale=np.sqrt(variance), symmetric=mean == 0)

    @classmethod
    def cauchy(cls, scale: float = 1.0) -> "SourceModel":
        if scale <= 0:
            raise ValueError("scale must be positive")
        return cls("cauchy", scale=scale)

    @classmethod
    def exact_stable(cls, law: StableLaw) -> "SourceModel":
        return cls("stable", law=law, symmetric=law.beta == 0 and law.a == 0)

    @classmethod
    def student_t(cls, alpha: float) -> "SourceModel":
        """Student-t with ``alpha`` degrees of freedom (tails ``|x|**-(1+alpha)``)."""
        if alpha <= 0:
            raise ValueError("degrees of freedom must be positive")
        return cls("student_t", alpha=float(alpha))

    @classmethod
    def custom(cls, density: DensityGrid, alpha: float, symmetric: bool = True) -> "SourceModel":
        density.check()
        return cls("custom", alpha=float(alpha), density=density, symmetric=symmetric)

    @property
    def known_alpha(self) -> float:
        if self.kind == "gaussian":
            return 2.0
        if self.kind == "cauchy":
            return 1.0
        if self.kind == "stable":
            return self.law.alpha
        return min(self.alpha, 2.0)

    @property
    def location(self) -> float:
        """Per-summand shift removed by the centering ``a_n``."""
        if self.kind == "gaussian":
            return self.mean
        if self.kind == "stable":
            return self.law.a
        return 0.0

    def label(self) -> str:
        if self.kind == "gaussian":
            return f"gaussian(mean={self.mean:g},variance={self.scale ** 2:g})"
        if self.kind == "cauchy":
            return f"cauchy(scale={self.scale:g})"
        if self.kind == "stable":
            return f"stable({self.law.to_fields()})"
        if self.kind == "student_t":
            return f"student_t({self.alpha:g})"
        return f"custom(alpha={self.alpha:g})"


def student_t_constant(nu: float) -> float:
    """Normalizer ``C`` of ``C*(1 + x^2/nu)**(-(nu+1)/2)``."""
    return 1.0 / (np.sqrt(nu) * beta_fn(0.5, 0.5 * nu))


def _student_values(nu: float, x):
    c = student_t_constant(nu)
    p = c * (1.0 + x * x / nu) ** (-(nu + 1.0) / 2.0)
    return p, -(nu + 1.0) * x / (nu + x * x) * p


def _mass_tail(alpha: float, sf, grid: Grid) -> TailModel:
    # constant per side such that c x^-(1+alpha) carries the exact mass beyond the edge
    left, right = -grid.x_lo, grid.x_hi
    return TailModel(alpha, alpha * left ** alpha * sf(left), alpha * right ** alpha * sf(right),
                     True)


def source_density(s: SourceModel, xgrid: Grid | None = None) -> DensityGrid:
    """Density of one summand with its derivative and tail model.

    For Cauchy and Student-t sources each tail constant is set so that the
    power tail carries the exact mass beyond that window edge.
    """
    xgrid = xgrid or default_grid(s.known_alpha)
    x = xgrid.nodes()
    if s.kind == "gaussian":
        z = (x - s.mean) / s.scale
        p = np.exp(-0.5 * z * z) / (s.scale * np.sqrt(2.0 * np.pi))
        return DensityGrid(xgrid, p, TailModel(), -z / s.scale * p)
    if s.kind == "cauchy":
        g = s.scale
        p = g / (np.pi * (g * g + x * x))
        tail = _mass_tail(1.0, lambda e: np.arctan(g / e) / np.pi, xgrid)
        return DensityGrid(xgrid, p, tail, -2.0 * x / (g * g + x * x) * p)
    if s.kind == "stable":
        return stable_density(s.law, xgrid).density
    if s.kind == "student_t":
        nu = s.alpha
        p, dp = _student_values(nu, x)
        tail = TailModel() if nu >= 2 else _mass_tail(nu, lambda e: stdtr(nu, -e), xgrid)
        return DensityGrid(xgrid, p, tail, dp)
    d = s.density
    return d if d.grid.same_as(xgrid) else resample(d, xgrid)


@lru_cache(maxsize=8)
def _wide_student(nu: float) -> DensityGrid:
    return source_density(SourceModel.student_t(nu), Grid.symmetric(WIDE_HALF_WIDTH, WIDE_COUNT))


def _numeric_density(s: SourceModel) -> DensityGrid | None:
    if s.kind == "student_t":
        return _wide_student(s.alpha)
    if s.kind == "custom":
        return s.density
    return None


def _closed_charfn(s: SourceModel, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if s.kind == "gaussian":
        return np.exp(1j * s.mean * t - 0.5 * (s.scale * t) ** 2)
    if s.kind == "cauchy":
        return np.exp(-s.scale * np.abs(t))
    return s.law.charfn(t)


def source_charfn(s: SourceModel, t) -> np.ndarray:
    """``f1(t)`` at arbitrary points (direct sums for numerical sources)."""
    d = _numeric_density(s)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if d is None:
        return _closed_charfn(s, t)
    if np.max(np.abs(t)) > d.grid.nyquist:
        raise GridMismatch("frequency beyond the Nyquist band of the source grid")
    w = trapezoid_weights(d.grid.count) * d.values * d.grid.dx
    x = d.x
    out = np.empty(t.size, dtype=complex)
    for i in range(0, t.size, 16):
        tt = t[i:i + 16, None]
        out[i:i + 16] = np.exp(1j * tt * x[None, :]) @ w
    for sign, c, edge in d.tail.sides(d.grid):
        out += c * power_tail_fourier(sign * t, edge, d.tail.nu)
    return out


def source_charfn_grid(s: SourceModel, t0: float, dt: float, m: int) -> np.ndarray:
    """``f1`` at ``t0 + k*dt`` for ``k < m``."""
    d = _numeric_density(s)
    if d is None:
        return _closed_charfn(s, t0 + dt * np.arange(m))
    return charfn_values(d, t0, dt, m)


@dataclass(frozen=True)
class NormalizingSeq:
    """``b_n = (h n)**(1/alpha)`` and ``a_n = n * location / b_n``.

    ``limit`` is the stable law the normalized sums approach; ``fit``
    holds calibration diagnostics.
    """

    alpha: float
    limit: StableLaw
    h: float = 1.0
    location: float = 0.0
    fit: dict = field(default_factory=dict, compare=False)

    def b(self, n: int) -> float:
        return (self.h * n) ** (1.0 / self.alpha)

    def a(self, n: int) -> float:
        return n * self.location / self.b(n)

    scale_rule = b
    center_rule = a


def _design(t, exponents):
    exps = []
    for e in exponents:
        if all(abs(e - f) > 1e-9 for f in exps):
            exps.append(e)
    return np.column_stack([t ** e for e in exps])


def calibrate_limit(s: SourceModel, t_range=(1e-3, 1e-1), points: int = 64,
                    tolerances: dict | None = None) -> tuple[StableLaw, NormalizingSeq]:
    """Fit the index and scale of the limiting stable law from ``-log|f1(t)|`` at small ``t``.

    A log-log regression gives a first estimate and its residual decides
    whether the source is in scope. A least-squares fit with correction
    terms ``t^2`` and ``t^(2 alpha)`` refines the index; within
    ``alpha_snap`` of the known tail exponent the exact exponent is used.
    The scale is then refitted with the index fixed.
    """
    tol = dict(DEFAULT_TOLERANCES, **(tolerances or {}))
    if s.known_alpha == 1 and s.kind == "stable" and s.law.beta != 0:
        raise ValueError("alpha = 1 with beta != 0 needs a drifting centering")
    if s.kind == "custom" and not s.symmetric:
        raise ValueError("asymmetric custom sources are not supported")
    t = np.geomspace(t_range[0], t_range[1], points)
    with np.errstate(divide="ignore"):
        y = -np.log(np.abs(source_charfn(s, t)))
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise FitFailed("-log|f1| is not positive on the calibration window")
    a = np.column_stack([np.ones_like(t), np.log(t)])
    coef, *_ = np.linalg.lstsq(a, np.log(y), rcond=None)
    resid = float(np.sqrt(np.mean((a @ coef - np.log(y)) ** 2)))
    if resid > tol["fit_residual"]:
        raise FitFailed(f"log-log residual {resid:.3g} exceeds {tol['fit_residual']}")

    def rel(p):
        c, al, e, g = p
        return (c * t ** al + e * t ** 2 + g * t ** (2 * al)) / y - 1.0

    sol = least_squares(rel, [np.exp(coef[0]), float(np.clip(coef[1], 0.06, 1.99)), 0.0, 0.0],
                        bounds=([0, 0.05, -np.inf, -np.inf], [np.inf, 2.0, np.inf, np.inf]))
    alpha_hat = float(sol.x[1])
    alpha = alpha_hat
    if abs(alpha_hat - s.known_alpha) <= tol["alpha_snap"]:
        alpha = s.known_alpha
    cols = _design(t, [alpha, 2.0, 2 * alpha, alpha + 2.0])
    cc, *_ = np.linalg.lstsq(cols / y[:, None], np.ones_like(t), rcond=None)
    c = float(cc[0])
    if not c > 0:
        raise FitFailed("fitted scale is not positive")
    beta = s.law.beta if s.kind == "stable" else 0.0
    law = StableLaw(alpha, beta, c, 0.0)
    norm = NormalizingSeq(alpha, law, 1.0, s.location,
                          fit={"alpha_loglog": float(coef[1]), "alpha_refined": alpha_hat,
                               "residual": resid, "scale": c})
    return law, norm


def _decay_band(modulus, probe, level):
    # smallest probe beyond which the modulus stays below level (or near its floor)
    env = np.maximum.accumulate(modulus[::-1])[::-1]
    floor = env[-max(1, probe.size // 10)]
    below = np.nonzero(env < max(level, 100.0 * floor))[0]
    if below.size == 0:
        return float(probe[-1])
    return float(probe[min(below[0] + 1, probe.size - 1)])


def zn_frequency_grid(s: SourceModel, n: int, norm: NormalizingSeq, xgrid: Grid,
                      level: float = BAND_LEVEL) -> Grid:
    """Frequency grid for the inversion of ``f_n`` onto ``xgrid``."""
    width = xgrid.x_hi - xgrid.x_lo
    reach = 2.0 * max(abs(xgrid.x_lo), abs(xgrid.x_hi))
    dt = 2.0 * np.pi / (OVERSAMPLE * max(width, reach))
    b = norm.b(n)
    d = _numeric_density(s)
    if d is None:
        if s.kind == "stable":
            law = s.law
        elif s.kind == "cauchy":
            law = StableLaw(1.0, 0.0, s.scale, 0.0)
        else:
            law = StableLaw(2.0, 0.0, 0.5 * s.scale ** 2, 0.0)
        # |f1(t/b)|^n = exp(-n c |t/b|^alpha) exactly
        band = law.band(level) * b / (n ** (1.0 / law.alpha))
        return frequency_grid(band, dt)
    probe = probe_frequencies(d.grid.nyquist, 512)
    mod = np.abs(charfn_values(d, probe[0], probe[1] - probe[0], probe.size))
    with np.errstate(divide="ignore"):
        modn = np.exp(n * np.log(mod))
    band = _decay_band(modn, probe, level) * b
    return frequency_grid(band, dt, limit=b * d.grid.nyquist)


def zn_charfn(s: SourceModel, n: int, norm: NormalizingSeq, tgrid: Grid) -> CharFnGrid:
    """``exp(-i t a_n) f1(t/b_n)**n`` on ``tgrid``."""
    b = norm.b(n)
    f1 = source_charfn_grid(s, tgrid.x_lo / b, tgrid.dx / b, tgrid.count)
    t = tgrid.nodes()
    return CharFnGrid(tgrid, np.exp(-1j * t * norm.a(n)) * f1 ** n)


def zn_density(s: SourceModel, n: int, norm: NormalizingSeq, xgrid: Grid | None = None,
               workers: int | None = None) -> DensityGrid:
    """Density and derivative of the normalized sum ``Z_n`` on ``xgrid``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    xgrid = xgrid or default_grid(norm.alpha)
    f = zn_charfn(s, n, norm, zn_frequency_grid(s, n, norm, xgrid))
    alpha = norm.alpha if norm.alpha < 2 else None
    dens = charfn_to_density(f, xgrid, tail_alpha=alpha, workers=workers)
    deriv = charfn_to_density_derivative(f, xgrid, dens.tail, workers=workers)
    return DensityGrid(xgrid, dens.values, dens.tail, deriv)


def local_limit_metrics(p_n: DensityGrid, sd: StableDensity) -> tuple[float, float]:
    """Largest gaps between ``p_n`` and ``psi`` and between their derivatives."""
    if not p_n.grid.same_as(sd.grid):
        raise GridMismatch("density and limit live on different grids")
    return (float(np.max(np.abs(p_n.values - sd.values))),
            float(np.max(np.abs(p_n.slope() - sd.derivative))))


ENVELOPE_EPS = tuple(2.0 ** -k for k in range(7))


def envelope_constant(modulus: np.ndarray, t: np.ndarray, delta: float, k: float = 1.0) -> float:
    """Largest ``c`` with ``|g(t)|**k <= exp(-c |t|**delta)`` at the given points."""
    with np.errstate(divide="ignore"):
        r = -k * np.log(modulus) / np.abs(t) ** delta
    return float(np.min(r))


def charfn_envelope_check(s: SourceModel, ns, norm: NormalizingSeq, delta: float,
                          points: int = 512) -> InequalityReport:
    """Fit ``|f_n(t)| <= exp(-c |t|^delta)`` on ``1 <= |t| <= eps b_n``.

    ``eps`` is the largest value in ``1, 1/2, ..., 1/64`` for which the
    fitted ``c`` is positive for every ``n``. The report's ``lhs`` is 0 and
    its ``rhs`` the fitted ``c``; ``witness`` holds ``eps``.
    """
    if not 0 < delta < norm.alpha:
        raise ValueError("delta must lie in (0, alpha)")
    ns = [ns] if np.isscalar(ns) else list(ns)
    best = None
    for eps in ENVELOPE_EPS:
        cs = []
        for n in ns:
            b = norm.b(n)
            hi = eps * b
            if hi <= 1.0:
                cs.append(np.inf)
                continue
            dt = (hi - 1.0) / (points - 1)
            t = 1.0 + dt * np.arange(points)
            f1 = source_charfn_grid(s, 1.0 / b, dt / b, points)
            cs.append(envelope_constant(np.abs(f1), t, delta, k=n))
        c = float(np.min(cs))
        if np.isfinite(c) and c > 0:
            best = (eps, c)
            break
    if best is None:
        return InequalityReport("charfn_envelope", 0.0, float("nan"), False, float("nan"))
    eps, c = best
    return InequalityReport("charfn_envelope", 0.0, c, True, c, witness=eps)


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    fisher: float
    rel_fisher: float
    rel_entropy: float
    sup_density_gap: float
    sup_deriv_gap: float
    moment_delta: float
    error: str | None = None

    def row(self) -> list[str]:
        vals = [self.fisher, self.rel_fisher, self.rel_entropy, self.sup_density_gap,
                self.sup_deriv_gap, self.moment_delta]
        return [str(self.n)] + [f"{v:.17g}" for v in vals]


ROW_HEADER = ["n", "fisher", "rel_fisher", "rel_entropy", "sup_gap", "sup_deriv_gap", "moment"]


def write_rows(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROW_HEADER)
        for r in rows:
            w.writerow(r.row())


def absolute_moment(d: DensityGrid, power: float) -> float:
    """``E|X|**power`` with the tail handled in closed form.

    When 0 is a node the trapezoid error of the ``|x|**power`` cusp,
    ``2 zeta(-power) h**(1+power) p(0)``, is removed.
    """
    m = quadrature(d, lambda x, p: np.abs(x) ** power * p)
    i = d.grid.index_of(0.0)
    on_node = 0 <= i < d.grid.count and abs(d.grid.x_lo + i * d.grid.dx) < 1e-9 * d.grid.dx
    if 0 < power < 2 and on_node:
        m -= 2.0 * zeta(-power) * d.grid.dx ** (1.0 + power) * d.values[i]
    return float(m)


def _row(s, n, norm, sd, xgrid) -> ConvergenceRow:
    try:
        p = zn_density(s, n, norm, xgrid)
        gap, dgap = local_limit_metrics(p, sd)
        return ConvergenceRow(n, fisher(p), relative_fisher(p, sd), relative_entropy(p, sd),
                              gap, dgap, absolute_moment(p, norm.alpha / 2.0))
    except StableFisherError as exc:
        nan = float("nan")
        return ConvergenceRow(n, nan, nan, nan, nan, nan, nan, f"{type(exc).__name__}: {exc}")


def convergence_experiment(s: SourceModel, ns, cfg: dict | None = None,
                           threads: int = 1) -> list[ConvergenceRow]:
    """Information distances of ``Z_n`` to the calibrated limit for each ``n``.

    ``cfg`` may carry ``grid`` (a Grid), ``law`` and ``norm`` (to skip the
    calibration) and ``tolerances``. Rows that fail carry the error text
    and NaN values instead of aborting the run.
    """
    cfg = cfg or {}
    ns = list(ns)
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("ns must be strictly increasing")
    if "norm" in cfg:
        norm = cfg["norm"]
    else:
        _, norm = calibrate_limit(s, tolerances=cfg.get("tolerances"))
    xgrid = cfg.get("grid") or default_grid(norm.alpha)
    sd = stable_density(norm.limit, xgrid)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(lambda n: _row(s, n, norm, sd, xgrid), ns))
    return [_row(s, n, norm, sd, xgrid) for n in ns]
