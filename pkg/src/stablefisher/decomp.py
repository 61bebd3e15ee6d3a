"""Truncation of summands at ``b_n`` and the binomial decomposition of ``Z_n``.

Each summand ``X/b_n`` is split into a part confined to ``[-1, 1]``
(density ``p_tilde``, weight ``1 - delta_n``) and the rest (``q_tilde``,
weight ``delta_n``). Convolution powers then expand binomially. The
functions here check numerically the bounds used to control that
expansion: derivative and envelope bounds for the truncated
characteristic function, integrability of its powers, and boundedness of
the Fisher information of ``Z_n``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import binom

from .grid import (CharFnGrid, DensityGrid, Grid, TailModel, charfn_to_density,
                   charfn_to_density_derivative, charfn_values, frequency_grid,
                   next_pow2, probe_frequencies, shifted, trapezoid_weights)
from .info import InequalityReport, fisher
from .stable import OVERSAMPLE, default_grid
from .sums import (ENVELOPE_EPS, NormalizingSeq, SourceModel, _decay_band, calibrate_limit,
                   envelope_constant, source_density, zn_density)

SOURCE_COUNT = 2 ** 17
PSI_DT = np.pi / 32
PSI_REACH = 16.0        # psi_n is tabulated for |t| <= PSI_REACH * b_n
DROP_WEIGHT = 1e-12
BOUNDED_RATIO = 4.0


@dataclass(frozen=True, eq=False)
class Truncation:
    """Split of one normalized summand at ``|x| = 1`` (i.e. ``|X| = b_n``).

    ``p_tilde`` and ``q_tilde`` live on the grid ``x / b_n``; ``psi_n`` is
    the characteristic function of ``p_tilde`` recentered by its mean
    ``d_n`` and ``psi_n_prime`` its derivative on the same frequencies.
    """

    n: int
    b_n: float
    delta_n: float
    d_n: float
    p_tilde: DensityGrid
    q_tilde: DensityGrid
    psi_n: CharFnGrid
    psi_n_prime: np.ndarray
    source: SourceModel
    norm: NormalizingSeq

    @property
    def alpha(self) -> float:
        return self.norm.alpha


def source_grid(b: float, count: int = SOURCE_COUNT) -> tuple[Grid, int]:
    """Grid with spacing ``b/m`` in ``(1/32, 1/16]`` so that ``+-b`` are nodes; returns ``(grid, m)``."""
    m = next_pow2(int(np.ceil(16.0 * b)))
    h = b / m
    return Grid(-(count // 2) * h, h, count), m


def truncate(s: SourceModel, n: int, norm: NormalizingSeq) -> Truncation:
    """Build the truncated and complementary densities for ``Z_n``.

    ``delta_n`` is the mass beyond ``b_n``: trapezoid sum plus the tail
    model, with the end correction at ``+-b_n``. The nodes at ``+-b_n``
    are shared between the parts, roughly half each, the split absorbing
    that correction.
    """
    b = norm.b(n)
    grid, m = source_grid(b)
    p = source_density(s, grid)
    i_lo, i_hi = grid.count // 2 - m, grid.count // 2 + m
    w = trapezoid_weights(grid.count) * grid.dx
    slope = p.slope()
    end = grid.dx ** 2 / 12.0 * (slope[i_hi] - slope[i_lo])
    # share of the boundary nodes given to the inner part, so that the
    # trapezoid sums of both parts carry the end-corrected masses
    theta = 0.5 - end / (grid.dx * (p.values[i_lo] + p.values[i_hi]))
    inner = np.zeros(grid.count)
    inner[i_lo + 1:i_hi] = 1.0
    inner[[i_lo, i_hi]] = theta
    outer = 1.0 - inner
    delta = float(np.sum(w * outer * p.values) + p.tail_mass())
    if not 0 < delta < 1:
        raise ValueError(f"outer mass {delta} is not in (0, 1)")
    y = Grid(grid.x_lo / b, grid.dx / b, grid.count)
    pt = DensityGrid(y, b * p.values * inner / (1.0 - delta), TailModel())
    tail = p.tail.scaled(b)
    tail = replace(tail, c_left=tail.c_left / delta, c_right=tail.c_right / delta)
    qt = DensityGrid(y, b * p.values * outer / delta, tail)
    d = pt.mean()
    r = shifted(pt, -d)
    tg = frequency_grid(min(PSI_REACH * b, y.nyquist), PSI_DT, limit=y.nyquist)
    f = charfn_values(r, tg.x_lo, tg.dx, tg.count)
    # derivative of the characteristic function: transform of (i x) r(x)
    fp = 1j * charfn_values(r.with_values(r.x * r.values), tg.x_lo, tg.dx, tg.count)
    return Truncation(n, b, delta, d, pt, qt, CharFnGrid(tg, f), fp, s, norm)


def _as_list(tr):
    return [tr] if isinstance(tr, Truncation) else list(tr)


def _bounded(name: str, values) -> InequalityReport:
    v = np.asarray(values, dtype=float)
    if v.size == 0 or not np.all(np.isfinite(v)) or np.min(v) <= 0:
        return InequalityReport(name, float("inf"), BOUNDED_RATIO, False, float("nan"))
    ratio = float(np.max(v) / np.min(v))
    return InequalityReport(name, ratio, BOUNDED_RATIO, ratio < BOUNDED_RATIO,
                            BOUNDED_RATIO - ratio, witness=float(np.max(v)))


def derivative_bound_constant(tr: Truncation) -> float:
    """``n * sup_{t != 0} |psi_n'(t)| / |t|`` over the tabulated frequencies."""
    t = tr.psi_n.t
    nz = t != 0
    return float(tr.n * np.max(np.abs(tr.psi_n_prime[nz]) / np.abs(t[nz])))


def verify_lemma71(tr) -> InequalityReport:
    """``|psi_n'(t)| <= C |t| / n`` with ``C`` bounded across the given truncations.

    ``lhs`` is the max/min ratio of the fitted constants; ``witness`` the
    largest constant.
    """
    return _bounded("derivative_bound", [derivative_bound_constant(t) for t in _as_list(tr)])


@dataclass(frozen=True)
class EnvelopeFit:
    """``|psi|^k <= C exp(-c |t|^delta)`` on ``|t| <= eps b_n``."""

    c: float
    C: float
    eps: float


def fit_envelope(tr: Truncation, k: float, delta: float, eps: float | None = None) -> EnvelopeFit:
    """Fit ``c`` on ``1 <= |t| <= eps b_n`` and then ``C`` on ``|t| <= eps b_n``.

    Without ``eps`` the largest of ``1, 1/2, ..., 1/64`` giving ``c > 0`` is used.
    """
    t = tr.psi_n.t
    mod = np.abs(tr.psi_n.values)
    choices = ENVELOPE_EPS if eps is None else (eps,)
    c, e = float("nan"), choices[-1]
    for e in choices:
        sel = (np.abs(t) >= 1.0) & (np.abs(t) <= e * tr.b_n)
        if not np.any(sel):
            continue
        c = envelope_constant(mod[sel], t[sel], delta, k)
        if c > 0:
            break
    near = np.abs(t) <= e * tr.b_n
    with np.errstate(divide="ignore", over="ignore"):
        big = np.max(np.exp(k * np.log(mod[near]) + c * np.abs(t[near]) ** delta))
    return EnvelopeFit(c, float(big), e)


def verify_lemma72(tr, k, delta: float, eta: float, eps: float | None = None) -> InequalityReport:
    """Envelope ``|psi_n(t)|^k <= C exp(-c|t|^delta)`` on ``|t| <= eps b_n`` with ``c > 0``.

    ``tr`` may be one truncation or several; ``k`` is an integer or a
    function of ``n``. ``rhs`` is the smallest fitted ``c`` and ``witness``
    the largest ``C``.
    """
    trs = _as_list(tr)
    if not 0 < delta < trs[0].alpha:
        raise ValueError("delta must lie in (0, alpha)")
    fits = []
    for t in trs:
        kk = k(t.n) if callable(k) else k
        if kk < eta * t.n:
            raise ValueError(f"k = {kk} is below eta*n = {eta * t.n}")
        fits.append(fit_envelope(t, kk, delta, eps))
    c = min(f.c for f in fits)
    big = max(f.C for f in fits)
    ok = bool(np.isfinite(c) and c > 0 and np.isfinite(big))
    return InequalityReport("envelope_bound", 0.0, c, ok, c, witness=big)


def power_integrals(tr: Truncation, k: int) -> tuple[float, float]:
    """``int (1+|t|) |psi^k| dt`` and ``int t^2 |(psi^k)'|^2 dt`` on the grid."""
    if k < 4:
        raise ValueError("k must be at least 4")
    t = tr.psi_n.t
    psi = tr.psi_n.values
    w = trapezoid_weights(t.size) * tr.psi_n.grid.dx
    a = float(np.sum(w * (1.0 + np.abs(t)) * np.abs(psi) ** k))
    dk = k * tr.psi_n_prime * psi ** (k - 1)
    b = float(np.sum(w * t * t * np.abs(dk) ** 2))
    return a, b


def verify_cor73(tr, k) -> list[InequalityReport]:
    """Both power integrals finite and bounded across the given truncations."""
    vals = [power_integrals(t, k(t.n) if callable(k) else k) for t in _as_list(tr)]
    return [_bounded("power_integral", [v[0] for v in vals]),
            _bounded("power_derivative_integral", [v[1] for v in vals])]


@dataclass(frozen=True, eq=False)
class BinomialTerms:
    ks: list
    weights: list
    charfns: list
    xgrid: Grid


def binomial_weights(n: int, delta: float, drop: float = DROP_WEIGHT):
    """``(k, C(n,k)(1-delta)^k delta^(n-k))`` for weights of at least ``drop``."""
    k = np.arange(n + 1)
    w = binom.pmf(k, n, 1.0 - delta)
    keep = w >= drop
    return k[keep], w[keep]


def binomial_terms(tr: Truncation, k_max_terms: int = 64, drop: float = DROP_WEIGHT,
                   xgrid: Grid | None = None, level: float = 1e-18) -> BinomialTerms:
    """Characteristic functions ``f^k g^(n-k)`` of the retained terms."""
    ks, ws = binomial_weights(tr.n, tr.delta_n, drop)
    if ks.size > k_max_terms:
        raise ValueError(f"{ks.size} terms exceed k_max_terms = {k_max_terms}")
    xgrid = xgrid or default_grid(tr.alpha)
    y = tr.p_tilde.grid
    width = xgrid.x_hi - xgrid.x_lo
    reach = 2.0 * max(abs(xgrid.x_lo), abs(xgrid.x_hi))
    dt = 2.0 * np.pi / (OVERSAMPLE * max(width, reach))
    probe = probe_frequencies(y.nyquist, 4096)
    step = probe[1] - probe[0]
    mod = np.maximum(np.abs(charfn_values(tr.p_tilde, probe[0], step, probe.size)),
                     np.abs(charfn_values(tr.q_tilde, probe[0], step, probe.size)))
    with np.errstate(divide="ignore"):
        band = _decay_band(np.exp(tr.n * np.log(mod)), probe, level)
    tg = frequency_grid(band, dt, limit=y.nyquist)
    f = charfn_values(tr.p_tilde, tg.x_lo, tg.dx, tg.count)
    g = charfn_values(tr.q_tilde, tg.x_lo, tg.dx, tg.count)
    cf = [CharFnGrid(tg, f ** int(k) * g ** int(tr.n - k)) for k in ks]
    return BinomialTerms(list(ks), list(ws), cf, xgrid)


def _term_density(tr: Truncation, k: int, f: CharFnGrid, xgrid: Grid,
                  derivative: bool = False) -> DensityGrid:
    alpha = tr.alpha if (k < tr.n and tr.alpha < 2) else None
    d = charfn_to_density(f, xgrid, tail_alpha=alpha)
    if not derivative:
        return d
    return d.with_values(d.values, charfn_to_density_derivative(f, xgrid, d.tail))


def binomial_reconstruction(tr: Truncation, k_max_terms: int = 64, drop: float = DROP_WEIGHT,
                            xgrid: Grid | None = None):
    """Terms ``p_tilde^{k*} * q_tilde^{(n-k)*}``, their weights and the L1 gap.

    The gap compares the weighted sum of the terms with the uncentered
    ``Z_n`` density on the common grid.
    """
    bt = binomial_terms(tr, k_max_terms, drop, xgrid)
    terms = [_term_density(tr, k, f, bt.xgrid) for k, f in zip(bt.ks, bt.charfns)]
    total = np.zeros(bt.xgrid.count)
    for w, d in zip(bt.weights, terms):
        total += w * d.values
    ref = zn_density(tr.source, tr.n, replace(tr.norm, location=0.0), bt.xgrid)
    wq = trapezoid_weights(bt.xgrid.count) * bt.xgrid.dx
    err = float(np.sum(wq * np.abs(total - ref.values)))
    return terms, list(bt.weights), err


def small_k_weight(tr: Truncation, eta: float = 0.5) -> float:
    """Bound ``2^n delta_n^((1-eta) n)`` on the total weight of terms with ``k < eta n``."""
    return float(np.exp(tr.n * np.log(2.0) + (1.0 - eta) * tr.n * np.log(tr.delta_n)))


def large_k_fisher_bound(tr: Truncation, eta: float = 0.5, k_max_terms: int = 64) -> float:
    """Convexity bound: weighted mean of ``I`` over the retained terms with ``k >= eta n``."""
    bt = binomial_terms(tr, k_max_terms)
    num = den = 0.0
    for k, w, f in zip(bt.ks, bt.weights, bt.charfns):
        if k < eta * tr.n:
            continue
        num += w * fisher(_term_density(tr, k, f, bt.xgrid, derivative=True))
        den += w
    return num / den


def fisher_boundedness_witness(s: SourceModel, ns, norm: NormalizingSeq | None = None,
                               eta: float = 0.5) -> InequalityReport:
    """``I(Z_n)`` bounded across ``ns`` and negligible small-k weight at the largest ``n``.

    ``lhs`` is the max/min ratio of ``I(Z_n)`` and ``witness`` the small-k
    weight bound at the largest ``n``.
    """
    if norm is None:
        _, norm = calibrate_limit(s)
    ns = sorted(ns)
    infos = [fisher(zn_density(s, n, norm)) for n in ns]
    weight = small_k_weight(truncate(s, ns[-1], norm), eta)
    rep = _bounded("fisher_boundedness", infos)
    ok = rep.satisfied and weight < 1e-6
    return replace(rep, satisfied=ok, witness=weight)


def mass_law_report(trs, spread: float = 0.25) -> InequalityReport:
    """``n delta_n`` within ``spread`` of its mean across the truncations."""
    v = np.array([t.n * t.delta_n for t in _as_list(trs)])
    dev = float(np.max(np.abs(v / np.mean(v) - 1.0)))
    return InequalityReport.check("truncation_mass_law", dev, spread, witness=float(np.mean(v)))


def witness_suite(s: SourceModel, ns=(8, 16, 32, 64), norm: NormalizingSeq | None = None,
                  delta: float | None = None, eta: float = 0.5,
                  reconstruction_tol: float = 1e-5) -> list[InequalityReport]:
    """All truncation witnesses for a heavy-tailed source, ``k = n`` and ``delta = alpha/2`` by default."""
    if norm is None:
        _, norm = calibrate_limit(s)
    if norm.alpha >= 2:
        raise ValueError("truncation witnesses need a heavy-tailed source")
    delta = norm.alpha / 2.0 if delta is None else delta
    ns = sorted(ns)
    trs = [truncate(s, n, norm) for n in ns]
    out = [verify_lemma71(trs), verify_lemma72(trs, lambda n: n, delta, eta)]
    out += verify_cor73(trs, lambda n: n)
    out.append(mass_law_report([t for t in trs if t.n >= 16] or trs))
    _, _, err = binomial_reconstruction(trs[0])
    out.append(InequalityReport.check("binomial_reconstruction", err, reconstruction_tol,
                                      witness=float(trs[0].n)))
    out.append(fisher_boundedness_witness(s, ns, norm, eta))
    return out
