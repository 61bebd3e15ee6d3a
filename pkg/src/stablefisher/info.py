"""Fisher information, relative Fisher information, relative entropy and
numerical checks of the inequalities that relate them."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, NotIntegrable
from .grid import (CharFnGrid, DensityGrid, Grid, TailModel, charfn_to_density,
                   charfn_to_density_derivative, charfn_values, combined_tail, convolve,
                   finite_difference, next_pow2, power_log_integral, spectral_product,
                   tv_norm)
from .stable import StableDensity, score_bounds
from .tolerances import DEFAULT_TOLERANCES, DENSITY_FLOOR

TOL_INEQ = DEFAULT_TOLERANCES["tol_ineq"]
TOL_INEQ_ABS = DEFAULT_TOLERANCES["tol_ineq_abs"]
NOISE_FLOOR = 1e-14  # densities below this share of the peak are treated as zero


@dataclass(frozen=True)
class InequalityReport:
    """``lhs <= rhs`` checked with a relative and an absolute slack."""

    name: str
    lhs: float
    rhs: float
    satisfied: bool
    margin: float
    witness: float | None = None
    vacuous: bool = False

    @classmethod
    def check(cls, name: str, lhs: float, rhs: float, witness: float | None = None,
              vacuous: bool = False, tol: float = TOL_INEQ,
              tol_abs: float = TOL_INEQ_ABS) -> "InequalityReport":
        lhs, rhs = float(lhs), float(rhs)
        if np.isinf(lhs) and np.isinf(rhs) and lhs > 0 and rhs > 0:
            ok = True
        elif np.isnan(lhs) or np.isnan(rhs):
            ok = False
        else:
            scale = max(abs(lhs), abs(rhs)) if np.isfinite(max(abs(lhs), abs(rhs))) else 0.0
            ok = lhs <= rhs + tol * scale + tol_abs
        with np.errstate(invalid="ignore"):
            margin = rhs - lhs
        return cls(name, lhs, rhs, bool(ok), float(margin), witness, vacuous)

    def row(self) -> list[str]:
        return [self.name, f"{self.lhs:.17g}", f"{self.rhs:.17g}", f"{self.margin:.17g}",
                "true" if self.satisfied else "false"]


REPORT_HEADER = ["name", "lhs", "rhs", "margin", "satisfied"]


def write_reports(reports, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in reports:
            w.writerow(r.row())


def _support(p: np.ndarray, floor: float) -> np.ndarray:
    return p > max(DENSITY_FLOOR, floor * float(np.max(p)))


def _fisher_window(values: np.ndarray, slope: np.ndarray, dx: float, floor: float) -> float:
    m = _support(values, floor)
    g = np.zeros_like(values)
    g[m] = slope[m] ** 2 / values[m]
    g[0] *= 0.5
    g[-1] *= 0.5
    return float(dx * np.sum(g))


def _fisher_tail(d: DensityGrid) -> float:
    # score ~ -(1+alpha)/x in a power tail
    return sum(d.tail.nu ** 2 * power_log_integral(c, e, d.tail.nu + 2.0)
               for _, c, e in d.tail.sides(d.grid))


EDGE_EXPONENT = 1.1      # p ~ dist**g at a support edge with g <= 1 gives I = inf


def edge_exponents(values: np.ndarray, floor: float = NOISE_FLOOR, span: int = 16) -> list[float]:
    """Local powers ``g`` in ``p ~ dist**g`` next to each node where the density vanishes.

    ``g`` comes from ``p`` at ``span`` and ``2*span`` nodes inside the
    support, which keeps the bias from the unknown sub-node position of
    the edge below 5%. A node counts as an edge when it is off the support
    and the density ``2*span`` nodes further in is a million times larger.
    """
    m = _support(values, floor)
    edges = [(i, 1) for i in np.nonzero(m[1:] & ~m[:-1])[0]]
    edges += [(i, -1) for i in np.nonzero(m[:-1] & ~m[1:])[0] + 1]
    gs = []
    for i0, step in edges:
        idx = i0 + step * np.arange(1, 2 * span + 1)
        if idx.min() < 0 or idx.max() >= values.size or not np.all(m[idx]):
            continue
        if values[i0] > 1e-6 * values[idx[-1]]:
            continue
        gs.append(float(np.log2(values[idx[-1]] / values[idx[span - 1]])))
    return gs


def fisher(d: DensityGrid, floor: float = NOISE_FLOOR, detect_divergence: bool = True) -> float:
    """Fisher information ``int p'^2/p`` over the support, tails included.

    Divergence is reported as ``inf``. It is detected where the density
    vanishes like ``dist**g`` with ``g <= 1`` at a support edge, and, when
    finite differences stand in for the derivative, by a sum that grows
    like ``1/h`` against the grid coarsened by 2.
    """
    ih = _fisher_window(d.values, d.slope(), d.grid.dx, floor) + _fisher_tail(d)
    if not detect_divergence:
        return ih
    if any(g <= EDGE_EXPONENT for g in edge_exponents(d.values, floor)):
        return np.inf
    if d.derivative is None and d.grid.count >= 64:
        v = d.values[::2]
        i2 = _fisher_window(v, finite_difference(v, d.grid.dx * 2), d.grid.dx * 2,
                            floor) + _fisher_tail(d)
        if i2 > 0 and ih / i2 > 1.5:
            return np.inf
    return ih


def _require_same_grid(a: Grid, b: Grid) -> None:
    if not a.same_as(b):
        raise GridMismatch("density and stable law live on different grids")


def _tail_pairs(d: DensityGrid, sd: StableDensity):
    # (sign, c_p, edge, c_psi) for each modeled tail of p
    q = sd.density.tail
    for sign, c, edge in d.tail.sides(d.grid):
        cq = q.c_left if sign < 0 else q.c_right
        yield sign, c, edge, cq


def relative_fisher(d: DensityGrid, sd: StableDensity, floor: float = NOISE_FLOOR) -> float:
    """``int (p'/p - psi'/psi)^2 p`` with analytic tail terms.

    Infinite whenever ``I(p)`` is, since the limit score is bounded.
    """
    _require_same_grid(d.grid, sd.grid)
    if not np.isfinite(fisher(d, floor)):
        return np.inf
    p = d.values
    m = _support(p, floor)
    g = np.zeros_like(p)
    g[m] = (d.slope()[m] / p[m] - sd.score[m]) ** 2 * p[m]
    g[0] *= 0.5
    g[-1] *= 0.5
    total = float(d.grid.dx * np.sum(g))
    if not d.tail.heavy:
        return total
    q = sd.density.tail
    if not q.heavy:
        return np.inf  # polynomial tail against a Gaussian score
    diff = (d.tail.nu - q.nu) ** 2
    for _, c, edge in d.tail.sides(d.grid):
        total += diff * power_log_integral(c, edge, d.tail.nu + 2.0)
    return total


def relative_entropy(d: DensityGrid, sd: StableDensity, floor: float = NOISE_FLOOR) -> float:
    """``int p log(p/psi)`` with analytic tail terms."""
    _require_same_grid(d.grid, sd.grid)
    p = d.values
    m = _support(p, floor)
    g = np.zeros_like(p)
    g[m] = p[m] * (np.log(p[m]) - sd.log_density[m])
    g[0] *= 0.5
    g[-1] *= 0.5
    total = float(d.grid.dx * np.sum(g))
    if not d.tail.heavy:
        return total
    q = sd.density.tail
    if not q.heavy:
        return np.inf
    for _, c, edge, cq in _tail_pairs(d, sd):
        if cq <= 0:
            return np.inf
        # c x^-nu [log c - log cq + (nu_q - nu) log x]
        total += power_log_integral(c * np.log(c / cq), edge, d.tail.nu)
        total += power_log_integral(c * (q.nu - d.tail.nu), edge, d.tail.nu, 1)
    return total


def mixture(p: DensityGrid, q: DensityGrid, w: float = 0.5) -> DensityGrid:
    """Density ``w*p + (1-w)*q`` on a shared grid."""
    if not p.grid.same_as(q.grid):
        raise GridMismatch("mixture needs a shared grid")
    tail = TailModel()
    if p.tail.heavy or q.tail.heavy:
        a = p.tail if p.tail.heavy else q.tail
        b = q.tail if q.tail.heavy else p.tail
        if p.tail.heavy and q.tail.heavy and abs(a.alpha - b.alpha) > 1e-12:
            a = min(a, b, key=lambda t: t.alpha)
            tail = TailModel(a.alpha, a.c_left * (w if a is p.tail else 1 - w),
                             a.c_right * (w if a is p.tail else 1 - w), True, a.center)
        else:
            wp = w if p.tail.heavy else 0.0
            wq = (1 - w) if q.tail.heavy else 0.0
            tail = TailModel(a.alpha, wp * p.tail.c_left + wq * q.tail.c_left,
                             wp * p.tail.c_right + wq * q.tail.c_right, True, a.center)
    deriv = None
    if p.derivative is not None and q.derivative is not None:
        deriv = w * p.derivative + (1 - w) * q.derivative
    return DensityGrid(p.grid, w * p.values + (1 - w) * q.values, tail, deriv)


def information_inequalities(p: DensityGrid, q: DensityGrid,
                             tol: float = TOL_INEQ) -> list[InequalityReport]:
    """Stam, monotonicity under convolution, and convexity at weight 1/2."""
    ip, iq = fisher(p), fisher(q)
    conv = convolve(p, q)
    ipq = fisher(conv)
    vac = not (np.isfinite(ip) and np.isfinite(iq))
    out = [
        InequalityReport.check("stam", 1.0 / ip + 1.0 / iq, 1.0 / ipq, vacuous=vac, tol=tol),
        InequalityReport.check("monotonicity", ipq, min(ip, iq), vacuous=vac, tol=tol),
    ]
    if p.grid.same_as(q.grid):
        im = fisher(mixture(p, q))
        out.append(InequalityReport.check("convexity", im, 0.5 * ip + 0.5 * iq,
                                          vacuous=vac, tol=tol))
    return out


def prop22_bounds(d: DensityGrid, sd: StableDensity,
                  tol: float = TOL_INEQ) -> list[InequalityReport]:
    """Two-sided comparison of ``I(X)`` and ``I(X||Z)`` for a non-normal stable ``Z``."""
    if sd.law.gaussian:
        raise ValueError("the comparison constant exists only for non-normal stable laws")
    cz = score_bounds(sd).c_of_z
    ix = fisher(d)
    ixz = relative_fisher(d, sd)
    return [
        InequalityReport.check("relative_fisher_upper", ixz, 2 * ix + cz, tol=tol),
        InequalityReport.check("fisher_upper", ix, 2 * ixz + cz, tol=tol),
    ]


def derivative_l1(d: DensityGrid) -> float:
    """``int |p'|`` including the tails."""
    s = np.abs(d.slope())
    total = float(d.grid.dx * (np.sum(s) - 0.5 * (s[0] + s[-1])))
    for _, c, e in d.tail.sides(d.grid):
        total += power_log_integral(d.tail.nu * c, e, d.tail.nu + 1.0)
    return total


def tv_and_charfn_bounds(d: DensityGrid, points: int = 8192,
                         tol: float = TOL_INEQ) -> list[InequalityReport]:
    """``||p'||_1 <= sqrt(I)``, ``sup|t f(t)| <= ||p||_TV`` and ``max p <= sqrt(I)``."""
    i = fisher(d)
    root = np.sqrt(i)
    band = d.grid.nyquist
    dt = 2.0 * band / points
    t = -band + dt * np.arange(points)
    f = charfn_values(d, -band, dt, points)
    tf = np.abs(t * f)
    k = int(np.argmax(tf))
    tv = tv_norm(d)
    j = int(np.argmax(d.values))
    return [
        InequalityReport.check("derivative_l1", derivative_l1(d), root, tol=tol),
        InequalityReport.check("charfn_decay", tf[k], tv, witness=float(t[k]), tol=tol),
        InequalityReport.check("max_density", d.values[j], root, witness=float(d.x[j]), tol=tol),
    ]


def three_convolution_fisher(p1: DensityGrid, p2: DensityGrid, p3: DensityGrid,
                             tol: float = TOL_INEQ) -> InequalityReport:
    """``I(p1*p2*p3) <= (T1 T2 + T1 T3 + T2 T3)/2`` with ``T`` the total variations."""
    s = convolve(convolve(p1, p2), p3)
    t1, t2, t3 = tv_norm(p1), tv_norm(p2), tv_norm(p3)
    return InequalityReport.check("three_convolution", fisher(s),
                                  0.5 * (t1 * t2 + t1 * t3 + t2 * t3), tol=tol)


def tv_bound_from_charfn(f: CharFnGrid, fprime, tol_edge: float = 1e-8) -> float:
    """Upper bound ``(int |t f|^2 * int |(t f)'|^2)**(1/4)`` on the total variation.

    ``fprime`` holds ``f'(t)`` on the same grid; its value at ``t = 0`` is
    not used, since only ``t f'(t)`` enters. Raises NotIntegrable when
    ``t^2 (|f|^2 + |f'|^2)`` has not decayed at the grid edges.
    """
    t = f.t
    fp = np.asarray(fprime, dtype=complex)
    if fp.shape != t.shape:
        raise GridMismatch("derivative must share the frequency grid")
    tfp = np.where(t == 0, 0.0, t * np.where(t == 0, 0.0, fp))
    w = np.abs(t * f.values) ** 2 + np.abs(tfp) ** 2
    k = max(1, int(0.02 * t.size))
    edge = max(np.max(w[:k]), np.max(w[-k:]))
    if not np.isfinite(edge) or edge > tol_edge * max(1.0, float(np.max(w))):
        raise NotIntegrable("t^2(|f|^2 + |f'|^2) does not decay on the frequency grid")
    dt = f.grid.dx
    a = np.sum(np.abs(t * f.values) ** 2) * dt
    b = np.sum(np.abs(f.values + tfp) ** 2) * dt
    return float((a * b) ** 0.25)


@dataclass(frozen=True, eq=False)
class P2Pair:
    """A density written as ``p1 * p2`` with both factors of finite information.

    ``conv_d1`` and ``conv_d2`` are the first and second derivatives of
    the convolution, obtained from ``(-it) f1 f2`` and ``(-it)^2 f1 f2``.
    """

    p1: DensityGrid
    p2: DensityGrid
    I1: float
    I2: float
    conv: DensityGrid
    conv_d1: np.ndarray
    conv_d2: np.ndarray

    @property
    def info_bound(self) -> float:
        return max(self.I1, self.I2)


def make_p2_pair(p1: DensityGrid, p2: DensityGrid, xgrid: Grid | None = None,
                 floor: float = NOISE_FLOOR) -> P2Pair:
    i1, i2 = fisher(p1), fisher(p2)
    if not (np.isfinite(i1) and np.isfinite(i2)):
        raise ValueError("both factors need finite Fisher information")
    if xgrid is None:
        xgrid = Grid(p1.grid.x_lo + p2.grid.x_lo, p1.grid.dx,
                     next_pow2(p1.grid.count + p2.grid.count - 1))
    f = spectral_product(p1, p2, xgrid)
    tail = combined_tail(p1.tail, p2.tail)
    dens = charfn_to_density(f, xgrid, tail_alpha=tail.alpha if tail.heavy else None)
    d1 = charfn_to_density_derivative(f, xgrid, dens.tail, order=1)
    d2 = charfn_to_density_derivative(f, xgrid, dens.tail, order=2)
    d2 = np.where(_support(dens.values, floor), d2, 0.0)
    conv = DensityGrid(xgrid, dens.values, dens.tail, d1)
    return P2Pair(p1, p2, i1, i2, conv, d1, d2)


def _log2_tail(tail: TailModel):
    # int p log^2 p over one side for p = c x^-nu
    nu = tail.nu

    def part(c, edge, sign):
        lc = np.log(c)
        return (power_log_integral(c * lc * lc, edge, nu)
                - power_log_integral(2.0 * nu * c * lc, edge, nu, 1)
                + power_log_integral(nu * nu * c, edge, nu, 2))
    return part


def p2_class_checks(pair: P2Pair, T: float, floor: float = NOISE_FLOOR,
                    tol: float = TOL_INEQ) -> list[InequalityReport]:
    """Pointwise derivative bound, integral second-derivative bound and the tail bound at ``T``."""
    i = pair.info_bound
    d = pair.conv
    p = d.values
    x = d.x
    m = _support(p, floor)
    # pointwise: |p'| <= I^(3/4) sqrt(p) <= I
    rhs = i ** 0.75 * np.sqrt(p)
    gap = np.where(m, rhs - np.abs(pair.conv_d1), np.inf)
    k = int(np.argmin(gap))
    chain_ok = i ** 0.75 * np.sqrt(np.max(p)) <= i * (1 + tol) + TOL_INEQ_ABS
    point = InequalityReport.check("p2_pointwise", abs(pair.conv_d1[k]), rhs[k],
                                   witness=float(x[k]), tol=tol)
    if not chain_ok:
        point = InequalityReport(point.name, point.lhs, point.rhs, False, point.margin,
                                 point.witness)
    # integral: int p''^2 / p <= I^2
    g = np.zeros_like(p)
    g[m] = pair.conv_d2[m] ** 2 / p[m]
    second = float(d.grid.dx * (np.sum(g) - 0.5 * (g[0] + g[-1])))
    nu = d.tail.nu
    for _, c, e in d.tail.sides(d.grid):
        second += power_log_integral((nu * (nu + 1)) ** 2 * c, e, nu + 4.0)
    integral = InequalityReport.check("p2_second_derivative", second, i * i, tol=tol)
    # tail estimate beyond T
    j = d.grid.index_of(T)
    if not 0 <= j < d.grid.count:
        raise GridMismatch("T lies outside the convolution window")
    pt = p[j]
    if not 0 < pt < 1:
        raise ValueError("the tail estimate is checked only where 0 < p(T) < 1")
    mm = _support(p, floor)
    gl = np.where(mm, pair.conv_d1 ** 2 / np.where(mm, p, 1.0), 0.0)[j:]
    lhs = float(d.grid.dx * (np.sum(gl) - 0.5 * (gl[0] + gl[-1])))
    plog = np.where(mm, p * np.log(np.where(mm, p, 1.0)) ** 2, 0.0)[j:]
    ent = float(d.grid.dx * (np.sum(plog) - 0.5 * (plog[0] + plog[-1])))
    if d.tail.heavy and d.tail.c_right > 0:
        lhs += nu ** 2 * power_log_integral(d.tail.c_right, d.grid.x_hi, nu + 2.0)
        ent += _log2_tail(d.tail)(d.tail.c_right, d.grid.x_hi, 1.0)
    rhs_tail = i ** 0.75 * np.sqrt(pt) * abs(np.log(pt)) + i * np.sqrt(ent)
    tail = InequalityReport.check("p2_tail", lhs, rhs_tail, witness=float(x[j]), tol=tol)
    return [point, integral, tail]
