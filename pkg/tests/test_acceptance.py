"""Acceptance criteria, one test each; every test records a PASS/FAIL line."""
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import (cauchy_pdf, kl_triangle_vs_normal, normal_pdf, three_uniform_fisher)
from stablefisher.cli import main
from stablefisher.decomp import (binomial_reconstruction, truncate, verify_cor73,
                                 verify_lemma71, verify_lemma72)
from stablefisher.grid import (DensityGrid, Grid, TailModel, charfn_to_density, convolve,
                               density_to_charfn, frequency_grid, scaled, uniform_density)
from stablefisher.info import (fisher, information_inequalities, make_p2_pair,
                               p2_class_checks, prop22_bounds, relative_entropy,
                               relative_fisher, three_convolution_fisher,
                               tv_and_charfn_bounds)
from stablefisher.stable import StableLaw, default_grid, stable_density
from stablefisher.sums import (SourceModel, calibrate_limit, convergence_experiment,
                               source_density)


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}")
    assert ok, detail


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def test_criterion_01_closed_form_densities():
    details, ok = [], True
    for name, law, pdf in (("gaussian", StableLaw(2.0, 0.0, 0.5), normal_pdf),
                           ("cauchy", StableLaw(1.0), cauchy_pdf)):
        sd, secs = timed(stable_density, law)
        x = sd.grid.nodes()
        m = np.abs(x) <= 20
        err = float(np.max(np.abs(sd.values[m] - pdf(x[m]))))
        ok &= err < 1e-6 and secs < 1.0
        details.append(f"{name} sup err {err:.2e} in {secs:.2f}s")
    record(1, ok, "; ".join(details))


def test_criterion_02_fisher_oracles():
    g = Grid.symmetric(16.0, 2 ** 14)
    x = g.nodes()
    i_norm = fisher(DensityGrid(g, normal_pdf(x), TailModel(), -x * normal_pdf(x)))
    cd = stable_density(StableLaw(1.0)).density
    i_cauchy = fisher(cd)
    homog = [abs(fisher(scaled(cd, 1 / b)) * b * b / i_cauchy - 1) for b in (0.5, 2.0)]
    ok = abs(i_norm - 1) <= 1e-6 and abs(i_cauchy - 0.5) <= 1e-5 and max(homog) < 1e-6
    record(2, ok, f"I(N)={i_norm:.9f} I(C)={i_cauchy:.8f} homogeneity err {max(homog):.1e}")


def _inputs():
    wide = default_grid(1.0)
    g = Grid.symmetric(16.0, 2 ** 14)
    x = g.nodes()
    gauss = DensityGrid(g, normal_pdf(x), TailModel(), -x * normal_pdf(x))
    cauchy = stable_density(StableLaw(1.0), wide).density
    student = source_density(SourceModel.student_t(1.5), wide)
    u = uniform_density(-0.5, 0.5, 2 ** -10)
    ug = Grid.symmetric(16.0, 2 ** 15)
    u3 = convolve(convolve(u, u), u, xgrid=ug)
    return {"gaussian": gauss, "cauchy": cauchy, "student_t": student, "three_uniform": u3}


def test_criterion_03_inequality_suite():
    t0 = time.perf_counter()
    dens = _inputs()
    u = uniform_density(0.0, 1.0, 2 ** -10)
    bad, count = [], 0
    stam_gap = None
    for name, d in dens.items():
        reps = information_inequalities(d, d)
        reps += tv_and_charfn_bounds(d)
        reps.append(three_convolution_fisher(d, d, d))
        limit = stable_density(StableLaw(1.0), d.grid)
        if name == "student_t":
            limit = stable_density(calibrate_limit(SourceModel.student_t(1.5))[0], d.grid)
        reps += prop22_bounds(d, limit)
        reps += p2_class_checks(make_p2_pair(d, d), 2.0 if name == "three_uniform" else 5.0)
        if name == "gaussian":
            stam = [r for r in reps if r.name == "stam"][0]
            stam_gap = abs(stam.margin)
        count += len(reps)
        bad += [f"{name}:{r.name}" for r in reps if not r.satisfied]
    # uniform inputs with infinite information: three uniforms and two uniforms plus a triangle
    for parts in ((u, u, u), (u, u, convolve(u, u))):
        r = three_convolution_fisher(*parts)
        count += 1
        if not r.satisfied:
            bad.append("uniforms:three_convolution")
    secs = time.perf_counter() - t0
    ok = not bad and stam_gap < 1e-6 and secs < 30
    record(3, ok, f"{count} reports, unsatisfied {bad or 'none'}, Stam gap {stam_gap:.1e}, "
                  f"{secs:.1f}s")


def test_criterion_04_three_uniform():
    u = uniform_density(0.0, 1.0, 2 ** -14)
    r = three_convolution_fisher(u, u, u)
    oracle = three_uniform_fisher()
    rel = abs(r.lhs / oracle - 1)
    record(4, rel < 1e-4 and r.lhs <= 6 and r.satisfied,
           f"I(U*U*U)={r.lhs:.6f} oracle {oracle:.6f} rel err {rel:.1e}, bound {r.rhs:g}")


def test_criterion_05_cauchy_fixed_point():
    rows = convergence_experiment(SourceModel.cauchy(), [1, 2, 4, 8])
    worst = max(abs(r.rel_fisher) for r in rows)
    record(5, worst <= 1e-8, f"max rel_fisher {worst:.1e} over n=1,2,4,8")


def test_criterion_06_student_convergence():
    t0 = time.perf_counter()
    rows = convergence_experiment(SourceModel.student_t(1.5), [2, 4, 8, 16, 32, 64])
    secs = time.perf_counter() - t0
    rf = [r.rel_fisher for r in rows]
    gaps = [r.sup_density_gap for r in rows[1:]]
    dgaps = [r.sup_deriv_gap for r in rows[1:]]
    fi = [r.fisher for r in rows]

    def decreasing(v):
        return all(b < a for a, b in zip(v, v[1:]))
    ratio = max(fi) / min(fi)
    ok = (decreasing(rf) and rf[-1] / rf[0] < 0.1 and decreasing(gaps) and decreasing(dgaps)
          and ratio < 4 and secs < 120)
    record(6, ok, f"rel_fisher {rf[0]:.4f}->{rf[-1]:.4f} (x{rf[-1] / rf[0]:.3f}), "
                  f"gaps decreasing {decreasing(gaps) and decreasing(dgaps)}, "
                  f"fisher max/min {ratio:.2f}, {secs:.1f}s")


@pytest.fixture(scope="module")
def truncations():
    out = {}
    for s in (SourceModel.student_t(1.5), SourceModel.cauchy()):
        _, norm = calibrate_limit(s)
        out[s.kind] = [truncate(s, n, norm) for n in (8, 16, 32, 64)]
    return out


def test_criterion_07_truncation_witnesses(truncations):
    details, ok = [], True
    for kind, trs in truncations.items():
        alpha = trs[0].alpha
        deriv = verify_lemma71(trs)
        env = verify_lemma72(trs, lambda n: n, alpha / 2, 0.5)
        powers = verify_cor73(trs, lambda n: n)
        _, _, err = binomial_reconstruction(trs[0])
        good = deriv.satisfied and env.satisfied and all(r.satisfied for r in powers) and err < 1e-5
        ok &= good
        details.append(f"{kind}: C ratio {deriv.lhs:.2f}, c {env.rhs:.3f}, integral ratios "
                       f"{powers[0].lhs:.2f}/{powers[1].lhs:.2f}, L1 err {err:.1e}")
    record(7, ok, "; ".join(details))


def test_criterion_08_mass_law(truncations):
    details, ok = [], True
    for kind, trs in truncations.items():
        v = np.array([t.n * t.delta_n for t in trs if t.n >= 16])
        dev = float(np.max(np.abs(v / v.mean() - 1)))
        ok &= dev <= 0.25
        details.append(f"{kind}: n*delta_n {', '.join(f'{x:.4f}' for x in v)}")
    record(8, ok, "; ".join(details))


def test_criterion_09_entropy_fisher():
    w = np.sqrt(6.0)
    g = Grid(-8 * w, w / 2 ** 11, 2 ** 15)  # support ends are nodes
    x = g.nodes()
    tri = DensityGrid(g, np.maximum(0.0, (w - np.abs(x)) / 6.0), TailModel())
    sd = stable_density(StableLaw(2.0, 0.0, 0.5), g)
    d = relative_entropy(tri, sd)
    i_rel = relative_fisher(tri, sd)
    oracle = kl_triangle_vs_normal()
    # the score of the triangle is -1/(w - |x|): its relative Fisher integral diverges
    ok = abs(d - oracle) < 1e-6 and i_rel == np.inf and 0.5 * i_rel >= d
    record(9, ok, f"D={d:.9f} oracle {oracle:.9f}; I(X||Z)={i_rel} (divergent oracle); "
                  f"I/2 >= D {0.5 * i_rel >= d}")


def _roundtrip(d, band=60.0):
    # every built-in transform is below 1e-16 beyond |t| = 60
    tg = frequency_grid(band, 2 * np.pi / (16 * (d.grid.x_hi - d.grid.x_lo)),
                        limit=d.grid.nyquist)
    alpha = d.tail.alpha if d.tail.heavy else None
    back = charfn_to_density(density_to_charfn(d, tg), d.grid, tail_alpha=alpha)
    return float(np.max(np.abs(back.values - d.values)))


def test_criterion_10_determinism_and_roundtrip(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("source = student_t\nalpha = 1.5\nns = 2, 4, 8\n")
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.csv"
        assert main(["converge", "--config", str(cfg), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    same = outs[0] == outs[1]
    wide = default_grid(1.0)
    g = Grid.symmetric(16.0, 2 ** 12)
    errs = {
        "gaussian": _roundtrip(source_density(SourceModel.gaussian(), g)),
        "cauchy": _roundtrip(source_density(SourceModel.cauchy(), wide)),
        "student_t": _roundtrip(source_density(SourceModel.student_t(1.5), wide)),
        "stable": _roundtrip(stable_density(StableLaw(1.5, 0.3)).density),
    }
    worst = max(errs.values())
    record(10, same and worst < 1e-7,
           f"byte-identical {same}; round-trip sup err "
           + ", ".join(f"{k} {v:.1e}" for k, v in errs.items()))
