import numpy as np
import pytest
from scipy.signal import fftconvolve

from oracles import (cauchy_pdf, normal_pdf, student_charfn, student_pdf,
                     student_small_t_scale)
from stablefisher import sums
from stablefisher.errors import FitFailed, NotADensity
from stablefisher.grid import DensityGrid, Grid, TailModel, convolve, fit_tail_exponent, scaled
from stablefisher.info import fisher, relative_fisher
from stablefisher.stable import StableLaw, stable_density
from stablefisher.sums import (NormalizingSeq, SourceModel, calibrate_limit,
                               charfn_envelope_check, convergence_experiment,
                               local_limit_metrics, source_charfn, source_density, write_rows,
                               zn_density)

WIDE = Grid.symmetric(64.0, 2 ** 14)
STUDENT = SourceModel.student_t(1.5)


@pytest.fixture(scope="module")
def student_norm():
    return calibrate_limit(STUDENT)[1]


class TestSources:
    def test_cauchy_value(self):
        d = source_density(SourceModel.cauchy(), WIDE)
        assert d.values[WIDE.count // 2] == pytest.approx(1 / np.pi, abs=1e-15)

    def test_student_density(self):
        d = source_density(STUDENT, WIDE)
        assert np.allclose(d.values, student_pdf(WIDE.nodes(), 1.5), rtol=1e-13, atol=0)

    def test_student_mass(self):
        assert source_density(STUDENT, WIDE).mass() == pytest.approx(1.0, abs=1e-7)

    def test_student_tail_exponent(self):
        fitted, _, _ = fit_tail_exponent(source_density(STUDENT, Grid.symmetric(512.0, 2 ** 16)))
        assert fitted == pytest.approx(1.5, abs=0.05)

    def test_student_charfn(self):
        t = np.array([0.01, 0.1, 0.5, 1.0, 3.0])
        assert np.max(np.abs(source_charfn(STUDENT, t) - student_charfn(t, 1.5))) < 1e-9

    def test_constructors(self):
        with pytest.raises(ValueError):
            SourceModel.gaussian(variance=0.0)
        with pytest.raises(ValueError):
            SourceModel("laplace")
        assert SourceModel.student_t(5.0).known_alpha == 2.0
        assert SourceModel.exact_stable(StableLaw(1.2)).known_alpha == 1.2

    def test_labels(self):
        assert SourceModel.student_t(1.5).label() == "student_t(1.5)"
        assert SourceModel.cauchy().label() == "cauchy(scale=1)"


class TestCalibration:
    def test_cauchy(self):
        law, norm = calibrate_limit(SourceModel.cauchy())
        assert law.alpha == pytest.approx(1.0, abs=0.01) and law.c == pytest.approx(1.0, abs=0.01)
        assert norm.b(8) == pytest.approx(8.0, rel=0.02)

    def test_gaussian(self):
        law, _ = calibrate_limit(SourceModel.gaussian())
        assert law.alpha == pytest.approx(2.0, abs=0.01) and law.c == pytest.approx(0.5, abs=0.01)

    def test_student(self):
        law, norm = calibrate_limit(STUDENT)
        assert law.alpha == pytest.approx(1.5, abs=0.02)
        assert law.c == pytest.approx(student_small_t_scale(1.5), rel=1e-4)
        assert law.beta == 0.0 and norm.a(10) == 0.0

    @pytest.mark.parametrize("nu", [0.75, 1.2])
    def test_student_other_indices(self, nu):
        law, _ = calibrate_limit(SourceModel.student_t(nu))
        assert law.alpha == nu
        assert law.c == pytest.approx(student_small_t_scale(nu), rel=1e-3)

    def test_finite_variance_student(self):
        law, _ = calibrate_limit(SourceModel.student_t(5.0))
        assert law.alpha == 2.0 and law.c == pytest.approx(5 / 6, rel=1e-3)

    def test_normalization_rule(self):
        norm = NormalizingSeq(1.5, StableLaw(1.5), h=2.0, location=0.5)
        assert norm.b(4) == pytest.approx(8 ** (2 / 3))
        assert norm.a(4) == pytest.approx(2.0 / norm.b(4))
        assert all(norm.b(n + 1) > norm.b(n) for n in range(1, 50))

    def test_fit_failed(self):
        # two far-apart bumps: -log|f| is not a power of t on the fit window
        g = Grid.symmetric(64.0, 2 ** 14)
        x = g.nodes()
        p = 0.5 * (normal_pdf(x - 30.0) + normal_pdf(x + 30.0))
        with pytest.raises(FitFailed):
            calibrate_limit(SourceModel.custom(DensityGrid(g, p, TailModel()), 2.0))

    def test_asymmetric_custom_rejected(self):
        g = Grid.symmetric(16.0, 4096)
        d = DensityGrid(g, normal_pdf(g.nodes() - 1), TailModel())
        with pytest.raises(ValueError):
            calibrate_limit(SourceModel.custom(d, 2.0, symmetric=False))

    def test_skewed_cauchy_rejected(self):
        with pytest.raises(ValueError):
            calibrate_limit(SourceModel.exact_stable(StableLaw(1.0, 0.5)))


class TestZn:
    def test_cauchy_fixed_point(self):
        _, norm = calibrate_limit(SourceModel.cauchy())
        for n in (1, 3, 16):
            z = zn_density(SourceModel.cauchy(), n, norm, WIDE)
            assert np.max(np.abs(z.values - cauchy_pdf(WIDE.nodes()))) < 1e-8

    def test_gaussian(self):
        g = Grid.symmetric(16.0, 4096)
        _, norm = calibrate_limit(SourceModel.gaussian())
        z = zn_density(SourceModel.gaussian(), 4, norm, g)
        assert np.max(np.abs(z.values - normal_pdf(g.nodes()))) < 1e-8

    def test_gaussian_with_mean(self):
        g = Grid.symmetric(16.0, 4096)
        s = SourceModel.gaussian(mean=1.0)
        _, norm = calibrate_limit(s)
        z = zn_density(s, 4, norm, g)
        assert np.max(np.abs(z.values - normal_pdf(g.nodes()))) < 1e-8

    def test_student_sixteen(self, student_norm):
        z = zn_density(STUDENT, 16, student_norm)
        assert z.mass() == pytest.approx(1.0, abs=1e-6)
        v = z.values[1:]  # node i mirrors node count - i
        assert np.max(np.abs(v - v[::-1])) < 1e-9

    def test_rejects_n(self, student_norm):
        with pytest.raises(ValueError):
            zn_density(STUDENT, 0, student_norm)

    @pytest.mark.parametrize("n", [2, 4])
    def test_direct_convolution_oracle(self, student_norm, n):
        h, half = 1 / 32, 4096
        x = np.arange(-half * 32, half * 32 + 1) * h
        p = student_pdf(x, 1.5)
        pn = p
        for _ in range(int(np.log2(n))):
            pn = fftconvolve(pn, pn) * h
        lo = -half * n
        b = student_norm.b(n)
        g = Grid(-4096 * h / b, h / b, 8192)
        z = zn_density(STUDENT, n, student_norm, g)
        idx = np.round((g.nodes() * b - lo) / h).astype(int)
        assert np.max(np.abs(z.values - b * pn[idx])) < 1e-9

    @pytest.mark.parametrize("n1", [2, 4])
    def test_semigroup(self, student_norm, n1):
        g = Grid.symmetric(64.0, 2 ** 14)
        z1 = zn_density(STUDENT, n1, student_norm, g)
        both = convolve(z1, z1, xgrid=Grid.symmetric(128.0, 2 ** 15))
        pred = scaled(both, student_norm.b(2 * n1) / student_norm.b(n1))
        z2 = zn_density(STUDENT, 2 * n1, student_norm, pred.grid)
        assert np.max(np.abs(z2.values - pred.values)) < 1e-6


class TestMetrics:
    def test_identical(self):
        sd = stable_density(StableLaw(1.5), WIDE)
        assert local_limit_metrics(sd.density, sd) == (0.0, 0.0)

    def test_gaussian_n1(self):
        g = Grid.symmetric(16.0, 4096)
        law, norm = calibrate_limit(SourceModel.gaussian())
        sd = stable_density(law, g)
        gap, dgap = local_limit_metrics(zn_density(SourceModel.gaussian(), 1, norm, g), sd)
        assert gap < 1e-8 and dgap < 1e-8

    def test_student_gap_shrinks(self, student_norm):
        sd = stable_density(student_norm.limit)
        g4 = local_limit_metrics(zn_density(STUDENT, 4, student_norm), sd)
        g32 = local_limit_metrics(zn_density(STUDENT, 32, student_norm), sd)
        assert g32[0] < g4[0] and g32[1] < g4[1]


class TestEnvelope:
    def test_cauchy(self):
        _, norm = calibrate_limit(SourceModel.cauchy())
        r = charfn_envelope_check(SourceModel.cauchy(), [4, 8, 16], norm, 0.5)
        assert r.satisfied and r.rhs == pytest.approx(1.0, rel=1e-6)

    def test_gaussian(self):
        _, norm = calibrate_limit(SourceModel.gaussian())
        r = charfn_envelope_check(SourceModel.gaussian(), [4, 16, 64], norm, 1.0)
        assert r.satisfied and r.rhs > 0

    def test_student(self, student_norm):
        r = charfn_envelope_check(STUDENT, [4, 8, 16, 32, 64], student_norm, 0.75)
        assert r.satisfied and r.rhs > 0 and 0 < r.witness <= 1

    def test_delta_range(self, student_norm):
        with pytest.raises(ValueError):
            charfn_envelope_check(STUDENT, [4], student_norm, 1.5)


class TestExperiment:
    def test_cauchy_rows(self):
        rows = convergence_experiment(SourceModel.cauchy(), [1, 2, 4])
        assert all(abs(r.rel_fisher) <= 1e-8 and abs(r.rel_entropy) <= 1e-8 for r in rows)
        assert all(r.sup_density_gap < 1e-8 and r.fisher == pytest.approx(0.5, abs=1e-5)
                   for r in rows)

    def test_gaussian_rows(self):
        rows = convergence_experiment(SourceModel.gaussian(), [1, 4, 16])
        assert all(abs(r.rel_fisher) <= 1e-8 for r in rows)
        assert all(r.fisher == pytest.approx(1.0, abs=1e-6) for r in rows)

    def test_student_rows(self, student_norm):
        rows = convergence_experiment(STUDENT, [2, 4, 8, 16, 32, 64], {"norm": student_norm},
                                      threads=2)
        rf = [r.rel_fisher for r in rows]
        assert all(b < a for a, b in zip(rf, rf[1:])) and rf[-1] < 0.1 * rf[0]
        fi = [r.fisher for r in rows]
        assert max(fi) / min(fi) < 3
        mo = [r.moment_delta for r in rows]
        assert max(mo) / min(mo) < 2

    def test_rows_match_direct(self, student_norm):
        row = convergence_experiment(STUDENT, [8], {"norm": student_norm})[0]
        sd = stable_density(student_norm.limit)
        z = zn_density(STUDENT, 8, student_norm)
        assert row.fisher == fisher(z) and row.rel_fisher == relative_fisher(z, sd)

    def test_increasing_ns(self):
        with pytest.raises(ValueError):
            convergence_experiment(SourceModel.cauchy(), [4, 2])

    def test_failed_row(self, monkeypatch, student_norm):
        real = sums.zn_density

        def flaky(s, n, norm, xgrid=None, workers=None):
            if n == 4:
                raise NotADensity("forced")
            return real(s, n, norm, xgrid, workers)
        monkeypatch.setattr(sums, "zn_density", flaky)
        rows = convergence_experiment(STUDENT, [2, 4, 8], {"norm": student_norm})
        assert np.isnan(rows[1].rel_fisher) and "NotADensity" in rows[1].error
        assert np.isfinite(rows[2].rel_fisher)

    def test_csv(self, tmp_path):
        rows = convergence_experiment(SourceModel.cauchy(), [1, 2])
        write_rows(rows, tmp_path / "rows.csv")
        lines = (tmp_path / "rows.csv").read_text().splitlines()
        assert lines[0] == "n,fisher,rel_fisher,rel_entropy,sup_gap,sup_deriv_gap,moment"
        assert len(lines) == 3 and lines[1].startswith("1,")

    def test_cauchy_moment(self):
        # E|Z|^(1/2) = sqrt 2 for the standard Cauchy law
        row = convergence_experiment(SourceModel.cauchy(), [2])[0]
        assert row.moment_delta == pytest.approx(np.sqrt(2), abs=1e-5)
