import csv

import pytest

from stablefisher.cli import KEYS, main, parse_config
from stablefisher.errors import ParseError, ValidationError
from stablefisher.stable import StableLaw


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestParse:
    def test_defaults(self):
        cfg = parse_config("command = verify\nsource = gaussian\n")
        assert cfg.command == "verify" and cfg.source.kind == "gaussian"
        assert cfg.grid is None and cfg.threads == 1 and cfg.tolerances == {}

    def test_comments_and_lists(self):
        cfg = parse_config("# header\ncommand = converge  # trailing\nsource = cauchy\nns = 1, 2,4\n")
        assert cfg.ns == (1, 2, 4)

    def test_default_ns(self):
        assert parse_config("source = cauchy", "converge").ns == (2, 4, 8, 16, 32, 64)
        assert parse_config("source = cauchy", "decompose").ns == (8, 16, 32, 64)

    def test_density_law(self):
        cfg = parse_config("command = density\nalpha = 1.5\nbeta = 0.3\nc = 2\na = -1\n")
        assert cfg.law == StableLaw(1.5, 0.3, 2.0, -1.0)

    def test_grid_and_tolerances(self):
        cfg = parse_config("command = fisher\ngrid_half_width = 32\ngrid_count = 4096\n"
                           "tol_ineq = 1e-6\n")
        assert cfg.grid.count == 4096 and cfg.grid.x_lo == -32.0
        assert cfg.tolerances == {"tol_ineq": 1e-6}

    @pytest.mark.parametrize("text", [
        "command = verify\nalpha = 2.5",
        "command = converge\nns = 4,2,8",
        "command = converge\nns = 0,2",
        "command = verify\ngrid_count = 1024",
        "command = verify\ngrid_half_width = 8\ngrid_count = 1000",
        "command = converge\nplot = out.png",
        "command = verify\nthreads = 0",
        "command = verify\ntol_ineq = -1",
        "command = verify\neta = 1.5",
        "command = explode",
        "source = cauchy",
        "command = verify\nsource = laplace",
        "command = verify\nsource = custom",
        "command = density\nalpha = 1.5\nbeta = 2",
    ])
    def test_validation_errors(self, text):
        with pytest.raises(ValidationError):
            parse_config(text)

    @pytest.mark.parametrize("text,line", [
        ("command = verify\nsource gaussian", 2),
        ("command = verify\n\n# note\nbogus = 1", 4),
        ("command = verify\ncommand = fisher", 2),
        ("command = verify\nalpha =", 2),
        ("alpha = one", 1),
        ("ns = 1, two", 1),
    ])
    def test_parse_errors(self, text, line):
        with pytest.raises(ParseError) as info:
            parse_config(text)
        assert info.value.line == line and f"line {line}" in str(info.value)

    def test_command_mismatch(self):
        with pytest.raises(ValidationError):
            parse_config("command = verify", "fisher")

    def test_every_tolerance_is_a_key(self):
        from stablefisher.tolerances import DEFAULT_TOLERANCES
        assert set(DEFAULT_TOLERANCES) <= set(KEYS)


class TestRun:
    def test_verify_gaussian(self, tmp_path):
        out = tmp_path / "v.csv"
        assert main(["verify", "--config", write(tmp_path, "source = gaussian"),
                     "--out", str(out)]) == 0
        rows = read_rows(out)
        assert rows[0] == ["name", "lhs", "rhs", "margin", "satisfied"]
        assert all(r[-1] == "true" for r in rows[1:])

    def test_verify_failure_exit(self, tmp_path, monkeypatch):
        from stablefisher import cli
        from stablefisher.info import InequalityReport
        monkeypatch.setattr(cli, "verify_reports",
                            lambda cfg: [InequalityReport.check("forced", 2.0, 1.0)])
        out = tmp_path / "v.csv"
        assert main(["verify", "--config", write(tmp_path, "source = gaussian"),
                     "--out", str(out)]) == 1
        assert read_rows(out)[1][-1] == "false"

    def test_converge_cauchy(self, tmp_path):
        out = tmp_path / "c.csv"
        cfg = write(tmp_path, "source = cauchy\nns = 1, 2, 4")
        assert main(["converge", "--config", cfg, "--out", str(out)]) == 0
        rows = read_rows(out)
        assert rows[0][2] == "rel_fisher"
        assert all(abs(float(r[2])) <= 1e-8 for r in rows[1:])

    def test_density_output(self, tmp_path):
        out = tmp_path / "d.csv"
        cfg = write(tmp_path, "alpha = 1\ngrid_half_width = 16\ngrid_count = 1024")
        assert main(["density", "--config", cfg, "--out", str(out)]) == 0
        rows = read_rows(out)
        assert rows[0] == ["x", "density", "derivative", "score"] and len(rows) == 1025
        assert float(rows[513][1]) == pytest.approx(1 / 3.141592653589793, abs=1e-6)

    def test_fisher_output(self, tmp_path):
        out = tmp_path / "f.csv"
        cfg = write(tmp_path, "source = cauchy\ngrid_half_width = 64\ngrid_count = 16384")
        assert main(["fisher", "--config", cfg, "--out", str(out)]) == 0
        vals = dict(read_rows(out)[1:])
        assert float(vals["fisher"]) == pytest.approx(0.5, abs=1e-5)
        assert float(vals["relative_fisher"]) == pytest.approx(0.0, abs=1e-8)

    def test_decompose(self, tmp_path):
        out = tmp_path / "w.csv"
        cfg = write(tmp_path, "source = student_t\nalpha = 1.5\nns = 8, 16")
        assert main(["decompose", "--config", cfg, "--out", str(out)]) == 0
        rows = read_rows(out)
        assert rows[0][:3] == ["n", "b_n", "delta_n"] and len(rows) == 3

    def test_decompose_gaussian_fails(self, tmp_path, capsys):
        cfg = write(tmp_path, "source = gaussian\nns = 8")
        assert main(["decompose", "--config", cfg, "--out", str(tmp_path / "w.csv")]) == 3
        assert "stage truncate" in capsys.readouterr().err

    def test_config_errors_exit_2(self, tmp_path, capsys):
        for text in ("alpha = 2.5", "ns = 4,2,8", "unknown = 1"):
            cfg = write(tmp_path, "source = cauchy\n" + text)
            assert main(["converge", "--config", cfg, "--out", str(tmp_path / "x.csv")]) == 2
        assert "config error" in capsys.readouterr().err
        assert main(["converge", "--config", str(tmp_path / "missing.cfg")]) == 2

    def test_numeric_failure_exit_3(self, tmp_path, capsys):
        # alpha = 0.2 needs a frequency band far beyond any practical grid
        cfg = write(tmp_path, "alpha = 0.2\nc = 0.01")
        assert main(["density", "--config", cfg, "--out", str(tmp_path / "d.csv")]) == 3
        assert "stage stable_density" in capsys.readouterr().err

    def test_deterministic(self, tmp_path):
        cfg = write(tmp_path, "source = student_t\nalpha = 1.5\nns = 2, 4, 8")
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["converge", "--config", cfg, "--out", str(a), "--threads", "2"]) == 0
        assert main(["converge", "--config", cfg, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert b"\r" not in a.read_bytes()

    def test_output_dir_override(self, tmp_path, monkeypatch):
        target = tmp_path / "elsewhere"
        monkeypatch.setenv("STABLEFISHER_OUTPUT_DIR", str(target))
        cfg = write(tmp_path, "source = cauchy\nns = 1, 2\noutput = rows.csv")
        assert main(["converge", "--config", cfg]) == 0
        assert (target / "rows.csv").exists()

    def test_plot(self, tmp_path):
        pytest.importorskip("matplotlib")
        cfg = write(tmp_path, f"source = student_t\nns = 2, 4, 8\nplot = {tmp_path / 'p.svg'}")
        assert main(["converge", "--config", cfg, "--out", str(tmp_path / "c.csv")]) == 0
        first = (tmp_path / "p.svg").read_bytes()
        assert first.startswith(b"<?xml")
        assert main(["converge", "--config", cfg, "--out", str(tmp_path / "c.csv")]) == 0
        assert (tmp_path / "p.svg").read_bytes() == first
