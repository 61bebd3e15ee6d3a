"""Batch runner: ``stablefisher <command> --config <path> [--out <path>] [--threads N]``.

Configs are flat ``key = value`` files, one entry per line, ``#`` starts a
comment, lists are comma separated. Unknown keys are errors. Example::

    command = converge
    source = student_t
    alpha = 1.5
    ns = 2, 4, 8, 16, 32, 64
    plot = converge.svg

Exit codes: 0 success, 1 unsatisfied report in ``verify``, 2 configuration
error, 3 numerical failure (the failing stage is named on stderr).
The environment variable ``STABLEFISHER_OUTPUT_DIR`` redirects all output
files into that directory.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, StableFisherError, ValidationError
from .grid import Grid, TailModel, read_density_csv, tv_norm
from .info import (fisher, information_inequalities, make_p2_pair, p2_class_checks,
                   prop22_bounds, relative_entropy, relative_fisher, three_convolution_fisher,
                   tv_and_charfn_bounds, write_reports)
from .stable import StableLaw, stable_density
from .tolerances import DEFAULT_TOLERANCES

COMMANDS = ("density", "fisher", "verify", "converge", "decompose")
SOURCES = ("gaussian", "cauchy", "student_t", "stable", "custom")
OUTPUT_ENV = "STABLEFISHER_OUTPUT_DIR"
PLOT_SUFFIXES = (".svg", ".pdf")


def _float(text):
    return float(text)


def _int(text):
    return int(text)


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _str(text):
    return text


# key -> parser of the raw value
KEYS = {
    "command": _str, "source": _str, "alpha": _float, "beta": _float, "c": _float, "a": _float,
    "mean": _float, "variance": _float, "scale": _float, "density_file": _str,
    "ns": _ints, "grid_half_width": _float, "grid_count": _int,
    "output": _str, "plot": _str, "threads": _int, "eta": _float, "delta": _float,
    "tail_point": _float,
}
KEYS.update({name: _float for name in DEFAULT_TOLERANCES})


@dataclass(frozen=True)
class RunConfig:
    command: str
    source: object = None
    law: StableLaw | None = None
    ns: tuple = ()
    grid: Grid | None = None
    tolerances: dict = field(default_factory=dict)
    output_path: str | None = None
    plot_path: str | None = None
    threads: int = 1
    eta: float = 0.5
    delta: float | None = None
    tail_point: float = 5.0


def _entries(text: str) -> dict:
    out = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", no)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ParseError(f"unknown key {key!r}", no)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", no)
        if not value:
            raise ParseError(f"empty value for {key!r}", no)
        try:
            out[key] = KEYS[key](value)
        except ValueError:
            raise ParseError(f"cannot read {value!r} for {key!r}", no) from None
    return out


def _source(e: dict):
    from .sums import SourceModel

    kind = e.get("source", "gaussian")
    if kind not in SOURCES:
        raise ValidationError(f"source must be one of {', '.join(SOURCES)}")
    try:
        if kind == "gaussian":
            return SourceModel.gaussian(e.get("mean", 0.0), e.get("variance", 1.0))
        if kind == "cauchy":
            return SourceModel.cauchy(e.get("scale", 1.0))
        if kind == "student_t":
            return SourceModel.student_t(e.get("alpha", 1.5))
        if kind == "stable":
            return SourceModel.exact_stable(_law(e, required=True))
        if "density_file" not in e or "alpha" not in e:
            raise ValidationError("custom sources need density_file and alpha")
        tail = TailModel()
        d = read_density_csv(e["density_file"], tail)
        return SourceModel.custom(d, e["alpha"])
    except (ValueError, OSError) as exc:
        raise ValidationError(str(exc)) from None


def _law(e: dict, required: bool = False) -> StableLaw | None:
    if not required and "alpha" not in e:
        return None
    try:
        return StableLaw(e.get("alpha", 2.0), e.get("beta", 0.0), e.get("c", 1.0), e.get("a", 0.0))
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def parse_config(text: str, command: str | None = None) -> RunConfig:
    """Parse and validate a configuration text.

    ``command`` fills in a missing ``command`` key and must agree with it
    when both are given.
    """
    e = _entries(text)
    if command is not None:
        if e.setdefault("command", command) != command:
            raise ValidationError(f"config command {e['command']!r} differs from {command!r}")
    if "command" not in e:
        raise ValidationError("missing key 'command'")
    cmd = e["command"]
    if cmd not in COMMANDS:
        raise ValidationError(f"command must be one of {', '.join(COMMANDS)}")
    if "alpha" in e and not 0 < e["alpha"] <= 2:
        raise ValidationError(f"alpha must lie in (0, 2], got {e['alpha']}")
    ns = e.get("ns", ())
    if cmd in ("converge", "decompose") and not ns:
        ns = (2, 4, 8, 16, 32, 64) if cmd == "converge" else (8, 16, 32, 64)
    if ns and (min(ns) < 1 or any(b <= a for a, b in zip(ns, ns[1:]))):
        raise ValidationError("ns must be positive and strictly increasing")
    grid = None
    if ("grid_half_width" in e) != ("grid_count" in e):
        raise ValidationError("grid_half_width and grid_count go together")
    if "grid_count" in e:
        try:
            grid = Grid.symmetric(e["grid_half_width"], e["grid_count"])
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
    plot = e.get("plot")
    if plot is not None and Path(plot).suffix.lower() not in PLOT_SUFFIXES:
        raise ValidationError("plot must end in .svg or .pdf")
    if e.get("threads", 1) < 1:
        raise ValidationError("threads must be at least 1")
    tols = {k: e[k] for k in DEFAULT_TOLERANCES if k in e}
    if any(v <= 0 for v in tols.values()):
        raise ValidationError("tolerances must be positive")
    if not 0 < e.get("eta", 0.5) <= 1:
        raise ValidationError("eta must lie in (0, 1]")
    law = None
    if cmd == "density":
        law = _law(e, required=True)
        source = None
    else:
        source = _source(e)
    return RunConfig(cmd, source, law, tuple(ns), grid, tols, e.get("output"), plot,
                     e.get("threads", 1), e.get("eta", 0.5), e.get("delta"),
                     e.get("tail_point", 5.0))


def _write_table(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else f"{v:.17g}" for v in r])


class StageFailed(Exception):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"stage {stage}: {type(exc).__name__}: {exc}")


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StableFisherError as exc:
        raise StageFailed(name, exc) from exc


def run_density(cfg: RunConfig, out: Path) -> int:
    sd = _stage("stable_density", stable_density, cfg.law, cfg.grid)
    rows = zip(sd.grid.nodes(), sd.values, sd.derivative, sd.score)
    _write_table(out, ["x", "density", "derivative", "score"], rows)
    return 0


def run_fisher(cfg: RunConfig, out: Path) -> int:
    from .sums import calibrate_limit, source_density

    p = _stage("source_density", source_density, cfg.source, cfg.grid)
    rows = [("mass", p.mass()), ("fisher", _stage("fisher", fisher, p)),
            ("total_variation", tv_norm(p))]
    law = _stage("calibrate", calibrate_limit, cfg.source, tolerances=cfg.tolerances)[0]
    sd = _stage("stable_density", stable_density, law, p.grid)
    rows.append(("relative_fisher", _stage("relative_fisher", relative_fisher, p, sd)))
    rows.append(("relative_entropy", _stage("relative_entropy", relative_entropy, p, sd)))
    _write_table(out, ["name", "value"], rows)
    return 0


def verify_reports(cfg: RunConfig) -> list:
    """Every inequality report that applies to the configured source."""
    from .decomp import witness_suite
    from .sums import calibrate_limit, source_density

    tol = dict(DEFAULT_TOLERANCES, **cfg.tolerances)
    p = _stage("source_density", source_density, cfg.source, cfg.grid)
    reports = list(_stage("information_inequalities", information_inequalities, p, p,
                          tol=tol["tol_ineq"]))
    reports += _stage("tv_and_charfn_bounds", tv_and_charfn_bounds, p, tol=tol["tol_ineq"])
    reports.append(_stage("three_convolution", three_convolution_fisher, p, p, p,
                          tol=tol["tol_ineq"]))
    law, norm = _stage("calibrate", calibrate_limit, cfg.source, tolerances=cfg.tolerances)
    if not law.gaussian:
        sd = _stage("stable_density", stable_density, law, p.grid)
        reports += _stage("prop22_bounds", prop22_bounds, p, sd, tol=tol["tol_ineq"])
    pair = _stage("p2_pair", make_p2_pair, p, p)
    reports += _stage("p2_class_checks", p2_class_checks, pair, cfg.tail_point,
                      tol=tol["tol_ineq"])
    if not law.gaussian:
        ns = cfg.ns or (8, 16, 32, 64)
        reports += _stage("truncation_witnesses", witness_suite, cfg.source, ns, norm,
                          cfg.delta, cfg.eta)
    return reports


def run_verify(cfg: RunConfig, out: Path) -> int:
    reports = verify_reports(cfg)
    write_reports(reports, out)
    return 0 if all(r.satisfied for r in reports) else 1


def plot_convergence(rows, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "stablefisher"
    good = [r for r in rows if r.error is None and r.rel_fisher > 0]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog([r.n for r in good], [r.rel_fisher for r in good], "o-")
    ax.set_xlabel("n")
    ax.set_ylabel("relative Fisher information")
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else
                {"CreationDate": None})
    plt.close(fig)


def run_converge(cfg: RunConfig, out: Path, plot: Path | None) -> int:
    from .sums import convergence_experiment, write_rows

    opts = {"grid": cfg.grid, "tolerances": cfg.tolerances}
    rows = _stage("convergence", convergence_experiment, cfg.source, cfg.ns, opts, cfg.threads)
    write_rows(rows, out)
    for r in rows:
        if r.error:
            print(f"n={r.n}: {r.error}", file=sys.stderr)
    if plot is not None:
        plot_convergence(rows, plot)
    return 0


def run_decompose(cfg: RunConfig, out: Path) -> int:
    from .decomp import fit_envelope, derivative_bound_constant, power_integrals, truncate
    from .sums import calibrate_limit

    _, norm = _stage("calibrate", calibrate_limit, cfg.source, tolerances=cfg.tolerances)
    if norm.alpha >= 2:
        raise StageFailed("truncate", StableFisherError("decomposition needs alpha < 2"))
    delta = cfg.delta if cfg.delta is not None else norm.alpha / 2.0
    rows = []
    for n in cfg.ns:
        tr = _stage("truncate", truncate, cfg.source, n, norm)
        env = fit_envelope(tr, n, delta)
        a, b = power_integrals(tr, max(n, 4))
        rows.append([str(n), tr.b_n, tr.delta_n, n * tr.delta_n, tr.d_n,
                     derivative_bound_constant(tr), env.c, env.C, env.eps, a, b])
    _write_table(out, ["n", "b_n", "delta_n", "n_delta_n", "d_n", "derivative_constant",
                       "envelope_c", "envelope_C", "envelope_eps", "power_integral",
                       "power_derivative_integral"], rows)
    return 0


def _place(path: str, override: str | None) -> Path:
    p = Path(path)
    return Path(override) / p.name if override else p


def run(cfg: RunConfig, out: str | None = None) -> int:
    """Execute a parsed configuration; returns the exit status."""
    override = os.environ.get(OUTPUT_ENV)
    target = _place(out or cfg.output_path or f"{cfg.command}.csv", override)
    target.parent.mkdir(parents=True, exist_ok=True)
    plot = _place(cfg.plot_path, override) if cfg.plot_path else None
    if cfg.command == "density":
        return run_density(cfg, target)
    if cfg.command == "fisher":
        return run_fisher(cfg, target)
    if cfg.command == "verify":
        return run_verify(cfg, target)
    if cfg.command == "converge":
        return run_converge(cfg, target, plot)
    return run_decompose(cfg, target)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="stablefisher", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text, args.command)
        if args.threads is not None:
            if args.threads < 1:
                raise ValidationError("threads must be at least 1")
            cfg = RunConfig(**{**cfg.__dict__, "threads": args.threads})
    except (ParseError, ValidationError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        with np.errstate(all="ignore"):
            return run(cfg, args.out)
    except StageFailed as exc:
        print(str(exc), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
