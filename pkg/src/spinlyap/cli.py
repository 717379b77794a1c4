"""Command-line front-end.

``spinlyap <command> [--config FILE] [flags]`` resolves a run configuration
(config file first, flags on top), computes the command's tables and writes
them with a ``manifest.json``. Exit codes: 0 success, 1 numerical-invariant
violation, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, DomainError, InvalidDimensionError, NumericalInvariantError, RegionError
from .figures import FIGURES, reproduce_figure
from .runs import COMMANDS, OPTION_DEFAULTS, default_sets, resolve_config, run, write_outputs

__all__ = ["main", "build_parser", "help_text", "ENV_OUT"]

ENV_OUT = "SPINLYAP_OUT"
DEFAULT_OUT = "spinlyap_out"

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2
EXIT_IO = 3

COMMAND_HELP = {
    "phase-map": "maximal local Lyapunov exponent and region code on an (h/J, K/J) grid",
    "potential": "effective potential V(Q) along P = 0 for each parameter set",
    "fixed-points": "fixed points with stability, Bloch angles and exponents",
    "lyapunov": "local Lyapunov exponent and expansion coefficients at the hyperbolic point",
    "gain": "ln G^2(t) and the optimal angle from exact evolution",
    "infidelity": "echo infidelity 1 - F versus perturbation strength",
    "husimi": "Husimi snapshots on the (Q, P) disk plus the classical separatrix",
    "covariance": "linearized covariance prediction xi_C^2(t) and its angle",
    "matched-lambda": "LMG and triple-well parameters sharing one Lyapunov exponent",
    "fit-maxline": "straight-line fit through the ridge of maximal Lyapunov exponent",
}

_EPILOG = """\
common flags (every command):
  --config FILE       JSON config, or manifest.json of an earlier run
  --h X --J X --K X   couplings; override every parameter set
  --N INT             number of spins
  --t-max X           last time point, in units of 1/J
  --t-steps INT       number of time points
  --out DIR           output directory (default: $SPINLYAP_OUT or ./spinlyap_out)
  --format csv|json   table format
  --workers INT       worker threads for sweeps
  --opt KEY=VALUE     command option (VALUE parsed as JSON), repeatable
  --plot-script       also write plot.py for the emitted tables

exit codes: 0 ok, 1 numerical invariant violated, 2 configuration error, 3 I/O error
"""


def _formatter(prog):
    return argparse.RawDescriptionHelpFormatter(prog, width=100, max_help_position=30)


def _common_parser(with_params: bool) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="JSON config or manifest.json of an earlier run")
    if with_params:
        common.add_argument("--h", type=float, metavar="X", help="field h")
        common.add_argument("--J", type=float, metavar="X", help="two-body coupling J")
        common.add_argument("--K", type=float, metavar="X", help="four-body coupling K")
        common.add_argument("--N", type=int, metavar="INT", help="number of spins")
        common.add_argument("--t-max", type=float, metavar="X", help="last time point (units of 1/J)")
        common.add_argument("--t-steps", type=int, metavar="INT", help="number of time points")
        common.add_argument("--opt", action="append", default=[], metavar="KEY=VALUE",
                            help="command option, VALUE parsed as JSON; repeatable")
    common.add_argument("--out", metavar="DIR", help=f"output directory (default ${ENV_OUT} or ./{DEFAULT_OUT})")
    common.add_argument("--format", choices=("csv", "json"), help="table format (default csv)")
    common.add_argument("--workers", type=int, metavar="INT", help="worker threads for sweeps (default 1)")
    common.add_argument("--plot-script", action="store_true", help="also write plot.py for the emitted tables")
    return common


def _command_epilog(name: str) -> str:
    sets = ", ".join(f"{s.label} (h={s.params.h:g} J={s.params.J:g} K={s.params.K:g} N={s.params.N})"
                     for s in default_sets(name))
    lines = [f"default parameter sets: {sets}"]
    opts = OPTION_DEFAULTS[name]
    if opts:
        lines.append("--opt keys (defaults):")
        lines += [f"  {k}={json.dumps(v)}" for k, v in opts.items()]
    else:
        lines.append("--opt keys: none")
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinlyap",
        description="Lyapunov-enhanced metrology with two- and four-body collective spin models.",
        epilog=_EPILOG,
        formatter_class=_formatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="<command>", required=True)
    common = _common_parser(with_params=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=COMMAND_HELP[name], description=COMMAND_HELP[name],
                       epilog=_command_epilog(name), formatter_class=_formatter)
    fig = sub.add_parser(
        "figure",
        parents=[_common_parser(with_params=False)],
        help="data series needed to replot one figure",
        description="data series needed to replot one figure",
        formatter_class=_formatter,
    )
    fig.add_argument("figure_id", choices=FIGURES, help="figure to reproduce")
    return parser


def help_text(argv: list[str] | None = None) -> str:
    """Help output for ``argv`` (top level when empty), as printed by ``--help``."""
    parser = build_parser()
    if not argv:
        return parser.format_help()
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    return sub.choices[argv[0]].format_help()


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def _parse_opts(pairs: list[str]) -> dict:
    options = {}
    for item in pairs:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--opt expects KEY=VALUE, got {item!r}")
        try:
            options[key] = json.loads(raw)
        except json.JSONDecodeError:
            options[key] = raw
    return options


def _default_out(config: dict) -> str | None:
    inner = config.get("config", config) if isinstance(config.get("config"), dict) else config
    if "out" in inner:
        return None
    return os.environ.get(ENV_OUT) or DEFAULT_OUT


def plot_script_text(files: list[Path]) -> str:
    names = ", ".join(repr(f.name) for f in files if f.suffix == ".csv")
    return f'''"""Quick-look plots for the tables in this directory (requires matplotlib)."""
import csv
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
FILES = [{names}]


def load(name):
    with open(HERE / name) as fh:
        units = fh.readline()
        rows = list(csv.DictReader(fh))
    return units, rows


for name in FILES:
    units, rows = load(name)
    if not rows:
        continue
    cols = list(rows[0])
    fig, ax = plt.subplots()
    if {{"h_over_J", "K_over_J", "lambda"}} <= set(cols):
        sc = ax.scatter([float(r["h_over_J"]) for r in rows], [float(r["K_over_J"]) for r in rows],
                        c=[float(r["lambda"]) for r in rows], s=2)
        fig.colorbar(sc, label="lambda")
        ax.set_xlabel("h/J")
        ax.set_ylabel("K/J")
    elif {{"Q", "P", "value"}} <= set(cols):
        last = rows[-1].get("Jt")
        sel = [r for r in rows if r.get("Jt") == last]
        sc = ax.scatter([float(r["Q"]) for r in sel], [float(r["P"]) for r in sel],
                        c=[float(r["value"]) for r in sel], s=1)
        fig.colorbar(sc)
        ax.set_aspect("equal")
    else:
        numeric = [c for c in cols if c not in ("series", "region", "stability", "model")]
        x, ys = numeric[0], numeric[1:]
        for y in ys:
            ax.plot([float(r[x]) for r in rows], [float(r[y]) for r in rows], label=y)
        ax.set_xlabel(x)
        if ys[1:] or ys[:1] == ["one_minus_F"]:
            ax.legend()
        if x == "delta_phi":
            ax.set_xscale("log")
            ax.set_yscale("log")
    ax.set_title(name)
    fig.savefig(HERE / (Path(name).stem + ".png"), dpi=150)
'''


def _run_command(args) -> int:
    config = _load_config(args.config)
    overrides = {
        "h": args.h, "J": args.J, "K": args.K, "N": args.N,
        "t_max": args.t_max, "t_steps": args.t_steps,
        "out": args.out or _default_out(config),
        "format": args.format, "workers": args.workers,
        "options": _parse_opts(args.opt),
    }
    cfg = resolve_config(args.command, config, overrides)
    result = run(cfg)
    if args.plot_script:
        (Path(cfg.out) / "plot.py").write_text(plot_script_text(result.files), encoding="utf-8")
    print(f"{cfg.command}: wrote {len(result.files)} table(s) and {result.manifest}")
    return EXIT_OK


def _run_figure(args) -> int:
    config = _load_config(args.config)
    if config:
        if config.get("figure") not in (None, args.figure_id):
            raise ConfigError(f"config is for figure {config.get('figure')!r}, not {args.figure_id!r}")
        unknown = set(config) - {"figure", "format", "workers", "out", "tool", "version", "backend", "outputs"}
        if unknown:
            raise ConfigError(f"figure config has unknown fields {sorted(unknown)}")
    out = args.out or config.get("out") or os.environ.get(ENV_OUT) or DEFAULT_OUT
    fmt = args.format or config.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"config field 'format' must be 'csv' or 'json', got {fmt!r}")
    workers = args.workers if args.workers is not None else config.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError(f"config field 'workers' must be an integer >= 1, got {workers!r}")
    tables = reproduce_figure(args.figure_id, workers)
    result = write_outputs(tables, Path(out), fmt, {"figure": args.figure_id, "format": fmt, "workers": workers,
                                                    "out": out})
    if args.plot_script:
        (Path(out) / "plot.py").write_text(plot_script_text(result.files), encoding="utf-8")
    print(f"{args.figure_id}: wrote {len(result.files)} table(s) and {result.manifest}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "figure":
            return _run_figure(args)
        return _run_command(args)
    except NumericalInvariantError as exc:
        print(f"spinlyap: numerical invariant violated: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, RegionError, DomainError, InvalidDimensionError) as exc:
        print(f"spinlyap: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"spinlyap: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
