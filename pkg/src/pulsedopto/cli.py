"""Command-line front end.

Exit codes: 0 on success, 2 when any sweep point (or the single point) failed,
1 on configuration or usage errors.

Any config key can be overridden with a flag named after its path, for
example ``--params.g=0.4`` or ``--sweeps.0.points 5``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, _accel
from . import measures as ms
from .config import (
    ANGLE_VARIABLE,
    RunConfig,
    SweepSpec,
    load_config,
    load_text,
    parse_scalar,
    serialize,
)
from .errors import ConfigError, PulsedOptoError
from .output import csv_text, write_output
from .protocol import optimize_max_gamma
from .sweep import run_sweep, state_for

log = logging.getLogger("pulsedopto")

EXIT_OK, EXIT_CONFIG, EXIT_POINT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def recipe_names() -> list[str]:
    root = resources.files("pulsedopto") / "recipes"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def recipe_text(name: str) -> str:
    path = resources.files("pulsedopto") / "recipes" / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError(f"no recipe {name!r}; available: {', '.join(recipe_names())}")
    return path.read_text(encoding="utf-8")


def _recipe_summary(name: str) -> str:
    for line in recipe_text(name).splitlines():
        if line.startswith("#"):
            return line.lstrip("# ").strip()
    return ""


def parse_overrides(tokens: list[str]) -> dict:
    """Turn leftover ``--a.b=value`` / ``--a.b value`` tokens into a mapping."""
    out, i = {}, 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, text = key.split("=", 1)
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"flag --{key} needs a value")
            i += 1
            text = tokens[i]
        out[key] = parse_scalar(text)
        i += 1
    return out


def _load(args, overrides) -> RunConfig:
    if getattr(args, "recipe", None):
        return load_text(recipe_text(args.recipe), f"recipe:{args.recipe}", overrides=overrides)
    if args.config:
        return load_config(args.config, overrides=overrides)
    return load_text("", "<defaults>", overrides=overrides)


def _build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pulsedopto", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def common(p, recipe=False):
        p.add_argument("-c", "--config", help="YAML run configuration")
        if recipe:
            p.add_argument("-r", "--recipe", help="use a shipped recipe instead of --config")

    p = sub.add_parser("point", help="evaluate one parameter point and print its measures")
    common(p)
    p.add_argument("--bipartition", choices=("pm", "pp", "both"), default="both")
    p.add_argument("--model", choices=("full", "adiabatic"), default="full")
    p.add_argument("--json", action="store_true", help="print JSON instead of text")

    p = sub.add_parser("sweep", help="run every sweep of a config and write tables")
    common(p, recipe=True)
    p.add_argument("-o", "--out", help="output directory (overrides output.dir)")
    p.add_argument("-j", "--jobs", type=int, help="worker processes (default: all cores)")
    p.add_argument("--format", nargs="+", choices=("csv", "json"), help="output formats")
    p.add_argument("--plot", action="store_true", help="also write SVG plots")
    p.add_argument("--only", action="append", help="run only the named sweep (repeatable)")

    p = sub.add_parser("angles", help="scan the B-detector phase for the pulse-pulse state")
    common(p)
    p.add_argument("--points", type=int, default=361)
    p.add_argument("--mode", choices=("fixed", "reoptimize"), default="fixed")
    p.add_argument("-o", "--out", help="directory for angles.csv (default: stdout)")
    p.add_argument("--plot", action="store_true")

    p = sub.add_parser("optimize", help="search coupling and duration for the largest Gamma")
    common(p)
    p.add_argument("--bipartition", choices=("pm", "pp"), default="pm")
    p.add_argument("--g", type=float, nargs="+", default=[0.2, 0.3, 0.4, 0.5, 0.6])
    p.add_argument("--tau", type=float, nargs="+", default=[1.0, 2.0, 4.0, 8.0, 12.0, 16.0])
    p.add_argument("--rtol", type=float, default=0.02, help="relative tolerance on Gamma")

    p = sub.add_parser("recipes", help="list the shipped recipes")
    p.add_argument("--show", metavar="NAME", help="print one recipe")
    p.add_argument("--resolved", action="store_true", help="print it with all defaults filled in")
    return ap


def _cmd_point(args, cfg: RunConfig) -> int:
    parts = ("pm", "pp") if args.bipartition == "both" else (args.bipartition,)
    report, status = {}, EXIT_OK
    for bip in parts:
        spec = SweepSpec(name="point", bipartition=bip, model=args.model)
        try:
            V = state_for(cfg.params, spec, cfg.frame, cfg.dt, cfg.log_base_value)
            report[bip] = ms.compute_measures(V, base=cfg.log_base_value).as_dict()
        except (PulsedOptoError, ValueError) as exc:
            report[bip] = {"error": f"{type(exc).__name__}: {exc}"}
            status = EXIT_POINT
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        for bip, vals in report.items():
            body = "  ".join(
                f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in vals.items()
            )
            print(f"{bip}: {body}")
    return status


def _cmd_sweep(args, cfg: RunConfig) -> int:
    sweeps = [s for s in cfg.sweeps if not args.only or s.name in args.only]
    if args.only:
        missing = set(args.only) - {s.name for s in sweeps}
        if missing:
            raise ConfigError(f"no sweep named {', '.join(sorted(missing))}")
    if not sweeps:
        raise ConfigError("the configuration defines no sweeps")
    out_dir = Path(args.out or cfg.output.dir)
    formats = tuple(args.format or cfg.output.formats)
    plot = args.plot or cfg.output.plot
    status = EXIT_OK
    for s in sweeps:
        log.info("sweep %s: %d points of %s", s.name, s.points, s.variable)
        table = run_sweep(cfg, s, args.jobs)
        for path in write_output(table, out_dir, formats, plot):
            print(path)
        if table.has_errors:
            n = sum(1 for r in table.rows if r.error)
            print(f"{s.name}: {n} point(s) reported errors", file=sys.stderr)
            status = EXIT_POINT
    return status


def _cmd_angles(args, cfg: RunConfig) -> int:
    if args.points < 2:
        raise ConfigError("--points must be >= 2")
    spec = SweepSpec(
        name="angles",
        variable=ANGLE_VARIABLE,
        scale="linear",
        range=(0.0, 2.0 * math.pi),
        points=args.points,
        targets=("S_db",),
        bipartition="pp",
        angle_mode=args.mode,
    )
    table = run_sweep(cfg, spec, jobs=1)
    if args.out:
        for path in write_output(table, args.out, ("csv",), args.plot):
            print(path)
    else:
        sys.stdout.write(csv_text(table))
    if table.has_errors:
        print(table.rows[0].error, file=sys.stderr)
        return EXIT_POINT
    S = table.column("S_db")
    width = 2.0 * math.pi * float(np.mean(S[:-1] > 0))
    print(f"peak {S.max():.6g} dB, positive window {width:.6g} rad", file=sys.stderr)
    return EXIT_OK


def _cmd_optimize(args, cfg: RunConfig) -> int:
    res = optimize_max_gamma(
        cfg.params,
        g_values=args.g,
        tau_values=args.tau,
        bipartition=args.bipartition,
        frame=cfg.frame,
        rtol=args.rtol,
        dt=cfg.dt,
    )
    print("g,tau,Gamma_crit")
    for g, tau, gc in res.grid:
        print(f"{g!r},{tau!r},{gc!r}")
    print(f"best: g={res.g} tau={res.tau} Gamma_crit={res.gamma_crit:.6g}", file=sys.stderr)
    return EXIT_OK


def _cmd_recipes(args) -> int:
    if args.show:
        text = recipe_text(args.show)
        if args.resolved:
            text = serialize(load_text(text, f"recipe:{args.show}"))
        sys.stdout.write(text)
        return EXIT_OK
    for name in recipe_names():
        print(f"{name:8s} {_recipe_summary(name)}")
    return EXIT_OK


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        args, rest = ap.parse_known_args(argv)
    except SystemExit as exc:  # usage errors, --help and --version
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    log.info("kernel backend: %s", _accel.backend_name())
    try:
        if args.verb == "recipes":
            if rest:
                raise ConfigError(f"unexpected arguments {rest}")
            return _cmd_recipes(args)
        cfg = _load(args, parse_overrides(rest))
        return {
            "point": _cmd_point,
            "sweep": _cmd_sweep,
            "angles": _cmd_angles,
            "optimize": _cmd_optimize,
        }[args.verb](args, cfg)
    except (ConfigError, ValueError) as exc:
        # ValueError here comes from parameter checks outside the schema
        print(f"pulsedopto: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
