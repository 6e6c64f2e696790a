"""Run configuration: YAML schema, validation, overrides and serialization.

Schema (every key optional)::

    name: fig2a
    frame: rwa            # rwa | beyond_rwa
    dt: null              # integrator step; null picks the default
    log_base: e           # e | 2, base of the logarithmic negativity
    jobs: null            # worker processes; null means all cores
    params:               # SystemParams fields, plus the shortcuts
      g: 0.6              #   Gamma: reheating rate, sets n_th = Gamma / gamma
      Gamma: 0.06         #   eta:   sets eta_B, eta_R and eta_M together
    output:
      dir: out
      formats: [csv]      # csv and/or json
      plot: false         # also write an SVG per sweep
    sweeps:
      - name: gamma_scan
        variable: Gamma   # a params key, eta, or theta_B
        scale: log10      # linear | log10
        range: [1.0e-4, 1.0]
        points: 25
        targets: [S_db, E_N]
        bipartition: pm   # pm (pulse-mechanics) | pp (pulse-pulse)
        model: full       # full | adiabatic
        frame: null       # overrides the top-level frame
        angle_mode: fixed # theta_B scans: fixed | reoptimize
        overrides: {}     # params applied to this sweep only
        ensemble: null    # or {n: 40, rel_width: 0.1, seed: 0}

Scalar keys can be overridden from the environment with
``PULSEDOPTO_<PATH>`` where path segments are joined by ``__``, e.g.
``PULSEDOPTO_PARAMS__G=0.5`` or ``PULSEDOPTO_SWEEPS__0__POINTS=5``.
"""

from __future__ import annotations

import copy
import dataclasses
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ParseError, ValidationError
from .model import Frame, SystemParams
from .protocol import BIPARTITIONS, TARGETS

ENV_PREFIX = "PULSEDOPTO_"

PARAM_KEYS = tuple(f.name for f in dataclasses.fields(SystemParams))
PARAM_SHORTCUTS = ("Gamma", "eta")
ANGLE_VARIABLE = "theta_B"
SWEEP_VARIABLES = PARAM_KEYS + PARAM_SHORTCUTS + (ANGLE_VARIABLE,)
SCALES = ("linear", "log10")
MODELS = ("full", "adiabatic")
ANGLE_MODES = ("fixed", "reoptimize")
FORMATS = ("csv", "json")

TOP_KEYS = ("name", "frame", "dt", "log_base", "jobs", "params", "output", "sweeps")
OUTPUT_KEYS = ("dir", "formats", "plot")
SWEEP_KEYS = (
    "name",
    "variable",
    "scale",
    "range",
    "points",
    "targets",
    "bipartition",
    "model",
    "frame",
    "angle_mode",
    "overrides",
    "ensemble",
)
ENSEMBLE_KEYS = ("n", "rel_width", "seed")


@dataclass(frozen=True)
class EnsembleSpec:
    n: int = 40
    rel_width: float = 0.1
    seed: int = 0


@dataclass(frozen=True)
class SweepSpec:
    name: str = "sweep"
    variable: str = "Gamma"
    scale: str = "log10"
    range: tuple = (1e-4, 1.0)
    points: int = 25
    targets: tuple = ("S_db", "E_N")
    bipartition: str = "pm"
    model: str = "full"
    frame: str | None = None
    angle_mode: str = "fixed"
    overrides: dict = field(default_factory=dict)
    ensemble: EnsembleSpec | None = None

    def values(self):
        import numpy as np

        lo, hi = self.range
        if self.scale == "log10":
            return [float(v) for v in np.logspace(math.log10(lo), math.log10(hi), self.points)]
        return [float(v) for v in np.linspace(lo, hi, self.points)]


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    formats: tuple = ("csv",)
    plot: bool = False


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"
    frame: str = "rwa"
    dt: float | None = None
    log_base: str = "e"
    jobs: int | None = None
    params: SystemParams = field(default_factory=SystemParams)
    output: OutputSpec = field(default_factory=OutputSpec)
    sweeps: tuple = ()

    @property
    def log_base_value(self) -> float:
        return math.e if self.log_base == "e" else 2.0


# ---------------------------------------------------------------- parsing


class _Loader(yaml.SafeLoader):
    """Safe loader that reads ``1e-4`` and ``1.0e4`` as floats (YAML 1.2)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


def _line_of(node, key):
    """Line number (1-based) of ``key`` inside a composed YAML mapping node."""
    if not isinstance(node, yaml.MappingNode):
        return None
    for k, _ in node.value:
        if getattr(k, "value", None) == key:
            return k.start_mark.line + 1
    return None


def parse_text(text: str, path=None) -> dict:
    """Parse YAML text into a raw mapping, raising :class:`ParseError`."""
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ParseError(
            exc.problem or str(exc), path, None if mark is None else mark.line + 1
        ) from None
    except yaml.YAMLError as exc:
        raise ParseError(str(exc), path) from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ParseError(f"top level must be a mapping, got {type(data).__name__}", path, 1)
    return data


def apply_env_overrides(raw: dict, environ=None) -> dict:
    """Apply ``PULSEDOPTO_A__B=value`` overrides (values parsed as YAML scalars)."""
    environ = os.environ if environ is None else environ
    out = copy.deepcopy(raw)
    for name in sorted(environ):
        if not name.startswith(ENV_PREFIX):
            continue
        path = name[len(ENV_PREFIX) :].split("__")
        # only schema paths count; other PULSEDOPTO_* variables are switches
        if path[0].lower() not in TOP_KEYS:
            continue
        set_path(out, path, parse_scalar(environ[name]), case_insensitive=True)
    return out


def parse_scalar(text: str):
    try:
        return yaml.load(text, Loader=_Loader)
    except yaml.YAMLError:
        return text


def _schema_keys(container, parent_key):
    if parent_key is None:
        return TOP_KEYS
    return {
        "params": PARAM_KEYS + PARAM_SHORTCUTS,
        "overrides": PARAM_KEYS + PARAM_SHORTCUTS,
        "output": OUTPUT_KEYS,
        "ensemble": ENSEMBLE_KEYS,
        "sweeps": SWEEP_KEYS,
    }.get(parent_key, tuple(container))


def set_path(raw: dict, path, value, case_insensitive: bool = False):
    """Set a nested key; integer segments index into lists."""
    node, parent_key = raw, None
    for i, seg in enumerate(path):
        last = i == len(path) - 1
        if isinstance(node, list):
            try:
                idx = int(seg)
                node[idx]
            except (ValueError, IndexError):
                raise ValidationError([f"{'.'.join(path)}: no list element {seg!r}"]) from None
            if last:
                node[idx] = value
                return
            node = node[idx]
            continue
        key = seg
        if case_insensitive:
            # an exact spelling wins, so PARAMS__Gamma and PARAMS__GAMMA differ
            known = list(_schema_keys(node, parent_key)) + list(node)
            matches = [k for k in known if k.lower() == seg.lower()]
            if matches and seg not in matches:
                key = matches[0]
        if last:
            node[key] = value
            return
        if node.get(key) is None:
            node[key] = {}
        parent_key = key
        node = node[key]


# ------------------------------------------------------------- validation


def _unknown(mapping, allowed, where, problems):
    for k in mapping:
        if k not in allowed:
            problems.append(f"{where}: unknown key {k!r} (allowed: {', '.join(allowed)})")


def _number(v, where, problems, integer=False, allow_none=False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        problems.append(f"{where}: expected a number, got {v!r}")
        return None
    if integer:
        if float(v) != int(v):
            problems.append(f"{where}: expected an integer, got {v!r}")
            return None
        return int(v)
    return float(v)


def build_params(raw: dict | None, where: str, problems: list, base: SystemParams | None = None):
    raw = raw or {}
    if not isinstance(raw, dict):
        problems.append(f"{where}: expected a mapping")
        return base or SystemParams()
    _unknown(raw, PARAM_KEYS + PARAM_SHORTCUTS, where, problems)
    vals = {}
    for k, v in raw.items():
        if k not in PARAM_KEYS + PARAM_SHORTCUTS:
            continue
        if k == "tau_R" and v is None:
            vals[k] = None
            continue
        x = _number(v, f"{where}.{k}", problems)
        if x is not None:
            vals[k] = x
    eta = vals.pop("eta", None)
    if eta is not None:
        for k in ("eta_B", "eta_R", "eta_M"):
            vals.setdefault(k, eta)
    if "Gamma" in vals and "n_th" in vals:
        problems.append(f"{where}: give either Gamma or n_th, not both")
        vals.pop("n_th")
    base = base or SystemParams()
    fields = {**base.to_dict(), **{k: v for k, v in vals.items() if k != "Gamma"}}
    Gamma = vals.get("Gamma")
    if Gamma is not None:
        if Gamma < 0:
            problems.append(f"{where}.Gamma: must be >= 0 (got {Gamma!r})")
            Gamma = None
        elif fields["gamma"] == 0 and Gamma > 0:
            problems.append(f"{where}.Gamma: needs a nonzero gamma")
            Gamma = None
    probe = dict(fields)
    if Gamma is not None:
        probe["n_th"] = Gamma / probe["gamma"] if probe["gamma"] > 0 else 0.0
    try:
        return SystemParams(**probe)
    except ValueError:
        # collect every violated bound with the offending key names
        bad = object.__new__(SystemParams)
        for k, v in probe.items():
            object.__setattr__(bad, k, v)
        problems.extend(f"{where}: {msg}" for msg in SystemParams.problems(bad))
        return base


def _choice(v, allowed, where, problems, default=None):
    if v is None:
        return default
    if v not in allowed:
        problems.append(f"{where}: {v!r} is not one of {', '.join(allowed)}")
        return default
    return v


def _frame(v, where, problems, default):
    if v is None:
        return default
    try:
        return Frame.parse(v).value
    except ValueError:
        problems.append(f"{where}: unknown frame {v!r}")
        return default


def _build_sweep(raw, i, base_params, problems) -> SweepSpec | None:
    where = f"sweeps[{i}]"
    if not isinstance(raw, dict):
        problems.append(f"{where}: expected a mapping")
        return None
    _unknown(raw, SWEEP_KEYS, where, problems)
    d = SweepSpec()
    name = str(raw.get("name", f"sweep{i}"))
    variable = _choice(raw.get("variable"), SWEEP_VARIABLES, f"{where}.variable", problems, d.variable)
    scale = _choice(raw.get("scale"), SCALES, f"{where}.scale", problems, d.scale)
    rng = raw.get("range", list(d.range))
    lo = hi = None
    if not isinstance(rng, (list, tuple)) or len(rng) != 2:
        problems.append(f"{where}.range: expected [lo, hi], got {rng!r}")
    else:
        lo = _number(rng[0], f"{where}.range[0]", problems)
        hi = _number(rng[1], f"{where}.range[1]", problems)
    if lo is not None and hi is not None:
        if not lo < hi:
            problems.append(f"{where}.range: need lo < hi, got [{lo}, {hi}]")
        if scale == "log10" and not lo > 0:
            problems.append(f"{where}.range: log10 scale needs lo > 0, got {lo}")
    points = _number(raw.get("points", d.points), f"{where}.points", problems, integer=True)
    if points is not None and points < 2:
        problems.append(f"{where}.points: need at least 2, got {points}")
    targets = raw.get("targets", list(d.targets))
    if isinstance(targets, str):
        targets = [targets]
    if not isinstance(targets, (list, tuple)) or not targets:
        problems.append(f"{where}.targets: expected a non-empty list")
        targets = list(d.targets)
    for t in targets:
        _choice(t, TARGETS, f"{where}.targets", problems)
    bip = _choice(raw.get("bipartition"), BIPARTITIONS, f"{where}.bipartition", problems, d.bipartition)
    model = _choice(raw.get("model"), MODELS, f"{where}.model", problems, d.model)
    frame = _frame(raw.get("frame"), f"{where}.frame", problems, None)
    amode = _choice(raw.get("angle_mode"), ANGLE_MODES, f"{where}.angle_mode", problems, d.angle_mode)
    if variable == ANGLE_VARIABLE and bip != "pp":
        problems.append(f"{where}: theta_B scans need bipartition pp")
    overrides = raw.get("overrides") or {}
    if not isinstance(overrides, dict):
        problems.append(f"{where}.overrides: expected a mapping")
        overrides = {}
    build_params(overrides, f"{where}.overrides", problems, base_params)
    ens = raw.get("ensemble")
    ensemble = None
    if ens is not None:
        if not isinstance(ens, dict):
            problems.append(f"{where}.ensemble: expected a mapping or null")
        else:
            _unknown(ens, ENSEMBLE_KEYS, f"{where}.ensemble", problems)
            de = EnsembleSpec()
            n = _number(ens.get("n", de.n), f"{where}.ensemble.n", problems, integer=True)
            w = _number(ens.get("rel_width", de.rel_width), f"{where}.ensemble.rel_width", problems)
            s = _number(ens.get("seed", de.seed), f"{where}.ensemble.seed", problems, integer=True)
            if n is not None and n < 1:
                problems.append(f"{where}.ensemble.n: need n >= 1")
            if w is not None and not 0 <= w < 1:
                problems.append(f"{where}.ensemble.rel_width: need 0 <= rel_width < 1")
            if s is not None and s < 0:
                problems.append(f"{where}.ensemble.seed: need seed >= 0")
            if None not in (n, w, s):
                ensemble = EnsembleSpec(n, w, s)
    return SweepSpec(
        name=name,
        variable=variable,
        scale=scale,
        range=(lo if lo is not None else d.range[0], hi if hi is not None else d.range[1]),
        points=points if points is not None else d.points,
        targets=tuple(targets),
        bipartition=bip,
        model=model,
        frame=frame,
        angle_mode=amode,
        overrides=dict(overrides),
        ensemble=ensemble,
    )


def build_config(raw: dict) -> RunConfig:
    """Validate a raw mapping into a :class:`RunConfig`, reporting every problem."""
    problems: list[str] = []
    if not isinstance(raw, dict):
        raise ValidationError([f"top level must be a mapping, got {type(raw).__name__}"])
    _unknown(raw, TOP_KEYS, "config", problems)
    d = RunConfig()
    name = str(raw.get("name", d.name))
    frame = _frame(raw.get("frame"), "frame", problems, d.frame)
    dt = _number(raw.get("dt"), "dt", problems, allow_none=True)
    if dt is not None and not dt > 0:
        problems.append(f"dt: must be > 0, got {dt}")
    log_base = raw.get("log_base", d.log_base)
    log_base = {2: "2", "2": "2", "e": "e"}.get(log_base, log_base)
    log_base = _choice(log_base, ("e", "2"), "log_base", problems, d.log_base)
    jobs = _number(raw.get("jobs"), "jobs", problems, integer=True, allow_none=True)
    if jobs is not None and jobs < 1:
        problems.append(f"jobs: need jobs >= 1, got {jobs}")
    params = build_params(raw.get("params"), "params", problems)

    out_raw = raw.get("output") or {}
    output = d.output
    if not isinstance(out_raw, dict):
        problems.append("output: expected a mapping")
    else:
        _unknown(out_raw, OUTPUT_KEYS, "output", problems)
        formats = out_raw.get("formats", list(output.formats))
        if isinstance(formats, str):
            formats = [formats]
        if not isinstance(formats, (list, tuple)):
            problems.append("output.formats: expected a list")
            formats = list(output.formats)
        for f in formats:
            _choice(f, FORMATS, "output.formats", problems)
        plot = out_raw.get("plot", output.plot)
        if not isinstance(plot, bool):
            problems.append(f"output.plot: expected true or false, got {plot!r}")
            plot = output.plot
        output = OutputSpec(str(out_raw.get("dir", output.dir)), tuple(formats), plot)

    sweeps_raw = raw.get("sweeps") or []
    sweeps = []
    if not isinstance(sweeps_raw, list):
        problems.append("sweeps: expected a list")
    else:
        for i, s in enumerate(sweeps_raw):
            sw = _build_sweep(s, i, params, problems)
            if sw is not None:
                sweeps.append(sw)
        names = [s.name for s in sweeps]
        for n in sorted({n for n in names if names.count(n) > 1}):
            problems.append(f"sweeps: duplicate name {n!r}")
    if problems:
        raise ValidationError(problems)
    return RunConfig(name, frame, dt, log_base, jobs, params, output, tuple(sweeps))


def _locate(problems, node):
    """Attach line numbers of offending top-level keys where possible."""
    out = []
    for msg in problems:
        head = msg.split(":", 1)[0].split(".")[0].split("[")[0]
        line = _line_of(node, head) if node is not None else None
        out.append(f"line {line}: {msg}" if line else msg)
    return out


def load_text(text: str, path=None, environ=None, overrides=None) -> RunConfig:
    raw = parse_text(text, path)
    raw = apply_env_overrides(raw, environ)
    for key, value in (overrides or {}).items():
        set_path(raw, key.split("."), value)
    try:
        return build_config(raw)
    except ValidationError as exc:
        try:
            node = yaml.compose(text, Loader=_Loader)
        except yaml.YAMLError:
            node = None
        raise ValidationError(_locate(exc.problems, node)) from None


def load_config(path, environ=None, overrides=None) -> RunConfig:
    """Read, override and validate a configuration file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc.strerror}", path) from None
    return load_text(text, path, environ, overrides)


# ---------------------------------------------------------- serialization


def to_dict(cfg: RunConfig) -> dict:
    def sweep(s: SweepSpec):
        return {
            "name": s.name,
            "variable": s.variable,
            "scale": s.scale,
            "range": [float(s.range[0]), float(s.range[1])],
            "points": s.points,
            "targets": list(s.targets),
            "bipartition": s.bipartition,
            "model": s.model,
            "frame": s.frame,
            "angle_mode": s.angle_mode,
            "overrides": dict(s.overrides),
            "ensemble": None if s.ensemble is None else dataclasses.asdict(s.ensemble),
        }

    return {
        "name": cfg.name,
        "frame": cfg.frame,
        "dt": cfg.dt,
        "log_base": cfg.log_base,
        "jobs": cfg.jobs,
        "params": cfg.params.to_dict(),
        "output": {
            "dir": cfg.output.dir,
            "formats": list(cfg.output.formats),
            "plot": cfg.output.plot,
        },
        "sweeps": [sweep(s) for s in cfg.sweeps],
    }


def serialize(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def sweep_params(cfg: RunConfig, sweep: SweepSpec) -> SystemParams:
    problems: list[str] = []
    p = build_params(sweep.overrides, f"{sweep.name}.overrides", problems, cfg.params)
    if problems:
        raise ValidationError(problems)
    return p
