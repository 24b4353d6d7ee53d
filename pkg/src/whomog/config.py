"""Plain-text run configuration: ``key = value`` lines, ``[section]`` headers, ``#`` comments.

Keys are addressed as ``section.key``.  A key may also be written fully
qualified outside any section.  Unknown keys are hard errors.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .errors import GeometryError, ParseError, ValidationError
from .geometry import parse_epsilon

COMMANDS = ("cell", "macro", "micro", "sweep", "check")


def _number(text):
    """Float from decimal or fraction notation such as ``1/32``."""
    t = text.strip()
    try:
        return float(Fraction(t)) if "/" in t else float(t)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a number: {text!r}") from None


def _reciprocal(key, text):
    v = _number(text)
    try:
        eps, _ = parse_epsilon(v)
    except GeometryError:
        raise ValidationError(key, f"1/{key.split('.')[-1]} must be a positive integer, got {text.strip()}") from None
    return eps


def _positive(key, v):
    if not v > 0:
        raise ValidationError(key, f"must be positive, got {v}")
    return v


def _nonneg(key, v):
    if not v >= 0:
        raise ValidationError(key, f"must be nonnegative, got {v}")
    return v


def _in_range(lo, hi):
    def check(key, v):
        if not lo <= v <= hi:
            raise ValidationError(key, f"must lie in [{lo}, {hi}], got {v}")
        return v
    return check


def _choice(*options):
    def check(key, v):
        if v not in options:
            raise ValidationError(key, f"must be one of {', '.join(options)}, got {v!r}")
        return v
    return check


@dataclass(frozen=True)
class Key:
    kind: str  # float | int | recip | str | recips | floats
    default: object
    check: object = None
    doc: str = ""


# name -> (kind, default, validator, description); this is the documented defaults table
KEYS = {
    "geometry.radius": Key("float", 0.25, _in_range(1e-3, 0.5), "inclusion radius"),
    "geometry.center_x": Key("float", 0.5, _in_range(0.0, 1.0), "inclusion center, x"),
    "geometry.center_y": Key("float", 0.5, _in_range(0.0, 1.0), "inclusion center, y"),
    "geometry.clearance": Key("float", 0.02, _nonneg, "minimum distance of the disc to the cell boundary"),
    "cell.h": Key("float", 0.05, _positive, "cell mesh size for the cell problems"),
    "cell.rtol": Key("float", 1e-12, _positive, "CG tolerance"),
    "macro.h": Key("recip", 1 / 32, None, "macro mesh size, 1/h integer"),
    "macro.dt": Key("float", 1e-3, _positive, "time step"),
    "macro.T": Key("float", 0.5, _nonneg, "final time"),
    "macro.cell_h": Key("float", 0.05, _positive, "cell mesh for D-hat and cell averages"),
    "micro.epsilon": Key("recip", 1 / 8, None, "period, 1/epsilon integer"),
    "micro.cell_h": Key("float", 0.1, _positive, "reference cell mesh size (micro h = epsilon * cell_h)"),
    "micro.dt": Key("float", 1e-3, _positive, "time step"),
    "micro.T": Key("float", 0.25, _nonneg, "final time"),
    "micro.theta": Key("float", 1.0, _positive, "theta of the trace inequality"),
    "sweep.epsilons": Key("recips", (0.5, 0.25, 0.125), None, "comma-separated list, each 1/N"),
    "sweep.cell_h": Key("float", 0.05, _positive, "reference cell mesh size"),
    "sweep.macro_h": Key("recip", 1 / 64, None, "macro mesh size; 1/h must be a multiple of every 1/epsilon"),
    "sweep.dt": Key("float", 1e-3, _positive, "time step of both levels"),
    "sweep.T": Key("float", 0.25, _positive, "final time"),
    "sweep.snapshots": Key("int", 11, _in_range(2, 10_000), "uniform snapshot count for time norms"),
    "sweep.ratio": Key("float", 0.9, _in_range(0.0, 1.0), "maximal error ratio between consecutive epsilons"),
    "model.diffusion": Key("str", "constant", _choice("constant", "periodic"), "diffusion family"),
    "model.d1": Key("float", 1.0, _positive, "bulk diffusivity, matrix"),
    "model.d2": Key("float", 1.0, _positive, "bulk diffusivity, inclusions"),
    "model.dg1": Key("float", 1.0, _positive, "surface diffusivity, matrix side"),
    "model.dg2": Key("float", 1.0, _positive, "surface diffusivity, inclusion side"),
    "model.diffusion_amplitude": Key("float", 0.25, _in_range(0.0, 0.49), "oscillation of the periodic family"),
    "model.reaction": Key("str", "exchange", _choice("none", "linear", "exchange", "logistic"), "reaction family"),
    "model.rate1": Key("float", 0.0, None, "linear: f^1 = -rate1 z"),
    "model.rate2": Key("float", 1.0, None, "linear: f^2 = -rate2 z"),
    "model.rate": Key("float", 1.0, None, "logistic growth rate"),
    "model.kappa": Key("float", 1.0, None, "exchange rate across the interface"),
    "model.kappa_amplitude": Key("float", 0.0, _in_range(-0.99, 0.99), "periodic modulation of kappa"),
    "model.lipschitz": Key("float", -1.0, None, "declared Lipschitz bound; negative keeps the catalog value"),
    "model.initial": Key("str", "smooth", _choice("smooth", "constant"), "initial profiles"),
    "model.c1": Key("float", 1.0, None, "constant initial value, component 1"),
    "model.c2": Key("float", 0.5, None, "constant initial value, component 2"),
    "output.dir": Key("str", "out", None, "output directory"),
    "output.times": Key("floats", (), None, "output times; empty means 11 uniform times"),
    "run.seed": Key("int", 0, None, "seed for randomized checks"),
    "check.fields": Key("int", 50, _in_range(1, 10_000), "random fields per identity check"),
}


def _convert(name, spec: Key, raw, line):
    try:
        if spec.kind == "float":
            v = _number(raw)
        elif spec.kind == "int":
            f = _number(raw)
            if f != int(f):
                raise ValidationError(name, f"must be an integer, got {raw.strip()}")
            v = int(f)
        elif spec.kind == "recip":
            return _reciprocal(name, raw)
        elif spec.kind == "recips":
            parts = [p for p in raw.split(",") if p.strip()]
            if not parts:
                raise ValidationError(name, "needs at least one value")
            return tuple(_reciprocal(name, p) for p in parts)
        elif spec.kind == "floats":
            return tuple(_number(p) for p in raw.split(",") if p.strip())
        else:
            v = raw.strip()
    except ValueError as exc:
        raise ValidationError(name, str(exc)) from None
    return spec.check(name, v) if spec.check else v


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {k: s.default for k, s in KEYS.items()})
    command: str = None
    explicit: frozenset = frozenset()

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def set(self, key, raw):
        """Set from text (CLI overrides); validates like the parser."""
        if key not in KEYS:
            raise ParseError(f"unknown key {key!r}")
        self.values[key] = _convert(key, KEYS[key], str(raw), None)
        self.explicit = self.explicit | {key}
        _cross_checks(self)
        return self

    def output_times(self, T):
        t = self.values["output.times"]
        if not t:
            return [T * i / 10 for i in range(11)]
        bad = [x for x in t if x < 0 or x > T * (1 + 1e-12)]
        if bad:
            raise ValidationError("output.times", f"times {bad} lie outside [0, {T}]")
        return sorted(t)


def _cross_checks(cfg: RunConfig):
    n_macro = round(1 / cfg.values["sweep.macro_h"])
    for eps in cfg.values["sweep.epsilons"]:
        if n_macro % round(1 / eps):
            raise ValidationError("sweep.macro_h", f"1/h={n_macro} is not a multiple of 1/epsilon={round(1 / eps)}")
    r = cfg.values["geometry.radius"]
    cx, cy = cfg.values["geometry.center_x"], cfg.values["geometry.center_y"]
    if min(cx - r, cy - r, 1 - cx - r, 1 - cy - r) < cfg.values["geometry.clearance"]:
        raise ValidationError("geometry.radius", "inclusion violates the clearance to the cell boundary")


def parse_config(text: str, command=None) -> RunConfig:
    cfg = RunConfig(command=command)
    section = None
    seen = {}
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("["):
            if not s.endswith("]") or len(s) < 3:
                raise ParseError(f"malformed section header {s!r}", no)
            section = s[1:-1].strip()
            if not any(k.startswith(section + ".") for k in KEYS):
                raise ParseError(f"unknown section [{section}]", no)
            continue
        if "=" not in s:
            raise ParseError(f"expected key = value, got {s!r}", no)
        key, raw = (p.strip() for p in s.split("=", 1))
        if not key:
            raise ParseError("empty key", no)
        name = key if "." in key or section is None else f"{section}.{key}"
        if name not in KEYS:
            raise ParseError(f"unknown key {name!r}", no)
        if name in seen:
            raise ParseError(f"duplicate key {name!r} (first set on line {seen[name]})", no)
        seen[name] = no
        cfg.values[name] = _convert(name, KEYS[name], raw, no)
    cfg.explicit = frozenset(seen)
    _cross_checks(cfg)
    return cfg


def _format(spec: Key, v):
    if spec.kind in ("recip",):
        return f"1/{round(1 / v)}"
    if spec.kind == "recips":
        return ", ".join(f"1/{round(1 / e)}" for e in v)
    if spec.kind == "floats":
        return ", ".join(repr(float(x)) for x in v)
    if spec.kind == "float":
        return repr(float(v))
    return str(v)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text: every key, grouped by section, in table order."""
    out, current = [], None
    for name, spec in KEYS.items():
        sec, key = name.split(".", 1)
        if sec != current:
            if current is not None:
                out.append("")
            out.append(f"[{sec}]")
            current = sec
        out.append(f"{key} = {_format(spec, cfg.values[name])}")
    return "\n".join(out) + "\n"


def defaults_table() -> str:
    rows = ["| key | default | meaning |", "|---|---|---|"]
    for name, spec in KEYS.items():
        rows.append(f"| `{name}` | `{_format(spec, spec.default)}` | {spec.doc} |")
    return "\n".join(rows)
