"""Scenario configuration: a flat YAML document with validated, defaulted fields."""

from __future__ import annotations

import difflib
from dataclasses import asdict, dataclass, field, fields

import yaml

from .errors import ParseError, ValidationError
from .model import GRW_LAMBDA_SI, GRW_RC_SI

SCENARIOS = ("cat", "control", "negative-control", "sound", "gisin", "custom")
INITIAL_STATES = ("gaussian", "cat", "basis", "uniform")
METHOD_NAMES = ("jump", "diffusive", "repeated_z", "repeated_x")

# the literature values, kept for reference in every output header
DOCUMENTATION_CONSTANTS = {"grw_lambda_per_s": GRW_LAMBDA_SI, "grw_r_c_m": GRW_RC_SI}


@dataclass
class ScenarioConfig:
    scenario: str
    seed: int
    n_sites: int = 64
    x_min: float = -8.0
    x_max: float = 8.0
    # "lambda" in documents; a Python keyword, hence the trailing underscore
    lambda_: float = 1.0
    r_c: float = 1.0
    mass: float = 1.0
    free: bool = True
    initial_state: str = "cat"
    x0: float = 0.0
    p0: float = 0.0
    sigma: float = 0.3
    x1: float = -2.0
    x2: float = 2.0
    site: int = 0
    methods: list = field(default_factory=lambda: ["jump", "diffusive"])
    m: int = 2000
    t_final: float = 5.0
    dt: float = 0.005
    output_dt: float = 0.1
    tau: float = 0.01
    negative_control_ratio: float = 2.0
    dump_density: bool = False
    threads: int = 1
    output_dir: str = "out"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


def _key_map():
    return {("lambda" if f.name == "lambda_" else f.name): f for f in fields(ScenarioConfig)}


KNOWN_KEYS = tuple(_key_map())


def _coerce(name, f, value):
    kind = f.type
    if kind == "bool":
        if not isinstance(value, bool):
            raise ValidationError(name, f"expected true/false, got {value!r}")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(name, f"expected an integer, got {value!r}")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(name, f"expected a number, got {value!r}")
        return float(value)
    if kind == "list":
        if isinstance(value, str):
            value = [value]
        if not isinstance(value, list):
            raise ValidationError(name, f"expected a list, got {value!r}")
        return list(value)
    if not isinstance(value, str):
        raise ValidationError(name, f"expected a string, got {value!r}")
    return value


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    if cfg.scenario not in SCENARIOS:
        raise ValidationError("scenario", f"unknown scenario {cfg.scenario!r}; expected one of {SCENARIOS}")
    if cfg.n_sites < 8:
        raise ValidationError("n_sites", "must be >= 8")
    if not cfg.x_max > cfg.x_min:
        raise ValidationError("x_max", "must exceed x_min")
    if cfg.lambda_ < 0:
        raise ValidationError("lambda", "must be >= 0")
    for name in ("r_c", "mass", "sigma", "t_final", "dt", "output_dt", "tau", "negative_control_ratio"):
        if not getattr(cfg, name) > 0:
            raise ValidationError(name, "must be positive")
    for name in ("m", "threads"):
        if getattr(cfg, name) < 1:
            raise ValidationError(name, "must be >= 1")
    if cfg.initial_state not in INITIAL_STATES:
        raise ValidationError("initial_state", f"expected one of {INITIAL_STATES}")
    if not cfg.methods:
        raise ValidationError("methods", "must not be empty")
    for meth in cfg.methods:
        if meth not in METHOD_NAMES:
            raise ValidationError("methods", f"unknown method {meth!r}; expected one of {METHOD_NAMES}")
    if not 0 <= cfg.site < cfg.n_sites:
        raise ValidationError("site", "outside the grid")
    return cfg


def parse_config(text: str) -> ScenarioConfig:
    """Parse a YAML mapping into a validated :class:`ScenarioConfig`."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ParseError(f"malformed document{where}: {getattr(exc, 'problem', exc)}") from exc
    if not isinstance(doc, dict):
        raise ParseError("document must be a key-value mapping")
    keys = _key_map()
    values = {}
    for key, value in doc.items():
        if key not in keys:
            close = difflib.get_close_matches(str(key), KNOWN_KEYS, n=1)
            hint = f"; did you mean {close[0]!r}?" if close else ""
            raise ParseError(f"unknown key {key!r}{hint}")
        values[keys[key].name] = _coerce(key, keys[key], value)
    for required in ("scenario", "seed"):
        if required not in values:
            raise ValidationError(required, "is required")
    return validate(ScenarioConfig(**values))


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return parse_config(fh.read())
