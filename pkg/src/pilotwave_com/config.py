"""Experiment configuration: YAML files validated against a typed schema.

Unknown keys are rejected; the resolved configuration echoes every default
so runs are reproducible from their metadata file alone.
"""

import copy
from dataclasses import dataclass
from importlib import resources

import yaml

from .errors import ConfigError

EXPERIMENTS = ("fig1", "fig2", "fig3", "fig4", "fig5", "appendix-a",
               "appendix-b", "cat-state", "custom")


@dataclass(frozen=True)
class Field:
    default: object
    kind: type
    choices: tuple | None = None
    required: bool = False

    def coerce(self, value, path):
        if value is None and not self.required:
            return self.default
        if self.kind is float and isinstance(value, int):
            value = float(value)
        if self.kind is float and isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                raise ConfigError(f"{path}: expected a number, got {value!r}")
        if not isinstance(value, self.kind) or (self.kind is not bool
                                                and isinstance(value, bool)):
            raise ConfigError(
                f"{path}: expected {self.kind.__name__}, got {type(value).__name__}")
        if self.choices and value not in self.choices:
            raise ConfigError(f"{path}: {value!r} not one of {self.choices}")
        return value


def _num(default):
    return Field(default, float)


SCHEMA = {
    "experiment": Field(None, str, choices=EXPERIMENTS, required=True),
    "seed": Field(0, int),
    "output": {
        "directory": Field("", str),
        "svg": Field(True, bool),
    },
    "physics": {
        "units": Field("natural", str, choices=("natural", "si")),
        "mass": _num(1.0),
        "hbar": _num(1.0),
        "engine": Field("quantum", str, choices=("quantum", "classical")),
        "packet": {"sigma": _num(1.0), "x0": _num(0.0), "k0": _num(0.0)},
        "potential": {
            "kind": Field("constant", str,
                          choices=("constant", "linear", "harmonic",
                                   "uniform_field")),
            "v0": _num(0.0),
            "slope": _num(0.0),
            "k": _num(0.0),
            "x_center": _num(0.0),
            "field_strength": _num(0.0),
            "charge": _num(0.0),
        },
    },
    "numerics": {
        "grid": {"x_min": _num(-20.0), "x_max": _num(20.0),
                 "n_points": Field(2048, int)},
        "dt": _num(1e-3),
        "t_max": _num(1.0),
        "record_stride": Field(1, int),
        "trajectory_stride": Field(1, int),
        "n_trajectories": Field(0, int),
        "n_plot_trajectories": Field(24, int),
        "sampling": Field("stratified", str, choices=("stratified", "born")),
        "filter_cutoff": _num(0.0),
    },
    "com_convergence": {
        "n_values": Field((4, 8, 12, 16, 20), tuple),
        "n_seeds": Field(10, int),
        "mode": Field("both", str,
                      choices=("exchange", "distinguishable", "both")),
        "sigma": _num(15e-9),
        "x_left_range": Field((200e-9, 400e-9), tuple),
        "x_right_range": Field((800e-9, 1000e-9), tuple),
        "k_left_range": Field((0.05e9, 0.15e9), tuple),
        "k_right_range": Field((-0.15e9, -0.05e9), tuple),
        "field_strength": _num(3.3e5),
        "charge": _num(1.602176634e-19),
        "mass": _num(9.1093837015e-31),
        "hbar": _num(1.054571817e-34),
        "t_max_natural": _num(12.0),
        "n_record": Field(120, int),
        "points_per_sigma": _num(20.0),
    },
    "cat": {
        "n_particles": Field(10, int),
        "n_experiments": Field(1000, int),
        "sigma": _num(1.0),
        "x_left": _num(-20.0),
        "x_right": _num(20.0),
        "product_n": Field(10000, int),
    },
}


def _resolve(schema, data, path=""):
    if isinstance(schema, Field):
        return schema.coerce(data, path or "<root>")
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path or '<root>'}: expected a mapping")
    unknown = set(data) - set(schema)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key {path + '.' if path else ''}{key}")
    out = {}
    for key, sub in schema.items():
        sub_path = f"{path}.{key}" if path else key
        if isinstance(sub, Field):
            if sub.required and key not in data:
                raise ConfigError(f"missing required key {sub_path}")
            value = data.get(key)
            if isinstance(value, list) and sub.kind is tuple:
                value = tuple(tuple(v) if isinstance(v, list) else v
                              for v in value)
            out[key] = sub.coerce(value, sub_path)
        else:
            out[key] = _resolve(sub, data.get(key), sub_path)
    return out


def resolve_config(data: dict) -> dict:
    """Validate a raw mapping and fill in every default."""
    return _resolve(SCHEMA, data)


def load_config(path: str) -> dict:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raise ConfigError(f"{path}: empty configuration")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return resolve_config(raw)


def preset_names() -> list:
    files = resources.files("pilotwave_com").joinpath("presets")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".yaml"))


def load_preset(name: str) -> dict:
    files = resources.files("pilotwave_com").joinpath("presets")
    target = files.joinpath(f"{name}.yaml")
    if not target.is_file():
        raise ConfigError(f"no preset named {name!r}; "
                          f"available: {', '.join(preset_names())}")
    raw = yaml.safe_load(target.read_text())
    return resolve_config(raw)


def dump_config(config: dict) -> str:
    cfg = copy.deepcopy(config)
    return yaml.safe_dump(cfg, sort_keys=True)
