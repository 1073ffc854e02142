"""Run configuration: TOML parsing with full schema validation.

Every key is checked against the schema; unknown tables or keys reject the
config outright rather than being silently ignored, and type errors name
the offending [table] key. Scalar/list polymorphism is limited to the two
fields that describe multi-phase protocols (omega, iterations).
"""

import dataclasses
from dataclasses import dataclass, field

import tomli


class ConfigError(Exception):
    """Invalid run configuration (syntax, schema, or value range)."""


_REQUIRED = object()


def _check(table, key, value, types, label):
    # bool is an int subclass; never let true/false satisfy a numeric field
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(f"[{table}] {key}: expected {label}, got a boolean")
    if not isinstance(value, tuple(types)):
        raise ConfigError(
            f"[{table}] {key}: expected {label}, got {type(value).__name__}"
        )
    return value


def _number(table, key, value):
    v = _check(table, key, value, (int, float), "a number")
    return float(v)


def _integer(table, key, value):
    return _check(table, key, value, (int,), "an integer")


def _boolean(table, key, value):
    return _check(table, key, value, (bool,), "a boolean")


def _string(table, key, value):
    return _check(table, key, value, (str,), "a string")


def _number_list(table, key, value):
    _check(table, key, value, (list,), "a list of numbers")
    out = []
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"[{table}] {key}[{i}]: expected a number")
        out.append(float(v))
    return tuple(out)


def _number_or_list(table, key, value):
    if isinstance(value, list):
        return _number_list(table, key, value)
    return _number(table, key, value)


def _integer_or_list(table, key, value):
    if isinstance(value, list):
        out = []
        for i, v in enumerate(value):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"[{table}] {key}[{i}]: expected an integer")
            out.append(v)
        return tuple(out)
    return _integer(table, key, value)


@dataclass
class ProblemConfig:
    preset: str = _REQUIRED
    resolution: int = _REQUIRED
    volume_target: float = _REQUIRED
    delta_eta: float = 0.25
    x_min: float = 0.0
    load_width: float = None
    load_magnitude: float = None
    load_center: float = None
    solid_depth: float = None


@dataclass
class MaterialConfig:
    E0: float = 1.0
    nu0: float = 0.3
    E_min_ratio: float = 1e-6


@dataclass
class OptimizerConfig:
    objective: str = "weighted"
    omega: object = 0.0                 # scalar or per-phase list
    iterations: object = 300            # scalar or per-phase list
    interpolation: str = "hs"
    simp_penalty: float = 3.0
    stress_constraint: bool = False
    stress_start_iter: int = 0
    n_eig: int = 12
    ks_penalty: float = 160.0
    pnorm_exponent: float = 8.0
    move: float = 0.2
    retarget_every: int = 20
    correction_blend: float = 0.1
    compliance_cap: float = 0.0         # blf mode; 0 -> derive from reference
    compliance_relaxation: float = 0.01
    reference_iterations: int = 300
    beta_override: float = 0.0          # 0 -> continuation schedule
    seed: int = 0
    threads: int = 1


@dataclass
class DehomConfig:
    epsilons: tuple = (0.05,)
    offsets: tuple = (-0.25, 0.0, 0.25, 0.5)
    refinement: int = 8
    shell: bool = False
    shell_radius: float = 0.0           # 0 -> cell size
    n_eig: int = 6


@dataclass
class OutputConfig:
    directory: str = "out"
    save_fields: bool = True
    save_images: bool = True
    save_modes: bool = False


@dataclass
class RunConfig:
    problem: ProblemConfig
    material: MaterialConfig
    optimizer: OptimizerConfig
    dehom: DehomConfig
    output: OutputConfig

    def as_dict(self):
        return dataclasses.asdict(self)


# table -> (dataclass, {key: parser})
_SCHEMA = {
    "problem": (ProblemConfig, {
        "preset": _string,
        "resolution": _integer,
        "volume_target": _number,
        "delta_eta": _number,
        "x_min": _number,
        "load_width": _number,
        "load_magnitude": _number,
        "load_center": _number,
        "solid_depth": _number,
    }),
    "material": (MaterialConfig, {
        "E0": _number,
        "nu0": _number,
        "E_min_ratio": _number,
    }),
    "optimizer": (OptimizerConfig, {
        "objective": _string,
        "omega": _number_or_list,
        "iterations": _integer_or_list,
        "interpolation": _string,
        "simp_penalty": _number,
        "stress_constraint": _boolean,
        "stress_start_iter": _integer,
        "n_eig": _integer,
        "ks_penalty": _number,
        "pnorm_exponent": _number,
        "move": _number,
        "retarget_every": _integer,
        "correction_blend": _number,
        "compliance_cap": _number,
        "compliance_relaxation": _number,
        "reference_iterations": _integer,
        "beta_override": _number,
        "seed": _integer,
        "threads": _integer,
    }),
    "dehom": (DehomConfig, {
        "epsilons": _number_list,
        "offsets": _number_list,
        "refinement": _integer,
        "shell": _boolean,
        "shell_radius": _number,
        "n_eig": _integer,
    }),
    "output": (OutputConfig, {
        "directory": _string,
        "save_fields": _boolean,
        "save_images": _boolean,
        "save_modes": _boolean,
    }),
}

_PRESETS = ("uniaxial", "lbeam", "rect")


def _parse_table(name, data):
    cls, fields = _SCHEMA[name]
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a table")
    values = {}
    for key, raw in data.items():
        if key not in fields:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        values[key] = fields[key](name, key, raw)
    obj = cls(**values)
    for f in dataclasses.fields(cls):
        if getattr(obj, f.name) is _REQUIRED:
            raise ConfigError(f"[{name}] missing required key {f.name!r}")
    return obj


def parse_config(text):
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as err:
        raise ConfigError(f"TOML syntax: {err}") from err
    for table in data:
        if table not in _SCHEMA:
            raise ConfigError(f"unknown table [{table}]")
    cfg = RunConfig(
        problem=_parse_table("problem", data.get("problem", {})),
        material=_parse_table("material", data.get("material", {})),
        optimizer=_parse_table("optimizer", data.get("optimizer", {})),
        dehom=_parse_table("dehom", data.get("dehom", {})),
        output=_parse_table("output", data.get("output", {})),
    )
    return _validate(cfg)


def load_config(path):
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode("utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config(text)


def _validate(cfg):
    p, o, d = cfg.problem, cfg.optimizer, cfg.dehom
    if p.preset not in _PRESETS:
        raise ConfigError(
            f"[problem] preset must be one of {_PRESETS}, got {p.preset!r}"
        )
    if p.resolution < 2:
        raise ConfigError("[problem] resolution must be >= 2")
    if not 0.0 < p.volume_target < 1.0:
        raise ConfigError("[problem] volume_target must lie in (0, 1)")
    if o.objective not in ("weighted", "blf"):
        raise ConfigError("[optimizer] objective must be 'weighted' or 'blf'")
    if o.interpolation not in ("hs", "simp"):
        raise ConfigError("[optimizer] interpolation must be 'hs' or 'simp'")
    omegas = o.omega if isinstance(o.omega, tuple) else (o.omega,)
    for w in omegas:
        if not 0.0 <= w <= 1.0:
            raise ConfigError("[optimizer] omega values must lie in [0, 1]")
    iters = o.iterations if isinstance(o.iterations, tuple) else (o.iterations,)
    if any(i < 1 for i in iters):
        raise ConfigError("[optimizer] iterations must be >= 1")
    if (isinstance(o.omega, tuple) and isinstance(o.iterations, tuple)
            and len(o.omega) != len(o.iterations)):
        raise ConfigError(
            "[optimizer] omega and iterations lists differ in length"
        )
    if o.objective == "blf" and isinstance(o.omega, tuple):
        raise ConfigError("[optimizer] omega sweep requires objective "
                          "'weighted'")
    if o.threads < 1:
        raise ConfigError("[optimizer] threads must be >= 1")
    if d.refinement < 1:
        raise ConfigError("[dehom] refinement must be >= 1")
    if any(e <= 0 for e in d.epsilons):
        raise ConfigError("[dehom] epsilons must be positive")
    if not cfg.dehom.epsilons:
        raise ConfigError("[dehom] epsilons must not be empty")
    return cfg


def phase_plan(optimizer_cfg):
    """Expand the omega/iterations fields into (omega, iterations) phases."""
    o = optimizer_cfg
    omegas = o.omega if isinstance(o.omega, tuple) else (o.omega,)
    iters = o.iterations if isinstance(o.iterations, tuple) else (o.iterations,)
    if len(iters) == 1 and len(omegas) > 1:
        iters = iters * len(omegas)
    if len(omegas) == 1 and len(iters) > 1:
        omegas = omegas * len(iters)
    return list(zip(omegas, iters))
