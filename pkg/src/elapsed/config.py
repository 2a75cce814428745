"""Experiment configuration: parsing, validation and serialization.

Documents are YAML (JSON is accepted too, being a subset).  Unknown keys
and violated invariants raise ConfigError naming the offending key path.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional, Union

import yaml

from .errors import ConfigError
from .grid import steps_per_delay
from .model import FiringModel, builtin_model

ROUTES = ("pde", "delay", "monotone")
INITIAL_KINDS = ("density", "steady", "ramp", "history")
PERIODIC_KINDS = ("piecewise_constant", "linear_band", "two_sigma")


@dataclass
class ModelSpec:
    name: str
    params: List[float]
    sigma: float


@dataclass
class InitialSpec:
    kind: str = "density"
    name: Optional[str] = None          # density catalog name
    params: List[float] = field(default_factory=list)
    steady_index: Optional[int] = None  # 1-based, for kind=steady
    N_start: Optional[float] = None     # for kind=ramp
    path: Optional[str] = None          # CSV with column N, for kind=history


@dataclass
class RunSpec:
    route: str = "pde"
    T: Optional[float] = None
    dt: Optional[float] = None
    ds: Optional[float] = None
    s_max: Optional[float] = None
    branch: Union[int, float] = 1
    policy: str = "continuation_then_jump"
    exp_decay: bool = False


@dataclass
class OutputSpec:
    dir: Optional[str] = None
    snapshot_every: int = 0


@dataclass
class PeriodicSpec:
    kind: str = "piecewise_constant"
    level: Optional[float] = None       # psi level for piecewise_constant
    N1: Optional[float] = None
    N2: Optional[float] = None
    a: Optional[float] = None           # linear band
    b: Optional[float] = None
    C: Optional[float] = None
    amplitude: Union[float, str] = "auto"
    shape: str = "square"
    levels: Optional[List[float]] = None  # two_sigma bracket of psi levels
    dt: Optional[float] = None
    tol: float = 1e-12
    max_iter: int = 50
    mass_tol: float = 1e-6


@dataclass
class ExperimentConfig:
    name: str
    model: ModelSpec
    initial: InitialSpec = field(default_factory=InitialSpec)
    run: RunSpec = field(default_factory=RunSpec)
    outputs: OutputSpec = field(default_factory=OutputSpec)
    periodic: Optional[PeriodicSpec] = None

    def build_model(self) -> FiringModel:
        return builtin_model(self.model.name, self.model.params, self.model.sigma)

    @property
    def dt(self) -> float:
        return self.run.dt if self.run.dt is not None else self.model.sigma / 200

    @property
    def T(self) -> float:
        return self.run.T if self.run.T is not None else 50 * self.model.sigma


_SECTIONS = {"model": ModelSpec, "initial": InitialSpec, "run": RunSpec,
             "outputs": OutputSpec, "periodic": PeriodicSpec}


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown key (allowed: {sorted(names)})")
    missing = [n for n, f in names.items() if f.default is dataclasses.MISSING
               and f.default_factory is dataclasses.MISSING and n not in data]
    if missing:
        raise ConfigError(f"{path}.{missing[0]}: required key missing")
    return cls(**data)


def _num(value, path, positive=False, allow_none=True):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{path}: must be positive, got {value}")
    return float(value)


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config: expected a mapping at top level")
    allowed = {"name"} | set(_SECTIONS)
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key (allowed: {sorted(allowed)})")
    if "model" not in doc:
        raise ConfigError("model: required section missing")
    parts = {}
    for key, cls in _SECTIONS.items():
        if key in doc and doc[key] is not None:
            parts[key] = _build(cls, doc[key], key)
    cfg = ExperimentConfig(name=str(doc.get("name", "experiment")), **parts)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    m, r, i = cfg.model, cfg.run, cfg.initial
    m.sigma = _num(m.sigma, "model.sigma", positive=True, allow_none=False)
    if not isinstance(m.params, (list, tuple)):
        raise ConfigError("model.params: expected a list")
    m.params = [_num(p, f"model.params[{k}]", allow_none=False) for k, p in enumerate(m.params)]
    try:
        model = cfg.build_model()
    except ConfigError as exc:
        raise ConfigError(f"model: {exc}") from None

    if r.route not in ROUTES:
        raise ConfigError(f"run.route: must be one of {ROUTES}, got {r.route!r}")
    r.T = _num(r.T, "run.T", positive=True)
    r.dt = _num(r.dt, "run.dt", positive=True)
    r.ds = _num(r.ds, "run.ds", positive=True)
    r.s_max = _num(r.s_max, "run.s_max", positive=True)
    dt = cfg.dt
    try:
        steps_per_delay(m.sigma, dt)
    except ConfigError:
        raise ConfigError(f"run.dt: sigma/dt must be an integer (sigma={m.sigma}, "
                          f"dt={dt})") from None
    if r.route == "pde":
        if r.ds is not None and abs(r.ds - dt) > 1e-12 * dt:
            raise ConfigError(f"run.ds: must equal run.dt on the pde route "
                              f"(ds={r.ds}, dt={dt})")
        if dt * model.p_hi >= 1:
            raise ConfigError(f"run.dt: dt*p_hi = {dt * model.p_hi:.4g} must be < 1")
        if r.s_max is not None and r.s_max < m.sigma + 2 * dt:
            raise ConfigError("run.s_max: must exceed sigma by two cells")
    from .activity import MODES
    if r.policy not in MODES:
        raise ConfigError(f"run.policy: must be one of {MODES}, got {r.policy!r}")
    if isinstance(r.branch, bool) or not isinstance(r.branch, (int, float)):
        raise ConfigError(f"run.branch: expected an index or a value, got {r.branch!r}")
    if isinstance(r.branch, int) and r.branch < 1:
        raise ConfigError("run.branch: indices start at 1")
    if not isinstance(r.exp_decay, bool):
        raise ConfigError("run.exp_decay: expected true/false")

    if i.kind not in INITIAL_KINDS:
        raise ConfigError(f"initial.kind: must be one of {INITIAL_KINDS}, got {i.kind!r}")
    if i.kind == "density":
        from .densities import builtin_density
        if i.name is None:
            raise ConfigError("initial.name: required for kind=density")
        try:
            builtin_density(i.name, i.params)
        except ConfigError as exc:
            raise ConfigError(f"initial.name: {exc}") from None
    elif i.kind == "steady":
        if not isinstance(i.steady_index, int) or i.steady_index < 1:
            raise ConfigError("initial.steady_index: positive integer required")
    elif i.kind == "ramp":
        i.N_start = _num(i.N_start, "initial.N_start", allow_none=False)
    elif i.kind == "history" and not i.path:
        raise ConfigError("initial.path: required for kind=history")
    if r.route == "monotone" and i.kind not in ("ramp", "history"):
        raise ConfigError("initial.kind: the monotone route needs a ramp or history")

    o = cfg.outputs
    if not isinstance(o.snapshot_every, int) or o.snapshot_every < 0:
        raise ConfigError("outputs.snapshot_every: nonnegative integer required")

    p = cfg.periodic
    if p is not None:
        if p.kind not in PERIODIC_KINDS:
            raise ConfigError(f"periodic.kind: must be one of {PERIODIC_KINDS}")
        if p.kind == "linear_band" and None in (p.a, p.b, p.C):
            raise ConfigError("periodic.a: linear_band needs a, b and C")
        if p.kind == "two_sigma" and (not p.levels or len(p.levels) != 2):
            raise ConfigError("periodic.levels: two_sigma needs a bracket of two psi levels")
        if p.kind == "piecewise_constant" and p.level is None and None in (p.N1, p.N2):
            raise ConfigError("periodic.level: give a psi level or both N1 and N2")
        if p.dt is not None:
            try:
                steps_per_delay(m.sigma, p.dt)
            except ConfigError:
                raise ConfigError("periodic.dt: sigma/dt must be an integer") from None


def parse_config(text: str) -> ExperimentConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: malformed document ({exc})") from None
    return config_from_dict(doc)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def _prune(obj):
    if isinstance(obj, dict):
        return {k: _prune(v) for k, v in obj.items() if v is not None}
    return obj


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return _prune(dataclasses.asdict(cfg))


def serialize_config(cfg: ExperimentConfig, portable: bool = False) -> str:
    """YAML text; ``portable`` drops the output directory so bundles stay
    identical wherever they are written."""
    doc = config_to_dict(cfg)
    if portable:
        doc.get("outputs", {}).pop("dir", None)
    return yaml.safe_dump(doc, sort_keys=True)
