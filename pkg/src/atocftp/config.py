"""Experiment configuration files (TOML).

Example::

    model = "pos-individual"          # tos-individual | pos-joint
    caps = [10, 10, 10, 10, 10]
    demands = "geometric"             # or [{items = [1, 2], rate = 0.3}, ...]
    service = "infinite-server(1.0)"  # pos-joint: mu = 1.0
    replications = 100
    seed = 2024
    max_horizon = 16777216
    outputs = ["coupling-time", "mean-jobs", "bound-values"]

    [sweep]
    param = "rho"
    values = [0.25, 0.5, 1, 2, 4]

Items are numbered from 1 in configuration files.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path
from typing import Any

import tomli

from .errors import ConfigError
from .individual import IndividualModel, build_model, item_arrival_rates
from .joint import JointModel, build_joint_model
from .lattice import MAX_ITEMS

MODELS = ("pos-individual", "tos-individual", "pos-joint")
SAMPLERS = {"pos-individual": ("psa",), "tos-individual": ("epsa",),
            "pos-joint": ("aepsa", "alg4", "exact")}
METRICS = ("coupling-time", "mean-jobs", "interval-width", "bound-values", "tv-vs-oracle")
SWEEP_PARAMS = ("rho", "mu", "demand-scale")
DEFAULT_MAX_HORIZON = 2**24

_KEYS = {"model", "caps", "items", "demands", "service", "mu", "sampler", "sweep",
         "replications", "seed", "max_horizon", "outputs", "oracle"}


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    caps: tuple[int, ...]
    demands: dict[int, float]
    service: Any
    sampler: str
    sweep_param: str | None = None
    sweep_values: tuple[float, ...] = (None,)
    replications: int = 100
    seed: int = 0
    max_horizon: int = DEFAULT_MAX_HORIZON
    outputs: tuple[str, ...] = ("coupling-time", "mean-jobs")
    tv_threshold: float | None = None
    source: str = field(default="<config>", compare=False)

    @property
    def n_items(self) -> int:
        return len(self.caps)

    @property
    def joint(self) -> bool:
        return self.model == "pos-joint"

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        if cfg.replications < 1:
            raise ConfigError("replications: must be at least 1")
        if cfg.max_horizon < 1:
            raise ConfigError("max_horizon: must be at least 1")
        return cfg

    def build(self, value: float | None = None) -> IndividualModel | JointModel:
        """Model at one sweep point."""
        lam_max = max(item_arrival_rates(self.demands, self.n_items))
        param = self.sweep_param if value is not None else None
        demands = self.demands
        if param == "demand-scale":
            demands = {a: r * value for a, r in demands.items()}
        if self.joint:
            mu = float(self.service)
            if param == "rho":
                mu = lam_max / value
            elif param == "mu":
                mu = value
            return build_joint_model(self.caps, demands, mu)
        model = build_model(self.caps, demands, self.service)
        if param in ("rho", "mu"):
            ref = max(t[1] for t in model.mu)
            if ref <= 0:
                raise ConfigError("service: sweeping rho or mu needs a positive rate in state 1")
            target = lam_max / value if param == "rho" else value
            model = model.with_rates(service_scale=target / ref)
        return model

    def points(self) -> list[tuple[float | None, IndividualModel | JointModel]]:
        return [(v, self.build(v)) for v in self.sweep_values]


def geometric_demands(n_items: int) -> dict[int, float]:
    """``lambda_A = 1 / 2^(|A| - 1)`` for every non-empty subset ``A``."""
    out = {}
    for size in range(1, n_items + 1):
        for sub in combinations(range(n_items), size):
            out[sum(1 << i for i in sub)] = 1.0 / 2 ** (size - 1)
    return out


def _fail(field_name: str, msg: str):
    raise ConfigError(f"{field_name}: {msg}")


def _number(v, name, positive=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(name, f"expected a number, got {v!r}")
    if integer and not isinstance(v, int):
        _fail(name, f"expected an integer, got {v!r}")
    if positive and v <= 0:
        _fail(name, f"must be positive, got {v!r}")
    return v


def _parse_demands(raw, n: int) -> dict[int, float]:
    if raw == "geometric":
        return geometric_demands(n)
    if not isinstance(raw, list) or not raw:
        _fail("demands", 'expected "geometric" or a non-empty list of {items, rate} tables')
    out: dict[int, float] = {}
    for k, entry in enumerate(raw, 1):
        where = f"demands[{k}]"
        if not isinstance(entry, dict) or set(entry) != {"items", "rate"}:
            _fail(where, "expected a table with keys 'items' and 'rate'")
        items = entry["items"]
        if not isinstance(items, list) or not items:
            _fail(where + ".items", "expected a non-empty list of item numbers")
        mask = 0
        for i in items:
            _number(i, where + ".items", integer=True)
            if not 1 <= i <= n:
                _fail(where + ".items", f"item {i} outside 1..{n}")
            mask |= 1 << (i - 1)
        rate = _number(entry["rate"], where + ".rate")
        if rate < 0:
            _fail(where + ".rate", "must be non-negative")
        out[mask] = out.get(mask, 0.0) + float(rate)
    if not any(out.values()):
        _fail("demands", "at least one rate must be positive")
    return out


def _parse_service(raw, caps):
    if isinstance(raw, str):
        return raw
    if isinstance(raw, dict):
        if set(raw) != {"kind", "rate"}:
            _fail("service", "table form needs exactly 'kind' and 'rate'")
        if raw["kind"] not in ("single-server", "infinite-server"):
            _fail("service.kind", f"unknown kind {raw['kind']!r}")
        return f"{raw['kind']}({_number(raw['rate'], 'service.rate')})"
    if isinstance(raw, list):
        if len(raw) != len(caps):
            _fail("service", f"expected one entry per item ({len(caps)}), got {len(raw)}")
        out = []
        for k, (s, c) in enumerate(zip(raw, caps), 1):
            if isinstance(s, str):
                out.append(s)
            elif isinstance(s, list):
                if len(s) != c + 1:
                    _fail(f"service[{k}]", f"rate table needs {c + 1} entries, got {len(s)}")
                out.append(tuple(float(_number(v, f"service[{k}]")) for v in s))
            else:
                _fail(f"service[{k}]", "expected a string or a rate table")
        return out
    _fail("service", "expected a string, a {kind, rate} table or a per-item list")


def parse_config(data: dict, source: str = "<config>") -> ExperimentConfig:
    unknown = set(data) - _KEYS
    if unknown:
        _fail(sorted(unknown)[0], "unknown field")
    model = data.get("model")
    if model not in MODELS:
        _fail("model", f"expected one of {', '.join(MODELS)}, got {model!r}")
    caps = data.get("caps")
    if not isinstance(caps, list) or not caps:
        _fail("caps", "expected a non-empty list of capacities")
    for c in caps:
        _number(c, "caps", positive=True, integer=True)
    if len(caps) > MAX_ITEMS:
        _fail("caps", f"at most {MAX_ITEMS} items are supported")
    if "items" in data and data["items"] != len(caps):
        _fail("items", f"{data['items']} does not match the {len(caps)} capacities")
    caps = tuple(caps)
    demands = _parse_demands(data.get("demands"), len(caps))

    joint = model == "pos-joint"
    if joint:
        if "service" in data and "mu" in data:
            _fail("mu", "give either 'mu' or 'service' for pos-joint, not both")
        mu = data.get("mu", data.get("service"))
        if mu is None:
            _fail("mu", "pos-joint needs a scalar return rate")
        service = float(_number(mu, "mu", positive=True))
    else:
        if "mu" in data:
            _fail("mu", "only pos-joint takes a scalar rate; use 'service'")
        if "service" not in data:
            _fail("service", "missing")
        service = _parse_service(data["service"], caps)

    sampler = data.get("sampler", SAMPLERS[model][0])
    if sampler not in SAMPLERS[model]:
        _fail("sampler", f"{sampler!r} is incompatible with {model} "
                         f"(use {' or '.join(SAMPLERS[model])})")

    sweep_param, sweep_values = None, (None,)
    if "sweep" in data:
        sw = data["sweep"]
        if not isinstance(sw, dict) or set(sw) != {"param", "values"}:
            _fail("sweep", "expected a table with 'param' and 'values'")
        if sw["param"] not in SWEEP_PARAMS:
            _fail("sweep.param", f"expected one of {', '.join(SWEEP_PARAMS)}")
        vals = sw["values"]
        if not isinstance(vals, list) or not vals:
            _fail("sweep.values", "grid must be non-empty")
        sweep_param = sw["param"]
        sweep_values = tuple(float(_number(v, "sweep.values", positive=True)) for v in vals)

    replications = _number(data.get("replications", 100), "replications", positive=True,
                           integer=True)
    seed = _number(data.get("seed", 0), "seed", integer=True)
    max_horizon = _number(data.get("max_horizon", DEFAULT_MAX_HORIZON), "max_horizon",
                          positive=True, integer=True)
    outputs = data.get("outputs", ["coupling-time", "mean-jobs"])
    if not isinstance(outputs, list):
        _fail("outputs", "expected a list of metric names")
    for o in outputs:
        if o not in METRICS:
            _fail("outputs", f"unknown metric {o!r}; expected one of {', '.join(METRICS)}")
    tv = None
    if "oracle" in data:
        orc = data["oracle"]
        if not isinstance(orc, dict) or set(orc) - {"tv_threshold"}:
            _fail("oracle", "expected a table with 'tv_threshold'")
        if "tv_threshold" in orc:
            tv = float(_number(orc["tv_threshold"], "oracle.tv_threshold", positive=True))

    cfg = ExperimentConfig(model, caps, demands, service, sampler, sweep_param, sweep_values,
                           replications, seed, max_horizon, tuple(outputs), tv, source)
    for v in cfg.sweep_values:
        try:
            cfg.build(v)
        except ConfigError as exc:
            raise ConfigError(f"{exc}" + (f" (at {sweep_param} = {v:g})" if v is not None else ""))
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return parse_config(data, str(path))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
