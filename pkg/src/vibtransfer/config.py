"""Experiment configuration: TOML (or JSON) files with strict key checking.

Energies are in units of J and times in 1/J. Unknown keys are errors.

Example::

    engine = "stochastic"
    n_traj = 10000
    base_seed = 1
    outputs = "out/fig2-stochastic"

    [dimer]
    delta = 8.0

    [grid]
    dt = 0.01
    horizon = 20.0

    [[bath.terms]]
    gamma0 = 12.0
    tau = 3.0
    omega = 0.0

    [sweep]
    parameter = "omega"
    start = 1.0
    stop = 12.0
    step = 0.5
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .correlation import CorrelationSpec, KernelTerm
from .heom import BrownianBath
from .noise import TimeGrid
from .stochastic import DimerSpec

ENGINES = ("stochastic", "hsr", "forster", "heom")

SWEEPABLE = {
    "stochastic": ("omega", "gamma0", "tau", "delta"),
    "forster": ("omega", "gamma0", "tau", "delta"),
    "hsr": ("gamma", "delta"),
    "heom": ("omega", "lam", "gamma", "beta", "delta"),
}

_TOP_KEYS = {"engine", "dimer", "bath", "grid", "n_traj", "base_seed", "sweep", "outputs",
             "initial_site", "heom", "workers", "label"}


class ConfigError(ValueError):
    """Invalid experiment configuration; messages name the offending field."""


@dataclass
class HeomOptions:
    depth: int = 6
    dt: float = 0.001


@dataclass
class ExperimentConfig:
    engine: str
    dimer: DimerSpec
    bath: object
    grid: TimeGrid
    n_traj: int = 10_000
    base_seed: int = 0
    sweep: tuple[str, tuple[float, ...]] | None = None
    outputs: str = "out"
    initial_site: int = 1
    heom: HeomOptions = field(default_factory=HeomOptions)
    workers: int = 1
    label: str = ""

    def validate(self) -> "ExperimentConfig":
        if self.engine not in ENGINES:
            raise ConfigError(f"engine: must be one of {ENGINES}, got {self.engine!r}")
        expected = {"stochastic": CorrelationSpec, "forster": CorrelationSpec,
                    "hsr": float, "heom": BrownianBath}[self.engine]
        if not isinstance(self.bath, expected):
            raise ConfigError(f"bath: engine {self.engine!r} needs a {expected.__name__} bath")
        if self.n_traj < 1:
            raise ConfigError("n_traj: must be >= 1")
        if self.initial_site not in (1, 2):
            raise ConfigError("initial_site: must be 1 or 2")
        if self.sweep is not None:
            name, values = self.sweep
            if name not in SWEEPABLE[self.engine]:
                raise ConfigError(f"sweep.parameter: {name!r} is not sweepable for engine "
                                  f"{self.engine!r} (choose from {SWEEPABLE[self.engine]})")
            if len(values) == 0:
                raise ConfigError("sweep.values: empty sweep list")
        return self

    def to_dict(self) -> dict:
        if isinstance(self.bath, CorrelationSpec):
            bath = self.bath.to_dict()
        elif isinstance(self.bath, BrownianBath):
            bath = self.bath.to_dict()
        else:
            bath = {"gamma": self.bath}
        out = {
            "engine": self.engine,
            "dimer": self.dimer.to_dict(),
            "bath": bath,
            "grid": {"dt": self.grid.dt, "horizon": self.grid.horizon},
            "n_traj": self.n_traj,
            "base_seed": self.base_seed,
            "outputs": self.outputs,
            "initial_site": self.initial_site,
            "heom": {"depth": self.heom.depth, "dt": self.heom.dt},
            "workers": self.workers,
            "label": self.label,
        }
        if self.sweep is not None:
            out["sweep"] = {"parameter": self.sweep[0], "values": list(self.sweep[1])}
        return out


def _check_keys(section: dict, allowed: set, where: str):
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")


def _number(section: dict, key: str, where: str, default=None):
    if key not in section:
        if default is None:
            raise ConfigError(f"{where}.{key}: required")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {value!r}")
    return float(value)


def _parse_dimer(d: dict) -> DimerSpec:
    if not isinstance(d, dict):
        raise ConfigError("dimer: expected a table")
    _check_keys(d, {"delta", "epsilon1", "epsilon2", "j_coupling"}, "dimer")
    j = _number(d, "j_coupling", "dimer", 1.0)
    if "delta" in d:
        if "epsilon1" in d or "epsilon2" in d:
            raise ConfigError("dimer: give either delta or epsilon1/epsilon2, not both")
        spec = DimerSpec.with_offset(_number(d, "delta", "dimer"), j) if j > 0 else None
    else:
        spec = DimerSpec(_number(d, "epsilon1", "dimer", 0.0), _number(d, "epsilon2", "dimer", 0.0), j) if j > 0 else None
    if spec is None:
        raise ConfigError("dimer.j_coupling: must be positive")
    return spec


def _parse_bath(engine: str, b: dict):
    if not isinstance(b, dict):
        raise ConfigError("bath: expected a table")
    try:
        if engine in ("stochastic", "forster"):
            _check_keys(b, {"terms"}, "bath")
            terms = b.get("terms")
            if not terms:
                raise ConfigError("bath.terms: at least one kernel term is required")
            parsed = []
            for i, term in enumerate(terms):
                where = f"bath.terms[{i}]"
                _check_keys(term, {"gamma0", "tau", "omega", "sigma"}, where)
                tau = _number(term, "tau", where)
                if "sigma" in term:
                    if "gamma0" in term:
                        raise ConfigError(f"{where}: give either gamma0 or sigma")
                    gamma0 = _number(term, "sigma", where) ** 2 * tau
                else:
                    gamma0 = _number(term, "gamma0", where)
                parsed.append(KernelTerm(gamma0, tau, _number(term, "omega", where, 0.0)))
            return CorrelationSpec(tuple(parsed))
        if engine == "hsr":
            _check_keys(b, {"gamma"}, "bath")
            gamma = _number(b, "gamma", "bath")
            if gamma < 0:
                raise ConfigError("bath.gamma: must be >= 0")
            return gamma
        _check_keys(b, {"lam", "omega", "gamma", "beta", "n_matsubara"}, "bath")
        bath = BrownianBath(_number(b, "lam", "bath"), _number(b, "omega", "bath"),
                            _number(b, "gamma", "bath"), _number(b, "beta", "bath"),
                            int(b.get("n_matsubara", 1)))
        bath.zeta  # raises OverdampedRegime (a ValueError) for omega <= gamma / 2
        return bath
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bath: {exc}") from exc


def _parse_sweep(s: dict) -> tuple[str, tuple[float, ...]]:
    if not isinstance(s, dict):
        raise ConfigError("sweep: expected a table")
    _check_keys(s, {"parameter", "values", "start", "stop", "step"}, "sweep")
    if "parameter" not in s:
        raise ConfigError("sweep.parameter: required")
    if "values" in s:
        if any(k in s for k in ("start", "stop", "step")):
            raise ConfigError("sweep: give either values or start/stop/step")
        values = s["values"]
        if not isinstance(values, list):
            raise ConfigError("sweep.values: expected a list")
        values = tuple(float(v) for v in values)
    else:
        start = _number(s, "start", "sweep")
        stop = _number(s, "stop", "sweep")
        step = _number(s, "step", "sweep")
        if step <= 0:
            raise ConfigError("sweep.step: must be positive")
        values = tuple(float(v) for v in np.round(np.arange(start, stop + step / 2, step), 12))
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError("sweep.values: must be strictly ascending")
    return str(s["parameter"]), values


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: expected a table at top level")
    _check_keys(data, _TOP_KEYS, "config")
    engine = data.get("engine")
    if engine not in ENGINES:
        raise ConfigError(f"engine: must be one of {ENGINES}, got {engine!r}")
    grid_d = data.get("grid", {})
    _check_keys(grid_d, {"dt", "horizon"}, "grid")
    try:
        grid = TimeGrid.from_horizon(_number(grid_d, "dt", "grid", 0.01), _number(grid_d, "horizon", "grid", 20.0))
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc
    heom_d = data.get("heom", {})
    _check_keys(heom_d, {"depth", "dt"}, "heom")
    heom = HeomOptions(int(heom_d.get("depth", 6)), _number(heom_d, "dt", "heom", 0.001))
    if "bath" not in data:
        raise ConfigError("bath: required")
    cfg = ExperimentConfig(
        engine=engine,
        dimer=_parse_dimer(data.get("dimer", {})),
        bath=_parse_bath(engine, data["bath"]),
        grid=grid,
        n_traj=int(data.get("n_traj", 10_000)),
        base_seed=int(data.get("base_seed", 0)),
        sweep=_parse_sweep(data["sweep"]) if "sweep" in data else None,
        outputs=str(data.get("outputs", "out")),
        initial_site=int(data.get("initial_site", 1)),
        heom=heom,
        workers=int(data.get("workers", 1)),
        label=str(data.get("label", "")),
    )
    return cfg.validate()


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            data = json.loads(text)
            # metadata.json of a previous bundle carries the config under "config"
            if "config" in data and "engine" not in data:
                data = data["config"]
        else:
            data = tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"config: cannot parse {path}: {exc}") from exc
    return config_from_dict(data)
