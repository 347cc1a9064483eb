"""Run configuration for the command-line front end.

Every unset entry is filled from the problem presets by :func:`resolve`, and
the resolved config is what gets written next to the outputs, so feeding it
back in reproduces the run.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .presets import preset
from .problems import DEFAULTS

EIG_METHODS = ("shift_invert", "naive", "fd")
DIRECTIONS = ("forward", "backward", "both")


class ConfigError(ValueError):
    """Invalid or unknown configuration entry (a usage error)."""


@dataclass
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 50
    svd_tol: float = 1e-14


@dataclass
class ContinuationConfig:
    ds: float | None = None
    ds_min: float | None = None
    ds_max: float | None = None
    n_steps: int | None = None
    mu_start: float | None = None
    mu_second: float | None = None
    mu_bounds: list | None = None  # [lo, hi]; the trace stops outside
    direction: str = "both"


@dataclass
class EigsConfig:
    k: int | None = None
    sigma: float | None = None
    krylov_dim: int | None = None
    tol: float = 1e-12
    tau: float = 1e-8  # rank tolerance for Psi (naive path, classification, reports)
    method: str = "shift_invert"


@dataclass
class RunConfig:
    problem: str = "bratu1d"
    fixed_params: dict = field(default_factory=dict)
    n_neurons: int | None = None
    n_points: int | None = None
    seed: int = 0
    mu: float | None = None
    branch: str | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    continuation: ContinuationConfig = field(default_factory=ContinuationConfig)
    eigs: EigsConfig = field(default_factory=EigsConfig)
    output_dir: str = "out"

    def to_dict(self) -> dict:
        return asdict(self)


_NESTED = {"solver": SolverConfig, "continuation": ContinuationConfig, "eigs": EigsConfig}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a table/object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {unknown}")
    kw = {}
    for k, v in data.items():
        if cls is RunConfig and k in _NESTED:
            kw[k] = _build(_NESTED[k], v, k)
        else:
            kw[k] = v
    return cls(**kw)


def from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "")


def load(path) -> RunConfig:
    """Read a JSON config, or TOML when the file ends in ``.toml``."""
    path = Path(path)
    try:
        if path.suffix == ".toml":
            try:
                import tomllib
            except ImportError:  # Python < 3.11
                try:
                    import tomli as tomllib
                except ImportError as exc:
                    raise ConfigError("reading TOML needs the 'tomli' package on Python < 3.11") from exc
            data = tomllib.loads(path.read_text())
        else:
            data = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return from_dict(data)


def _fill(obj, **defaults):
    for k, v in defaults.items():
        if getattr(obj, k) is None:
            setattr(obj, k, v)


def resolve(cfg: RunConfig) -> RunConfig:
    """Validate ``cfg`` and fill every unset entry from the problem presets (in place)."""
    if cfg.problem not in DEFAULTS:
        raise ConfigError(f"unknown problem {cfg.problem!r}; choose from {sorted(DEFAULTS)}")
    p = preset(cfg.problem)
    _, _, m_def, n_def, params = DEFAULTS[cfg.problem]
    unknown = sorted(set(cfg.fixed_params) - set(params))
    if unknown:
        raise ConfigError(f"{cfg.problem}: unknown fixed_params {unknown}")
    cfg.fixed_params = {**params, **{k: float(v) for k, v in cfg.fixed_params.items()}}
    _fill(cfg, n_neurons=n_def, n_points=m_def, mu=p["mu"], branch=p["branches"][0])
    if cfg.branch not in p["branches"]:
        raise ConfigError(f"{cfg.problem}: branch must be one of {list(p['branches'])}")
    c = cfg.continuation
    _fill(
        c, ds=p["ds"], ds_max=p["ds_max"], n_steps=p["n_steps"], mu_start=p["mu_start"],
        mu_second=p["mu_second"], mu_bounds=list(p["bounds"]),
    )
    if len(c.mu_bounds) != 2 or not c.mu_bounds[0] < c.mu_bounds[1]:
        raise ConfigError("continuation.mu_bounds must be [lo, hi] with lo < hi")
    if c.direction not in DIRECTIONS:
        raise ConfigError(f"continuation.direction must be one of {list(DIRECTIONS)}")
    e = cfg.eigs
    _fill(e, k=p["k"], sigma=p["sigma"])
    if e.method not in EIG_METHODS:
        raise ConfigError(f"eigs.method must be one of {list(EIG_METHODS)}")
    checks = [
        (cfg.n_neurons >= 1, "n_neurons must be positive"),
        (cfg.n_points >= 3, "n_points must be at least 3"),
        (e.k >= 1, "eigs.k must be positive"),
        (e.tau > 0 and e.tol > 0, "eigs.tau and eigs.tol must be positive"),
        (cfg.solver.tol > 0 and cfg.solver.max_iter >= 1, "solver.tol and solver.max_iter must be positive"),
        (c.ds != 0 and c.n_steps >= 1, "continuation.ds must be nonzero and n_steps positive"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigError(msg)
    return cfg


def write(cfg: RunConfig, path):
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
