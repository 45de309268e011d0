import dataclasses
import hashlib
import json
import math
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from loguru import logger

from core.exceptions import ConfigError

EXPERIMENTS = ("run", "mms", "apriori", "radius", "uniqueness", "nu_limit", "lp_selftest")


@dataclass
class GridConfig:
    L_x: float = 2.0 * math.pi
    N_x: int = 32
    Y_max: Optional[float] = None
    N_y: int = 128
    y_stretch: float = 0.0
    fd_order: int = 4
    integration_rule: str = "simpson"


@dataclass
class PhysicsConfig:
    theta_E: float = 1.0
    nu: float = 0.0
    epsilon: Optional[float] = None
    delta: float = 0.5
    lam: float = 10.0
    u_scale: float = 0.05
    seed: int = 7
    n_modes: Optional[int] = None
    initial: str = "generated"
    enforce_smallness: bool = True


@dataclass
class TimeConfig:
    dt_policy: str = "fixed"
    dt: float = 1e-3
    safety: float = 0.4
    T_end: float = 0.02


@dataclass
class OutputConfig:
    directory: str = "runs"
    snapshot_every: int = 0
    norm_every: int = 1


@dataclass
class ExperimentConfig:
    radius_tolerance: Optional[float] = None
    sigma: float = 1e-6
    nus: List[float] = field(default_factory=lambda: [1e-2, 5e-3, 2.5e-3])
    mms_levels: int = 3
    selftest_fields: int = 50
    hardy_profiles: int = 100
    smallness_fractions: List[float] = field(default_factory=lambda: [0.025, 0.05, 0.1])


@dataclass
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    experiment_params: ExperimentConfig = field(default_factory=ExperimentConfig)
    experiment: str = "run"

    @property
    def y_max(self) -> float:
        if self.grid.Y_max is not None:
            return float(self.grid.Y_max)
        return 10.0 * math.sqrt(self.physics.theta_E)

    @property
    def epsilon(self) -> float:
        if self.physics.epsilon is not None:
            return float(self.physics.epsilon)
        return self.physics.theta_E / 10.0

    @property
    def n_modes(self) -> int:
        if self.physics.n_modes is not None:
            return int(self.physics.n_modes)
        return max(1, self.grid.N_x // 4)

    @property
    def radius_tolerance(self) -> float:
        if self.experiment_params.radius_tolerance is not None:
            return float(self.experiment_params.radius_tolerance)
        return 0.1 * self.physics.delta

    def as_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data["physics"]["lambda"] = data["physics"].pop("lam")
        data["experiment_block"] = data.pop("experiment_params")
        return data

    def fingerprint(self) -> str:
        """Short stable hash of the resolved configuration."""
        payload = json.dumps(self.as_dict(), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def validate(self) -> "RunConfig":
        g, p, tm = self.grid, self.physics, self.time
        problems = []
        if g.N_x < 8 or g.N_x & (g.N_x - 1):
            problems.append(f"grid.N_x must be a power of two >= 8 (got {g.N_x})")
        if g.N_y < 16:
            problems.append(f"grid.N_y must be >= 16 (got {g.N_y})")
        if g.L_x <= 0 or self.y_max <= 0:
            problems.append("grid.L_x and grid.Y_max must be positive")
        if g.y_stretch < 0:
            problems.append("grid.y_stretch must be >= 0")
        if g.fd_order not in (2, 4):
            problems.append(f"grid.fd_order must be 2 or 4 (got {g.fd_order})")
        if g.integration_rule not in ("simpson", "trapezoid"):
            problems.append(f"grid.integration_rule unknown: '{g.integration_rule}'")
        if p.theta_E <= 0 or p.delta <= 0 or p.lam <= 0:
            problems.append("physics.theta_E, physics.delta and physics.lambda must be positive")
        if p.nu < 0 or p.u_scale < 0:
            problems.append("physics.nu and physics.u_scale must be non-negative")
        if p.enforce_smallness and not 0 < self.epsilon < p.theta_E:
            problems.append(
                f"physics.epsilon must satisfy 0 < epsilon < theta_E (got {self.epsilon})"
            )
        elif self.epsilon <= 0:
            problems.append(f"physics.epsilon must be positive (got {self.epsilon})")
        if p.initial not in ("generated", "zero"):
            problems.append(f"physics.initial must be 'generated' or 'zero' (got '{p.initial}')")
        ex = self.experiment_params
        if any(not 0 < f < 1 for f in ex.smallness_fractions) or any(n < 0 for n in ex.nus):
            problems.append("experiment.smallness_fractions must lie in (0, 1) and experiment.nus be >= 0")
        if ex.sigma < 0 or ex.mms_levels < 2:
            problems.append("experiment.sigma must be >= 0 and experiment.mms_levels >= 2")
        if tm.dt_policy not in ("fixed", "cfl"):
            problems.append(f"time.dt_policy unknown: '{tm.dt_policy}'")
        if tm.dt <= 0 or tm.T_end <= 0 or not 0 < tm.safety <= 1:
            problems.append("time.dt, time.T_end must be positive and 0 < time.safety <= 1")
        if self.output.norm_every < 1 or self.output.snapshot_every < 0:
            problems.append("output.norm_every must be >= 1 and output.snapshot_every >= 0")
        if self.experiment not in EXPERIMENTS:
            problems.append(f"unknown experiment '{self.experiment}'")
        if problems:
            msg = "Invalid run configuration: " + "; ".join(problems)
            logger.error(msg)
            raise ConfigError(msg)
        return self


def _fill(target, block: Dict[str, Any], block_name: str, renames: Dict[str, str] = None):
    renames = renames or {}
    names = {f.name for f in dataclasses.fields(target)}
    for key, value in block.items():
        attr = renames.get(key, key)
        if attr not in names:
            raise ConfigError(f"Unknown key '{key}' in [{block_name}]")
        setattr(target, attr, value)


def config_from_dict(data: Dict[str, Any]) -> RunConfig:
    cfg = RunConfig()
    data = dict(data)
    if "experiment" in data and isinstance(data["experiment"], str):
        cfg.experiment = data.pop("experiment")
    elif "experiment" in data:
        _fill(cfg.experiment_params, data.pop("experiment"), "experiment")
    blocks = {
        "grid": (cfg.grid, None),
        "physics": (cfg.physics, {"lambda": "lam"}),
        "time": (cfg.time, None),
        "output": (cfg.output, None),
        "experiment_block": (cfg.experiment_params, None),
    }
    for name, block in data.items():
        if name not in blocks:
            raise ConfigError(f"Unknown configuration block '{name}'")
        if not isinstance(block, dict):
            raise ConfigError(f"Configuration block '{name}' must be a table")
        target, renames = blocks[name]
        _fill(target, block, name, renames)
    return cfg


def load_run_config(path: Optional[Path] = None) -> RunConfig:
    """Loads a TOML run configuration; no path means defaults accepted."""
    if path is None:
        logger.info("No configuration file given. Using defaults.")
        return RunConfig().validate()
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except (OSError, tomllib.TOMLDecodeError) as e:
        msg = f"Could not read configuration '{path}': {e}"
        logger.error(msg)
        raise ConfigError(msg) from e
    # A table named [experiment] holds experiment parameters; the selector is
    # then given as experiment_name at top level.
    if "experiment_name" in data:
        selector = data.pop("experiment_name")
        block = data.pop("experiment", {})
        data["experiment_block"] = block
        data["experiment"] = selector
    cfg = config_from_dict(data)
    logger.info(f"Configuration loaded from '{path}' (fingerprint {cfg.fingerprint()}).")
    return cfg.validate()
