from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
from yaml import load as yamload, FullLoader

from assurance.intervals import IntervalVector
from assurance.systems.platoon import DEFAULT_X0, PlatoonConfig
from core.defs import DEFAULT_DT, DEFAULT_SEGMENT, ControllerMode, GradientMethod
from core.exceptions import ConfigMalformedExc
from core.signals import DESIRED_INPUT_KEYS

PLATOON_KEYS = {
    "N", "A", "beta", "kappa", "sigma", "delta", "W", "p", "T_b", "z_limit", "alpha_gain", "sb_bound",
}
SIMULATION_KEYS = {
    "platoon", "horizon", "dt", "controller_mode", "seed", "x0", "desired_input", "dt_embed", "output_path",
    "disturbance_segment", "gradient_method", "nominal_overlay",
}
LOGGING_KEYS = {"debug", "enable_file_logging", "logs_path", "final_statistics_table", "progress_bar"}
VERIFICATION_KEYS = {
    "decomposition_samples", "decomposition_box", "shell_samples", "falsification_samples",
    "monte_carlo_samples", "seed",
}


def _section(data: Any, allowed: set, where: str) -> Dict[str, Any]:
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigMalformedExc(f"Section '{where}' must be a mapping, got {type(data).__name__}")
    unknown = set(data) - allowed
    if unknown:
        raise ConfigMalformedExc(f"Unknown keys in '{where}': {sorted(unknown)}")
    return data


@dataclass
class SimulationConfig:
    platoon: PlatoonConfig = field(default_factory=PlatoonConfig)
    horizon: float = 4.0
    dt: float = DEFAULT_DT
    controller_mode: ControllerMode = ControllerMode.ASIF
    seed: int = 0
    x0: Tuple[float, ...] = DEFAULT_X0
    desired_input: Dict[str, Any] = field(default_factory=lambda: {"name": "reference"})
    dt_embed: float = DEFAULT_DT
    output_path: Path = Path("./out/trajectory")
    disturbance_segment: float = DEFAULT_SEGMENT
    gradient_method: GradientMethod = GradientMethod.DIRECT
    nominal_overlay: bool = True

    def __post_init__(self):
        self.controller_mode = ControllerMode(self.controller_mode)
        self.gradient_method = GradientMethod(self.gradient_method)
        self.output_path = Path(self.output_path)
        self.x0 = tuple(float(v) for v in self.x0)
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.dt_embed <= 0:
            raise ValueError(f"dt_embed must be positive, got {self.dt_embed}")
        if self.horizon < 0:
            raise ValueError(f"horizon must be non-negative, got {self.horizon}")
        if self.disturbance_segment <= 0:
            raise ValueError(f"disturbance_segment must be positive, got {self.disturbance_segment}")
        if len(self.x0) != self.platoon.n:
            raise ValueError(f"x0 has {len(self.x0)} entries, the platoon state has {self.platoon.n}")

    @property
    def rows(self) -> int:
        return int(np.floor(self.horizon / self.dt + 1e-9)) + 1


@dataclass
class VerificationConfig:
    decomposition_samples: int = 10_000
    # half-width of the sampled state box
    decomposition_box: float = 6.0
    shell_samples: int = 10_000
    falsification_samples: int = 10_000
    monte_carlo_samples: int = 1000
    seed: int = 0


def parse_platoon(data: Optional[Dict[str, Any]]) -> PlatoonConfig:
    data = dict(_section(data, PLATOON_KEYS, "platoon"))
    if "W" in data:
        bounds = _section(data["W"], {"lower", "upper"}, "platoon.W")
        if set(bounds) != {"lower", "upper"}:
            raise ConfigMalformedExc("platoon.W needs both 'lower' and 'upper'")
        data["W"] = IntervalVector(bounds["lower"], bounds["upper"])
    if "A" in data:
        data["A"] = np.array(data["A"], dtype=float)
        data.setdefault("N", data["A"].shape[0] if data["A"].ndim == 2 else 0)
        if "W" not in data and data["N"] != 3:
            data["W"] = IntervalVector.symmetric(np.full(data["N"], 0.1))
    return PlatoonConfig(**data)


def parse_simulation(data: Dict[str, Any]) -> SimulationConfig:
    data = dict(data)
    data["platoon"] = parse_platoon(data.get("platoon"))
    desired = data.get("desired_input")
    if desired is not None:
        if not isinstance(desired, dict) or desired.get("name") not in DESIRED_INPUT_KEYS:
            raise ConfigMalformedExc(f"desired_input must name one of {sorted(DESIRED_INPUT_KEYS)}")
    return SimulationConfig(**data)


class Config:
    __cfg_path: Optional[Path]

    simulation: SimulationConfig
    verification: VerificationConfig

    debug: bool
    save_logs_to_file: bool
    logs_path: Path
    final_statistics_table: bool
    progress_bar: bool

    def __init__(self, path: Optional[Path] = None, data: Optional[Dict[str, Any]] = None):
        self.__cfg_path = Path(path) if path is not None else None
        if data is None:
            data = self.__read()
        self.__load(data)

    def __read(self) -> Dict[str, Any]:
        if self.__cfg_path is None:
            return {}
        try:
            with open(self.__cfg_path, "r", encoding="utf-8") as file:
                return yamload(file, FullLoader) or {}
        except Exception as e:
            raise ConfigMalformedExc(f"Config not found or malformed: {e}") from e

    def __load(self, data: Dict[str, Any]):
        if not isinstance(data, dict):
            raise ConfigMalformedExc("Config root must be a mapping")
        data = dict(data)
        logging_conf = _section(data.pop("logging", None), LOGGING_KEYS, "logging")
        verification_conf = _section(data.pop("verification", None), VERIFICATION_KEYS, "verification")
        simulation_conf = _section(data, SIMULATION_KEYS, "<root>")
        try:
            self.simulation = parse_simulation(simulation_conf)
            self.verification = VerificationConfig(**verification_conf)
        except (ValueError, TypeError) as e:
            raise ConfigMalformedExc(str(e)) from e
        self.save_logs_to_file = bool(logging_conf.get("enable_file_logging", False))
        self.logs_path = Path(logging_conf.get("logs_path", "./"))
        self.final_statistics_table = bool(logging_conf.get("final_statistics_table", True))
        self.progress_bar = bool(logging_conf.get("progress_bar", False))
        self.debug = bool(logging_conf.get("debug", False))

    @property
    def path(self) -> Optional[Path]:
        return self.__cfg_path

    def override(
            self,
            mode: Optional[str] = None,
            seed: Optional[int] = None,
            out: Optional[str] = None,
    ) -> "Config":
        """Applies command-line overrides after loading."""
        try:
            if mode is not None:
                self.simulation.controller_mode = ControllerMode(mode)
            if seed is not None:
                self.simulation.seed = int(seed)
            if out is not None:
                self.simulation.output_path = Path(out)
        except ValueError as e:
            raise ConfigMalformedExc(str(e)) from e
        return self


def load_config(path: Path) -> Config:
    return Config(path)
