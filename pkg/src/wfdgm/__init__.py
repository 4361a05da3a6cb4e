"""WFD-GM group formation protocol, a highest-ordinal Baseline, and a deterministic simulator for both."""

from .config import ConfigError, ScenarioConfig, build_config, load_config, preset_config
from .kernel import JoinResult, RunResult, SimConfig, Simulator, run
from .runner import run_batch, simulate

__all__ = [
    "ConfigError",
    "JoinResult",
    "RunResult",
    "ScenarioConfig",
    "SimConfig",
    "Simulator",
    "build_config",
    "load_config",
    "preset_config",
    "run",
    "run_batch",
    "simulate",
]
__version__ = "0.1.0"
