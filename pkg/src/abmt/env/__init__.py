from .scenario import ConfigError, MachineSpec, ScenarioConfig, reduced_scenario
from .vector import VecEnv
from .world import (
    PROCESSING,
    READY,
    BatchState,
    Observation,
    StepOutcome,
    WorldState,
    global_state,
    global_tokens,
    make_rng,
    observe,
    reset,
    step,
    tokens_from_flat,
)

__all__ = [
    "BatchState",
    "ConfigError",
    "MachineSpec",
    "Observation",
    "PROCESSING",
    "READY",
    "ScenarioConfig",
    "StepOutcome",
    "VecEnv",
    "WorldState",
    "global_state",
    "global_tokens",
    "make_rng",
    "observe",
    "reduced_scenario",
    "reset",
    "step",
    "tokens_from_flat",
]
