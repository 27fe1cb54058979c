"""Constructions that build the eight-angle preparation from weaker devices."""

from .four_state import (
    FOUR_STATE_PRESETS,
    FourStateChoice,
    four_state_bob,
    four_state_distribution,
    four_state_run,
    four_state_simulator_operators,
)
from .overlap import OverlapError, overlap_halve
from .two_state import (
    TWO_STATE_PRESETS,
    TwoStateError,
    two_state_bounds,
    two_state_correctness_error,
    two_state_distribution,
    two_state_run,
    two_state_security_states,
)

__all__ = [
    "FOUR_STATE_PRESETS",
    "FourStateChoice",
    "OverlapError",
    "TWO_STATE_PRESETS",
    "TwoStateError",
    "four_state_bob",
    "four_state_distribution",
    "four_state_run",
    "four_state_simulator_operators",
    "overlap_halve",
    "two_state_bounds",
    "two_state_correctness_error",
    "two_state_distribution",
    "two_state_run",
    "two_state_security_states",
]
