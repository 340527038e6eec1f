"""
Centralized scenario presets for the cooling-by-heating engine.

Each preset is a documented sweep configuration, named after the figure or
experimental setting it reproduces.
"""

# Re-export from presets module
__all__ = [
    "PRESETS",
    "FIGURE_GRID",
    "FIG1_PRESET",
    "FIG2_PRESET",
    "FIG3A_PRESET",
    "FIG3B_PRESET",
    "CARRIER_PRESET",
    "TRAPPED_ION_PRESET",
    "CAVITY_QED_PRESET",
]

from .presets import (  # noqa: E402
    CARRIER_PRESET,
    CAVITY_QED_PRESET,
    FIG1_PRESET,
    FIG2_PRESET,
    FIG3A_PRESET,
    FIG3B_PRESET,
    FIGURE_GRID,
    PRESETS,
    TRAPPED_ION_PRESET,
)
