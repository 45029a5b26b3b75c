"""Band-pass cutoff optimization for wrist PPG heartbeat detection.

Set ``PPGTUNE_DISABLE_NUMBA=1`` to run the pure-numpy kernels instead of
the compiled ones.
"""
__version__ = "0.1.0"

from .beats import BeatSeries, detect_ecg_beats, detect_ppg_beats
from .errors import PpgTuneError, ValidationError
from .filters import FilterSpec, design_bandpass, sosfiltfilt
from .optimize import CutoffPair, ObjectiveTriple, grid_combinations, nsga2, select_scalarized
from .signals import Signal, Window

__all__ = [
    "__version__",
    "BeatSeries",
    "CutoffPair",
    "FilterSpec",
    "ObjectiveTriple",
    "PpgTuneError",
    "Signal",
    "ValidationError",
    "Window",
    "design_bandpass",
    "detect_ecg_beats",
    "detect_ppg_beats",
    "grid_combinations",
    "nsga2",
    "select_scalarized",
    "sosfiltfilt",
]
