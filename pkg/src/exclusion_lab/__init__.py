"""Exclusion-task toolkit: quantum tasks, CE metrics, noncontextual models and bilocal behaviors."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.1.0"

from .metrics import NC_BOUND, CeReport, Noise, ce_from_behavior, ce_total, find_threshold, sweep
from .pbr import ORDERED_TASKS, TaskLabel, build_tasks, index_map

__all__ = [
    "NC_BOUND",
    "ORDERED_TASKS",
    "CeReport",
    "Noise",
    "TaskLabel",
    "__version__",
    "build_tasks",
    "ce_from_behavior",
    "ce_total",
    "find_threshold",
    "index_map",
    "sweep",
]
