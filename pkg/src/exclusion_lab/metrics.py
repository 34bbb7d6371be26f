"""Conclusiveness of exclusion (CE) from quantum tasks or from raw behaviors.

``CE_T = 1 - (1/4) sum_Y P(E_{Y|T} | rho_{Y|T})`` and ``CE = sum_T CE_T``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ._parallel import ordered_map
from .pbr import ORDERED_TASKS, OUTCOMES, ExclusionTask, SourceCoordinates, TaskLabel, build_tasks, index_map
from .qcore import NOISE_MODES, born_probability, depolarize_matrix

NC_BOUND = 15 / 4
SWEEP_HEADER = ("mode", "visibility", "ce_total", "ce_0p", "ce_0m", "ce_1p", "ce_1m")


class UnusableBehaviorError(ValueError):
    """A conditioning event needed by CE has zero probability."""


@dataclass(frozen=True)
class Noise:
    mode: str = "global"
    visibility: float = 1.0

    def __post_init__(self) -> None:
        if self.mode not in NOISE_MODES:
            raise ValueError(f"unknown noise mode {self.mode!r}; expected one of {NOISE_MODES}")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {self.visibility!r}")

    def apply(self, m: np.ndarray) -> np.ndarray:
        return depolarize_matrix(m, self.visibility, self.mode)


@dataclass(frozen=True)
class CeReport:
    per_task: dict[TaskLabel, float]
    total: float
    per_event: dict[TaskLabel, tuple[float, ...]]
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_events(cls, per_event: Mapping[TaskLabel, Sequence[float]], metadata: dict | None = None) -> "CeReport":
        missing = [t for t in ORDERED_TASKS if t not in per_event]
        if missing:
            raise ValueError(f"missing task labels: {[t.value for t in missing]}")
        events = {t: tuple(float(p) for p in per_event[t]) for t in ORDERED_TASKS}
        per_task = {t: 1.0 - 0.25 * sum(events[t]) for t in ORDERED_TASKS}
        return cls(per_task, float(sum(per_task.values())), events, dict(metadata or {}))

    def to_dict(self) -> dict:
        return {
            "per_task": {t.value: v for t, v in self.per_task.items()},
            "total": self.total,
            "per_event": {t.value: list(v) for t, v in self.per_event.items()},
            "metadata": self.metadata,
        }

    def row(self) -> list[float]:
        return [self.total] + [self.per_task[t] for t in ORDERED_TASKS]


def _noise_meta(noise: Noise | None) -> dict:
    if noise is None:
        return {"noise_mode": None, "visibility": 1.0}
    return {"noise_mode": noise.mode, "visibility": noise.visibility}


def exclusion_events(task: ExclusionTask, noise: Noise | None = None) -> tuple[float, ...]:
    out = []
    for y in OUTCOMES:
        rho = task.state(y).matrix
        if noise is not None:
            rho = noise.apply(rho)
        out.append(born_probability(task.effect(y), rho))
    return tuple(out)


def ce_task(task: ExclusionTask, noise: Noise | None = None) -> float:
    return 1.0 - float(np.mean(exclusion_events(task, noise)))


def _as_task_map(tasks) -> dict[TaskLabel, ExclusionTask]:
    if isinstance(tasks, Mapping):
        return dict(tasks)
    return {t.label: t for t in tasks}


def ce_total(tasks, noise: Noise | None = None) -> CeReport:
    tmap = _as_task_map(tasks)
    events = {t: exclusion_events(task, noise) for t, task in tmap.items()}
    return CeReport.from_events(events, _noise_meta(noise))


def ce_from_behavior(behavior, maps: Mapping[TaskLabel, Sequence[SourceCoordinates]] | None = None) -> CeReport:
    """CE read off a bilocality behavior ``P(x_a, x_b, y | s_a, s_b, t)``.

    ``behavior.table`` is indexed ``[t, s_a, s_b, x_a, x_b, y-1]`` with tasks in
    the standard order. ``maps`` overrides the per-task index map.
    """
    table = np.asarray(behavior.table, dtype=float)
    events: dict[TaskLabel, list[float]] = {}
    for ti, t in enumerate(ORDERED_TASKS):
        coords = maps[t] if maps is not None else [index_map(y, t) for y in OUTCOMES]
        row = []
        for y, c in zip(OUTCOMES, coords):
            block = table[ti, c.s_a, c.s_b, c.x_a, c.x_b, :]
            norm = block.sum()
            if norm <= 1e-15:
                raise UnusableBehaviorError(
                    f"P(x_a={c.x_a}, x_b={c.x_b} | s_a={c.s_a}, s_b={c.s_b}, t={t.value}) is zero"
                )
            row.append(block[y - 1] / norm)
        events[t] = row
    meta = {"source": getattr(behavior, "provenance", "external")}
    return CeReport.from_events(events, meta)


def _tasks_or_default(tasks) -> dict[TaskLabel, ExclusionTask]:
    return build_tasks() if tasks is None else _as_task_map(tasks)


def ce_at(v: float, mode: str, tasks=None) -> CeReport:
    return ce_total(_tasks_or_default(tasks), Noise(mode, float(v)))


@dataclass(frozen=True)
class NoiseSweep:
    mode: str
    grid: tuple[float, ...]
    reports: tuple[CeReport, ...]
    threshold: float | None

    @property
    def totals(self) -> np.ndarray:
        return np.array([r.total for r in self.reports])

    def is_monotone(self, slack: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self.totals) >= -slack))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for v, r in zip(self.grid, self.reports):
            w.writerow([self.mode, repr(float(v))] + [repr(float(x)) for x in r.row()])
        if self.threshold is not None:
            buf.write(f"# threshold,{self.threshold!r}\n")
        return buf.getvalue()


def parse_grid(text: str) -> tuple[float, ...]:
    """``a:b:step`` inclusive of ``b`` (up to round-off), or a comma list."""
    if ":" in text:
        a, b, step = (float(x) for x in text.split(":"))
        if step <= 0 or b < a:
            raise ValueError(f"invalid grid {text!r}")
        n = int(np.floor((b - a) / step + 1e-9)) + 1
        grid = tuple(round(a + i * step, 12) for i in range(n))
    else:
        grid = tuple(float(x) for x in text.split(",") if x.strip())
    if not grid or any(not 0.0 <= v <= 1.0 for v in grid):
        raise ValueError(f"grid {text!r} must be non-empty and inside [0, 1]")
    return grid


def sweep(mode: str, grid: Sequence[float], tasks=None, with_threshold: bool = True, tol: float = 1e-9) -> NoiseSweep:
    tmap = _tasks_or_default(tasks)
    reports = tuple(ordered_map(lambda v: ce_at(v, mode, tmap), grid))
    thr = None
    if with_threshold:
        try:
            thr = find_threshold(mode, tol=tol, tasks=tmap)
        except ValueError:
            thr = None
    return NoiseSweep(mode, tuple(float(v) for v in grid), reports, thr)


def find_threshold(mode: str, tol: float = 1e-9, tasks=None, target: float = NC_BOUND, check_points: int = 101) -> float:
    """Smallest visibility at which CE reaches ``target`` (bisection on [0, 1])."""
    tmap = _tasks_or_default(tasks)
    grid = np.linspace(0.0, 1.0, check_points)
    totals = np.array([ce_at(v, mode, tmap).total for v in grid])
    if np.any(np.diff(totals) < -1e-12):
        raise ValueError("CE(v) is not monotone on the check grid; bisection is not applicable")
    f = lambda v: ce_at(v, mode, tmap).total - target
    lo, hi = 0.0, 1.0
    f_lo, f_hi = f(lo), f(hi)
    if f_lo > 0 or f_hi < 0:
        raise ValueError(f"no crossing of CE = {target} in [0, 1] (CE(0)={f_lo + target}, CE(1)={f_hi + target})")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
