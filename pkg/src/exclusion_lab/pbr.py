"""The four PBR-style exclusion tasks and their multi-source bookkeeping.

Each task ``T`` in (0+, 0-, 1+, 1-) pairs four product states with a
four-outcome measurement whose outcome ``Y`` rules out the ``Y``-th state.
Task 0+ is built explicitly; the other three are obtained by conjugating
states and effects with Z(x)Z, X(x)X and Y(x)Y.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .qcore import (
    KET_0,
    KET_1,
    KET_MINUS,
    KET_PLUS,
    DensityOperator,
    Effect,
    Ket,
    Povm,
    born_probability,
    ket,
    pauli_conjugate,
    tensor,
)


class TaskLabel(enum.Enum):
    ZERO_PLUS = "0+"
    ZERO_MINUS = "0-"
    ONE_PLUS = "1+"
    ONE_MINUS = "1-"

    @property
    def z_bit(self) -> int:
        """Which Z-basis state (|0> or |1>) the task draws from."""
        return int(self.value[0])

    @property
    def x_bit(self) -> int:
        """Source output bit of the X-basis state in the task: 0 for |+>, 1 for |->."""
        return 1 if self.value[1] == "-" else 0

    @property
    def slug(self) -> str:
        return "0p 0m 1p 1m".split()[ORDERED_TASKS.index(self)]

    @classmethod
    def parse(cls, s: "str | TaskLabel") -> "TaskLabel":
        if isinstance(s, TaskLabel):
            return s
        s = s.replace("−", "-").strip()
        for t in cls:
            if s in (t.value, t.slug):
                return t
        raise ValueError(f"unknown task label {s!r}")

    def __str__(self) -> str:
        return self.value


ORDERED_TASKS: tuple[TaskLabel, ...] = (
    TaskLabel.ZERO_PLUS,
    TaskLabel.ZERO_MINUS,
    TaskLabel.ONE_PLUS,
    TaskLabel.ONE_MINUS,
)
OUTCOMES: tuple[int, ...] = (1, 2, 3, 4)

# conjugating the 0+ construction by this Pauli product gives the task
ROTATION = {
    TaskLabel.ZERO_PLUS: None,
    TaskLabel.ZERO_MINUS: "ZZ",
    TaskLabel.ONE_PLUS: "XX",
    TaskLabel.ONE_MINUS: "YY",
}


class SourceCoordinates(NamedTuple):
    s_a: int
    x_a: int
    s_b: int
    x_b: int

    def side(self, party: int) -> tuple[int, int]:
        """(setting, outcome) of party 0 (A) or 1 (B)."""
        return (self.s_a, self.x_a) if party == 0 else (self.s_b, self.x_b)


def _check_bit(b: int, name: str) -> int:
    if b not in (0, 1):
        raise ValueError(f"{name} must be 0 or 1, got {b!r}")
    return int(b)


def single_qubit_ket(s: int, x: int) -> Ket:
    """Ket emitted by a multi-source: setting 0 is the Z-source, setting 1 the X-source."""
    s, x = _check_bit(s, "setting"), _check_bit(x, "outcome")
    return ((KET_0, KET_1), (KET_PLUS, KET_MINUS))[s][x]


def single_qubit_state(s: int, x: int) -> DensityOperator:
    return DensityOperator.from_ket(single_qubit_ket(s, x))


def product_state(c: SourceCoordinates) -> DensityOperator:
    return DensityOperator(tensor(single_qubit_state(c.s_a, c.x_a), single_qubit_state(c.s_b, c.x_b)))


def index_map(y: int, t: TaskLabel | str) -> SourceCoordinates:
    """Multi-source coordinates (S_A, X_A, S_B, X_B) of the state that outcome ``y`` excludes in task ``t``.

    Bits of ``y - 1`` select, per side, the Z-branch (0) or X-branch (1); A is the
    most significant bit.
    """
    t = TaskLabel.parse(t)
    if y not in OUTCOMES:
        raise ValueError(f"outcome must be in 1..4, got {y!r}")
    y_a, y_b = divmod(y - 1, 2)
    branch = ((0, t.z_bit), (1, t.x_bit))
    (s_a, x_a), (s_b, x_b) = branch[y_a], branch[y_b]
    return SourceCoordinates(s_a, x_a, s_b, x_b)


def base_measurement_kets() -> tuple[Ket, ...]:
    r = 1 / np.sqrt(2)
    pairs = (
        ((KET_0, KET_1), (KET_1, KET_0)),
        ((KET_0, KET_MINUS), (KET_1, KET_PLUS)),
        ((KET_PLUS, KET_1), (KET_MINUS, KET_0)),
        ((KET_PLUS, KET_MINUS), (KET_MINUS, KET_PLUS)),
    )
    return tuple(
        Ket(r * ((a1 @ b1).amplitudes + (a2 @ b2).amplitudes)) for (a1, b1), (a2, b2) in pairs
    )


def stabilizer_measurements() -> dict[TaskLabel, Povm]:
    """Computational-basis measurements of the noncontextual saturating experiment.

    Tasks 0+/0- use the order |11>, |10>, |01>, |00>; tasks 1+/1- use |00>, |01>, |10>, |11>.
    """
    basis = [KET_0 @ KET_0, KET_0 @ KET_1, KET_1 @ KET_0, KET_1 @ KET_1]
    reversed_order = Povm.from_kets(basis[::-1])
    natural_order = Povm.from_kets(basis)
    return {
        TaskLabel.ZERO_PLUS: reversed_order,
        TaskLabel.ZERO_MINUS: reversed_order,
        TaskLabel.ONE_PLUS: natural_order,
        TaskLabel.ONE_MINUS: natural_order,
    }


@dataclass(frozen=True, eq=False)
class ExclusionTask:
    label: TaskLabel
    states: tuple[DensityOperator, ...]
    measurement: Povm
    index_map: tuple[SourceCoordinates, ...]

    def __post_init__(self) -> None:
        if len(self.states) != 4 or len(self.measurement) != 4 or len(self.index_map) != 4:
            raise ValueError("an exclusion task has exactly four states, effects and index entries")

    def state(self, y: int) -> DensityOperator:
        return self.states[y - 1]

    def effect(self, y: int) -> Effect:
        return self.measurement[y]

    def exclusion_probabilities(self) -> np.ndarray:
        """P(E_Y | rho_Y) for Y = 1..4."""
        return np.array([born_probability(self.effect(y), self.state(y)) for y in OUTCOMES])

    def with_measurement(self, povm: Povm) -> "ExclusionTask":
        return ExclusionTask(self.label, self.states, povm, self.index_map)

    def to_dict(self) -> dict:
        from ._json import encode_matrix

        return {
            "label": self.label.value,
            "states": [encode_matrix(s.matrix) for s in self.states],
            "effects": [encode_matrix(e.matrix) for e in self.measurement.effects],
            "index_map": {str(y): list(c) for y, c in zip(OUTCOMES, self.index_map)},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExclusionTask":
        from ._json import decode_matrix

        label = TaskLabel.parse(d["label"])
        states = tuple(DensityOperator(decode_matrix(m)) for m in d["states"])
        povm = Povm(tuple(Effect(decode_matrix(m)) for m in d["effects"]))
        imap = tuple(SourceCoordinates(*d["index_map"][str(y)]) for y in OUTCOMES)
        return cls(label, states, povm, imap)


def build_task(t: TaskLabel | str, measurement: Povm | None = None) -> ExclusionTask:
    """Construct task ``t``. ``measurement`` replaces the ideal exclusion measurement if given."""
    t = TaskLabel.parse(t)
    base_states = [product_state(index_map(y, TaskLabel.ZERO_PLUS)) for y in OUTCOMES]
    base_effects = [Effect.from_ket(k) for k in base_measurement_kets()]
    rot = ROTATION[t]
    if rot is None:
        states = tuple(base_states)
        effects = tuple(base_effects)
    else:
        states = tuple(DensityOperator(pauli_conjugate(s, rot)) for s in base_states)
        effects = tuple(Effect(pauli_conjugate(e, rot)) for e in base_effects)
    povm = measurement if measurement is not None else Povm(effects)
    return ExclusionTask(t, states, povm, tuple(index_map(y, t) for y in OUTCOMES))


def build_tasks(measurements: Mapping[TaskLabel, Povm] | None = None) -> dict[TaskLabel, ExclusionTask]:
    measurements = measurements or {}
    return {t: build_task(t, measurements.get(t)) for t in ORDERED_TASKS}


def check_task(task: ExclusionTask, atol: float = 1e-12) -> dict:
    """Structural checks on an ideal task: perfect exclusion, orthogonal rank-1 effects, index map."""
    excl = task.exclusion_probabilities()
    effects = [e.matrix for e in task.measurement.effects]
    ranks_ok = all(abs(np.trace(e).real - 1.0) <= atol and np.allclose(e @ e, e, atol=atol, rtol=0) for e in effects)
    ortho = max(
        (abs(np.trace(effects[i] @ effects[j])) for i in range(4) for j in range(4) if i != j),
        default=0.0,
    )
    map_dev = max(
        float(np.max(np.abs(product_state(c).matrix - task.state(y).matrix)))
        for y, c in zip(OUTCOMES, task.index_map)
    )
    states_rank1 = all(abs(np.trace(s.matrix @ s.matrix).real - 1.0) <= atol for s in task.states)
    return {
        "label": task.label.value,
        "max_exclusion_probability": float(excl.max()),
        "max_effect_overlap": float(ortho),
        "index_map_deviation": map_dev,
        "effects_rank1": bool(ranks_ok),
        "states_pure": bool(states_rank1),
        "passed": bool(excl.max() <= atol and ortho <= atol and map_dev <= atol and ranks_ok and states_rank1),
    }


def cell_usage(tasks: Iterable[ExclusionTask]) -> dict[SourceCoordinates, int]:
    """How many task index maps each of the 16 multi-source cells appears in."""
    counts = {SourceCoordinates(*bits): 0 for bits in np.ndindex(2, 2, 2, 2)}
    for task in tasks:
        for c in set(task.index_map):
            counts[c] += 1
    return counts


def verify_operational_identity(
    plus: Ket | None = None,
    minus: Ket | None = None,
    zero: Ket | None = None,
    one: Ket | None = None,
    rotation: str | None = None,
    atol: float = 1e-12,
) -> dict:
    """Compare the averaged Z-source and X-source states.

    Any of the four kets can be overridden (to corrupt them deliberately);
    ``rotation`` applies a single-qubit Pauli to all four states first.
    """
    from .qcore import PAULI

    kets = [zero or KET_0, one or KET_1, plus or KET_PLUS, minus or KET_MINUS]
    rhos = [k.projector() for k in kets]
    if rotation is not None:
        u = PAULI[rotation]
        rhos = [u @ r @ np.conj(u.T) for r in rhos]
    z_avg = 0.5 * rhos[0] + 0.5 * rhos[1]
    x_avg = 0.5 * rhos[2] + 0.5 * rhos[3]
    dev = float(np.max(np.abs(z_avg - x_avg)))
    return {"deviation": dev, "tolerance": atol, "passed": dev <= atol}


def perturbed_plus(eps: float) -> Ket:
    """|+> with its |1> amplitude scaled by ``1 - eps`` and renormalized."""
    return ket(1.0, 1.0 - eps, normalize=True)
