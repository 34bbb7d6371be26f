import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from exclusion_lab import _json
from exclusion_lab.pbr import (
    ORDERED_TASKS,
    OUTCOMES,
    ExclusionTask,
    SourceCoordinates,
    TaskLabel,
    build_task,
    build_tasks,
    cell_usage,
    check_task,
    index_map,
    perturbed_plus,
    single_qubit_state,
    stabilizer_measurements,
    verify_operational_identity,
)
from exclusion_lab.qcore import KET_0, KET_MINUS, KET_PLUS, tensor

import oracles


def test_label_parsing():
    assert TaskLabel.parse("0−") is TaskLabel.ZERO_MINUS
    assert TaskLabel.parse("1p") is TaskLabel.ONE_PLUS
    assert [t.value for t in ORDERED_TASKS] == ["0+", "0-", "1+", "1-"]
    with pytest.raises(ValueError):
        TaskLabel.parse("2+")


def test_single_qubit_states():
    # published: bit 0 for |0> and for |+>, bit 1 for |->
    assert np.allclose(single_qubit_state(0, 0).matrix, KET_0.projector())
    assert np.allclose(single_qubit_state(1, 0).matrix, KET_PLUS.projector())
    assert np.allclose(single_qubit_state(1, 1).matrix, KET_MINUS.projector())
    with pytest.raises(ValueError):
        single_qubit_state(2, 0)


def test_index_map_examples():
    assert index_map(1, "0+") == SourceCoordinates(0, 0, 0, 0)
    assert index_map(4, "0+") == SourceCoordinates(1, 0, 1, 0)
    assert index_map(2, "1-") == SourceCoordinates(0, 1, 1, 1)
    with pytest.raises(ValueError):
        index_map(5, "0+")


@pytest.mark.parametrize("t", ORDERED_TASKS)
def test_index_map_matches_hand_table(t):
    assert [tuple(index_map(y, t)) for y in OUTCOMES] == [oracles.INDEX_MAP[t.value][y] for y in OUTCOMES]


@pytest.mark.parametrize("t", ORDERED_TASKS)
def test_task_states_match_literal_kets(t):
    task = build_task(t)
    for y in OUTCOMES:
        psi = oracles.product_ket(*oracles.INDEX_MAP[t.value][y])
        assert np.allclose(task.state(y).matrix, np.outer(psi, psi.conj()), atol=1e-12)


@pytest.mark.parametrize("t", ORDERED_TASKS)
def test_tasks_pass_structural_checks(t):
    rep = check_task(build_task(t))
    assert rep["passed"], rep
    assert rep["max_exclusion_probability"] <= 1e-12


def test_zero_minus_states():
    # derived: Z(x)Z applied to |00>, |0+>, |+0>, |++>
    task = build_task("0-")
    kets = [(KET_0, KET_0), (KET_0, KET_MINUS), (KET_MINUS, KET_0), (KET_MINUS, KET_MINUS)]
    for y, (a, b) in zip(OUTCOMES, kets):
        assert np.allclose(task.state(y).matrix, tensor(a.projector(), b.projector()), atol=1e-12)


def test_cell_usage_histogram():
    counts = cell_usage(build_tasks().values())
    hist = {}
    for c in counts.values():
        hist[c] = hist.get(c, 0) + 1
    assert hist == {0: 4, 1: 8, 2: 4}
    assert counts[SourceCoordinates(0, 0, 0, 0)] == 2


def test_stabilizer_measurement_gives_fifteen_sixteenths():
    meas = stabilizer_measurements()
    for t in ORDERED_TASKS:
        events = build_task(t, meas[t]).exclusion_probabilities()
        # published: CE_T = 1 - 1/4 (0 + 0 + 0 + 1/4)
        assert sorted(events.tolist()) == pytest.approx([0, 0, 0, 0.25], abs=1e-15)


def test_operational_identity():
    assert verify_operational_identity()["passed"]
    for rot in ("X", "Y", "Z"):
        assert verify_operational_identity(rotation=rot)["deviation"] <= 1e-15


def test_operational_identity_detects_perturbation():
    rep = verify_operational_identity(plus=perturbed_plus(0.01))
    # derived: |+'> = (|0> + 0.99|1>)/norm gives an off-diagonal gap of about 2.5e-3
    a = np.array([1, 0.99]) / np.hypot(1, 0.99)
    gap = abs(0.5 * (np.outer(a, a) + KET_MINUS.projector().real) - np.eye(2) / 2).max()
    assert rep["deviation"] == pytest.approx(gap, abs=1e-15)
    assert rep["deviation"] > 1e-3 and not rep["passed"]


@pytest.mark.parametrize("t", ORDERED_TASKS)
def test_task_json_round_trip(t, tmp_path):
    task = build_task(t)
    path = tmp_path / "task.json"
    _json.write(task.to_dict(), path)
    back = ExclusionTask.from_dict(json.loads(path.read_text()))
    assert back.label is task.label and back.index_map == task.index_map
    for a, b in zip(back.states, task.states):
        assert np.array_equal(a.matrix, b.matrix)
    for a, b in zip(back.measurement.effects, task.measurement.effects):
        assert np.array_equal(a.matrix, b.matrix)


@given(st.floats(1e-3, 0.5))
def test_perturbed_plus_is_normalized_and_off(eps):
    k = perturbed_plus(eps)
    assert np.linalg.norm(k.amplitudes) == pytest.approx(1.0)
    assert not verify_operational_identity(plus=k)["passed"]
