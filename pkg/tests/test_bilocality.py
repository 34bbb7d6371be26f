import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exclusion_lab import _json
from exclusion_lab.bilocality import (
    FUNCTION_NAMES,
    FUNCTIONS,
    TABLE_SHAPE,
    Behavior,
    ClassicalStrategy,
    SupportPattern,
    best_classical_ce,
    induced_quads,
    possibilistic_feasibility,
    quantum_behavior,
    realize_support,
    steered_states,
    strategy_behavior,
    strategy_ce,
    support_of,
    toy_strategy,
)
from exclusion_lab.metrics import NC_BOUND, Noise, ce_from_behavior, ce_total
from exclusion_lab.ncmodel import model_ce, optimal_responses, toy_model_quad, validate_quad
from exclusion_lab.pbr import ORDERED_TASKS, OUTCOMES, build_tasks, index_map, single_qubit_state

import oracles


def exclusion_mask() -> np.ndarray:
    m = np.zeros(TABLE_SHAPE, dtype=bool)
    for ti, t in enumerate(ORDERED_TASKS):
        for y in OUTCOMES:
            c = index_map(y, t)
            m[ti, c.s_a, c.s_b, c.x_a, c.x_b, y - 1] = True
    return m


def random_strategy(rng, card_a, card_b, deterministic=False):
    def side(card):
        w = rng.dirichlet(np.ones(card))
        out = rng.integers(0, 2, size=(card, 2)).astype(float) if deterministic else rng.random((card, 2))
        return w, out

    (wa, oa), (wb, ob) = side(card_a), side(card_b)
    g = rng.dirichlet(np.ones(4), size=(4, card_a, card_b))
    return ClassicalStrategy(wa, oa, wb, ob, g)


def unbiased_strategy(rng, half):
    """Latents in complementary pairs with equal weight, so P(x = 1 | s) = 1/2 exactly."""
    w = rng.dirichlet(np.ones(half)) / 2
    o = rng.random((half, 2))
    weights = np.concatenate([w, w])
    outputs = np.concatenate([o, 1 - o])
    g = np.full((4, 2 * half, 2 * half, 4), 0.25)
    return ClassicalStrategy(weights, outputs, weights, outputs, g)


# --- quantum ------------------------------------------------------------------


def test_steered_states_match_sources():
    for (s, x), (p, sigma) in steered_states().items():
        assert p == pytest.approx(0.5, abs=1e-15)
        assert np.allclose(sigma, single_qubit_state(s, x).matrix, atol=1e-12)


def test_steered_plus():
    # derived: (|00> + |11>)/sqrt2 = (|++> + |-->)/sqrt2
    _, sigma = steered_states()[(1, 0)]
    assert np.allclose(sigma, np.full((2, 2), 0.5), atol=1e-12)


@pytest.mark.parametrize("ti,t", list(enumerate(ORDERED_TASKS)))
def test_quantum_behavior_matches_four_qubit_oracle(ti, t):
    assert np.allclose(quantum_behavior().table[ti], oracles.steering_behavior(t.value), atol=1e-12)


def test_quantum_behavior_invariants():
    b = quantum_behavior()
    rep = b.check()
    assert rep["passed"] and rep["signaling_a"] <= 1e-10 and rep["signaling_b"] <= 1e-10
    assert np.allclose(b.marginal_a(), 0.5, atol=1e-12)
    assert ce_from_behavior(b).total == pytest.approx(4.0, abs=1e-12)


@pytest.mark.parametrize("mode", ["global", "per_qubit"])
@pytest.mark.parametrize("v", [0.0, 0.5, 0.9])
def test_behavior_pipeline_agrees_with_direct_ce(mode, v):
    noise = Noise(mode, v)
    assert ce_from_behavior(quantum_behavior(noise=noise)).total == pytest.approx(ce_total(build_tasks(), noise).total, abs=1e-12)


def test_quantum_support():
    sp = support_of(quantum_behavior())
    impossible = ~sp.possible
    assert np.all(impossible[exclusion_mask()])
    assert exclusion_mask().sum() == 16
    # the ideal behavior has further zeros beyond the exclusion events
    assert impossible.sum() == 64
    assert sp.is_valid() and sp.eps == 1e-9


def test_supports_full_when_expected():
    assert support_of(Behavior.uniform()).possible.all()
    assert support_of(quantum_behavior(noise=Noise("global", 0.9))).possible.all()
    with pytest.raises(ValueError):
        support_of(Behavior.uniform(), -1.0)


# --- classical strategies ----------------------------------------------------


def test_toy_strategy():
    strat = toy_strategy()
    assert strat.is_valid() and strat.is_deterministic()
    assert strategy_ce(strat).total == pytest.approx(3.75, abs=1e-15)
    qa, qb = induced_quads(strat)
    q, _ = toy_model_quad()
    assert np.allclose(qa.stacked(), q.stacked()) and np.allclose(qb.stacked(), q.stacked())


def test_single_latent_constant_strategy():
    g = np.zeros((4, 1, 1, 4))
    g[..., 2] = 1.0
    strat = ClassicalStrategy([1.0], [[0.3, 0.6]], [1.0], [[0.5, 0.5]], g)
    b = strategy_behavior(strat)
    assert b.check()["passed"]
    assert ce_from_behavior(b).total == pytest.approx(3.0, abs=1e-15)


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 4), st.booleans())
def test_strategy_behavior_matches_loop_oracle(seed, ca, cb, det):
    strat = random_strategy(np.random.default_rng(seed), ca, cb, det)
    b = strategy_behavior(strat)
    ref = oracles.strategy_table(strat.weights_a, strat.outputs_a, strat.weights_b, strat.outputs_b, strat.response)
    assert np.allclose(b.table, ref, atol=1e-14)
    assert b.check()["passed"]


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_identical_unbiased_sources_respect_ceiling(seed, half):
    strat = unbiased_strategy(np.random.default_rng(seed), half)
    qa, qb = induced_quads(strat)
    assert validate_quad(qa)["passed"]
    xi = optimal_responses(qa, qb)
    total = model_ce(qa, qb, xi).total
    assert total <= NC_BOUND + 1e-9
    best = ClassicalStrategy(strat.weights_a, strat.outputs_a, strat.weights_b, strat.outputs_b, xi.table)
    assert strategy_ce(best).total == pytest.approx(total, abs=1e-12)


def test_strategy_validation():
    with pytest.raises(ValueError):
        ClassicalStrategy([1.0], [[0.0, 1.5]], [1.0], [[0, 1]], np.full((4, 1, 1, 4), 0.25))
    with pytest.raises(ValueError):
        ClassicalStrategy([0.5, 0.5], [[0, 1]], [1.0], [[0, 1]], np.full((4, 1, 1, 4), 0.25))
    with pytest.raises(ValueError):
        ClassicalStrategy([1.0], [[0, 1]], [1.0], [[0, 1]], np.full((4, 2, 1, 4), 0.25))


# --- search -------------------------------------------------------------------


def test_search_single_latent():
    assert best_classical_ce(1, restarts=4, seed=0).total == pytest.approx(3.0, abs=1e-12)


def test_search_card_two_reaches_ceiling():
    res = best_classical_ce(2, restarts=8, seed=0)
    assert abs(res.total - 3.75) <= 1e-9 and res.bound_respected
    assert strategy_behavior(res.strategy).check()["passed"]
    assert np.allclose(res.strategy.weights_a @ res.strategy.outputs_a, 0.5, atol=1e-9)


def test_search_is_reproducible():
    a = best_classical_ce(3, restarts=4, seed=5)
    b = best_classical_ce(3, restarts=4, seed=5)
    assert a.restart_totals == b.restart_totals
    assert json.dumps(_json.to_jsonable(a.to_dict())) == json.dumps(_json.to_jsonable(b.to_dict()))


def test_distinct_sources_break_ceiling():
    # derived: mirrors the two-quad model with value 4 (see the ncmodel tests)
    res = best_classical_ce(2, restarts=8, seed=0, symmetric=False)
    assert res.total == pytest.approx(4.0, abs=1e-9)
    g = np.zeros((4, 2, 2, 4))
    strat = ClassicalStrategy.from_functions([0.5, 0.5], [0, 3], [0.5, 0.5], [1, 2], g + 0.25)
    qa, qb = induced_quads(strat)
    xi = optimal_responses(qa, qb)
    assert model_ce(qa, qb, xi).total == 4.0


def test_biased_sources_break_ceiling():
    # derived: with P(x|s) free, identical sources get close to 31/8 as the bias floor shrinks
    res = best_classical_ce(3, restarts=16, seed=0, unbiased=False)
    assert 3.75 + 1e-3 < res.total <= 3.875 + 1e-9
    assert res.total == pytest.approx(3.875, abs=1e-5)


def test_search_rejects_bad_cardinality():
    with pytest.raises(ValueError):
        best_classical_ce(0)
    with pytest.raises(ValueError):
        best_classical_ce(2, 3)


# --- possibilistic ------------------------------------------------------------


def test_quantum_support_is_infeasible():
    rep = possibilistic_feasibility(support_of(quantum_behavior()))
    assert rep["verdict"] == "INFEASIBLE"
    w = rep["witness"]
    assert (w["f_a_name"], w["f_b_name"], w["t"]) == ("const0", "const0", "0+")
    assert rep["forced_functions_a"] == [list(f) for f in FUNCTIONS]
    assert rep["eps"] == 1e-9 and rep["soundness"]


def test_blocked_triples_by_exhaustive_check():
    possible = support_of(quantum_behavior()).possible
    blocked = set()
    for fa, fb, ti in itertools.product(range(4), range(4), range(4)):
        ys = [
            y
            for y in range(4)
            if all(possible[ti, sa, sb, FUNCTIONS[fa][sa], FUNCTIONS[fb][sb], y] for sa in (0, 1) for sb in (0, 1))
        ]
        if not ys:
            blocked.add((FUNCTION_NAMES[fa], FUNCTION_NAMES[fb], ORDERED_TASKS[ti].value))
    rep = possibilistic_feasibility(support_of(quantum_behavior()))
    assert {(b["f_a_name"], b["f_b_name"], b["t"]) for b in rep["blocked_triples"]} == blocked
    assert ("const0", "const0", "0+") in blocked


def test_uniform_and_toy_supports():
    assert possibilistic_feasibility(support_of(Behavior.uniform()))["verdict"] == "UNDECIDED-FEASIBLE"
    sp = support_of(strategy_behavior(toy_strategy()))
    rep = possibilistic_feasibility(sp)
    assert rep["verdict"] == "UNDECIDED-FEASIBLE" and rep["witness"] is None
    realized = support_of(strategy_behavior(realize_support(rep["realization"], sp)))
    assert np.array_equal(realized.possible, sp.possible)


def test_invalid_pattern_rejected():
    p = np.ones(TABLE_SHAPE, dtype=bool)
    p[0, 0, 0] = False
    with pytest.raises(ValueError):
        possibilistic_feasibility(SupportPattern(p))


def test_infeasible_quantum_support_not_reached_by_search():
    possible = support_of(quantum_behavior()).possible
    res = best_classical_ce(4, restarts=4, seed=0)
    assert not np.all(possible[support_of(strategy_behavior(res.strategy)).possible])


def test_soundness_on_random_supports():
    rng = np.random.default_rng(17)
    base = support_of(quantum_behavior()).possible
    zeros = np.argwhere(~base)
    checked = {"INFEASIBLE": 0, "UNDECIDED-FEASIBLE": 0}
    for _ in range(50):
        p = base.copy()
        for idx in zeros[rng.random(len(zeros)) < rng.uniform(0.05, 0.6)]:
            p[tuple(idx)] = True
        sp = SupportPattern(p)
        rep = possibilistic_feasibility(sp)
        checked[rep["verdict"]] += 1
        if rep["verdict"] == "INFEASIBLE":
            assert not oracles.realizable_exactly(p)
        elif rep["realization"] is not None:
            strat = realize_support(rep["realization"], sp)
            assert np.array_equal(support_of(strategy_behavior(strat)).possible, p)
    assert checked["INFEASIBLE"] > 0


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
def test_classical_supports_are_never_infeasible(seed, ca, cb):
    rng = np.random.default_rng(seed)
    strat = random_strategy(rng, ca, cb, deterministic=True)
    g = np.zeros((4, ca, cb, 4))
    # sparse deterministic responses so the support has real holes
    idx = rng.integers(0, 4, size=(4, ca, cb))
    np.put_along_axis(g, idx[..., None], 1.0, axis=3)
    strat = ClassicalStrategy(strat.weights_a, strat.outputs_a, strat.weights_b, strat.outputs_b, g)
    sp = support_of(strategy_behavior(strat))
    if sp.is_valid():
        assert possibilistic_feasibility(sp)["verdict"] == "UNDECIDED-FEASIBLE"


# --- files ------------------------------------------------------------------


def test_behavior_json_round_trip(tmp_path):
    b = quantum_behavior(noise=Noise("global", 0.7))
    path = tmp_path / "b.json"
    _json.write(b.to_dict(), path)
    d = json.loads(path.read_text())
    assert len(d["contexts"]) == 16 and all(len(v) == 16 for v in d["contexts"].values())
    assert "s_a=0,s_b=1,t=1-" in d["contexts"]
    assert np.array_equal(Behavior.from_dict(d).table, b.table)


def test_support_json_round_trip():
    sp = support_of(quantum_behavior())
    back = SupportPattern.from_dict(json.loads(_json.dumps(sp.to_dict())))
    assert np.array_equal(back.possible, sp.possible) and back.eps == sp.eps


def test_strategy_json_round_trip():
    strat = toy_strategy()
    back = ClassicalStrategy.from_dict(json.loads(_json.dumps(strat.to_dict())))
    assert np.array_equal(back.response, strat.response)
    assert strategy_ce(back).total == 3.75


def test_behavior_signaling_detected():
    table = np.full(TABLE_SHAPE, 1 / 16)
    table[0, 0, 1] = 0.0
    table[0, 0, 1, 1, :, :] = 1 / 8  # A's output now depends on s_b
    assert not Behavior(table).check()["passed"]
    with pytest.raises(ValueError):
        Behavior(np.zeros((4, 2, 2)))
