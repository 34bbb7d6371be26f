"""Bilocality-scenario behaviors ``P(x_a, x_b, y | s_a, s_b, t)``.

Quantum behaviors come from steering one half of a maximally entangled pair
on each side; classical behaviors from two independent latent variables,
each feeding a one-bit source station and the central measurement.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import minimize

from ._parallel import ordered_map
from .metrics import NC_BOUND, CeReport, Noise, ce_from_behavior
from .ncmodel import NcModelQuad, coefficients_from_stacked, failure_gradients
from .pbr import ORDERED_TASKS, OUTCOMES, ExclusionTask, TaskLabel, build_tasks, single_qubit_ket
from .qcore import born_probability, partial_trace

# table axes: [t, s_a, s_b, x_a, x_b, y-1]
TABLE_SHAPE = (4, 2, 2, 2, 2, 4)
# deterministic source-station functions: index k -> (f(0), f(1)); k = 0 is "always output 0"
FUNCTIONS: tuple[tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))
FUNCTION_NAMES = ("const0", "identity", "negation", "const1")

PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)


def context_key(t: TaskLabel, s_a: int, s_b: int) -> str:
    return f"s_a={s_a},s_b={s_b},t={t.value}"


def _parse_context(key: str) -> tuple[int, int, int]:
    parts = dict(p.split("=") for p in key.split(","))
    return ORDERED_TASKS.index(TaskLabel.parse(parts["t"])), int(parts["s_a"]), int(parts["s_b"])


@dataclass(frozen=True, eq=False)
class Behavior:
    table: np.ndarray
    provenance: str = "external"

    def __post_init__(self) -> None:
        t = np.array(self.table, dtype=float)
        if t.shape != TABLE_SHAPE:
            raise ValueError(f"behavior table must have shape {TABLE_SHAPE}, got {t.shape}")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def context_sums(self) -> np.ndarray:
        return self.table.sum(axis=(3, 4, 5))

    def marginal_a(self) -> np.ndarray:
        """``P(x_a | s_a, s_b, t)`` indexed ``[t, s_a, s_b, x_a]``."""
        return self.table.sum(axis=(4, 5))

    def marginal_b(self) -> np.ndarray:
        return self.table.sum(axis=(3, 5))

    def check(self, tol_norm: float = 1e-12, tol_ns: float = 1e-10) -> dict:
        neg = float(max(0.0, -self.table.min()))
        norm = float(np.max(np.abs(self.context_sums() - 1.0)))
        ma, mb = self.marginal_a(), self.marginal_b()
        # A's output may depend on s_a only; B's on s_b only
        ns_a = float(np.max(np.abs(ma - ma[:1, :, :1, :])))
        ns_b = float(np.max(np.abs(mb - mb[:1, :1, :, :])))
        return {
            "negativity": neg,
            "normalization": norm,
            "signaling_a": ns_a,
            "signaling_b": ns_b,
            "passed": neg <= tol_norm and norm <= tol_norm and ns_a <= tol_ns and ns_b <= tol_ns,
        }

    def to_dict(self) -> dict:
        out = {}
        for ti, t in enumerate(ORDERED_TASKS):
            for s_a, s_b in itertools.product((0, 1), repeat=2):
                out[context_key(t, s_a, s_b)] = self.table[ti, s_a, s_b].reshape(-1).tolist()
        return {"provenance": self.provenance, "contexts": out}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Behavior":
        table = np.zeros(TABLE_SHAPE)
        for key, probs in d["contexts"].items():
            ti, s_a, s_b = _parse_context(key)
            table[ti, s_a, s_b] = np.asarray(probs, dtype=float).reshape(2, 2, 4)
        return cls(table, d.get("provenance", "external"))

    @classmethod
    def uniform(cls) -> "Behavior":
        return cls(np.full(TABLE_SHAPE, 1.0 / 16), "external")


@dataclass(frozen=True, eq=False)
class SupportPattern:
    possible: np.ndarray
    eps: float = 1e-9

    def __post_init__(self) -> None:
        p = np.array(self.possible, dtype=bool)
        if p.shape != TABLE_SHAPE:
            raise ValueError(f"support pattern must have shape {TABLE_SHAPE}")
        p.setflags(write=False)
        object.__setattr__(self, "possible", p)

    def is_valid(self) -> bool:
        return bool(np.all(self.possible.any(axis=(3, 4, 5))))

    def impossible_events(self) -> list[dict]:
        out = []
        for ti, s_a, s_b, x_a, x_b, yi in zip(*np.nonzero(~self.possible)):
            out.append(
                {"t": ORDERED_TASKS[ti].value, "s_a": int(s_a), "s_b": int(s_b), "x_a": int(x_a), "x_b": int(x_b), "y": int(yi) + 1}
            )
        return out

    def to_dict(self) -> dict:
        out = {}
        for ti, t in enumerate(ORDERED_TASKS):
            for s_a, s_b in itertools.product((0, 1), repeat=2):
                out[context_key(t, s_a, s_b)] = [bool(v) for v in self.possible[ti, s_a, s_b].reshape(-1)]
        return {"eps": self.eps, "contexts": out}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SupportPattern":
        p = np.zeros(TABLE_SHAPE, dtype=bool)
        for key, vals in d["contexts"].items():
            ti, s_a, s_b = _parse_context(key)
            p[ti, s_a, s_b] = np.asarray(vals, dtype=bool).reshape(2, 2, 4)
        return cls(p, float(d.get("eps", 1e-9)))


def support_of(b: Behavior, eps: float = 1e-9) -> SupportPattern:
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return SupportPattern(b.table > eps, eps)


# --------------------------------------------------------------------------
# quantum


def steered_states() -> dict[tuple[int, int], tuple[float, np.ndarray]]:
    """Probability and normalized state of the system half after measuring the ancilla.

    Setting 0 measures the ancilla in the Z basis, setting 1 in the X basis;
    outcome labels follow the multi-source convention.
    """
    phi = np.outer(PHI_PLUS, np.conj(PHI_PLUS))
    out = {}
    for s, x in itertools.product((0, 1), repeat=2):
        k = single_qubit_ket(s, x)
        # ancilla is the left factor
        sigma = partial_trace(np.kron(k.projector(), np.eye(2)) @ phi, keep=1)
        p = float(np.trace(sigma).real)
        out[(s, x)] = (p, sigma / p)
    return out


def quantum_behavior(tasks: Mapping[TaskLabel, ExclusionTask] | None = None, noise: Noise | None = None) -> Behavior:
    tasks = build_tasks() if tasks is None else dict(tasks)
    steer = steered_states()
    table = np.zeros(TABLE_SHAPE)
    for ti, t in enumerate(ORDERED_TASKS):
        povm = tasks[t].measurement
        for s_a, s_b, x_a, x_b in itertools.product((0, 1), repeat=4):
            p_a, rho_a = steer[(s_a, x_a)]
            p_b, rho_b = steer[(s_b, x_b)]
            rho = np.kron(rho_a, rho_b)
            if noise is not None:
                rho = noise.apply(rho)
            for y in OUTCOMES:
                table[ti, s_a, s_b, x_a, x_b, y - 1] = p_a * p_b * born_probability(povm[y], rho)
    return Behavior(table, "quantum")


# --------------------------------------------------------------------------
# classical


@dataclass(frozen=True, eq=False)
class ClassicalStrategy:
    """Two independent latents, one per source, both also feeding the central station.

    ``outputs_a[l, s]`` is ``P(x_a = 1 | s_a = s, lambda_A = l)``; 0/1 entries
    make the source station a deterministic function of its setting. Only one
    setting is used per run, so these per-setting probabilities fully describe
    a stochastic station. ``response[t, l_a, l_b, y-1]`` is the central
    station's output distribution.
    """

    weights_a: np.ndarray
    outputs_a: np.ndarray
    weights_b: np.ndarray
    outputs_b: np.ndarray
    response: np.ndarray

    def __post_init__(self) -> None:
        for name in ("weights_a", "weights_b", "response", "outputs_a", "outputs_b"):
            a = np.array(getattr(self, name), dtype=float)
            if name.startswith("outputs"):
                a = a.reshape(-1, 2)
                if a.min() < 0 or a.max() > 1:
                    raise ValueError(f"{name} holds probabilities and must lie in [0, 1]")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.outputs_a.shape[0] != self.weights_a.size or self.outputs_b.shape[0] != self.weights_b.size:
            raise ValueError("one output row per latent value is required")
        if self.response.shape != (4, self.weights_a.size, self.weights_b.size, 4):
            raise ValueError("response table shape does not match the latent cardinalities")

    @classmethod
    def from_functions(cls, weights_a, funcs_a, weights_b, funcs_b, response) -> "ClassicalStrategy":
        """Deterministic source stations given as indices into ``FUNCTIONS``."""
        return cls(
            weights_a, np.array([FUNCTIONS[k] for k in funcs_a]).reshape(-1, 2),
            weights_b, np.array([FUNCTIONS[k] for k in funcs_b]).reshape(-1, 2),
            response,
        )

    def is_valid(self, atol: float = 1e-12) -> bool:
        ok_w = all(np.all(w >= -atol) and abs(w.sum() - 1.0) <= atol for w in (self.weights_a, self.weights_b))
        ok_g = np.all(self.response >= -atol) and np.max(np.abs(self.response.sum(axis=3) - 1.0)) <= atol
        return bool(ok_w and ok_g)

    def is_deterministic(self) -> bool:
        return bool(all(np.all((o == 0) | (o == 1)) for o in (self.outputs_a, self.outputs_b)))

    def to_dict(self) -> dict:
        return {
            "weights_a": self.weights_a.tolist(),
            "outputs_a": self.outputs_a.tolist(),
            "weights_b": self.weights_b.tolist(),
            "outputs_b": self.outputs_b.tolist(),
            "response": {t.value: self.response[i].tolist() for i, t in enumerate(ORDERED_TASKS)},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ClassicalStrategy":
        resp = np.array([d["response"][t.value] for t in ORDERED_TASKS], dtype=float)
        if resp.ndim == 3:  # deterministic outcome labels
            resp = np.eye(4)[resp.astype(int) - 1]
        return cls(d["weights_a"], d["outputs_a"], d["weights_b"], d["outputs_b"], resp)


def strategy_behavior(strat: ClassicalStrategy) -> Behavior:
    # hit[l, s, x] = P(x | s, l)
    hit_a = np.stack([1.0 - strat.outputs_a, strat.outputs_a], axis=2)
    hit_b = np.stack([1.0 - strat.outputs_b, strat.outputs_b], axis=2)
    table = np.einsum("a,b,asx,btz,kaby->kstxzy", strat.weights_a, strat.weights_b, hit_a, hit_b, strat.response)
    return Behavior(table, "classical")


def source_marginals(weights: np.ndarray, outputs: np.ndarray) -> np.ndarray:
    """``P(x = 1 | s)`` for s = 0, 1."""
    return np.asarray(weights) @ np.asarray(outputs).reshape(-1, 2)


def _side_stacked(w: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Latent posteriors ``P(lambda | s, x)`` as a ``[s, x, lambda]`` array, from weights and ``u[l, s] = w[l] P(x=1 | s, l)``."""
    mass = np.stack([np.clip(w[:, None] - u, 0.0, None), np.clip(u, 0.0, None)], axis=0)  # [x, l, s]
    tot = mass.sum(axis=1, keepdims=True)
    post = np.divide(mass, tot, out=np.zeros_like(mass), where=tot > 0)
    return post.transpose(2, 0, 1)


def _side_quad(w: np.ndarray, u: np.ndarray) -> NcModelQuad:
    return NcModelQuad.from_stacked(_side_stacked(w, u))


def induced_quads(strat: ClassicalStrategy) -> tuple[NcModelQuad, NcModelQuad]:
    """Per-side conditional latent distributions ``P(lambda | s, x)`` as quads.

    With unbiased sources these satisfy the ontic identity with weights 1/2.
    """
    return (
        _side_quad(strat.weights_a, strat.weights_a[:, None] * strat.outputs_a),
        _side_quad(strat.weights_b, strat.weights_b[:, None] * strat.outputs_b),
    )


def toy_strategy() -> ClassicalStrategy:
    """Four latents ``(z, x)`` per side, uniform; setting 0 reveals ``z``, setting 1 reveals ``x``.

    The central station reads ``(z_A, z_B)`` like the computational-basis
    measurements of the saturating stabilizer experiment.
    """
    z = np.array([0, 0, 1, 1])
    x = np.array([0, 1, 0, 1])
    outputs = np.stack([z, x], axis=1)
    za, zb = np.meshgrid(z, z, indexing="ij")
    natural = 2 * za + zb + 1
    reverse = 5 - natural
    outcomes = np.array([reverse, reverse, natural, natural])
    w = np.full(4, 0.25)
    return ClassicalStrategy(w, outputs, w, outputs, np.eye(4)[outcomes - 1])


def strategy_ce(strat: ClassicalStrategy) -> CeReport:
    return ce_from_behavior(strategy_behavior(strat))


# search state per side: v = concat(w, u.ravel()) with u[l, s] = w[l] P(x=1 | s, l)


def _unpack(v: np.ndarray, card: int) -> tuple[np.ndarray, np.ndarray]:
    return v[:card], v[card:].reshape(card, 2)


def _pack(w: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.concatenate([w, u.ravel()])


def _sides(v: np.ndarray, card_a: int, card_b: int, symmetric: bool):
    if symmetric:
        return _unpack(v, card_a), _unpack(v, card_a)
    n_a = 3 * card_a
    return _unpack(v[:n_a], card_a), _unpack(v[n_a:], card_b)


def _optimal_ce(side_a, side_b) -> tuple[float, np.ndarray]:
    c = coefficients_from_stacked(_side_stacked(*side_a), _side_stacked(*side_b))
    best = c.argmin(axis=3)
    g = np.eye(4)[best]
    return 4.0 - 0.25 * float(np.take_along_axis(c, best[..., None], axis=3).sum()), g


def _side_gradient(w: np.ndarray, u: np.ndarray, grad_post: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Chain rule from d/dP(lambda | s, x) to d/dw and d/du (quotient rule on the normalization)."""
    gw = np.zeros_like(w)
    gu = np.zeros_like(u)
    for s in (0, 1):
        for x, mass, sign in ((0, w - u[:, s], -1.0), (1, u[:, s], 1.0)):
            tot = mass.sum()
            if tot <= 0:
                continue
            g = grad_post[s, x]
            d = g / tot - float(g @ mass) / tot**2
            gu[:, s] += sign * d
            if x == 0:
                gw += d
    return gw, gu


def _failure_and_grad(v, card_a, card_b, symmetric, g):
    (w_a, u_a), (w_b, u_b) = _sides(v, card_a, card_b, symmetric)
    st_a, st_b = _side_stacked(w_a, u_a), _side_stacked(w_b, u_b)
    val = float(np.einsum("taby,taby->", g, coefficients_from_stacked(st_a, st_b)))
    ga, gb = failure_gradients(st_a, st_b, g)
    gwa, gua = _side_gradient(w_a, u_a, ga)
    gwb, gub = _side_gradient(w_b, u_b, gb)
    if symmetric:
        return val, _pack(gwa + gwb, gua + gub)
    return val, np.concatenate([_pack(gwa, gua), _pack(gwb, gub)])


def _side_constraints(sl: slice, card: int, unbiased: bool, floor: float) -> list[dict]:
    def wu(v):
        return _unpack(v[sl], card)

    cons = [
        {"type": "eq", "fun": lambda v: np.array([wu(v)[0].sum() - 1.0])},
        {"type": "ineq", "fun": lambda v: (wu(v)[0][:, None] - wu(v)[1]).ravel()},
    ]
    if unbiased:
        cons.append({"type": "eq", "fun": lambda v: wu(v)[1].sum(axis=0) - 0.5})
    else:
        # every conditioning event P(x | s) stays away from zero
        cons.append({"type": "ineq", "fun": lambda v: np.concatenate([wu(v)[1].sum(axis=0) - floor, 1.0 - floor - wu(v)[1].sum(axis=0)])})
    return cons


def _constraints(card_a: int, card_b: int, symmetric: bool, unbiased: bool, floor: float) -> list[dict]:
    cons = _side_constraints(slice(0, 3 * card_a), card_a, unbiased, floor)
    if not symmetric:
        cons += _side_constraints(slice(3 * card_a, 3 * card_a + 3 * card_b), card_b, unbiased, floor)
    return cons


def _is_feasible(v: np.ndarray, card_a: int, card_b: int, symmetric: bool, unbiased: bool, floor: float) -> bool:
    if v.min() < -1e-12:
        return False
    for side in _sides(v, card_a, card_b, symmetric)[: 1 if symmetric else 2]:
        w, u = side
        m = u.sum(axis=0)
        if abs(w.sum() - 1.0) > 1e-9 or np.any(u > w[:, None] + 1e-12):
            return False
        if unbiased and np.max(np.abs(m - 0.5)) > 1e-9:
            return False
        if not unbiased and (m.min() < floor - 1e-9 or m.max() > 1.0 - floor + 1e-9):
            return False
    return True


def _project(target: np.ndarray, cons: list[dict], check) -> np.ndarray | None:
    """Closest feasible point to ``target`` (small QP via SLSQP); None when the repair fails."""
    res = minimize(
        lambda v: float(np.sum((v - target) ** 2)),
        np.clip(target, 0.0, 1.0),
        jac=lambda v: 2.0 * (v - target),
        method="SLSQP",
        bounds=[(0.0, 1.0)] * target.size,
        constraints=cons,
        options={"maxiter": 300, "ftol": 1e-15},
    )
    v = np.clip(res.x, 0.0, 1.0)
    return v if check(v) else None


@dataclass
class ClassicalSearchResult:
    strategy: ClassicalStrategy
    total: float
    symmetric: bool
    unbiased: bool
    restart_totals: list[float] = field(default_factory=list)

    @property
    def bound_respected(self) -> bool:
        return self.total <= NC_BOUND + 1e-9

    def to_dict(self) -> dict:
        return {
            "best_found": self.total,
            "analytic_bound": NC_BOUND,
            "bound_respected": self.bound_respected,
            "identical_sources": self.symmetric,
            "unbiased_sources": self.unbiased,
            "strategy": self.strategy.to_dict(),
        }


def best_classical_ce(
    card_a: int,
    card_b: int | None = None,
    restarts: int = 16,
    seed: int | None = 0,
    symmetric: bool = True,
    unbiased: bool = True,
    max_rounds: int = 30,
    marginal_floor: float = 1e-3,
) -> ClassicalSearchResult:
    """See-saw search over classical bilocal strategies.

    Each round takes the optimal central response, then improves latent
    weights and source outputs by a local constrained step, then tries every
    deterministic output function on each latent. By default both sources are
    copies of one device with unbiased outputs, ``P(x | s) = 1/2``, the
    setting in which the 15/4 ceiling holds; either restriction can be lifted.
    """
    card_b = card_a if card_b is None else card_b
    if card_a < 1 or card_b < 1:
        raise ValueError("latent cardinalities must be at least 1")
    if symmetric and card_a != card_b:
        raise ValueError("identical sources need equal latent cardinalities")
    cons = _constraints(card_a, card_b, symmetric, unbiased, marginal_floor)

    def feasible(v):
        return _is_feasible(v, card_a, card_b, symmetric, unbiased, marginal_floor)

    cards = (card_a,) if symmetric else (card_a, card_b)

    def random_point(rng) -> np.ndarray:
        parts = []
        for card in cards:
            w = rng.dirichlet(np.ones(card))
            f = np.array([FUNCTIONS[k] for k in rng.integers(0, 4, size=card)])
            parts.append(_pack(w, w[:, None] * f))
        return np.concatenate(parts)

    def evaluate(v) -> tuple[float, np.ndarray]:
        return _optimal_ce(*_sides(v, card_a, card_b, symmetric))

    def one(ss):
        rng = np.random.default_rng(ss)
        v = None
        for _ in range(50):
            v = _project(random_point(rng), cons, feasible)
            if v is not None:
                break
        if v is None:
            return -np.inf, None
        best, g = evaluate(v)
        for _ in range(max_rounds):
            improved = False
            # continuous step at fixed response
            res = minimize(
                _failure_and_grad,
                v,
                args=(card_a, card_b, symmetric, g),
                jac=True,
                method="SLSQP",
                bounds=[(0.0, 1.0)] * v.size,
                constraints=cons,
                options={"maxiter": 200, "ftol": 1e-15},
            )
            cand = np.clip(res.x, 0.0, 1.0)
            if feasible(cand):
                val, ng = evaluate(cand)
                if val > best + 1e-12:
                    v, best, g, improved = cand, val, ng, True
            # discrete step: deterministic output function per latent
            offset = 0
            for card in cards:
                for lam in range(card):
                    for f in FUNCTIONS:
                        trial = v.copy()
                        w_lam = trial[offset + lam]
                        trial[offset + card + 2 * lam : offset + card + 2 * lam + 2] = w_lam * np.array(f)
                        trial = trial if feasible(trial) else _project(trial, cons, feasible)
                        if trial is None:
                            continue
                        val, ng = evaluate(trial)
                        if val > best + 1e-12:
                            v, best, g, improved = trial, val, ng, True
                offset += 3 * card
            if not improved:
                break
        (w_a, u_a), (w_b, u_b) = _sides(v, card_a, card_b, symmetric)
        strat = ClassicalStrategy(
            w_a / w_a.sum(), _outputs(w_a, u_a), w_b / w_b.sum(), _outputs(w_b, u_b), g
        )
        return best, strat

    seeds = np.random.SeedSequence(seed).spawn(restarts)
    results = ordered_map(one, seeds)
    totals = [r[0] for r in results]
    k = int(np.argmax(totals))
    strat = results[k][1]
    if strat is None:
        raise RuntimeError("no restart produced a strategy satisfying the source constraints")
    total = strategy_ce(strat).total
    return ClassicalSearchResult(strat, total, symmetric, unbiased, totals)


def _outputs(w: np.ndarray, u: np.ndarray) -> np.ndarray:
    safe = np.where(w > 0, w, 1.0)
    return np.clip(u / safe[:, None], 0.0, 1.0)


# --------------------------------------------------------------------------
# possibilistic analysis


def _allowed_outcomes(sp: SupportPattern) -> np.ndarray:
    """``allowed[f_a, f_b, t, y-1]``: outcome y never lands on an impossible event for this latent pair."""
    allowed = np.ones((4, 4, 4, 4), dtype=bool)
    for fa, fb in itertools.product(range(4), repeat=2):
        for s_a, s_b in itertools.product((0, 1), repeat=2):
            allowed[fa, fb] &= sp.possible[:, s_a, s_b, FUNCTIONS[fa][s_a], FUNCTIONS[fb][s_b], :]
    return allowed


def _coverage(allowed: np.ndarray, set_a, set_b) -> np.ndarray:
    """Events produced by latents with functions in ``set_a`` x ``set_b`` using every allowed outcome."""
    cov = np.zeros(TABLE_SHAPE, dtype=bool)
    for fa in set_a:
        for fb in set_b:
            for s_a, s_b in itertools.product((0, 1), repeat=2):
                cov[:, s_a, s_b, FUNCTIONS[fa][s_a], FUNCTIONS[fb][s_b], :] |= allowed[fa, fb]
    return cov


def _subsets(items) -> list[tuple[int, ...]]:
    items = list(items)
    return [c for r in range(1, len(items) + 1) for c in itertools.combinations(items, r)]


SOUNDNESS_NOTE = (
    "A latent only matters to the support through the output function it induces at the two settings "
    "and its identity as an input of the central station; latents sharing a function can be merged "
    "without changing the support. Coverage of the possible events is monotone in the set of functions "
    "present on each side, so a function whose removal (with every other function kept) already leaves "
    "some possible event uncovered must carry positive weight in any model reproducing the support. "
    "Independence of the two latents then gives the pair (f_A, f_B) positive weight, and if every outcome "
    "y of task t lands on an impossible event for that pair, no model can reproduce the support."
)


def possibilistic_feasibility(sp: SupportPattern) -> dict:
    """Support-level test for a classical bilocal model.

    INFEASIBLE comes with a witness triple ``(f_A, f_B, t)``: both functions are
    forced by the support and every outcome of task ``t`` is blocked for that
    latent pair. Otherwise the verdict is UNDECIDED-FEASIBLE, with the surviving
    outcome sets and, when the function-set enumeration finds one, an explicit
    realizing assignment.
    """
    if not sp.is_valid():
        raise ValueError("support pattern has a context with no possible event")
    allowed = _allowed_outcomes(sp)
    blocked = [
        (fa, fb, ti) for fa, fb, ti in itertools.product(range(4), range(4), range(4)) if not allowed[fa, fb, ti].any()
    ]
    full = range(4)
    target = sp.possible

    def covers(cov):
        return bool(np.all(cov[target]))

    forced_a = [f for f in full if not covers(_coverage(allowed, [g for g in full if g != f], full))]
    forced_b = [f for f in full if not covers(_coverage(allowed, full, [g for g in full if g != f]))]

    def fmt(fa, fb, ti):
        return {
            "f_a": list(FUNCTIONS[fa]),
            "f_b": list(FUNCTIONS[fb]),
            "f_a_name": FUNCTION_NAMES[fa],
            "f_b_name": FUNCTION_NAMES[fb],
            "t": ORDERED_TASKS[ti].value,
        }

    report = {
        "eps": sp.eps,
        "blocked_triples": [fmt(*b) for b in blocked],
        "forced_functions_a": [list(FUNCTIONS[f]) for f in forced_a],
        "forced_functions_b": [list(FUNCTIONS[f]) for f in forced_b],
        "soundness": SOUNDNESS_NOTE,
    }
    witnesses = [b for b in blocked if b[0] in forced_a and b[1] in forced_b]
    if witnesses:
        report.update(verdict="INFEASIBLE", witness=fmt(*witnesses[0]), all_witnesses=[fmt(*w) for w in witnesses])
        return report

    realization = None
    blocked_pairs = {(fa, fb) for fa, fb, _ in blocked}
    for set_a in _subsets(full):
        for set_b in _subsets(full):
            if any((fa, fb) in blocked_pairs for fa in set_a for fb in set_b):
                continue
            cov = _coverage(allowed, set_a, set_b)
            if np.array_equal(cov, target):
                realization = {"functions_a": [list(FUNCTIONS[f]) for f in set_a], "functions_b": [list(FUNCTIONS[f]) for f in set_b]}
                break
        if realization is not None:
            break
    surviving = {
        f"{FUNCTION_NAMES[fa]},{FUNCTION_NAMES[fb]},{ORDERED_TASKS[ti].value}": [y for y in OUTCOMES if allowed[fa, fb, ti, y - 1]]
        for fa, fb, ti in itertools.product(range(4), range(4), range(4))
        if allowed[fa, fb, ti].any()
    }
    report.update(verdict="UNDECIDED-FEASIBLE", witness=None, surviving=surviving, realization=realization)
    return report


def realize_support(realization: Mapping, sp: SupportPattern) -> ClassicalStrategy:
    """Classical strategy with one uniformly weighted latent per listed function, responding uniformly over allowed outcomes."""
    allowed = _allowed_outcomes(sp)
    fa = [FUNCTIONS.index(tuple(f)) for f in realization["functions_a"]]
    fb = [FUNCTIONS.index(tuple(f)) for f in realization["functions_b"]]
    g = np.zeros((4, len(fa), len(fb), 4))
    for i, j in itertools.product(range(len(fa)), range(len(fb))):
        mask = allowed[fa[i], fb[j]].astype(float)
        g[:, i, j, :] = mask / mask.sum(axis=1, keepdims=True)
    return ClassicalStrategy.from_functions(np.full(len(fa), 1 / len(fa)), fa, np.full(len(fb), 1 / len(fb)), fb, g)
