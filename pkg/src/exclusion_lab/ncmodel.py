"""Finite noncontextual ontological models for the four-task exclusion game.

A model assigns distributions ``mu_0, mu_1, mu_+, mu_-`` over ``n`` ontic
states to the four single-qubit preparations, subject to the ontic identity
``mu_0 + mu_1 = mu_+ + mu_-``, and a response function
``xi(Y | lambda_A, lambda_B, T)`` to the joint measurements.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ._parallel import ordered_map
from .metrics import NC_BOUND, CeReport
from .pbr import ORDERED_TASKS, OUTCOMES, TaskLabel, index_map

TAU_SUPP = 1e-12
TAU_IDENTITY = 1e-10
TAU_NORMALIZATION = 1e-12

# (s, x) -> preparation name; s = 0 is the Z-source, s = 1 the X-source
PREP_NAMES = {(0, 0): "0", (0, 1): "1", (1, 0): "+", (1, 1): "-"}
# pair of preparations overlapping in each task: (Z-branch state, X-branch state)
TASK_PAIRS = {t: ((0, t.z_bit), (1, t.x_bit)) for t in ORDERED_TASKS}
# overlap lemma: distinct supports of a (Z state, X state) pair force overlap of the partner pair
LEMMA_PARTNER = {
    TaskLabel.ZERO_PLUS: TaskLabel.ZERO_MINUS,
    TaskLabel.ZERO_MINUS: TaskLabel.ZERO_PLUS,
    TaskLabel.ONE_PLUS: TaskLabel.ONE_MINUS,
    TaskLabel.ONE_MINUS: TaskLabel.ONE_PLUS,
}
REGIONS = ("0+", "0-", "1+", "1-", "01+", "01-", "0+-", "1+-", "01+-")


@dataclass(frozen=True, eq=False)
class NcModelQuad:
    """Epistemic states of |0>, |1>, |+>, |-> on a shared ontic space of size ``n``."""

    mu0: np.ndarray
    mu1: np.ndarray
    mu_plus: np.ndarray
    mu_minus: np.ndarray

    def __post_init__(self) -> None:
        arrs = [np.array(a, dtype=float).ravel() for a in (self.mu0, self.mu1, self.mu_plus, self.mu_minus)]
        if len({a.shape for a in arrs}) != 1 or arrs[0].size == 0:
            raise ValueError("all four distributions must live on the same non-empty ontic space")
        for name, a in zip(("mu0", "mu1", "mu_plus", "mu_minus"), arrs):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n(self) -> int:
        return self.mu0.size

    def stacked(self) -> np.ndarray:
        """Array indexed ``[s, x, lambda]``."""
        return np.array([[self.mu0, self.mu1], [self.mu_plus, self.mu_minus]])

    def dist(self, s: int, x: int) -> np.ndarray:
        return self.stacked()[s, x]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mu0": self.mu0.tolist(),
            "mu1": self.mu1.tolist(),
            "muP": self.mu_plus.tolist(),
            "muM": self.mu_minus.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "NcModelQuad":
        q = cls(d["mu0"], d["mu1"], d["muP"], d["muM"])
        if "n" in d and int(d["n"]) != q.n:
            raise ValueError(f"declared n={d['n']} but distributions have length {q.n}")
        return q

    @classmethod
    def from_stacked(cls, a: np.ndarray) -> "NcModelQuad":
        return cls(a[0, 0], a[0, 1], a[1, 0], a[1, 1])


@dataclass(frozen=True, eq=False)
class ResponseFunction:
    """``table[t, lambda_A, lambda_B, y-1]`` with tasks in the standard order."""

    table: np.ndarray

    def __post_init__(self) -> None:
        t = np.array(self.table, dtype=float)
        if t.ndim != 4 or t.shape[0] != 4 or t.shape[3] != 4:
            raise ValueError(f"response table must have shape (4, nA, nB, 4), got {t.shape}")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def shape(self) -> tuple[int, int]:
        return self.table.shape[1], self.table.shape[2]

    def is_normalized(self, atol: float = TAU_NORMALIZATION) -> bool:
        return bool(np.all(self.table >= -atol) and np.max(np.abs(self.table.sum(axis=3) - 1.0)) <= atol)

    @classmethod
    def deterministic(cls, outcomes: np.ndarray) -> "ResponseFunction":
        """From an integer table ``outcomes[t, lambda_A, lambda_B]`` of labels in 1..4."""
        outcomes = np.asarray(outcomes, dtype=int)
        if outcomes.min() < 1 or outcomes.max() > 4:
            raise ValueError("outcome labels must be in 1..4")
        return cls(np.eye(4)[outcomes - 1])

    @classmethod
    def uniform(cls, n_a: int, n_b: int) -> "ResponseFunction":
        return cls(np.full((4, n_a, n_b, 4), 0.25))

    def outcome_table(self) -> np.ndarray | None:
        """Integer outcome labels when the response is deterministic, else None."""
        if not np.all((self.table == 0.0) | (self.table == 1.0)):
            return None
        return self.table.argmax(axis=3) + 1

    def to_dict(self) -> dict:
        det = self.outcome_table()
        body = det if det is not None else self.table
        return {t.value: body[i].tolist() for i, t in enumerate(ORDERED_TASKS)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ResponseFunction":
        arrs = [np.asarray(d[t.value]) for t in ORDERED_TASKS]
        if arrs[0].ndim == 2:
            return cls.deterministic(np.array(arrs))
        return cls(np.array(arrs, dtype=float))


@dataclass(frozen=True)
class OverlapReport:
    beta: dict[TaskLabel, float]
    beta_parts: dict[TaskLabel, dict[str, float]]
    subregion_masses: dict[str, float]
    distinct_supports: dict[TaskLabel, bool]

    @property
    def beta_sum(self) -> float:
        return float(sum(self.beta.values()))

    def to_dict(self) -> dict:
        return {
            "beta": {t.value: v for t, v in self.beta.items()},
            "beta_sum": self.beta_sum,
            "beta_parts": {t.value: parts for t, parts in self.beta_parts.items()},
            "subregion_masses": self.subregion_masses,
            "distinct_supports": {t.value: v for t, v in self.distinct_supports.items()},
        }


# --------------------------------------------------------------------------
# validation and construction


def validate_quad(q: NcModelQuad, tol_identity: float = TAU_IDENTITY, tol_norm: float = TAU_NORMALIZATION) -> dict:
    dists = q.stacked().reshape(4, -1)
    neg = float(max(0.0, -dists.min()))
    norm = float(np.max(np.abs(dists.sum(axis=1) - 1.0)))
    identity_gap = np.abs(0.5 * (q.mu0 + q.mu1) - 0.5 * (q.mu_plus + q.mu_minus))
    worst = int(identity_gap.argmax())
    ident = float(identity_gap[worst])
    return {
        "n": q.n,
        "negativity": neg,
        "normalization": norm,
        "identity": ident,
        "identity_worst_lambda": worst,
        "passed": neg <= tol_norm and norm <= tol_norm and ident <= tol_identity,
    }


def _capped_simplex_projection(v: np.ndarray, cap: np.ndarray, iters: int = 200) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{0 <= x <= cap, sum x = 1}`` (needs ``sum cap >= 1``)."""
    lo, hi = float(np.min(v - cap)) - 1.0, float(np.max(v))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.clip(v - mid, 0.0, cap).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    return np.clip(v - 0.5 * (lo + hi), 0.0, cap)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ks > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def project_quad(mu0: np.ndarray, mu1: np.ndarray, mu_plus: np.ndarray) -> NcModelQuad | None:
    """Project three free distributions and rebuild ``mu_-`` so the ontic identity holds exactly.

    Returns None if the repaired candidate still fails validation.
    """
    p0, p1 = project_simplex(mu0), project_simplex(mu1)
    cap = p0 + p1
    pp = _capped_simplex_projection(mu_plus, cap)
    pm = np.clip(cap - pp, 0.0, None)
    q = NcModelQuad(p0, p1, pp, pm)
    return q if validate_quad(q)["passed"] else None


def random_quad(rng: np.random.Generator, n: int, sparsity: float = 0.0) -> NcModelQuad:
    """Random valid quad: Dirichlet ``mu_0, mu_1``; ``mu_+`` drawn inside the box ``[0, mu_0 + mu_1]``.

    ``sparsity`` is the chance that each ontic state is dropped from the
    support of each of ``mu_0``, ``mu_1`` and the ``mu_+`` proposal.
    """

    def draw() -> np.ndarray:
        w = rng.dirichlet(np.ones(n))
        if sparsity > 0 and n > 1:
            keep = rng.random(n) >= sparsity
            if not keep.any():
                keep[rng.integers(n)] = True
            w = np.where(keep, w, 0.0)
            w = w / w.sum()
        return w

    while True:
        mu0, mu1 = draw(), draw()
        cap = mu0 + mu1
        mu_plus = _capped_simplex_projection(draw(), cap)
        mu_minus = np.clip(cap - mu_plus, 0.0, None)
        q = NcModelQuad(mu0, mu1, mu_plus, mu_minus)
        if validate_quad(q)["passed"]:
            return q


def toy_model_quad() -> tuple[NcModelQuad, ResponseFunction]:
    """Four-state model of the stabilizer experiment that saturates CE = 15/4.

    Ontic state ``lambda = 2 z + x``: ``|0>``/``|1>`` are uniform over the two
    states with ``z = 0``/``z = 1``, ``|+>``/``|->`` uniform over ``x = 0``/``x = 1``.
    The computational-basis measurements read off ``(z_A, z_B)``.
    """
    z = np.array([0, 0, 1, 1])
    x = np.array([0, 1, 0, 1])
    quad = NcModelQuad(0.5 * (z == 0), 0.5 * (z == 1), 0.5 * (x == 0), 0.5 * (x == 1))
    za, zb = np.meshgrid(z, z, indexing="ij")
    natural = 2 * za + zb + 1  # |00>,|01>,|10>,|11> -> 1..4
    reverse = 5 - natural  # |11>,|10>,|01>,|00> -> 1..4
    outcomes = np.array([reverse, reverse, natural, natural])
    return quad, ResponseFunction.deterministic(outcomes)


def uniform_quad(n: int) -> NcModelQuad:
    u = np.full(n, 1.0 / n)
    return NcModelQuad(u, u, u, u)


# --------------------------------------------------------------------------
# overlaps


def _support(a: np.ndarray, tau: float) -> np.ndarray:
    return a > tau


def overlaps(q: NcModelQuad, tau_supp: float = TAU_SUPP) -> OverlapReport:
    st = q.stacked()
    supp = {PREP_NAMES[k]: _support(st[k], tau_supp) for k in PREP_NAMES}
    # region label of each ontic state from its exact membership pattern
    labels = []
    for lam in range(q.n):
        zs = "".join(c for c in "01" if supp[c][lam])
        xs = "".join(c for c in "+-" if supp[c][lam])
        labels.append(zs + xs if zs and xs else None)
    labels_arr = np.array(labels, dtype=object)
    avg = 0.5 * (q.mu0 + q.mu1)
    masses = {r: float(avg[labels_arr == r].sum()) for r in REGIONS}

    beta, parts, distinct = {}, {}, {}
    for t in ORDERED_TASKS:
        za, xa = TASK_PAIRS[t]
        a, b = st[za], st[xa]
        pointwise = np.minimum(a, b)
        in_both = supp[PREP_NAMES[za]] & supp[PREP_NAMES[xa]]
        beta[t] = float(pointwise[in_both].sum())
        zc, xc = PREP_NAMES[za], PREP_NAMES[xa]
        parts[t] = {
            r: float(pointwise[labels_arr == r].sum()) for r in REGIONS if zc in r and xc in r
        }
        distinct[t] = bool(np.any(supp[zc] != supp[xc]))
    return OverlapReport(beta, parts, masses, distinct)


def check_overlap_lemma(q: NcModelQuad, tau_supp: float = TAU_SUPP) -> dict:
    """Check that distinct supports of one pair imply positive overlap of its partner pair.

    E.g. ``supp(mu_0) != supp(mu_+)`` must force ``beta_{0-} > 0``. Implications
    whose hypothesis fails are reported as vacuous.
    """
    rep = overlaps(q, tau_supp)
    rows = []
    for t in ORDERED_TASKS:
        partner = LEMMA_PARTNER[t]
        hyp = rep.distinct_supports[t]
        concl = rep.beta[partner] > tau_supp
        rows.append(
            {
                "hypothesis_pair": t.value,
                "conclusion_pair": partner.value,
                "supports_distinct": hyp,
                "partner_beta": rep.beta[partner],
                "vacuous": not hyp,
                "holds": (not hyp) or concl,
            }
        )
    return {"implications": rows, "passed": all(r["holds"] for r in rows)}


def two_party_overlap(q_a: NcModelQuad, q_b: NcModelQuad) -> dict[TaskLabel, float]:
    """Overlap of the four product distributions of each task: sum over ontic pairs of their minimum."""
    out = {}
    for t in ORDERED_TASKS:
        prods = [np.outer(q_a.dist(*index_map(y, t).side(0)), q_b.dist(*index_map(y, t).side(1))) for y in OUTCOMES]
        out[t] = float(np.minimum.reduce(prods).sum())
    return out


# --------------------------------------------------------------------------
# CE of a model


# EVENT_COORDS[t, y-1] = (s_a, x_a, s_b, x_b) of the state outcome y excludes in task t
EVENT_COORDS = np.array([[tuple(index_map(y, t)) for y in OUTCOMES] for t in ORDERED_TASKS])


def gathered(stacked: np.ndarray, party: int) -> np.ndarray:
    """``out[t, y-1]`` = party's distribution for the state excluded by ``y`` in task ``t``."""
    s = EVENT_COORDS[..., 2 * party]
    x = EVENT_COORDS[..., 2 * party + 1]
    return stacked[s, x]


def coefficients_from_stacked(st_a: np.ndarray, st_b: np.ndarray) -> np.ndarray:
    return np.einsum("tya,tyb->taby", gathered(st_a, 0), gathered(st_b, 1))


def event_coefficients(q_a: NcModelQuad, q_b: NcModelQuad) -> np.ndarray:
    """``c[t, lambda_A, lambda_B, y-1] = mu^A(lambda_A) mu^B(lambda_B)`` for the state excluded by ``y``."""
    return coefficients_from_stacked(q_a.stacked(), q_b.stacked())


def failure_gradients(st_a: np.ndarray, st_b: np.ndarray, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of ``sum_{t,y} P(E_y | rho_y)`` at fixed response with respect to each party's ``[s, x, lambda]`` array."""
    ga_t = np.einsum("taby,tyb->tya", xi, gathered(st_b, 1))
    gb_t = np.einsum("taby,tya->tyb", xi, gathered(st_a, 0))
    grad_a = np.zeros_like(st_a)
    grad_b = np.zeros_like(st_b)
    np.add.at(grad_a, (EVENT_COORDS[..., 0], EVENT_COORDS[..., 1]), ga_t)
    np.add.at(grad_b, (EVENT_COORDS[..., 2], EVENT_COORDS[..., 3]), gb_t)
    return grad_a, grad_b


def model_ce(q_a: NcModelQuad, q_b: NcModelQuad, xi: ResponseFunction) -> CeReport:
    if xi.shape != (q_a.n, q_b.n):
        raise ValueError(f"response table covers {xi.shape} ontic pairs, models have ({q_a.n}, {q_b.n})")
    c = event_coefficients(q_a, q_b)
    ev = np.einsum("tabk,tabk->tk", xi.table, c)
    return CeReport.from_events({t: ev[i] for i, t in enumerate(ORDERED_TASKS)}, {"source": "ontological_model"})


def optimal_responses(q_a: NcModelQuad, q_b: NcModelQuad) -> ResponseFunction:
    """Deterministic response minimizing every exclusion-failure coefficient (ties -> smallest Y)."""
    c = event_coefficients(q_a, q_b)
    return ResponseFunction.deterministic(c.argmin(axis=3) + 1)


def _optimal_ce(q: NcModelQuad) -> float:
    c = event_coefficients(q, q)
    return 4.0 - 0.25 * float(c.min(axis=3).sum())


# --------------------------------------------------------------------------
# search


@dataclass
class SearchResult:
    quad_a: NcModelQuad
    quad_b: NcModelQuad
    responses: ResponseFunction
    total: float
    restarts: int
    seed: int | None
    restart_totals: list[float] = field(default_factory=list)

    @property
    def analytic_bound(self) -> float:
        return NC_BOUND

    @property
    def bound_respected(self) -> bool:
        return self.total <= NC_BOUND + 1e-9

    def to_dict(self) -> dict:
        return {
            "best_found": self.total,
            "analytic_bound": self.analytic_bound,
            "bound_respected": self.bound_respected,
            "restarts": self.restarts,
            "seed": self.seed,
            "model": model_to_dict(self.quad_a, self.responses, self.quad_b),
        }


def _gradient(q: NcModelQuad, xi: np.ndarray) -> np.ndarray:
    """d/d mu[s, x] of the summed failure probability (q_A = q_B = q), before the identity constraint."""
    st = q.stacked()
    ga, gb = failure_gradients(st, st, xi)
    return ga + gb


def _fixed_response_failure(q: NcModelQuad, xi: np.ndarray) -> float:
    return float(np.einsum("tabk,tabk->", xi, event_coefficients(q, q)))


def _ascend(q: NcModelQuad, max_iter: int, step0: float) -> NcModelQuad:
    """Alternate optimal responses with projected gradient steps on the quad."""
    best = _optimal_ce(q)
    step = step0
    for _ in range(max_iter):
        xi = optimal_responses(q, q).table
        base = _fixed_response_failure(q, xi)
        g = _gradient(q, xi)
        # mu_- = mu_0 + mu_1 - mu_+ is eliminated; push its gradient onto the free coordinates
        g0 = g[0, 0] + g[1, 1]
        g1 = g[0, 1] + g[1, 1]
        gp = g[1, 0] - g[1, 1]
        improved = False
        s = step
        while s > 1e-10:
            cand = project_quad(q.mu0 - s * g0, q.mu1 - s * g1, q.mu_plus - s * gp)
            if cand is not None and _fixed_response_failure(cand, xi) < base - 1e-15:
                val = _optimal_ce(cand)
                if val >= best - 1e-15:
                    q, best, improved = cand, max(best, val), True
                    step = min(2.0 * s, 10.0)
                    break
            s *= 0.5
        if not improved:
            break
    return q


def maximize_ce(
    n: int,
    restarts: int = 32,
    seed: int | None = 0,
    max_iter: int = 400,
    sparsity: float = 0.5,
) -> SearchResult:
    """Heuristic search for the largest CE over symmetric models (same quad on A and B).

    This only ever finds lower bounds on the noncontextual optimum; 15/4 is the
    analytic ceiling.
    """
    if n < 1:
        raise ValueError("ontic space size must be at least 1")
    seeds = np.random.SeedSequence(seed).spawn(restarts)

    def one(ss: np.random.SeedSequence) -> tuple[float, NcModelQuad]:
        rng = np.random.default_rng(ss)
        q0 = random_quad(rng, n, sparsity=sparsity if rng.random() < 0.75 else 0.0)
        q = _ascend(q0, max_iter=max_iter, step0=0.5)
        return _optimal_ce(q), q

    results = ordered_map(one, seeds)
    totals = [r[0] for r in results]
    k = int(np.argmax(totals))
    q = results[k][1]
    xi = optimal_responses(q, q)
    total = model_ce(q, q, xi).total
    return SearchResult(q, q, xi, total, restarts, seed, totals)


# --------------------------------------------------------------------------
# certification of the bound chain


def _is_same_quad(q_a: NcModelQuad, q_b: NcModelQuad) -> bool:
    return q_a.n == q_b.n and np.array_equal(q_a.stacked(), q_b.stacked())


def certify_bound_steps(q_a: NcModelQuad, q_b: NcModelQuad, xi: ResponseFunction) -> dict:
    """Evaluate every inequality of the CE <= 15/4 chain on a concrete model and report slacks.

    Steps: (i) per-task CE_T <= 1 - beta^A_T beta^B_T / 4; (ii) CE <= 4 - sum_T beta^A_T beta^B_T / 4;
    (iii) sum beta^2 >= (sum beta)^2 / 4 on each party; (iv) sum beta >= 2 on each party;
    (v) CE <= 15/4, which needs the same quad on both parties.
    """
    ce = model_ce(q_a, q_b, xi)
    ra, rb = overlaps(q_a), overlaps(q_b)
    hat = two_party_overlap(q_a, q_b)
    steps = []

    def add(name: str, lhs: float, rhs: float, sense: str = "<=") -> None:
        slack = rhs - lhs if sense == "<=" else lhs - rhs
        steps.append({"step": name, "lhs": lhs, "rhs": rhs, "sense": sense, "slack": slack})

    for t in ORDERED_TASKS:
        prod = ra.beta[t] * rb.beta[t]
        add(f"i.product_overlap[{t.value}]", hat[t], prod, "<=")
        add(f"i.task[{t.value}]", ce.per_task[t], 1.0 - 0.25 * prod)
    sum_prod = sum(ra.beta[t] * rb.beta[t] for t in ORDERED_TASKS)
    add("ii.total", ce.total, 4.0 - 0.25 * sum_prod)
    for party, rep in (("A", ra), ("B", rb)):
        b = np.array([rep.beta[t] for t in ORDERED_TASKS])
        add(f"iii.cauchy_schwarz[{party}]", float(np.sum(b**2)), 0.25 * float(b.sum()) ** 2, ">=")
        add(f"iv.beta_sum[{party}]", float(b.sum()), 2.0, ">=")
        for t in ORDERED_TASKS:
            add(f"subregions[{party},{t.value}]", sum(rep.beta_parts[t].values()), rep.beta[t], "<=")
            add(f"subregions_rev[{party},{t.value}]", rep.beta[t], sum(rep.beta_parts[t].values()), "<=")
    symmetric = _is_same_quad(q_a, q_b)
    if symmetric:
        b = np.array([ra.beta[t] for t in ORDERED_TASKS])
        add("v.sum_bound", ce.total, 4.0 - float(b.sum()) ** 2 / 16.0)
        add("v.final", ce.total, NC_BOUND)
    return {
        "total": ce.total,
        "symmetric": symmetric,
        "beta_A": {t.value: ra.beta[t] for t in ORDERED_TASKS},
        "beta_B": {t.value: rb.beta[t] for t in ORDERED_TASKS},
        "steps": steps,
        "min_slack": min(s["slack"] for s in steps),
        "passed": all(s["slack"] >= -1e-9 for s in steps),
    }


# --------------------------------------------------------------------------
# files


def model_to_dict(q: NcModelQuad, xi: ResponseFunction | None = None, q_b: NcModelQuad | None = None) -> dict:
    d = q.to_dict()
    if q_b is not None and not _is_same_quad(q, q_b):
        d["party_b"] = q_b.to_dict()
    if xi is not None:
        d["responses"] = xi.to_dict()
    return d


def model_from_dict(d: Mapping) -> tuple[NcModelQuad, NcModelQuad, ResponseFunction | None]:
    q = NcModelQuad.from_dict(d)
    q_b = NcModelQuad.from_dict(d["party_b"]) if "party_b" in d else q
    xi = ResponseFunction.from_dict(d["responses"]) if "responses" in d else None
    return q, q_b, xi
