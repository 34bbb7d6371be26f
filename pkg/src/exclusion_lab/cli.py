"""Command-line driver: ``exclusion-lab {verify,sweep,ncmax,bilocal}``.

Every report carries the tolerance set, the library version and the run
configuration. Exit codes: 0 pass, 2 invariant failure, 3 bad input,
4 numerical anomaly.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, _json
from .bilocality import (
    Behavior,
    SupportPattern,
    best_classical_ce,
    possibilistic_feasibility,
    quantum_behavior,
    strategy_behavior,
    support_of,
    toy_strategy,
)
from .metrics import NC_BOUND, Noise, ce_from_behavior, ce_total, parse_grid, sweep
from .ncmodel import (
    certify_bound_steps,
    check_overlap_lemma,
    maximize_ce,
    model_ce,
    model_from_dict,
    optimal_responses,
    toy_model_quad,
    validate_quad,
)
from .pbr import ORDERED_TASKS, OUTCOMES, build_tasks, cell_usage, check_task, index_map, perturbed_plus, verify_operational_identity
from .qcore import NOISE_MODES, TOLERANCES, QuantumError

EXIT_OK = 0
EXIT_INVARIANT = 2
EXIT_BAD_INPUT = 3
EXIT_NUMERICAL = 4

DEFAULT_TOLERANCES = {
    "exact": 1e-12,  # closed-form values: CE = 4, 15/16, operational identity
    "bound": 1e-9,  # slack allowed on the 15/4 ceiling
    "ns": 1e-10,  # no-signaling
    "threshold": 1e-9,  # bisection width
}


class BadInput(Exception):
    pass


class NumericalAnomaly(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    noise: str = "global"
    visibility: float = 1.0
    grid: str = "0:1:0.01"
    ontic_n: int = 4
    card: int = 4
    card_b: int | None = None
    restarts: int = 32
    eps: float = 1e-9
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    out: str | None = None
    deterministic: bool = False
    extra: dict = field(default_factory=dict)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2, which is reserved for invariant failures
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD_INPUT, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="PATH", default=None, help="write the report here instead of stdout")
    p.add_argument("--deterministic", action="store_true", help="omit the timestamp so reruns are byte-identical")
    for name, val in DEFAULT_TOLERANCES.items():
        p.add_argument(f"--tol-{name}", type=float, default=val, dest=f"tol_{name}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="exclusion-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify", help="check the quantum tasks, the toy model and the bound certificate")
    _common(p)
    p.add_argument("--perturb-plus", type=float, default=None, metavar="EPS", help="debug: corrupt |+> by EPS")

    p = sub.add_parser("sweep", help="CE against visibility, as CSV")
    _common(p)
    p.add_argument("--noise", choices=NOISE_MODES, default="global")
    p.add_argument("--grid", default="0:1:0.01", help="a:b:step or a comma list")

    p = sub.add_parser("ncmax", help="search noncontextual models for large CE")
    _common(p)
    p.add_argument("--ontic-n", type=int, default=4)
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--model", metavar="PATH", default=None, help="evaluate this model file instead of searching")
    p.add_argument("--emit-model", metavar="PATH", default=None, help="also write the best model file here")

    p = sub.add_parser("bilocal", help="bilocality scenario: quantum, classical, possibilistic")
    bsub = p.add_subparsers(dest="mode", required=True, parser_class=_Parser)
    q = bsub.add_parser("quantum")
    _common(q)
    q.add_argument("--noise", choices=NOISE_MODES, default="global")
    q.add_argument("--visibility", type=float, default=1.0)
    q.add_argument("--eps", type=float, default=1e-9)
    q.add_argument("--emit-behavior", metavar="PATH", default=None)
    c = bsub.add_parser("classical")
    _common(c)
    c.add_argument("--card", type=int, default=4)
    c.add_argument("--card-b", type=int, default=None)
    c.add_argument("--restarts", type=int, default=16)
    c.add_argument("--distinct-sources", action="store_true", help="let the two sources differ (the ceiling then fails)")
    c.add_argument("--biased", action="store_true", help="drop P(x|s) = 1/2 (the ceiling then fails)")
    s = bsub.add_parser("possibilistic")
    _common(s)
    s.add_argument("--source", choices=("quantum", "toy", "uniform"), default="quantum")
    s.add_argument("--behavior", metavar="PATH", default=None, help="behavior JSON; overrides --source")
    s.add_argument("--noise", choices=NOISE_MODES, default="global")
    s.add_argument("--visibility", type=float, default=1.0)
    s.add_argument("--eps", type=float, default=1e-9)
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    tol = {k: getattr(args, f"tol_{k}") for k in DEFAULT_TOLERANCES}
    for k, v in tol.items():
        if not (v >= 0 and math.isfinite(v)):
            raise BadInput(f"--tol-{k} must be a finite non-negative number")
    command = args.command if args.command != "bilocal" else f"bilocal {args.mode}"
    cfg = RunConfig(command=command, seed=args.seed, tolerances=tol, out=args.out, deterministic=args.deterministic)
    for name in ("noise", "visibility", "grid", "ontic_n", "card", "card_b", "restarts", "eps"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    for name in ("perturb_plus", "model", "source", "behavior", "distinct_sources", "biased"):
        if getattr(args, name, None) not in (None, False):
            cfg.extra[name] = getattr(args, name)
    if hasattr(args, "visibility") and not 0.0 <= args.visibility <= 1.0:
        raise BadInput("--visibility must lie in [0, 1]")
    if hasattr(args, "eps") and args.eps < 0:
        raise BadInput("--eps must be non-negative")
    for name in ("ontic_n", "card", "restarts"):
        if hasattr(args, name) and getattr(args, name) < 1:
            raise BadInput(f"--{name.replace('_', '-')} must be at least 1")
    if getattr(args, "card_b", None) is not None and args.card_b < 1:
        raise BadInput("--card-b must be at least 1")
    return cfg


def _envelope(cfg: RunConfig, result: dict, passed: bool) -> dict:
    env = {
        "command": cfg.command,
        "version": __version__,
        "tolerances": {**TOLERANCES, **cfg.tolerances},
        "config": {k: v for k, v in asdict(cfg).items() if k not in ("tolerances", "out", "command")},
        "passed": passed,
        "result": result,
    }
    if not cfg.deterministic:
        env["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    return env


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _finite(obj) -> None:
    """Raise if any number in a report is NaN or infinite."""
    if isinstance(obj, dict):
        for v in obj.values():
            _finite(v)
    elif isinstance(obj, (list, tuple)):
        for v in obj:
            _finite(v)
    elif isinstance(obj, (float, np.floating)) and not math.isfinite(float(obj)):
        raise NumericalAnomaly("non-finite value in report")


# --------------------------------------------------------------------------
# commands


def cmd_verify(cfg: RunConfig) -> tuple[dict, bool]:
    tol = cfg.tolerances["exact"]
    checks: list[dict] = []

    def add(name: str, passed: bool, **detail) -> None:
        checks.append({"check": name, "passed": bool(passed), **detail})

    tasks = build_tasks()
    for t in ORDERED_TASKS:
        rep = check_task(tasks[t], atol=tol)
        add(f"task[{t.value}]", rep["passed"], detail=rep)
    usage = Counter(cell_usage(tasks.values()).values())
    add("cell_usage", usage == Counter({1: 8, 2: 4, 0: 4}), histogram={str(k): v for k, v in sorted(usage.items())})

    plus = perturbed_plus(cfg.extra["perturb_plus"]) if "perturb_plus" in cfg.extra else None
    for rot in (None, "X", "Y", "Z"):
        rep = verify_operational_identity(plus=plus, rotation=rot, atol=tol)
        add(f"operational_identity[{rot or 'I'}]", rep["passed"], deviation=rep["deviation"])

    quantum = ce_total(tasks)
    worst = max(max(v) for v in quantum.per_event.values())
    add("quantum_ce", abs(quantum.total - 4.0) <= tol and worst <= tol, total=quantum.total, max_event=worst)

    q, xi = toy_model_quad()
    add("toy_model_valid", validate_quad(q)["passed"])
    toy = model_ce(q, q, xi)
    per_task_ok = all(abs(v - 15 / 16) <= tol for v in toy.per_task.values())
    add("toy_ce", per_task_ok and abs(toy.total - NC_BOUND) <= tol, total=toy.total)
    cert = certify_bound_steps(q, q, xi)
    add("toy_certificate", cert["passed"], min_slack=cert["min_slack"])
    add("toy_overlap_lemma", check_overlap_lemma(q)["passed"])

    passed = all(c["passed"] for c in checks)
    first = next((c["check"] for c in checks if not c["passed"]), None)
    result = {
        "total_quantum": quantum.total,
        "total_toy": toy.total,
        "first_failure": first,
        "checks": checks,
        "quantum": quantum.to_dict(),
        "toy_certificate": cert,
    }
    return result, passed


def cmd_sweep(cfg: RunConfig) -> tuple[str, bool]:
    try:
        grid = parse_grid(cfg.grid)
    except ValueError as exc:
        raise BadInput(str(exc)) from exc
    sw = sweep(cfg.noise, grid, tol=cfg.tolerances["threshold"])
    _finite([list(r.row()) for r in sw.reports])
    lines = [sw.to_csv()]
    lines.append(f"# version,{__version__}\n")
    tol = {**TOLERANCES, **cfg.tolerances}
    lines.append("# tolerances," + ";".join(f"{k}={v!r}" for k, v in tol.items()) + "\n")
    if not cfg.deterministic:
        lines.append(f"# timestamp,{_dt.datetime.now(_dt.timezone.utc).isoformat()}\n")
    return "".join(lines), sw.is_monotone()


def cmd_ncmax(cfg: RunConfig) -> tuple[dict, bool, dict | None]:
    slack = cfg.tolerances["bound"]
    if "model" in cfg.extra:
        try:
            q_a, q_b, xi = model_from_dict(_json.read(cfg.extra["model"]))
        except (OSError, KeyError, ValueError, TypeError) as exc:
            raise BadInput(f"cannot load model: {exc}") from exc
        if not all(np.isfinite(q.stacked()).all() for q in (q_a, q_b)):
            raise BadInput("model file holds non-finite probabilities")
        xi = xi or optimal_responses(q_a, q_b)
        rep = model_ce(q_a, q_b, xi)
        cert = certify_bound_steps(q_a, q_b, xi)
        valid = validate_quad(q_a)["passed"] and validate_quad(q_b)["passed"]
        result = {
            "total": rep.total,
            "ce": rep.to_dict(),
            "valid": valid,
            "analytic_bound": NC_BOUND,
            "bound_respected": rep.total <= NC_BOUND + slack,
            "certificate": cert,
        }
        return result, bool(valid and cert["passed"]), None
    res = maximize_ce(cfg.ontic_n, restarts=cfg.restarts, seed=cfg.seed)
    result = res.to_dict()
    result["bound_respected"] = res.total <= NC_BOUND + slack
    result["restart_totals"] = res.restart_totals
    return result, result["bound_respected"], result["model"]


def _event_split(sp: SupportPattern) -> tuple[list[dict], list[dict]]:
    """Impossible events split into the 16 exclusion events and everything else."""
    excl = set()
    for ti, t in enumerate(ORDERED_TASKS):
        for y in OUTCOMES:
            c = index_map(y, t)
            excl.add((t.value, c.s_a, c.s_b, c.x_a, c.x_b, y))
    exclusion, other = [], []
    for e in sp.impossible_events():
        key = (e["t"], e["s_a"], e["s_b"], e["x_a"], e["x_b"], e["y"])
        (exclusion if key in excl else other).append(e)
    return exclusion, other


def cmd_bilocal_quantum(cfg: RunConfig) -> tuple[dict, bool, dict]:
    noise = Noise(cfg.noise, cfg.visibility) if cfg.visibility < 1.0 else None
    tasks = build_tasks()
    b = quantum_behavior(tasks, noise)
    from_b = ce_from_behavior(b)
    direct = ce_total(tasks, noise)
    check = b.check(tol_ns=cfg.tolerances["ns"])
    sp = support_of(b, cfg.eps)
    exclusion, other = _event_split(sp)
    agree = abs(from_b.total - direct.total) <= cfg.tolerances["exact"]
    result = {
        "ce_total": from_b.total,
        "ce": from_b.to_dict(),
        "ce_direct": direct.total,
        "pipelines_agree": agree,
        "behavior_check": check,
        "eps": cfg.eps,
        "noise": {"mode": cfg.noise, "visibility": cfg.visibility},
        "impossible_exclusion_events": exclusion,
        "other_impossible_events": other,
        "n_impossible": len(exclusion) + len(other),
    }
    return result, bool(check["passed"] and agree), b.to_dict()


def cmd_bilocal_classical(cfg: RunConfig) -> tuple[dict, bool]:
    symmetric = not cfg.extra.get("distinct_sources", False)
    unbiased = not cfg.extra.get("biased", False)
    card_b = cfg.card_b if cfg.card_b is not None else cfg.card
    if symmetric and card_b != cfg.card:
        raise BadInput("identical sources need --card-b equal to --card (or pass --distinct-sources)")
    res = best_classical_ce(cfg.card, card_b, restarts=cfg.restarts, seed=cfg.seed, symmetric=symmetric, unbiased=unbiased)
    b = strategy_behavior(res.strategy)
    check = b.check(tol_ns=cfg.tolerances["ns"])
    result = res.to_dict()
    result["best"] = res.total
    result["bound_respected"] = res.total <= NC_BOUND + cfg.tolerances["bound"]
    result["restart_totals"] = res.restart_totals
    result["behavior_check"] = check
    # the ceiling is only a theorem for identical, unbiased sources
    passed = check["passed"] and (result["bound_respected"] or not (symmetric and unbiased))
    return result, bool(passed)


def cmd_bilocal_possibilistic(cfg: RunConfig) -> tuple[dict, bool]:
    if "behavior" in cfg.extra:
        try:
            b = Behavior.from_dict(_json.read(cfg.extra["behavior"]))
        except (OSError, KeyError, ValueError, TypeError) as exc:
            raise BadInput(f"cannot load behavior: {exc}") from exc
        if not np.isfinite(b.table).all():
            raise BadInput("behavior file holds non-finite probabilities")
        source = cfg.extra["behavior"]
    else:
        source = cfg.extra.get("source", "quantum")
        if source == "quantum":
            noise = Noise(cfg.noise, cfg.visibility) if cfg.visibility < 1.0 else None
            b = quantum_behavior(noise=noise)
        elif source == "toy":
            b = strategy_behavior(toy_strategy())
        else:
            b = Behavior.uniform()
    sp = support_of(b, cfg.eps)
    if not sp.is_valid():
        raise BadInput("support has a context with no possible event")
    result = possibilistic_feasibility(sp)
    result["source"] = source
    result["n_impossible"] = int((~sp.possible).sum())
    return result, True


# --------------------------------------------------------------------------


def _run(cfg: RunConfig, args: argparse.Namespace) -> int:
    if cfg.command == "sweep":
        text, passed = cmd_sweep(cfg)
        _emit(text, cfg.out)
        return EXIT_OK if passed else EXIT_INVARIANT
    side = None
    if cfg.command == "verify":
        result, passed = cmd_verify(cfg)
    elif cfg.command == "ncmax":
        result, passed, side = cmd_ncmax(cfg)
        side_path = args.emit_model
    elif cfg.command == "bilocal quantum":
        result, passed, side = cmd_bilocal_quantum(cfg)
        side_path = args.emit_behavior
    elif cfg.command == "bilocal classical":
        result, passed = cmd_bilocal_classical(cfg)
    else:
        result, passed = cmd_bilocal_possibilistic(cfg)
    env = _envelope(cfg, result, passed)
    _finite(env)
    _emit(_json.dumps(env), cfg.out)
    if side is not None and side_path is not None:
        _json.write(side, side_path)
    if not passed:
        first = result.get("first_failure")
        print(f"invariant failure{': ' + first if first else ''}", file=sys.stderr)
    return EXIT_OK if passed else EXIT_INVARIANT


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with np.errstate(invalid="raise", divide="raise", over="raise"):
            return _run(_config(args), args)
    except BadInput as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (QuantumError, NumericalAnomaly, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical anomaly: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except RuntimeError as exc:
        print(f"numerical anomaly: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
