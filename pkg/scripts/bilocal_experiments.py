"""Bilocal experiments: classical search by cardinality, the two relaxations
that break the 15/4 ceiling, and the possibilistic verdict along a noise path."""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

from exclusion_lab import _json
from exclusion_lab.bilocality import best_classical_ce, possibilistic_feasibility, quantum_behavior, support_of
from exclusion_lab.metrics import Noise


@dataclass(frozen=True)
class BilocalConfig:
    card_max: int = 8
    restarts: int = 16
    seed: int = 0
    eps: float = 1e-9
    visibilities: tuple[float, ...] = (1.0, 1 - 1e-6, 0.999, 0.99, 0.9)
    out: Path | None = None


def run(cfg: BilocalConfig) -> dict:
    classical = [
        {"card": c, "best": best_classical_ce(c, restarts=cfg.restarts, seed=cfg.seed).total} for c in range(1, cfg.card_max + 1)
    ]
    relaxed = {
        "distinct_sources": best_classical_ce(2, restarts=cfg.restarts, seed=cfg.seed, symmetric=False).total,
        "biased_sources": best_classical_ce(3, restarts=cfg.restarts, seed=cfg.seed, unbiased=False).total,
    }
    verdicts = []
    for v in cfg.visibilities:
        noise = None if v == 1.0 else Noise("global", v)
        sp = support_of(quantum_behavior(noise=noise), cfg.eps)
        rep = possibilistic_feasibility(sp)
        verdicts.append({"visibility": v, "impossible_events": int((~sp.possible).sum()), "verdict": rep["verdict"]})
    result = {"classical": classical, "relaxed": relaxed, "possibilistic": verdicts, "eps": cfg.eps}
    if cfg.out is not None:
        _json.write(result, cfg.out)
    return result


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--card-max", type=int, default=BilocalConfig.card_max)
    ap.add_argument("--restarts", type=int, default=BilocalConfig.restarts)
    ap.add_argument("--seed", type=int, default=BilocalConfig.seed)
    ap.add_argument("--eps", type=float, default=BilocalConfig.eps)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()
    res = run(BilocalConfig(args.card_max, args.restarts, args.seed, args.eps, out=args.out))
    for row in res["classical"]:
        print(f"card={row['card']}  best={row['best']:.12f}")
    for k, v in res["relaxed"].items():
        print(f"{k:17s} {v:.12f}")
    for row in res["possibilistic"]:
        print(f"v={row['visibility']:<10g} impossible={row['impossible_events']:2d}  {row['verdict']}")
