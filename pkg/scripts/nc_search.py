"""Best CE found by the noncontextual model search for each ontic-space size."""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

from exclusion_lab import _json
from exclusion_lab.metrics import NC_BOUND
from exclusion_lab.ncmodel import certify_bound_steps, maximize_ce


@dataclass(frozen=True)
class SearchConfig:
    n_max: int = 16
    restarts: int = 32
    seed: int = 7
    out: Path | None = None


def run(cfg: SearchConfig) -> list[dict]:
    rows = []
    for n in range(1, cfg.n_max + 1):
        res = maximize_ce(n, restarts=cfg.restarts, seed=cfg.seed)
        cert = certify_bound_steps(res.quad_a, res.quad_b, res.responses)
        rows.append(
            {
                "n": n,
                "best_found": res.total,
                "gap_to_bound": NC_BOUND - res.total,
                "certificate_min_slack": cert["min_slack"],
                "model": res.to_dict()["model"],
            }
        )
    if cfg.out is not None:
        _json.write(rows, cfg.out)
    return rows


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-max", type=int, default=SearchConfig.n_max)
    ap.add_argument("--restarts", type=int, default=SearchConfig.restarts)
    ap.add_argument("--seed", type=int, default=SearchConfig.seed)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()
    for r in run(SearchConfig(args.n_max, args.restarts, args.seed, args.out)):
        print(f"n={r['n']:2d}  best={r['best_found']:.12f}  slack={r['certificate_min_slack']:+.2e}")
