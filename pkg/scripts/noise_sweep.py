"""CE against visibility for both depolarizing modes; writes one CSV per mode."""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

from exclusion_lab.metrics import parse_grid, sweep


@dataclass(frozen=True)
class SweepConfig:
    grid: str = "0:1:0.01"
    out_dir: Path = Path("results")
    tol: float = 1e-10


def run(cfg: SweepConfig) -> dict[str, float | None]:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    thresholds = {}
    for mode in ("global", "per_qubit"):
        sw = sweep(mode, parse_grid(cfg.grid), tol=cfg.tol)
        (cfg.out_dir / f"sweep_{mode}.csv").write_text(sw.to_csv())
        thresholds[mode] = sw.threshold
    return thresholds


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", default=SweepConfig.grid)
    ap.add_argument("--out-dir", type=Path, default=SweepConfig.out_dir)
    args = ap.parse_args()
    for mode, thr in run(SweepConfig(args.grid, args.out_dir)).items():
        print(f"{mode:10s} threshold {thr:.10f}")
