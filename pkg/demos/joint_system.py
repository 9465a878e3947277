"""Run the full system and render the trade-off figures.

Sweeps the pull/push split for the belief-driven scheme and two benchmark
combinations, writes a results CSV through the experiment driver, and (if the
figure package is installed) renders the coexistence and constrained-best
charts. Run with

    python3 demos/joint_system.py [--episodes N] [--outdir DIR]
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
import tempfile
from pathlib import Path


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--episodes", type=int, default=10)
    parser.add_argument("--outdir", default="demo_out")
    args = parser.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    results = outdir / "results.csv"

    rows = []
    for pull, push in (("pps", "pps"), ("maf", "maf"), ("cra", "fsa")):
        config = {
            "pull_policy": pull,
            "push_policy": push,
            "episodes": args.episodes,
            "sweep": {"push_res": [6, 8, 10, 12]},
        }
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as handle:
            json.dump(config, handle)
            config_path = handle.name
        part = outdir / f"{pull}-{push}.csv"
        subprocess.run(
            [sys.executable, "-m", "pushpull.cli", "simulate",
             "--config", config_path, "--out", str(part)],
            check=True,
        )
        lines = part.read_text().splitlines()
        if not rows:
            rows.append(lines[0])
        rows.extend(lines[1:])
    results.write_text("\n".join(rows) + "\n")
    print(f"wrote {results}")

    subprocess.run(
        [sys.executable, "-m", "pushpull.cli", "best", "--in", str(results),
         "--constraint", "theta_p99_ms<=30", "--objective", "psi_avg_ms"],
        check=True,
    )

    try:
        from aoiiplots import FigureSpec, render
    except ImportError:
        print("figure package not installed; skipping chart rendering")
        return
    for family in ("coexistence_vs_P", "constrained_best"):
        path = render(FigureSpec(family, str(results), str(outdir / f"{family}.png")))
        print(f"rendered {path}")


if __name__ == "__main__":
    main()
