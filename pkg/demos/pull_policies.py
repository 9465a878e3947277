"""Compare pull schedulers on the drift-tracking task.

A pure pull system: every frame slot is spent sampling digital-twin nodes,
and the three schedulers differ only in which nodes they pick. Run with

    python3 demos/pull_policies.py [--episodes N]
"""

from __future__ import annotations

import argparse

from pushpull import SimConfig, run_monte_carlo


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--episodes", type=int, default=20)
    parser.add_argument("--pull-res", type=int, default=10)
    args = parser.parse_args()

    print(f"pull-only, {args.pull_res} slots/frame, heterogeneous clusters")
    print(f"{'policy':>8} {'mean drift AoII':>16} {'99th pct':>10}")
    for policy in ("pps", "maf", "cra"):
        cfg = SimConfig(
            pull_policy=policy,
            push_policy="none",
            total_res=args.pull_res,
            push_res=0,
            r_min=0,
            rho_a_hz=0.0,
            episodes=args.episodes,
        )
        out = run_monte_carlo(cfg)
        print(f"{policy:>8} {out['psi_avg_ms']:>13.3f} ms {out['psi_p99_ms']:>7.0f} ms")


if __name__ == "__main__":
    main()
