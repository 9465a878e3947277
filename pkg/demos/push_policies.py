"""Compare push (random access) policies on the anomaly-reporting task.

A pure push system: anomaly nodes contend for the frame's slots, and the
policies differ in who is allowed (or scheduled) to transmit. Run with

    python3 demos/push_policies.py [--episodes N]
"""

from __future__ import annotations

import argparse

from pushpull import SimConfig, run_monte_carlo


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--episodes", type=int, default=20)
    parser.add_argument("--push-res", type=int, default=10)
    parser.add_argument("--rate", type=float, default=3.0, help="anomaly rate (Hz)")
    args = parser.parse_args()

    print(f"push-only, {args.push_res} slots/frame, anomaly rate {args.rate} Hz")
    print(f"{'policy':>8} {'mean anomaly AoII':>18} {'99th pct':>10} {'collisions':>11}")
    for policy in ("pps", "maf", "fsa", "afsa"):
        cfg = SimConfig(
            num_clusters=0,
            pull_policy="none",
            push_policy=policy,
            total_res=args.push_res,
            push_res=args.push_res,
            r_min=0,
            rho_a_hz=args.rate,
            episodes=args.episodes,
        )
        out = run_monte_carlo(cfg)
        print(
            f"{policy:>8} {out['theta_avg_ms']:>15.3f} ms "
            f"{out['theta_p99_ms']:>7.0f} ms {out['collision_rate']:>11.4f}"
        )


if __name__ == "__main__":
    main()
