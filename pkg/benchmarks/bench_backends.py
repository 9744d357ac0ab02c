"""Throughput comparison: compiled core vs NumPy fallback.

The backend is chosen when cenlevy.engine is imported, so each backend
runs the workload battery in its own subprocess (CENLEVY_FORCE_FALLBACK=1
selects the fallback).  Reported numbers are jump events per second over
identical workloads with identical RNG streams, so the estimates must
agree exactly and only the wall time may differ.

Usage: python3 benchmarks/bench_backends.py [--paths N] [--json]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys


def workloads(n_paths: int):
    from cenlevy import oracles
    from cenlevy.engine import SimConfig, run_censored, run_fk, run_killed
    from cenlevy.geometry import Ball

    disk = Ball((0.0, 0.0), 1.0)
    small = Ball((0.0, 0.0), 0.15)
    m12 = oracles.calibrated_stable_model(2, 1.2)
    m15 = oracles.calibrated_stable_model(2, 1.5)
    return [
        ("killed-exit a=1.2", lambda: run_killed(
            m12, disk, (0.1, 0.0), n_paths,
            SimConfig(eps_cut=2e-3, seed=1))),
        ("censored horizon a=1.5", lambda: run_censored(
            m15, disk, (0.3, 0.0), max(n_paths // 4, 100),
            SimConfig(eps_cut=1e-2, horizon=10.0, seed=2))),
        ("fk small-ball a=1.2", lambda: run_fk(
            m12, disk, (0.02, 0.0), n_paths,
            SimConfig(eps_cut=1e-3, seed=3), stop=small)),
    ]


def run_worker(n_paths: int):
    from cenlevy.engine import BACKEND

    rows = []
    for name, job in workloads(n_paths):
        res = job()
        meta = res.meta
        rows.append({
            "workload": name,
            "events": meta["total_events"],
            "wall_s": meta["wall_time_s"],
            "events_per_s": meta["total_events"] / max(meta["wall_time_s"], 1e-9),
            "mean_exit_time": float(res.tau.mean()),
        })
    print(json.dumps({"backend": BACKEND, "rows": rows}))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20000)
    ap.add_argument("--json", action="store_true")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        run_worker(args.paths)
        return

    results = {}
    for backend, force in (("compiled", "0"), ("fallback", "1")):
        env = dict(os.environ, CENLEVY_FORCE_FALLBACK=force)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--worker",
             "--paths", str(args.paths)],
            env=env, capture_output=True, text=True,
        )
        if proc.returncode != 0:
            print(f"{backend} worker failed:\n{proc.stderr}", file=sys.stderr)
            sys.exit(1)
        out = json.loads(proc.stdout.strip().splitlines()[-1])
        results[out["backend"]] = out["rows"]

    if "compiled" not in results:
        print("compiled core unavailable; fallback numbers only")
    if args.json:
        print(json.dumps(results, indent=2))
        return
    for backend, rows in results.items():
        print(f"\n== {backend} ==")
        for r in rows:
            print(f"  {r['workload']:<26} {r['events']:>12,} events  "
                  f"{r['wall_s']:>8.3f}s  {r['events_per_s'] / 1e6:>7.2f} M ev/s")
    if "compiled" in results and "fallback" in results:
        print("\n== speedup (compiled / fallback) ==")
        for rc, rf in zip(results["compiled"], results["fallback"]):
            # identical workload and seed: estimates must match exactly
            if rc["events"] != rf["events"]:
                print(f"  {rc['workload']:<26} EVENT COUNT MISMATCH "
                      f"{rc['events']} vs {rf['events']}")
                continue
            if abs(rc["mean_exit_time"] - rf["mean_exit_time"]) > 1e-12:
                print(f"  {rc['workload']:<26} RESULT MISMATCH")
                continue
            print(f"  {rc['workload']:<26} {rf['wall_s'] / rc['wall_s']:>6.1f}x"
                  "  (results identical)")


if __name__ == "__main__":
    main()
