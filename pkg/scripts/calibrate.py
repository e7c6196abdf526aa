"""Calibration sweep: run ablation arms over seeds and print criterion signs.

Working tool used while tuning defaults; not part of the package API.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from coldboost.harness import ScenarioConfig, headline_metrics, run_scenario
from coldboost.metrics import EventFrame, per_slot_pv

ARMS = {
    "base": {},
    "no_exit": {"disable_exit": True},
    "no_promotion": {"disable_promotion": True},
    "stage_1": {"stage_count": 1},
    "no_bidding": {"disable_bidding": True},
    "no_speed": {"disable_speed_factor": True},
    "no_user": {"disable_user_factor": True},
    "boost_off": {"boosting_enabled": False},
}


def below_line_fraction(res, line: float = 10.0, age: int = 30) -> float:
    """Fraction of cold items with per-slot PV < line at age `age`."""
    cfg = res.config
    upload = res.world.item_upload_slot
    frame = res.frame.window(0, cfg.slots - 1)
    slots, counts = per_slot_pv(frame, res.world.n_items)
    eligible = [
        i
        for i in range(res.world.n_items)
        if 0 <= upload[i] and upload[i] + age <= cfg.slots - 1
    ]
    below = 0
    for i in eligible:
        target_slot = upload[i] + age
        idx = np.searchsorted(slots, target_slot)
        pv = counts[idx, i] if idx < len(slots) and slots[idx] == target_slot else 0
        if pv < line:
            below += 1
    return below / len(eligible) if eligible else float("nan")


def run_arm(args):
    arm, seed, overrides = args
    cfg = ScenarioConfig(seed=seed, **overrides)
    res = run_scenario(cfg)
    out = {
        "arm": arm,
        "seed": seed,
        "metrics": headline_metrics(res),
        "retention": res.report.get("topk_retention"),
        "below10": below_line_fraction(res),
        "budget": res.report["budget"],
        "decisions": {},
    }
    for t in res.transitions:
        out["decisions"][t["decision"]] = out["decisions"].get(t["decision"], 0) + 1
    return out


def main():
    seeds = [int(s) for s in sys.argv[1:]] or [1, 2, 3]
    jobs = [(arm, seed, ov) for arm, ov in ARMS.items() for seed in seeds]
    with ProcessPoolExecutor(max_workers=2) as ex:
        rows = list(ex.map(run_arm, jobs))
    by = {(r["arm"], r["seed"]): r for r in rows}

    print("\n=== per-arm means ===")
    for arm in ARMS:
        ms = [by[(arm, s)]["metrics"] for s in seeds]
        ctr = np.mean([m["CTR"] for m in ms])
        roi = np.mean([m["ROI"] if m["ROI"] is not None else np.nan for m in ms])
        pay = np.mean([m["PAY"] for m in ms])
        ts = np.mean([m["TrafficShare"] for m in ms])
        print(f"{arm:14s} CTR={ctr:6.2f} ROI={roi:6.3f} PAY={pay:7.1f} share={ts:5.1f} "
              f"decisions={by[(arm, seeds[0])]['decisions']}")

    print("\n=== criterion 6 signs (per seed, base vs arm) ===")
    for seed in seeds:
        base = by[("base", seed)]["metrics"]
        line = [f"seed {seed}:"]
        for arm in ("no_exit", "no_promotion", "stage_1", "no_bidding", "no_speed", "no_user"):
            m = by[(arm, seed)]["metrics"]
            d_ctr = m["CTR"] - base["CTR"]
            d_roi = (m["ROI"] or np.nan) - (base["ROI"] or np.nan)
            line.append(f"{arm}: dCTR={d_ctr:+.2f} dROI={d_roi:+.3f}")
        print("  ".join(line))

    print("\n=== criterion 7 (retention on < off; below10 on < off) ===")
    for seed in seeds:
        on = by[("base", seed)]
        off = by[("boost_off", seed)]
        rets = []
        for lag in ("7", "14", "21", "30"):
            rets.append(f"lag{lag}: {on['retention'][lag]:.1f} vs {off['retention'][lag]:.1f}")
        print(f"seed {seed}: " + "  ".join(rets))
        print(f"   below10: on={on['below10']:.3f} off={off['below10']:.3f}")

    with open("/tmp/calibration.json", "w") as fh:
        json.dump(rows, fh, indent=1, default=str)


if __name__ == "__main__":
    main()
