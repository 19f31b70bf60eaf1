"""Planted-bias recovery on synthetic logs, split by the stage that flagged each keyword.

    python3 scripts/run_planted_recovery.py --seeds 0 1 2 --sigma 2 2.5 3
"""

from __future__ import annotations

import argparse
import statistics
import time

from _common import DEFAULT_CONFIG, detect, load_config

from biaslens.bias_detector import BiasClass, DetectorConfig
from biaslens.log_model import Action
from biaslens.synth import overall_score

INTERCEPT = (BiasClass.UPPER_INTERCEPT, BiasClass.LOWER_INTERCEPT)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(DEFAULT_CONFIG))
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--sigma", type=float, nargs="+", default=[2.0])
    ap.add_argument("--action", choices=[a.value for a in Action], default="click")
    args = ap.parse_args()
    action = Action(args.action)

    print(f"{'seed':>4} {'sigma':>5} {'recall':>6} {'prec':>6} {'tp':>3} {'flag':>4} "
          f"{'fp_icpt':>7} {'fp_slope':>8} {'secs':>5}")
    summary: dict[float, list[tuple[float, float]]] = {}
    for seed in args.seeds:
        cfg = load_config(args.config, seed)
        for sigma in args.sigma:
            t0 = time.perf_counter()
            sim, reports = detect(cfg, DetectorConfig(sigma_multiplier=sigma))
            flagged = [c for r in reports for c in r.classified if c.bias_class.is_biased]
            score = overall_score(flagged, sim.truth, action)
            truth = {(i.keyword, i.pair, i.direction) for i in sim.truth.items if i.action is action}
            fps = [c for c in flagged if c.action is action
                   and (c.keyword, c.pair, c.biased_toward) not in truth]
            fp_icpt = sum(c.bias_class in INTERCEPT for c in fps)
            print(f"{seed:>4} {sigma:>5.2f} {score.recall:>6.3f} {score.precision:>6.3f} "
                  f"{score.true_positives:>3} {score.n_detected:>4} {fp_icpt:>7} {len(fps) - fp_icpt:>8} "
                  f"{time.perf_counter() - t0:>5.1f}")
            summary.setdefault(sigma, []).append((score.recall, score.precision))
    if len(args.seeds) > 1:
        for sigma, rows in summary.items():
            print(f"sigma {sigma:.2f}: mean recall {statistics.fmean(r for r, _ in rows):.3f}, "
                  f"mean precision {statistics.fmean(p for _, p in rows):.3f}")


if __name__ == "__main__":
    main()
