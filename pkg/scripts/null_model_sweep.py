"""False-positive rate per (pair, action) cell when every planted multiplier is 1.

    python3 scripts/null_model_sweep.py --seeds 20
"""

from __future__ import annotations

import argparse

from _common import DEFAULT_CONFIG, detect, load_config


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(DEFAULT_CONFIG))
    ap.add_argument("--seeds", type=int, default=5, help="run seeds 0..N-1")
    args = ap.parse_args()

    flagged: dict[tuple[str, str], list[int]] = {}
    kept: dict[tuple[str, str], list[int]] = {}
    for seed in range(args.seeds):
        _, reports = detect(load_config(args.config, seed, null=True))
        for report in reports:
            for cell in report.cells:
                key = (cell.pair.label, cell.action.value)
                flagged.setdefault(key, []).append(len(cell.biased))
                kept.setdefault(key, []).append(cell.n_kept)
        print(f"seed {seed} done", flush=True)

    print(f"{'pair':<14} {'action':<6} {'pooled':>7} {'max seed':>8} {'kept/seed':>9}")
    for key in sorted(flagged):
        f, k = flagged[key], kept[key]
        pooled = sum(f) / sum(k)
        worst = max(a / b for a, b in zip(f, k) if b)
        print(f"{key[0]:<14} {key[1]:<6} {pooled:>7.3f} {worst:>8.3f} {sum(k) / len(k):>9.1f}")


if __name__ == "__main__":
    main()
