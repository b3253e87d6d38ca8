#!/usr/bin/env python3
"""Four-condition comparison at desk scale, in memory, printing the results tables.

    python scripts/run_desk.py /tmp/ds --seed 0 --csv scores.csv
"""

import argparse
import time
from dataclasses import replace
from pathlib import Path

from lcasep.audio_io import load_clip_pair, make_split, truncate
from lcasep.experiments import (DESK, FULL_SCALE, TABLE_CONDITIONS, run_condition,
                                scores_csv_text, table_text)


def main():
    p = argparse.ArgumentParser(description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("dataset", help="directory of two-stem WAVs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-train", type=int, default=40)
    p.add_argument("--max-clips", type=int, default=50)
    p.add_argument("--duration", type=float, default=2.0)
    p.add_argument("--scale", choices=("desk", "paper"), default="desk")
    p.add_argument("--csv", help="also write per-clip scores here")
    a = p.parse_args()

    paths = sorted(Path(a.dataset).glob("*.wav"))[:a.max_clips or None]
    split = make_split([q.stem for q in paths], a.n_train, a.seed)
    def load(cid):
        return truncate(load_clip_pair(Path(a.dataset) / f"{cid}.wav"), a.duration)

    train = [load(c) for c in split.train_ids]
    test = [load(c) for c in split.test_ids]
    settings = replace(DESK if a.scale == "desk" else FULL_SCALE, seed=a.seed)

    results = {}
    for cond in TABLE_CONDITIONS:
        start = time.perf_counter()
        results[cond] = run_condition(cond, train, test, settings, results.get("Phase"))
        print(f"{cond}: {time.perf_counter() - start:.0f} s", flush=True)
    scores = {k: r.scores for k, r in results.items()}
    print()
    print(table_text(scores, "vocal"))
    print(table_text(scores, "accomp"))
    if a.csv:
        Path(a.csv).write_text(scores_csv_text(scores, f"seed={a.seed} scale={a.scale}"))


if __name__ == "__main__":
    main()
