#!/usr/bin/env python3
"""Write a synthetic two-stem dataset (left = accompaniment, right = voice).

Stands in for a real karaoke corpus when none is available; every clip is a
harmonic vibrato voice over chords, bass and percussion.
"""

import argparse

from lcasep.synthetic import write_dataset


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("root", help="output directory for the WAV files")
    p.add_argument("--clips", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-duration", type=float, default=2.5)
    p.add_argument("--max-duration", type=float, default=4.0)
    a = p.parse_args()
    ids = write_dataset(a.root, a.clips, a.seed, a.min_duration, a.max_duration)
    print(f"wrote {len(ids)} clips to {a.root}")


if __name__ == "__main__":
    main()
