"""Regenerate the shipped stable distribution tables (1e8 draws each)."""

import argparse
import time

from gwldp.stable import GOLDEN_DRAWS, build_table, table_path

PAIRS = [(a, s) for a in (0.8, 1.2, 1.5, 1.8) for s in (-1.0, 0.0, 1.0)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--draws", type=int, default=GOLDEN_DRAWS)
    args = ap.parse_args()
    for a, s in PAIRS:
        t0 = time.perf_counter()
        tab = build_table(a, s, draws=args.draws)
        path = table_path(a, s)
        tab.to_csv(path)
        print(f"{path.name}: {tab.x.size} points, {time.perf_counter() - t0:.1f}s", flush=True)


if __name__ == "__main__":
    main()
