#!/usr/bin/env python3
"""Run the sample corpus against its manifests and print a pass/fail table.

Usage: python scripts/run_corpus.py [corpus_dir] [--max-branches N]
       [--max-violations N] [--time-budget S]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from emlcheck.corpus import full_kind_coverage, run_corpus
from emlcheck.orderliness import AnalysisConfig


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("corpus_dir", nargs="?",
                        default=Path(__file__).resolve().parents[1] / "corpus")
    parser.add_argument("--max-branches", type=int, default=100)
    parser.add_argument("--max-violations", type=int, default=20)
    parser.add_argument("--time-budget", type=float, default=1200.0)
    args = parser.parse_args()

    config = AnalysisConfig(max_active_branches=args.max_branches,
                            max_violations=args.max_violations,
                            time_budget=args.time_budget)
    results = run_corpus(args.corpus_dir, config)
    failures = 0
    for result in results:
        mark = "PASS" if result.passed else "FAIL"
        print(f"{mark}  {result.name:<28} {result.wall_ms:8.0f} ms")
        for mismatch in result.mismatches:
            print(f"      {mismatch}")
        failures += not result.passed
    print(f"\n{len(results) - failures}/{len(results)} samples passed")
    covered = full_kind_coverage(args.corpus_dir)
    print(f"violation-kind coverage complete: {covered}")
    return 1 if failures or not covered else 0


if __name__ == "__main__":
    raise SystemExit(main())
