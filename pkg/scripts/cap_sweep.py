#!/usr/bin/env python3
"""Sweep exploration caps over the branch-explosion stressor.

Shows how the branch cap, the violation cap and the time budget interact:
for each cap value the stressor is analyzed once and the resulting status,
peak frontier size and wall time are tabulated.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from emlcheck.asm import assemble
from emlcheck.heuristics import derive_annotations
from emlcheck.orderliness import AnalysisConfig, analyze_ecall

ROOT = Path(__file__).resolve().parents[1]


def run(image, annotations, config):
    peak = 0

    def observer(active):
        nonlocal peak
        peak = max(peak, active)

    started = time.monotonic()
    report = analyze_ecall(image, annotations, config, 0, observer=observer)
    wall = time.monotonic() - started
    return report, peak, wall


def main() -> int:
    source = (ROOT / "corpus" / "stress_brancher.eml").read_text()
    image, diagnostics = assemble(source)
    if image is None:
        for d in diagnostics:
            print(d, file=sys.stderr)
        return 1
    annotations = derive_annotations(image).annotations

    print(f"{'max_branches':>12} {'status':>8} {'peak':>5} {'paths':>6} {'wall_s':>7}")
    for cap in (4, 16, 64, 100, 200):
        report, peak, wall = run(image, annotations,
                                 AnalysisConfig(max_active_branches=cap))
        print(f"{cap:>12} {report.status:>8} {peak:>5} "
              f"{report.paths_explored:>6} {wall:>7.2f}")

    report, peak, wall = run(image, annotations, AnalysisConfig(time_budget=1.0))
    print(f"{'1s budget':>12} {report.status:>8} {peak:>5} "
          f"{report.paths_explored:>6} {wall:>7.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
