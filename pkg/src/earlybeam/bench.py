"""Runtime statistics against the camera's frame budget.

At 18 Hz a frame must finish in 1/18 s (about 55.6 ms) to keep up; the
report says how often each stage and the whole chain stayed inside that.
"""

from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from .errors import DataError
from .metrics import DEFAULT_FPS
from .pipeline import STAGES

REPORT_STAGES = STAGES + ("total",)


@dataclasses.dataclass(frozen=True)
class StageStats:
    """Distribution of one stage's per-frame wall-clock time."""

    stage: str
    count: int
    mean_ms: float
    std_ms: float
    p50_ms: float
    p90_ms: float
    p99_ms: float
    max_ms: float
    budget_ms: float
    under_budget: float

    def row(self) -> str:
        return (
            f"{self.stage:<10} {self.mean_ms:8.2f} {self.std_ms:8.2f} {self.p50_ms:8.2f} "
            f"{self.p90_ms:8.2f} {self.p99_ms:8.2f} {self.max_ms:8.2f} {100 * self.under_budget:9.1f}%"
        )


def stage_stats(stage: str, seconds: Sequence[float], budget_s: float) -> StageStats:
    if not seconds:
        raise DataError("need at least one timed frame")
    ms = np.asarray(seconds, dtype=np.float64) * 1000.0
    budget_ms = budget_s * 1000.0
    return StageStats(
        stage,
        len(ms),
        float(ms.mean()),
        float(ms.std()),
        float(np.percentile(ms, 50)),
        float(np.percentile(ms, 90)),
        float(np.percentile(ms, 99)),
        float(ms.max()),
        budget_ms,
        float((ms < budget_ms).mean()),
    )


def bench_report(frame_timings: Sequence[dict], fps: float = DEFAULT_FPS) -> dict[str, StageStats]:
    """Per-stage statistics from the per-frame timing dicts of a run."""
    if fps <= 0:
        raise DataError("frame rate must be positive")
    if not frame_timings:
        raise DataError("need at least one timed frame")
    budget = 1.0 / fps
    report = {}
    for stage in REPORT_STAGES:
        values = [t[stage] for t in frame_timings if stage in t]
        if values:
            report[stage] = stage_stats(stage, values, budget)
    return report


def format_report(report: dict[str, StageStats]) -> str:
    header = (
        f"{'stage':<10} {'mean':>8} {'std':>8} {'p50':>8} {'p90':>8} {'p99':>8} {'max':>8} {'in-budget':>10}\n"
        f"{'':<10} {'[ms]':>8} {'[ms]':>8} {'[ms]':>8} {'[ms]':>8} {'[ms]':>8} {'[ms]':>8}"
    )
    lines = [header]
    for stage in REPORT_STAGES:
        if stage in report:
            lines.append(report[stage].row())
    any_stats = next(iter(report.values()))
    lines.append(f"frame budget: {any_stats.budget_ms:.2f} ms")
    return "\n".join(lines)
