"""Evaluation tables and the ELN-magnitude-vs-WER study.

Correlations are computed on the raw (magnitude, WER) pairs: Pearson on the
values, Spearman as Pearson over average ranks. Degenerate inputs (zero
variance on either axis) yield an explicit flagged null instead of leaking
NaN into reports. Binning by magnitude is left-closed right-open with the
final bin closed, so the bins partition the pairs exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Condition, WERBreakdown
from .errors import DataError

CONDITION_ORDER = (Condition.CLEAN, Condition.MIXED, Condition.SNR5, Condition.SNR10)
DEFAULT_BIN_EDGES = (0.0, 5.0, 10.0, 20.0, 40.0, math.inf)
MISSING_CELL = "n/a"


@dataclass(frozen=True)
class ConditionReport:
    """Per-condition scores for one system: pooled WER plus per-utterance rows."""

    condition: Condition
    system: str
    pooled: WERBreakdown
    per_utterance: tuple[tuple[str, float, float | None], ...]  # (id, wer, eln magnitude)

    def __post_init__(self) -> None:
        object.__setattr__(self, "condition", Condition(self.condition))
        object.__setattr__(self, "per_utterance", tuple(self.per_utterance))
        ids = [row[0] for row in self.per_utterance]
        if len(ids) != len(set(ids)):
            raise DataError(f"duplicate utterance ids in report {self.system}/{self.condition.value}")


def condition_table(reports: Sequence[ConditionReport]) -> list[dict]:
    """Arrange pooled WERs as one row per system, one column per condition.

    Missing (system, condition) cells are explicit None; duplicates are an
    error rather than a silent overwrite.
    """
    if not reports:
        raise DataError("condition_table needs at least one report")
    systems: list[str] = []
    cells: dict[tuple[str, Condition], float] = {}
    for report in reports:
        key = (report.system, report.condition)
        if key in cells:
            raise DataError(f"duplicate report for system {key[0]!r} under {key[1].value}")
        if report.system not in systems:
            systems.append(report.system)
        cells[key] = report.pooled.wer_percent
    return [
        {
            "system": system,
            **{c.value: cells.get((system, c)) for c in CONDITION_ORDER},
        }
        for system in systems
    ]


def render_table_csv(table: list[dict]) -> str:
    """CSV form of condition_table output; missing cells rendered as n/a."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["system"] + [c.value for c in CONDITION_ORDER])
    for row in table:
        writer.writerow(
            [row["system"]]
            + [
                MISSING_CELL if row[c.value] is None else f"{row[c.value]:.6f}"
                for c in CONDITION_ORDER
            ]
        )
    return buf.getvalue()


def _average_ranks(values: Sequence[float]) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = np.asarray(values, dtype=np.float64)[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        # Tied values share the mean of the ranks they span (1-based).
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    xc, yc = x - x.mean(), y - y.mean()
    sx, sy = float(np.sqrt(np.sum(xc * xc))), float(np.sqrt(np.sum(yc * yc)))
    if sx == 0.0 or sy == 0.0:
        return None
    return float(np.sum(xc * yc) / (sx * sy))


@dataclass(frozen=True)
class BinSummary:
    lo: float
    hi: float
    count: int
    median_wer: float | None
    iqr: float | None
    outlier_count: int

    def to_json(self) -> dict:
        return {
            "lo": self.lo,
            "hi": None if math.isinf(self.hi) else self.hi,
            "count": self.count,
            "median_wer": self.median_wer,
            "iqr": self.iqr,
            "outlier_count": self.outlier_count,
        }


@dataclass(frozen=True)
class StudyResult:
    bins: tuple[BinSummary, ...]
    pearson_r: float | None
    spearman_rho: float | None
    degenerate: str | None  # reason both correlations are null, if they are

    def to_json(self) -> dict:
        return {
            "bins": [b.to_json() for b in self.bins],
            "pearson_r": self.pearson_r,
            "spearman_rho": self.spearman_rho,
            "degenerate": self.degenerate,
        }


def magnitude_wer_study(
    pairs: Sequence[tuple[float, float]],
    bin_edges: Sequence[float] = DEFAULT_BIN_EDGES,
) -> StudyResult:
    """Bin WER by ELN magnitude and correlate the raw pairs.

    Within a bin, an outlier is a WER above Q3 + 1.5 * IQR (quartiles by
    linear interpolation). Pairs outside [edges[0], edges[-1]] are rejected
    so the bins always partition the input.
    """
    if len(pairs) < 2:
        raise DataError("study needs at least 2 pairs")
    edges = [float(e) for e in bin_edges]
    if len(edges) < 2 or any(a >= b for a, b in zip(edges, edges[1:])):
        raise DataError("bin_edges must be strictly increasing with >= 2 entries")
    mags = np.asarray([p[0] for p in pairs], dtype=np.float64)
    wers = np.asarray([p[1] for p in pairs], dtype=np.float64)
    if not (np.all(np.isfinite(mags)) and np.all(np.isfinite(wers))):
        raise DataError("pairs must be finite")
    if float(mags.min()) < edges[0] or float(mags.max()) > edges[-1]:
        raise DataError("magnitudes fall outside the outermost bin edges")

    bins: list[BinSummary] = []
    for lo, hi in zip(edges, edges[1:]):
        if hi == edges[-1]:
            mask = (mags >= lo) & (mags <= hi)
        else:
            mask = (mags >= lo) & (mags < hi)
        inside = wers[mask]
        if len(inside) == 0:
            bins.append(BinSummary(lo, hi, 0, None, None, 0))
            continue
        q1, med, q3 = (float(q) for q in np.percentile(inside, [25.0, 50.0, 75.0]))
        iqr = q3 - q1
        outliers = int(np.sum(inside > q3 + 1.5 * iqr))
        bins.append(BinSummary(lo, hi, int(len(inside)), med, iqr, outliers))

    pearson = _pearson(mags, wers)
    spearman = _pearson(_average_ranks(mags), _average_ranks(wers))
    degenerate = None
    if pearson is None or spearman is None:
        degenerate = "zero variance in magnitudes or WERs"
    return StudyResult(tuple(bins), pearson, spearman, degenerate)
