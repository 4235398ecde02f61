"""Per-frame scoring of summaries against human references.

Interval summaries are binarised at the reference fps: frame i is in the
summary when its centre time (i + 0.5) / fps falls inside some half-open
interval [start, end).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import _svg
from .feature_io import ReferenceSummarySet


@dataclass
class FrameMask:
    video_id: str
    fps: float
    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)

    def __len__(self):
        return len(self.bits)


@dataclass
class ScoreReport:
    video_id: str
    algorithm: str
    per_reference: list[dict]
    f_min: float
    f_mean: float
    f_max: float
    human: dict | None = None
    timeline: list = field(default_factory=list)
    agreement: list = field(default_factory=list)
    duration_s: float = 0.0
    fps: float = 1.0

    def to_record(self) -> dict:
        return {
            "video_id": self.video_id, "algorithm": self.algorithm,
            "per_reference": self.per_reference,
            "f_min": self.f_min, "f_mean": self.f_mean, "f_max": self.f_max,
            "human": self.human, "timeline": [list(iv) for iv in self.timeline],
            "agreement": list(self.agreement), "duration_s": self.duration_s, "fps": self.fps,
        }

    @classmethod
    def from_record(cls, rec) -> "ScoreReport":
        fields = dict(rec)
        fields["timeline"] = [tuple(iv) for iv in fields.get("timeline", [])]
        return cls(**fields)


def n_frames(duration_s: float, fps: float) -> int:
    return int(math.ceil(duration_s * fps - 1e-9))


def to_mask(intervals, fps: float, duration_s: float, video_id: str = "") -> FrameMask:
    n = n_frames(duration_s, fps)
    centers = (np.arange(n) + 0.5) / fps
    bits = np.zeros(n, dtype=bool)
    for s, e in intervals:
        bits |= (centers >= s) & (centers < e)
    return FrameMask(video_id, fps, bits)


def f_measure(candidate: FrameMask, reference: FrameMask) -> tuple[float, float, float]:
    c = np.asarray(getattr(candidate, "bits", candidate), dtype=bool)
    r = np.asarray(getattr(reference, "bits", reference), dtype=bool)
    if c.shape != r.shape:
        raise ValueError(f"mask lengths differ: {c.shape} vs {r.shape}")
    overlap = int(np.count_nonzero(c & r))
    nc, nr = int(np.count_nonzero(c)), int(np.count_nonzero(r))
    p = overlap / nc if nc else 0.0
    rec = overlap / nr if nr else 0.0
    f = 2 * p * rec / (p + rec) if p + rec > 0 else 0.0
    return p, rec, f


def reference_masks(refs: ReferenceSummarySet) -> list[FrameMask]:
    return [to_mask(iv, refs.fps, refs.duration_s, refs.video_id) for _, iv in refs.references]


def human_agreement(refs: ReferenceSummarySet) -> dict:
    """Leave-one-out mean f-measure of each annotator against all the others."""
    if len(refs.references) < 2:
        raise ValueError("human agreement needs at least two references")
    masks = reference_masks(refs)
    per = {}
    for a, (name, _) in enumerate(refs.references):
        scores = [f_measure(masks[a], masks[b])[2] for b in range(len(masks)) if b != a]
        per[name] = float(np.mean(scores))
    vals = list(per.values())
    return {"per_annotator": per, "min": min(vals), "mean": float(np.mean(vals)), "max": max(vals)}


def agreement_curve(refs: ReferenceSummarySet) -> np.ndarray:
    """Fraction of annotators covering each frame."""
    return np.mean([m.bits for m in reference_masks(refs)], axis=0)


def evaluate_summary(timeline, refs: ReferenceSummarySet, algorithm: str = "") -> ScoreReport:
    cand = to_mask(timeline, refs.fps, refs.duration_s, refs.video_id)
    per = []
    for (name, _), mask in zip(refs.references, reference_masks(refs)):
        p, r, f = f_measure(cand, mask)
        per.append({"annotator_id": name, "precision": p, "recall": r, "f": f})
    fs = [x["f"] for x in per]
    human = human_agreement(refs) if len(refs.references) >= 2 else None
    return ScoreReport(refs.video_id, algorithm, per, min(fs), float(np.mean(fs)), max(fs), human,
                       [tuple(iv) for iv in timeline], agreement_curve(refs).tolist(),
                       refs.duration_s, refs.fps)


# --------------------------------------------------------------------------
# report table

HUMAN_COLUMNS = ("Min.", "Avg.", "Max.")


@dataclass
class ReportTable:
    columns: list[str]               # algorithm columns after the three human ones
    rows: list[tuple[str, list[float]]]
    mean: list[float]
    relative_avg: list[float]
    relative_max: list[float]

    @property
    def header(self) -> list[str]:
        return ["Video", *HUMAN_COLUMNS, *self.columns]

    def to_csv(self, digits: int = 3) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        fmt = lambda xs: [f"{x:.{digits}f}" if x is not None and math.isfinite(x) else "" for x in xs]
        for name, vals in self.rows:
            w.writerow([name, *fmt(vals)])
        w.writerow(["Mean f-measure", *fmt(self.mean)])
        w.writerow(["Relative to human avg.", *fmt(self.relative_avg)])
        w.writerow(["Relative to human max.", *fmt(self.relative_max)])
        return buf.getvalue()


def build_table(reports, algorithms=None) -> ReportTable:
    """Assemble per-video rows from score reports.

    Human min/avg/max come from the leave-one-out agreement stored on each
    report; every algorithm cell is that algorithm's mean f-measure over
    the video's references. The final rows are the column means and those
    means divided by the mean of the human Avg. and Max. columns.
    """
    by_video: dict[str, dict[str, ScoreReport]] = {}
    for rep in reports:
        by_video.setdefault(rep.video_id, {})[rep.algorithm] = rep
    if algorithms is None:
        algorithms = []
        for rep in reports:
            if rep.algorithm not in algorithms:
                algorithms.append(rep.algorithm)
    rows = []
    for vid, reps in by_video.items():
        human = next((r.human for r in reps.values() if r.human), None)
        if human is None:
            raise ValueError(f"video {vid!r} has no human agreement scores (needs >= 2 references)")
        vals = [human["min"], human["mean"], human["max"]]
        for alg in algorithms:
            if alg not in reps:
                raise ValueError(f"video {vid!r} has no score for algorithm {alg!r}")
            vals.append(reps[alg].f_mean)
        rows.append((vid, vals))
    if not rows:
        raise ValueError("no score reports")
    mean = np.mean([v for _, v in rows], axis=0).tolist()
    avg_h, max_h = mean[1], mean[2]
    rel_avg = [m / avg_h if avg_h > 0 else float("nan") for m in mean]
    rel_max = [m / max_h if max_h > 0 else float("nan") for m in mean]
    return ReportTable(list(algorithms), rows, mean, rel_avg, rel_max)


def bar_chart_svg(table: ReportTable) -> str:
    labels = [*HUMAN_COLUMNS, *table.columns]
    return _svg.bar_chart(labels, table.mean, title="Mean f-measure")


def timeline_svg(report: ScoreReport) -> str:
    """Selected intervals shaded over the per-frame annotator agreement curve."""
    return _svg.timeline_strip(report.duration_s, report.fps, report.agreement, report.timeline,
                               title=f"{report.video_id} ({report.algorithm})")


def emit_report(reports, out_dir, algorithms=None, timelines_for=None):
    """Write table.csv, chart.svg and one timeline strip per video.

    ``timelines_for`` picks which algorithm's selections are drawn on the
    strips (default: the last column). Returns the :class:`ReportTable`.
    """
    import os

    table = build_table(reports, algorithms)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "table.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table.to_csv())
    with open(os.path.join(out_dir, "chart.svg"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(bar_chart_svg(table))
    strip_alg = timelines_for or (table.columns[-1] if table.columns else None)
    strips = os.path.join(out_dir, "timelines")
    os.makedirs(strips, exist_ok=True)
    for rep in reports:
        if rep.algorithm == strip_alg:
            with open(os.path.join(strips, f"{_svg.safe_name(rep.video_id)}.svg"), "w",
                      encoding="utf-8", newline="\n") as fh:
                fh.write(timeline_svg(rep))
    return table
