"""
Scoring against annotators
==========================

Every video has five synthetic annotators. Summaries are scored frame by
frame against each of them; the annotators are also scored against each
other to give the human reference range.
"""

from deepsum import PointSet, SynthConfig, budget_k, extract_segments, make_synthetic_world, summarize
from deepsum.embedding import embed_segments, mean_pool
from deepsum.evaluator import emit_report, evaluate_summary
from deepsum.feature_io import read_model

import numpy as np

world = make_synthetic_world(SynthConfig(seed=0, n_videos=3))
model = read_model("demo_model.bin").model

reports = []
for vid, track in world.videos.items():
    segs = extract_segments(track)
    K = budget_k(track.duration_s)
    embedded = PointSet.from_segments(segs, embed_segments(segs, model.video))
    raw = PointSet.from_segments(segs, np.stack([mean_pool(s.frames) for s in segs]))
    for name, pts, alg in (("Uni.", embedded, "uniform"), ("Raw", raw, "lazy"), ("Ours", embedded, "lazy")):
        summary = summarize(pts, K, alg, segments=segs)
        reports.append(evaluate_summary(summary.merged_timeline, world.references[vid], name))

# %%
# table.csv mirrors the usual layout: human min/avg/max, one column per
# method, then the mean row and the two rows relative to human scores.
table = emit_report(reports, "demo_report", algorithms=["Uni.", "Raw", "Ours"])
print(table.to_csv())
