"""
Summarizing one video
=====================

The long synthetic videos cycle through three scenes. A good summary
picks one segment from each scene.
"""

import numpy as np

from deepsum import PointSet, SynthConfig, budget_k, extract_segments, lazy_greedy_select, make_synthetic_world
from deepsum.diagnostics import pca_project, scatter_svg
from deepsum.embedding import embed_segments
from deepsum.feature_io import read_model
from deepsum.summarizer import render_timeline, uniform_baseline

world = make_synthetic_world(SynthConfig(seed=0))
track = world.videos["video00"]
segments = extract_segments(track, window_s=5.0, stride_s=1.0)
print(f"{track.duration_s:.0f} s video -> {len(segments)} overlapping 5 s segments")

# model written by 01_train_embedding.py
model = read_model("demo_model.bin").model
points = PointSet.from_segments(segments, embed_segments(segments, model.video))

K = budget_k(track.duration_s)
summary = lazy_greedy_select(points, K)
render_timeline(summary, segments)
labels = world.scene_labels["video00"]
for i in summary.selected:
    scene = np.bincount(labels[segments[i].frame_indices]).argmax()
    print(f"segment {i:3d} [{segments[i].start_s:5.1f}, {segments[i].end_s:5.1f}) scene {scene}")
print("objective:", round(summary.objective_value, 6), "timeline:", summary.merged_timeline)

# %%
# Evenly spaced picks for comparison; they ignore content entirely.
print("uniform picks:", uniform_baseline(points, K).selected)

# %%
# 2-D view of the embedded segments, joined in time order.
coords = pca_project(points.X)
tags = [str(i) if i in summary.selected else None for i in points.indices]
with open("demo_points.svg", "w") as fh:
    fh.write(scatter_svg(coords, keyframe_labels=tags, k=3, title="video00"))
