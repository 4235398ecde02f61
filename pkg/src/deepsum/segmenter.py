"""Sliding-window segmentation of a feature track.

Windows of ``window_s`` seconds start every ``stride_s`` seconds. Inside
each window the track is resampled at ``sample_fps`` by taking, for every
sample instant, the descriptor whose timestamp is nearest (ties go to the
earlier frame). Nothing is interpolated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .feature_io import FeatureTrack

# slack for floating-point boundary comparisons, in seconds
_EPS = 1e-9


@dataclass
class Segment:
    index: int
    start_s: float
    end_s: float
    frame_indices: np.ndarray
    frames: np.ndarray
    cost: float
    degenerate: bool = False

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


def segment_count(duration_s: float, window_s: float, stride_s: float) -> int:
    if duration_s + _EPS < window_s:
        return 0
    return int(math.floor((duration_s - window_s) / stride_s + _EPS)) + 1


def samples_per_window(window_s: float, sample_fps: float) -> int:
    return max(1, int(round(window_s * sample_fps)))


def nearest_frames(times: np.ndarray, instants) -> np.ndarray:
    """Index of the frame nearest each instant; ties resolve to the earlier frame."""
    times = np.asarray(times, dtype=np.float64)
    instants = np.asarray(instants, dtype=np.float64)
    right = np.searchsorted(times, instants, side="left").clip(0, len(times) - 1)
    left = (right - 1).clip(0, len(times) - 1)
    pick_left = np.abs(instants - times[left]) <= np.abs(times[right] - instants)
    return np.where(pick_left, left, right)


def sample_window(track: FeatureTrack, start_s: float, end_s: float, n_samples: int):
    """Frame indices and descriptors for ``n_samples`` mid-bin instants in [start_s, end_s)."""
    step = (end_s - start_s) / n_samples
    instants = start_s + (np.arange(n_samples) + 0.5) * step
    idx = nearest_frames(track.times, instants)
    return idx, track.vectors[idx]


def extract_segments(track: FeatureTrack, window_s: float = 5.0, stride_s: float = 1.0,
                     sample_fps: float = 1.0) -> list[Segment]:
    if window_s <= 0:
        raise ValueError(f"window_s must be positive, got {window_s}")
    if stride_s <= 0:
        raise ValueError(f"stride_s must be positive, got {stride_s}")
    if sample_fps <= 0:
        raise ValueError(f"sample_fps must be positive, got {sample_fps}")
    if len(track) == 0:
        raise ValueError(f"track {track.video_id!r} is empty")

    m = samples_per_window(window_s, sample_fps)
    n = segment_count(track.duration_s, window_s, stride_s)
    if n == 0:
        # shorter than one window: summarize the whole clip as a single flagged segment
        idx, frames = sample_window(track, 0.0, track.duration_s, m)
        return [Segment(0, 0.0, float(track.duration_s), idx, frames, float(track.duration_s), True)]

    segments = []
    for k in range(n):
        start = k * stride_s
        end = start + window_s
        idx, frames = sample_window(track, start, end, m)
        inside = np.any((track.times >= start - _EPS) & (track.times <= end + _EPS))
        segments.append(Segment(k, float(start), float(end), idx, frames, float(window_s), not inside))
    return segments


def segments_from_manifest(track: FeatureTrack, rows) -> list[Segment]:
    """Rebuild segments from manifest rows against the track they index into."""
    out = []
    for row in rows:
        idx = np.asarray(row["frame_indices"], dtype=np.int64)
        if idx.size == 0 or idx.min() < 0 or idx.max() >= len(track):
            raise ValueError(f"segment {row['index']} references frames outside the track")
        start, end = float(row["start_s"]), float(row["end_s"])
        out.append(Segment(int(row["index"]), start, end, idx, track.vectors[idx],
                           float(row.get("cost", end - start)), bool(row.get("degenerate", False))))
    return out
