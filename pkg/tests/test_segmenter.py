from fractions import Fraction
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deepsum.feature_io import FeatureTrack
from deepsum.segmenter import extract_segments, nearest_frames, segment_count


def make_track(duration, fps=1.0, dim=3, seed=0):
    n = int(round(duration * fps))
    times = (np.arange(n) + 0.5) / fps
    return FeatureTrack("v", dim, fps, duration, times, np.random.default_rng(seed).normal(size=(n, dim)))


def test_ten_seconds_six_segments():
    segs = extract_segments(make_track(10.0))
    assert [s.start_s for s in segs] == [0, 1, 2, 3, 4, 5]
    assert all(s.end_s - s.start_s == 5 for s in segs)


def test_window_equals_duration():
    segs = extract_segments(make_track(5.0))
    assert len(segs) == 1 and not segs[0].degenerate


def _linear_scan_nearest(times, t):
    best, best_d = None, None
    for i, ti in enumerate(times):
        d = abs(ti - t)
        if best is None or d < best_d:       # strict: the earlier frame wins ties
            best, best_d = i, d
    return best


def test_sixty_second_track_segment_ten_frames():
    track = make_track(60.0, fps=1.0)
    segs = extract_segments(track)
    assert len(segs) == 56
    assert all(len(s.frames) == 5 for s in segs)
    seg = segs[10]
    oracle = [_linear_scan_nearest(track.times, 10 + j + 0.5) for j in range(5)]
    assert oracle == [10, 11, 12, 13, 14]
    assert seg.frame_indices.tolist() == oracle
    np.testing.assert_array_equal(seg.frames, track.vectors[oracle])


def test_resampling_from_denser_track():
    track = make_track(12.0, fps=3.0)
    seg = extract_segments(track)[4]
    oracle = [_linear_scan_nearest(track.times, 4 + j + 0.5) for j in range(5)]
    assert seg.frame_indices.tolist() == oracle


def test_ties_go_to_earlier_frame():
    times = np.array([0.0, 1.0, 2.0])
    assert nearest_frames(times, [0.5, 1.5, 1.50001]).tolist() == [0, 1, 2]


def test_short_video_is_one_degenerate_segment():
    segs = extract_segments(make_track(3.0))
    assert len(segs) == 1
    assert segs[0].degenerate and segs[0].end_s == 3.0 and len(segs[0].frames) == 5


@pytest.mark.parametrize("kw", [dict(window_s=0), dict(window_s=-1), dict(stride_s=0), dict(sample_fps=0)])
def test_bad_parameters(kw):
    with pytest.raises(ValueError):
        extract_segments(make_track(10.0), **kw)


def test_empty_track():
    track = FeatureTrack("v", 2, 1.0, 5.0, np.zeros(0), np.zeros((0, 2)))
    with pytest.raises(ValueError, match="empty"):
        extract_segments(track)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 2000), st.integers(5, 200), st.integers(1, 100))
def test_count_formula(duration_tenths, window_tenths, stride_tenths):
    window_tenths = min(window_tenths, duration_tenths)
    d, w, s = (Fraction(x, 10) for x in (duration_tenths, window_tenths, stride_tenths))
    assert segment_count(float(d), float(w), float(s)) == math.floor((d - w) / s) + 1


def test_count_absorbs_float_noise():
    # a duration a few ulps short of a whole stride still counts the last window
    assert segment_count(1.9999999999999964, 1.0, 1.0) == 2
    assert segment_count(0.1 * 3, 0.1, 0.1) == 3


@settings(max_examples=50, deadline=None)
@given(st.floats(6.0, 40.0), st.sampled_from([0.5, 1.0, 2.0]), st.sampled_from([0.5, 1.0, 2.5]))
def test_frames_are_track_vectors_and_windows_overlap(duration, fps, stride):
    track = make_track(duration, fps=fps)
    segs = extract_segments(track, 5.0, stride, 1.0)
    rows = {tuple(v) for v in track.vectors}
    for s in segs:
        assert all(tuple(v) in rows for v in s.frames)
    for a, b in zip(segs, segs[1:]):
        overlap = a.end_s - b.start_s
        assert overlap == pytest.approx(5.0 - stride)
