import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deepsum.diagnostics import SynthConfig, kmeans, make_synthetic_world, pca_project, scatter_svg


def eigh_pca(X, k):
    Xc = X - X.mean(axis=0)
    w, V = np.linalg.eigh(Xc.T @ Xc)
    V = V[:, np.argsort(w)[::-1][:k]]
    for i in range(k):
        j = np.argmax(np.abs(V[:, i]))
        if V[j, i] < 0:
            V[:, i] = -V[:, i]
    return Xc @ V


class TestPCA:
    def test_planar_points_keep_distances(self, rng):
        X = rng.normal(size=(12, 2))
        Y = pca_project(X)
        d = lambda A: ((A[:, None] - A[None]) ** 2).sum(-1)
        np.testing.assert_allclose(d(Y), d(X), atol=1e-12)

    def test_identical_points_map_to_origin(self):
        assert np.array_equal(pca_project(np.ones((5, 7))), np.zeros((5, 2)))

    def test_matches_eigh_oracle(self, rng):
        X = rng.normal(size=(10, 300))
        np.testing.assert_allclose(pca_project(X), eigh_pca(X, 2), atol=1e-8)

    def test_rank_deficient_pads_zeros(self):
        X = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
        Y = pca_project(X, 3)
        assert np.allclose(Y[:, 1:], 0, atol=1e-12)
        assert Y[2, 0] > 0    # sign convention: largest loading positive

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            pca_project(np.zeros((1, 3)))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_translation_invariant(self, seed):
        r = np.random.default_rng(seed)
        X = r.normal(size=(8, 5))
        np.testing.assert_allclose(pca_project(X), pca_project(X + r.normal(size=5)), atol=1e-10)


class TestKMeans:
    def test_separated_blobs(self, rng):
        X = np.vstack([rng.normal(size=(20, 2)) * 0.1, rng.normal(size=(20, 2)) * 0.1 + 10])
        labels, centers, inertia = kmeans(X, 2, seed=1)
        assert len(set(labels[:20])) == 1 and len(set(labels[20:])) == 1 and labels[0] != labels[20]
        assert inertia < 2.0

    def test_deterministic(self, rng):
        X = rng.normal(size=(30, 3))
        a, b = kmeans(X, 3, seed=4), kmeans(X, 3, seed=4)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]) and a[2] == b[2]

    def test_k_clamped(self):
        labels, centers, _ = kmeans(np.eye(2), 5)
        assert len(centers) == 2 and sorted(labels.tolist()) == [0, 1]


class TestScatter:
    def test_svg_is_deterministic(self, rng):
        coords = rng.normal(size=(15, 2))
        a = scatter_svg(coords, keyframe_labels=["kf"] + [None] * 14, seed=2, title="t & u")
        assert a == scatter_svg(coords, keyframe_labels=["kf"] + [None] * 14, seed=2, title="t & u")
        assert a.startswith("<svg") and a.count("<circle") == 15 and "t &amp; u" in a and ">kf<" in a


class TestSynthetic:
    def test_same_seed_same_world(self):
        cfg = SynthConfig(seed=5, n_train=20, n_heldout=5, n_videos=1)
        a, b = make_synthetic_world(cfg), make_synthetic_world(cfg)
        assert a.train_tracks.keys() == b.train_tracks.keys()
        for k in a.train_tracks:
            assert np.array_equal(a.train_tracks[k].vectors, b.train_tracks[k].vectors)
        assert [d.y.tolist() for d in a.train_descriptions] == [d.y.tolist() for d in b.train_descriptions]
        assert a.references["video00"].references == b.references["video00"].references

    def test_shapes_and_counts(self):
        cfg = SynthConfig(n_train=23, n_heldout=7, n_videos=2, clips_per_video=5)
        w = make_synthetic_world(cfg)
        assert len(w.train_descriptions) == 23 and len(w.train_tracks) == 5
        assert len(w.heldout_descriptions) == 7
        v = w.videos["video01"]
        assert v.duration_s == cfg.n_scenes * cfg.blocks_per_scene * cfg.scene_block_s
        assert v.vectors.shape == (120, cfg.video_dim)
        assert len(w.references["video01"].references) == cfg.n_annotators
        assert sorted(set(w.scene_labels["video01"].tolist())) == [0, 1, 2]

    def test_scenes_equidistant(self):
        w = make_synthetic_world(SynthConfig(seed=3, n_train=5, n_heldout=0, n_videos=1, frame_noise=0.0))
        track, labels = w.videos["video00"], w.scene_labels["video00"]
        reps = np.array([track.vectors[labels == s][0] for s in range(3)])
        d = [np.linalg.norm(reps[i] - reps[j]) for i in range(3) for j in range(i + 1, 3)]
        # equal in latent space; the linear map keeps them comparable but not equal
        assert min(d) > 0

    @pytest.mark.parametrize("bad", [dict(n_clusters=0), dict(fps=0.0), dict(frame_noise=-1.0), dict(n_videos=-1)])
    def test_config_validation(self, bad):
        with pytest.raises(ValueError):
            SynthConfig(**bad)
