"""2-D projections for eyeballing embeddings, and seeded synthetic data.

The synthetic world draws a low-dimensional latent vector for every clip
or scene; frame descriptors and sentence vectors are two different random
linear views of that latent plus noise. Clips from the same cluster share
a nearby latent, so a trained joint embedding can recover both the
cluster structure and the clip-level pairing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _svg
from .feature_io import DescriptionVector, FeatureTrack, ReferenceSummarySet, clip_intervals


def pca_project(points, n_components: int = 2) -> np.ndarray:
    """Project onto the top principal components of the mean-centred points.

    Each component's sign is fixed so that its largest-magnitude loading is
    positive. Missing components (rank below ``n_components``) come out as
    zeros.
    """
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if X.shape[0] < 2:
        raise ValueError("PCA needs at least two points")
    Xc = X - X.mean(axis=0)
    U, S, Vt = np.linalg.svd(Xc, full_matrices=False)
    k = min(n_components, len(S))
    for i in range(k):
        j = np.argmax(np.abs(Vt[i]))
        if Vt[i, j] < 0:
            Vt[i] = -Vt[i]
    coords = np.zeros((X.shape[0], n_components))
    coords[:, :k] = Xc @ Vt[:k].T
    return coords


def kmeans(X, k: int, seed=0, n_init: int = 5, max_iter: int = 50):
    """Lloyd's k-means with k-means++ seeding; best of ``n_init`` restarts.

    Returns ``(labels, centers, inertia)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = len(X)
    k = min(k, n)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        centers = [X[rng.integers(n)]]
        for _ in range(1, k):
            d = np.min([((X - c) ** 2).sum(axis=1) for c in centers], axis=0)
            total = d.sum()
            centers.append(X[rng.choice(n, p=d / total)] if total > 0 else X[rng.integers(n)])
        centers = np.array(centers)
        labels = None
        for _ in range(max_iter):
            d = ((X[:, None, :] - centers[None]) ** 2).sum(axis=2)
            new = d.argmin(axis=1)
            if labels is not None and np.array_equal(new, labels):
                break
            labels = new
            for c in range(k):
                if np.any(labels == c):
                    centers[c] = X[labels == c].mean(axis=0)
        inertia = float(((X - centers[labels]) ** 2).sum())
        if best is None or inertia < best[2]:
            best = (labels.copy(), centers.copy(), inertia)
    return best


def scatter_svg(coords, cluster_labels=None, keyframe_labels=None, k: int = 3, seed=0, title="") -> str:
    """Scatter of 2-D coordinates joined in temporal order, coloured by cluster.

    Without explicit ``cluster_labels`` the colours come from a seeded
    k-means pass on ``coords``.
    """
    coords = np.asarray(coords, dtype=np.float64)
    if cluster_labels is None:
        cluster_labels = kmeans(coords, k, seed=seed)[0]
    return _svg.scatter(coords.tolist(), list(cluster_labels), keyframe_labels, path=True, title=title)


# --------------------------------------------------------------------------
# synthetic data

@dataclass
class SynthConfig:
    seed: int = 0
    n_clusters: int = 2
    latent_dim: int = 4
    video_dim: int = 16
    text_dim: int = 12
    fps: float = 1.0
    clip_s: float = 5.0
    clips_per_video: int = 5
    n_train: int = 200             # positive clips for training
    n_heldout: int = 50
    cluster_spread: float = 1.0
    clip_spread: float = 1.0
    # small features keep the initial head outputs, and so the derived margin, small
    feature_scale: float = 0.05    # multiplies both latent-to-feature maps
    frame_noise: float = 0.005
    text_noise: float = 0.005
    n_videos: int = 2              # long videos to summarise
    n_scenes: int = 3
    scene_block_s: float = 20.0
    scene_separation: float = 2.0  # latent distance between scenes of a long video
    blocks_per_scene: int = 2
    n_annotators: int = 5
    annotator_jitter_s: float = 2.0

    def __post_init__(self):
        positive_int = ("n_clusters", "latent_dim", "video_dim", "text_dim", "clips_per_video",
                        "n_train", "n_scenes", "blocks_per_scene", "n_annotators")
        for name in positive_int:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("fps", "clip_s", "scene_block_s", "feature_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("cluster_spread", "clip_spread", "frame_noise", "text_noise", "annotator_jitter_s",
                     "scene_separation"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.n_heldout < 0 or self.n_videos < 0:
            raise ValueError("n_heldout and n_videos must be non-negative")


@dataclass
class SyntheticWorld:
    config: SynthConfig
    cluster_centers: np.ndarray            # latent space
    video_map: np.ndarray                  # latent -> frame descriptor
    text_map: np.ndarray                   # latent -> sentence vector
    train_tracks: dict = field(default_factory=dict)
    train_descriptions: list = field(default_factory=list)
    heldout_tracks: dict = field(default_factory=dict)
    heldout_descriptions: list = field(default_factory=list)
    videos: dict = field(default_factory=dict)
    references: dict = field(default_factory=dict)
    scene_labels: dict = field(default_factory=dict)     # per-frame scene id of each long video
    clip_clusters: dict = field(default_factory=dict)    # desc_id -> cluster id

    @property
    def video_cluster_centers(self) -> np.ndarray:
        return self.cluster_centers @ self.video_map.T

    @property
    def text_cluster_centers(self) -> np.ndarray:
        return self.cluster_centers @ self.text_map.T


def _clip_videos(world, rng, count, prefix):
    cfg = world.config
    tracks, descs = {}, []
    n_vid = -(-count // cfg.clips_per_video)
    made = 0
    for v in range(n_vid):
        vid = f"{prefix}{v:04d}"
        n_clips = min(cfg.clips_per_video, count - made)
        duration = n_clips * cfg.clip_s
        n_frames = int(round(duration * cfg.fps))
        times = (np.arange(n_frames) + 0.5) / cfg.fps
        vectors = np.empty((n_frames, cfg.video_dim))
        for c in range(n_clips):
            cluster = int(rng.integers(cfg.n_clusters))
            z = world.cluster_centers[cluster] + cfg.clip_spread * rng.normal(size=cfg.latent_dim)
            span = (c * cfg.clip_s, (c + 1) * cfg.clip_s)
            sel = (times >= span[0]) & (times < span[1])
            vectors[sel] = z @ world.video_map.T + cfg.frame_noise * rng.normal(size=(sel.sum(), cfg.video_dim))
            y = z @ world.text_map.T + cfg.text_noise * rng.normal(size=cfg.text_dim)
            desc_id = f"{vid}_d{c}"
            descs.append(DescriptionVector(desc_id, vid, span, y, f"clip {c} of {vid} (cluster {cluster})"))
            world.clip_clusters[desc_id] = cluster
        tracks[vid] = FeatureTrack(vid, cfg.video_dim, cfg.fps, duration, times, vectors)
        made += n_clips
    return tracks, descs


def _long_video(world, rng, name):
    cfg = world.config
    base = world.cluster_centers[rng.integers(cfg.n_clusters)]
    if cfg.n_scenes <= cfg.latent_dim:
        # orthonormal directions put every pair of scenes exactly scene_separation apart
        q, _ = np.linalg.qr(rng.normal(size=(cfg.latent_dim, cfg.n_scenes)))
        scene_z = base + cfg.scene_separation / np.sqrt(2.0) * q.T
    else:
        scene_z = base + cfg.scene_separation * rng.normal(size=(cfg.n_scenes, cfg.latent_dim))
    order = [s for _ in range(cfg.blocks_per_scene) for s in range(cfg.n_scenes)]
    duration = len(order) * cfg.scene_block_s
    n_frames = int(round(duration * cfg.fps))
    times = (np.arange(n_frames) + 0.5) / cfg.fps
    block = np.minimum((times // cfg.scene_block_s).astype(int), len(order) - 1)
    labels = np.array(order)[block]
    vectors = scene_z[labels] @ world.video_map.T + cfg.frame_noise * rng.normal(size=(n_frames, cfg.video_dim))
    track = FeatureTrack(name, cfg.video_dim, cfg.fps, duration, times, vectors)

    # each scene has a highlight moment; annotators pick a clip around some of them
    highlights = [rng.uniform(b * cfg.scene_block_s, (b + 1) * cfg.scene_block_s - cfg.clip_s)
                  for b in range(cfg.n_scenes)]
    budget = max(1, int(np.floor(0.15 * duration / cfg.clip_s + 1e-9)))
    refs = []
    for a in range(cfg.n_annotators):
        picks = rng.permutation(cfg.n_scenes)[:min(budget, cfg.n_scenes)]
        intervals = []
        for s in sorted(picks.tolist()):
            start = highlights[s] + cfg.annotator_jitter_s * rng.normal()
            intervals.append((start, start + cfg.clip_s))
        refs.append((f"user{a:02d}", clip_intervals(intervals, duration)))
    return track, ReferenceSummarySet(name, cfg.fps, duration, refs), labels


def make_synthetic_world(config: SynthConfig | None = None) -> SyntheticWorld:
    cfg = config or SynthConfig()
    rng = np.random.default_rng(cfg.seed)
    centers = cfg.cluster_spread * rng.normal(size=(cfg.n_clusters, cfg.latent_dim))
    video_map = cfg.feature_scale * rng.normal(size=(cfg.video_dim, cfg.latent_dim)) / np.sqrt(cfg.latent_dim)
    text_map = cfg.feature_scale * rng.normal(size=(cfg.text_dim, cfg.latent_dim)) / np.sqrt(cfg.latent_dim)
    world = SyntheticWorld(cfg, centers, video_map, text_map)
    world.train_tracks, world.train_descriptions = _clip_videos(world, rng, cfg.n_train, "train")
    if cfg.n_heldout:
        world.heldout_tracks, world.heldout_descriptions = _clip_videos(world, rng, cfg.n_heldout, "heldout")
    for v in range(cfg.n_videos):
        name = f"video{v:02d}"
        track, refs, labels = _long_video(world, rng, name)
        world.videos[name] = track
        world.references[name] = refs
        world.scene_labels[name] = labels
    return world
