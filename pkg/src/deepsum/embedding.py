"""Projection heads mapping frame descriptors and sentence vectors into a
shared semantic space.

Each head is two fully-connected layers, each followed by tanh. The video
head runs on every frame of a segment and mean-pools the outputs; the text
head runs on a single description vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VIDEO_DIM = 4096
TEXT_DIM = 4800
HIDDEN_DIM = 1000
EMBED_DIM = 300


@dataclass
class ProjectionHead:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        self.W1 = np.asarray(self.W1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.W2 = np.asarray(self.W2, dtype=np.float64)
        self.b2 = np.asarray(self.b2, dtype=np.float64)
        if self.W1.ndim != 2 or self.W2.ndim != 2:
            raise ValueError("weight matrices must be 2-D")
        d_in, h = self.W1.shape
        if self.b1.shape != (h,) or self.W2.shape[0] != h:
            raise ValueError(
                f"inconsistent hidden size: W1 {self.W1.shape}, b1 {self.b1.shape}, W2 {self.W2.shape}"
            )
        if self.b2.shape != (self.W2.shape[1],):
            raise ValueError(f"b2 shape {self.b2.shape} does not match W2 {self.W2.shape}")
        for name, arr in self.tensors().items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite values in {name}")

    @property
    def d_in(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden(self) -> int:
        return self.W1.shape[1]

    @property
    def d_out(self) -> int:
        return self.W2.shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def copy(self) -> "ProjectionHead":
        return ProjectionHead(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy())

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        """Apply both layers row-wise to an (n, d_in) array, or a single vector."""
        return self.activations(inputs)[1]

    def activations(self, inputs):
        x = np.asarray(inputs, dtype=np.float64)
        if x.shape[-1] != self.d_in:
            raise ValueError(f"input dimension {x.shape[-1]} != head input dimension {self.d_in}")
        z1 = np.tanh(x @ self.W1 + self.b1)
        z2 = np.tanh(z1 @ self.W2 + self.b2)
        return z1, z2


@dataclass
class JointModel:
    """The video and text heads trained together."""

    video: ProjectionHead
    text: ProjectionHead

    def __post_init__(self):
        if self.video.d_out != self.text.d_out:
            raise ValueError(
                f"heads disagree on embedding size: {self.video.d_out} vs {self.text.d_out}"
            )

    @property
    def embed_dim(self) -> int:
        return self.video.d_out

    def named_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for branch, head in (("video", self.video), ("text", self.text)):
            for name, arr in head.tensors().items():
                out[f"{branch}.{name}"] = arr
        return out

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "JointModel":
        heads = {}
        for branch in ("video", "text"):
            try:
                heads[branch] = ProjectionHead(*(tensors[f"{branch}.{n}"] for n in ("W1", "b1", "W2", "b2")))
            except KeyError as exc:
                raise ValueError(f"missing tensor {exc.args[0]}") from None
        return cls(**heads)

    def copy(self) -> "JointModel":
        return JointModel(self.video.copy(), self.text.copy())


def init_head(d_in: int, hidden: int, d_out: int, seed) -> ProjectionHead:
    """Glorot-uniform weights and zero biases, deterministic per seed."""
    for name, value in (("d_in", d_in), ("hidden", hidden), ("d_out", d_out)):
        if int(value) != value or value <= 0:
            raise ValueError(f"{name} must be a positive integer, got {value!r}")
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / (d_in + hidden))
    lim2 = np.sqrt(6.0 / (hidden + d_out))
    W1 = rng.uniform(-lim1, lim1, size=(d_in, hidden))
    W2 = rng.uniform(-lim2, lim2, size=(hidden, d_out))
    return ProjectionHead(W1, np.zeros(hidden), W2, np.zeros(d_out))


def init_model(video_dim=VIDEO_DIM, text_dim=TEXT_DIM, hidden=HIDDEN_DIM, embed_dim=EMBED_DIM, seed=0) -> JointModel:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    video_seed, text_seed = ss.spawn(2)
    return JointModel(
        init_head(video_dim, hidden, embed_dim, video_seed),
        init_head(text_dim, hidden, embed_dim, text_seed),
    )


def mean_pool(rows: np.ndarray) -> np.ndarray:
    # sorting each column first makes the sum independent of frame order, bit for bit
    rows = np.asarray(rows, dtype=np.float64)
    return np.sort(rows, axis=0).sum(axis=0) / rows.shape[0]


def _frames_of(segment):
    return np.atleast_2d(getattr(segment, "frames", segment))


def video_forward(segment, head: ProjectionHead) -> np.ndarray:
    """Embed a segment: per-frame forward pass followed by mean pooling.

    ``segment`` is either a :class:`~deepsum.segmenter.Segment` or an
    ``(M, d_in)`` array of frame descriptors.
    """
    frames = _frames_of(segment)
    if frames.shape[0] == 0:
        raise ValueError("segment has no frames")
    return mean_pool(head.forward(frames))


def text_forward(description, head: ProjectionHead) -> np.ndarray:
    y = np.asarray(getattr(description, "y", description), dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("description must be a single vector")
    return head.forward(y)


def embed_segments(segments, head: ProjectionHead) -> np.ndarray:
    """Stack ``video_forward`` over many segments into an (L, d_out) array."""
    if not segments:
        return np.zeros((0, head.d_out))
    return np.stack([video_forward(s, head) for s in segments])


def distance(x, y) -> float:
    """Squared Euclidean distance."""
    diff = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return float(diff @ diff)
