"""Joint training of the video and text heads with a contrastive loss.

Positive pairs (a segment and its own description) are pulled together;
negative pairs (the same segment with a description drawn from another
video) are pushed apart until their squared distance exceeds the margin.
The margin is fixed before training to the largest positive-pair distance
under the freshly initialised heads.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .embedding import JointModel, init_model, mean_pool
from .feature_io import ModelFile
from .segmenter import sample_window, samples_per_window

logger = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainingPair:
    frames: np.ndarray
    y: np.ndarray
    label: int = 1
    video_id: str = ""

    def __post_init__(self):
        self.frames = np.atleast_2d(np.asarray(self.frames, dtype=np.float64))
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


@dataclass
class TrainConfig:
    margin: float | None = None          # None derives it from the initial positives
    negatives_per_positive: int = 20
    learning_rate: float = 2e-4
    epochs: int = 4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden: int = 1000
    embed_dim: int = 300
    max_steps: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.margin is not None and not self.margin > 0:
            raise ValueError("margin must be positive")
        if self.negatives_per_positive < 1:
            raise ValueError("negatives_per_positive must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.eps <= 0:
            raise ValueError("Adam betas must lie in [0, 1) and eps must be positive")
        if self.hidden < 1 or self.embed_dim < 1:
            raise ValueError("layer sizes must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, model: JointModel) -> "AdamState":
        tensors = model.named_tensors()
        return cls({k: np.zeros_like(a) for k, a in tensors.items()},
                   {k: np.zeros_like(a) for k, a in tensors.items()})


@dataclass
class TrainLog:
    alpha: float
    records: list[dict] = field(default_factory=list)   # one per update step
    epoch_losses: list[float] = field(default_factory=list)


# --------------------------------------------------------------------------
# loss

def contrastive_loss(x, y, t: int, alpha: float) -> float:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    diff = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    d = float(diff @ diff)
    if t == 1:
        return d
    return max(0.0, alpha - d)


def derive_margin(pairs, model: JointModel) -> float:
    """Largest positive-pair distance under ``model``."""
    best = None
    for pair in pairs:
        if pair.label != 1:
            continue
        x = mean_pool(model.video.forward(pair.frames))
        diff = x - model.text.forward(pair.y)
        d = float(diff @ diff)
        best = d if best is None else max(best, d)
    if best is None:
        raise ValueError("derive_margin needs at least one positive pair")
    return best


# --------------------------------------------------------------------------
# gradients

def _head_backward(head, inputs, z1, z2, grad_out):
    """Backprop ``grad_out`` (dL/dz2, one row per input) through a two-layer tanh head."""
    da2 = grad_out * (1.0 - z2 * z2)
    dz1 = da2 @ head.W2.T
    da1 = dz1 * (1.0 - z1 * z1)
    return {
        "W1": inputs.T @ da1,
        "b1": da1.sum(axis=0),
        "W2": z1.T @ da2,
        "b2": da2.sum(axis=0),
    }


def segment_gradients(frames, ys, labels, model: JointModel, alpha: float):
    """Summed loss and gradients over pairs that share one video segment.

    ``ys`` holds one description per row and ``labels`` the matching 0/1
    flags. Returns ``(total_loss, per_pair_losses, grads)`` where ``grads``
    maps every tensor name of ``model`` to its gradient.
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    ys = np.atleast_2d(np.asarray(ys, dtype=np.float64))
    labels = np.asarray(labels).reshape(-1)
    m = frames.shape[0]

    v1, v2 = model.video.activations(frames)
    x = mean_pool(v2)
    t1, t2 = model.text.activations(ys)

    diff = x[None, :] - t2
    d = np.einsum("ij,ij->i", diff, diff)
    pos = labels == 1
    active = ~pos & (d < alpha)
    losses = np.where(pos, d, np.where(active, alpha - d, 0.0))

    # dL/dd per pair: 1 for positives, -1 for active negatives, 0 otherwise
    dl_dd = pos.astype(np.float64) - active.astype(np.float64)
    g_pair = 2.0 * dl_dd[:, None] * diff          # dL/dx for each pair; dL/dy is its negative
    g_x = g_pair.sum(axis=0)

    vg = _head_backward(model.video, frames, v1, v2, np.broadcast_to(g_x / m, v2.shape))
    tg = _head_backward(model.text, ys, t1, t2, -g_pair)
    grads = {f"video.{k}": g for k, g in vg.items()}
    grads.update({f"text.{k}": g for k, g in tg.items()})
    return float(losses.sum()), losses, grads


def loss_gradients(pair: TrainingPair, model: JointModel, alpha: float):
    """Loss and exact gradients for a single pair."""
    loss, _, grads = segment_gradients(pair.frames, pair.y[None, :], [pair.label], model, alpha)
    return loss, grads


def batch_gradients(pairs, model: JointModel, alpha: float):
    """Sum of ``loss_gradients`` over ``pairs`` in the given order."""
    total = 0.0
    acc = {k: np.zeros_like(a) for k, a in model.named_tensors().items()}
    for pair in pairs:
        loss, grads = loss_gradients(pair, model, alpha)
        total += loss
        for k in acc:
            acc[k] += grads[k]
    return total, acc


def pair_loss(pair: TrainingPair, model: JointModel, alpha: float) -> float:
    x = mean_pool(model.video.forward(pair.frames))
    return contrastive_loss(x, model.text.forward(pair.y), pair.label, alpha)


# --------------------------------------------------------------------------
# optimiser

def adam_update(model: JointModel, grads, state: AdamState, config: TrainConfig) -> None:
    """One in-place Adam step on every tensor of ``model``."""
    state.step += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    lr = config.learning_rate
    for name, param in model.named_tensors().items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        param -= lr * (m / c1) / (np.sqrt(v / c2) + config.eps)


# --------------------------------------------------------------------------
# training loop

def train(positives, config: TrainConfig, model: JointModel | None = None):
    """Train both heads on positive pairs, sampling negatives from other videos.

    Each step takes one positive pair plus ``negatives_per_positive``
    descriptions drawn uniformly (with replacement) from pairs of other
    videos, sums the loss and gradients over those pairs, and applies one
    Adam update. Returns ``(ModelFile, TrainLog)``.
    """
    positives = list(positives)
    if not positives:
        raise ValueError("no positive pairs")
    video_ids = np.array([p.video_id for p in positives])
    if len(set(video_ids.tolist())) < 2:
        raise ValueError("training needs pairs from at least two distinct videos")
    d_video = positives[0].frames.shape[1]
    d_text = positives[0].y.shape[0]

    init_seed, loop_seed = np.random.SeedSequence(config.seed).spawn(2)
    if model is None:
        model = init_model(d_video, d_text, config.hidden, config.embed_dim, init_seed)
    else:
        model = model.copy()

    if config.margin is None:
        alpha = derive_margin(positives, model)
        if not alpha > 0:
            raise TrainingError(f"derived margin is degenerate (alpha={alpha!r})")
    else:
        alpha = float(config.margin)
    logger.info("margin alpha = %.6g", alpha)

    all_ys = np.stack([p.y for p in positives])
    others = {vid: np.flatnonzero(video_ids != vid) for vid in set(video_ids.tolist())}

    rng = np.random.default_rng(loop_seed)
    state = AdamState.zeros_like(model)
    log = TrainLog(alpha)
    labels = np.zeros(1 + config.negatives_per_positive, dtype=np.int64)
    labels[0] = 1
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(positives))
        epoch_loss = []
        for i in order:
            pair = positives[i]
            pool = others[pair.video_id]
            neg = pool[rng.integers(0, len(pool), size=config.negatives_per_positive)]
            ys = np.concatenate([pair.y[None, :], all_ys[neg]])
            loss, _, grads = segment_gradients(pair.frames, ys, labels, model, alpha)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingError(f"non-finite loss or gradient at epoch {epoch}, step {step} (loss={loss!r})")
            adam_update(model, grads, state, config)
            step += 1
            epoch_loss.append(loss)
            log.records.append({"epoch": epoch, "step": step, "loss": loss, "alpha": alpha})
            if config.max_steps is not None and step >= config.max_steps:
                break
        log.epoch_losses.append(float(np.mean(epoch_loss)))
        logger.info("epoch %d: mean loss %.6g over %d steps", epoch, log.epoch_losses[-1], len(epoch_loss))
        if config.max_steps is not None and step >= config.max_steps:
            break

    metadata = {
        "video_dim": d_video, "text_dim": d_text, "hidden": config.hidden,
        "embed_dim": config.embed_dim, "alpha": alpha, "steps": step,
        "config": asdict(config),
    }
    return ModelFile(model, metadata), log


def pairs_from_descriptions(tracks, descriptions, window_s=5.0, sample_fps=1.0):
    """Build positive pairs by resampling each description's span of its track.

    ``tracks`` maps video id to :class:`FeatureTrack`. Every span is sampled
    at ``window_s * sample_fps`` instants, the same count a summarised
    segment has.
    """
    m = samples_per_window(window_s, sample_fps)
    pairs = []
    for desc in descriptions:
        try:
            track = tracks[desc.video_id]
        except KeyError:
            raise ValueError(f"description {desc.desc_id!r} refers to unknown video {desc.video_id!r}") from None
        start, end = desc.span
        end = min(end, track.duration_s)
        if not start < end:
            raise ValueError(f"description {desc.desc_id!r} span lies outside its video")
        _, frames = sample_window(track, start, end, m)
        pairs.append(TrainingPair(frames, desc.y, 1, desc.video_id))
    return pairs


# --------------------------------------------------------------------------
# finite-difference check

def numeric_gradients(pair: TrainingPair, model: JointModel, alpha: float, step: float = 1e-3):
    """Central-difference gradients of ``pair_loss`` for every tensor."""
    out = {}
    work = model.copy()
    for name, param in work.named_tensors().items():
        g = np.zeros_like(param)
        flat, gflat = param.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = pair_loss(pair, work, alpha)
            flat[i] = orig - step
            down = pair_loss(pair, work, alpha)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * step)
        out[name] = g
    return out


def relative_error(analytic, numeric, floor=1e-12) -> float:
    """Largest element discrepancy relative to the tensor's largest gradient entry.

    Normalising by the tensor scale rather than element by element keeps
    near-zero entries, where central differences carry their O(step**2)
    truncation error, from dominating the figure.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0), floor)
    return float(np.abs(a - n).max(initial=0.0) / scale)


def gradient_check(seed=0, dims=(16, 8, 4), text_dim=None, frames=3, tolerance=1e-4, step=1e-3):
    """Compare analytic and central-difference gradients on a random toy pair.

    Builds random heads and one random pair (positive or negative, chosen
    by the seed; a negative gets a margin well above its distance so the
    hinge stays active). Returns a report dict with the max relative error
    per tensor and an overall ``passed`` flag.
    """
    d_in, hidden, d_out = dims
    text_dim = d_in if text_dim is None else text_dim
    rng = np.random.default_rng(seed)
    model = init_model(d_in, text_dim, hidden, d_out, rng.integers(2**32))
    # non-zero biases so their gradients are exercised away from the symmetric point
    for arr in model.named_tensors().values():
        if arr.ndim == 1:
            arr[:] = rng.uniform(-0.5, 0.5, size=arr.shape)
    pair = TrainingPair(rng.normal(size=(frames, d_in)), rng.normal(size=text_dim), int(rng.integers(2)))
    x = mean_pool(model.video.forward(pair.frames))
    diff = x - model.text.forward(pair.y)
    d = float(diff @ diff)
    alpha = 2.0 * d + 1.0
    _, analytic = loss_gradients(pair, model, alpha)
    numeric = numeric_gradients(pair, model, alpha, step)
    errors = {k: relative_error(analytic[k], numeric[k]) for k in analytic}
    worst = max(errors.values())
    return {"seed": seed, "dims": list(dims), "text_dim": text_dim, "frames": frames,
            "label": pair.label, "max_relative_error": errors, "worst": worst,
            "tolerance": tolerance, "passed": worst <= tolerance}
