"""
Training the joint video/text embedding
=======================================

A small synthetic world stands in for a captioned clip corpus. Clips
come from two clusters; each clip's frame descriptors and its sentence
vector are different linear views of the same latent point.
"""

import numpy as np

from deepsum import SynthConfig, TrainConfig, make_synthetic_world, pairs_from_descriptions, train
from deepsum.embedding import text_forward, video_forward
from deepsum.feature_io import write_model

world = make_synthetic_world(SynthConfig(seed=0))
pairs = pairs_from_descriptions(world.train_tracks, world.train_descriptions)
print(len(pairs), "positive pairs from", len(world.train_tracks), "training videos")

# %%
# Heads are kept tiny so this runs in about a second. The margin is not
# given: it is read off the untrained heads as the largest positive distance.
config = TrainConfig(hidden=128, embed_dim=4, learning_rate=2e-3, epochs=10, max_steps=2000, seed=0)
model_file, log = train(pairs, config)
print(f"alpha = {log.alpha:.4f}")
for epoch, loss in enumerate(log.epoch_losses):
    print(f"epoch {epoch}: mean loss {loss:.5f}")

# %%
# Held-out check: embed each held-out sentence and look for its own clip
# among all held-out clips.
held = pairs_from_descriptions(world.heldout_tracks, world.heldout_descriptions)
model = model_file.model
V = np.stack([video_forward(p.frames, model.video) for p in held])
T = np.stack([text_forward(p.y, model.text) for p in held])
D = ((T[:, None] - V[None]) ** 2).sum(-1)
print("recall@1:", np.mean(D.argmin(axis=1) == np.arange(len(held))))

write_model("demo_model.bin", model_file)
