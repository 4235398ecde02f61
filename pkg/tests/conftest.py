import numpy as np
import pytest

from deepsum.diagnostics import SynthConfig, make_synthetic_world
from deepsum.trainer import TrainConfig, pairs_from_descriptions, train

# training setup used wherever a trained model on the synthetic world is needed
SMALL_TRAIN = dict(hidden=128, embed_dim=4, learning_rate=2e-3, epochs=10, max_steps=2000,
                   negatives_per_positive=20, seed=0)


@pytest.fixture(scope="session")
def world():
    return make_synthetic_world(SynthConfig(seed=0, n_videos=3))


@pytest.fixture(scope="session")
def trained(world):
    pairs = pairs_from_descriptions(world.train_tracks, world.train_descriptions)
    model_file, log = train(pairs, TrainConfig(**SMALL_TRAIN))
    return model_file, log, pairs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# column layout of the standard comparison table
TABLE_COLUMNS = ["Uni.", "VGG", "Attn.", "Intr.", "Ours"]


def _cli(*argv):
    from deepsum.cli import run
    code = run([str(a) for a in argv])
    assert code == 0, f"deepsum {' '.join(map(str, argv))} exited {code}"


def run_pipeline(root, seed=0):
    """Drive every subcommand over a small synthetic world; returns the output paths."""
    root = root / "run"
    data = root / "data"
    _cli("synth", "--out", data, "--seed", seed, "--train-clips", 60, "--heldout-clips", 10, "--videos", 2)
    model = root / "model.bin"
    _cli("train", "--data", data / "train", "--out", model, "--seed", seed, "--hidden", 32, "--embed-dim", 4,
         "--lr", 2e-3, "--max-steps", 200, "--negatives", 5)
    scores = []
    externals = {"Attn.": [], "Intr.": []}
    for vid in ("video00", "video01"):
        track = data / "videos" / f"{vid}.track.jsonl"
        refs = data / "videos" / f"{vid}.refs.jsonl"
        manifest = root / vid / "segments.jsonl"
        _cli("segments", "--track", track, "--out", manifest)
        _cli("embed", "--model", model, "--manifest", manifest, "--track", track, "--out", root / vid / "points.jsonl")
        _cli("embed", "--raw", "--manifest", manifest, "--track", track, "--out", root / vid / "raw.jsonl")
        runs = [("Ours", "points.jsonl", "lazy"), ("VGG", "raw.jsonl", "lazy"), ("Uni.", "points.jsonl", "uniform")]
        for name, pts, alg in runs:
            summ = root / vid / f"summary_{name}.json"
            score = root / vid / f"score_{name}.json"
            _cli("summarize", "--points", root / vid / pts, "--manifest", manifest, "--out", summ, "--algorithm", alg)
            _cli("evaluate", "--summary", summ, "--refs", refs, "--out", score, "--name", name)
            scores.append(score)
        _cli("plot", "--points", root / vid / "points.jsonl", "--out", root / vid / "points.svg", "--seed", seed)
        for i, name in enumerate(externals):
            externals[name].append(f"{vid},{0.1 * (i + 1) + 0.05 * int(vid[-1]):.3f}")
    ext_args = []
    for name, rows in externals.items():
        path = root / f"external_{name.strip('.')}.csv"
        path.write_text("video_id,f\n" + "\n".join(rows) + "\n")
        ext_args += ["--external", f"{name}={path}"]
    _cli("report", "--scores", *scores, *ext_args, "--columns", ",".join(TABLE_COLUMNS),
         "--timelines-for", "Ours", "--out-dir", root / "report")
    _cli("gradcheck", "--seed", seed, "--trials", 2, "--out", root / "gradcheck.jsonl")
    return root


@pytest.fixture(scope="session")
def pipeline_run(tmp_path_factory):
    return run_pipeline(tmp_path_factory.mktemp("pipeline"))
