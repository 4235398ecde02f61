import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deepsum.embedding import JointModel, ProjectionHead, init_model, mean_pool
from deepsum.feature_io import read_model, write_model
from deepsum.trainer import (
    AdamState, TrainConfig, TrainingError, TrainingPair, adam_update, batch_gradients, contrastive_loss,
    derive_margin, gradient_check, loss_gradients, numeric_gradients, relative_error, segment_gradients, train,
)


def toy_model(seed, d_in=5, d_text=6, h=4, d_out=3):
    rng = np.random.default_rng(seed)
    model = init_model(d_in, d_text, h, d_out, seed)
    for arr in model.named_tensors().values():
        if arr.ndim == 1:
            arr[:] = rng.uniform(-0.5, 0.5, size=arr.shape)
    return model


def toy_pairs(n_videos=4, per_video=3, d_in=5, d_text=6, m=2, seed=0):
    rng = np.random.default_rng(seed)
    return [TrainingPair(rng.normal(size=(m, d_in)), rng.normal(size=d_text), 1, f"v{v}")
            for v in range(n_videos) for _ in range(per_video)]


class TestContrastiveLoss:
    def test_positive_identical(self):
        assert contrastive_loss([0.3, -0.2], [0.3, -0.2], 1, 1.0) == 0.0

    def test_negative_beyond_margin(self):
        assert contrastive_loss([1.0, 0.0], [0.0, 1.0], 0, 1.5) == 0.0
        assert contrastive_loss([1.0, 0.0], [0.0, 1.0], 0, 2.0) == 0.0

    def test_negative_identical(self):
        assert contrastive_loss([0.1, 0.1], [0.1, 0.1], 0, 0.5) == 0.5

    def test_rejects_non_positive_margin(self):
        with pytest.raises(ValueError):
            contrastive_loss([0.0], [0.0], 0, 0.0)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.01, 10.0), st.floats(1e-9, 1e-3))
    def test_continuous_at_hinge(self, alpha, eps):
        # points at squared distance alpha -/+ eps
        below = contrastive_loss([np.sqrt(alpha - eps)], [0.0], 0, alpha)
        above = contrastive_loss([np.sqrt(alpha + eps)], [0.0], 0, alpha)
        assert 0 <= below <= eps * 1.0001 + 1e-12
        assert above == 0.0

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.lists(st.floats(-1, 1), min_size=3, max_size=3),
           st.integers(0, 1), st.floats(0.01, 5.0))
    def test_nonnegative_and_zero_iff(self, x, y, t, alpha):
        loss = contrastive_loss(x, y, t, alpha)
        d = float(np.sum((np.array(x) - np.array(y)) ** 2))
        assert loss >= 0
        assert (loss == 0) == ((t == 1 and d == 0) or (t == 0 and d >= alpha))


class TestDeriveMargin:
    def test_single_pair(self):
        model = toy_model(1)
        pair = toy_pairs(1, 1)[0]
        x = mean_pool(model.video.forward(pair.frames))
        delta = float(np.sum((x - model.text.forward(pair.y)) ** 2))
        assert derive_margin([pair], model) == delta

    def test_max_of_ten(self):
        model = toy_model(2)
        pairs = toy_pairs(10, 1, seed=3)
        brute = []
        for p in pairs:
            x = np.mean([model.video.forward(f) for f in p.frames], axis=0)
            y = model.text.forward(p.y)
            brute.append(sum((a - b) ** 2 for a, b in zip(x, y)))
        assert derive_margin(pairs, model) == pytest.approx(max(brute), rel=1e-13)

    def test_zero_heads_give_zero_and_training_rejects_it(self):
        z = lambda d_in: ProjectionHead(np.zeros((d_in, 4)), np.zeros(4), np.zeros((4, 3)), np.zeros(3))
        model = JointModel(z(5), z(6))
        pairs = toy_pairs()
        assert derive_margin(pairs, model) == 0.0
        with pytest.raises(TrainingError, match="degenerate"):
            train(pairs, TrainConfig(hidden=4, embed_dim=3, epochs=1), model=model)

    def test_empty(self):
        with pytest.raises(ValueError):
            derive_margin([], toy_model(0))


class TestGradients:
    def test_inactive_hinge_zero_gradients(self):
        model = toy_model(3)
        pair = TrainingPair(toy_pairs(1, 1)[0].frames, toy_pairs(1, 1)[0].y, 0)
        x = mean_pool(model.video.forward(pair.frames))
        d = float(np.sum((x - model.text.forward(pair.y)) ** 2))
        loss, grads = loss_gradients(pair, model, d * 0.5)
        assert loss == 0.0
        assert all(not g.any() for g in grads.values())

    @pytest.mark.parametrize("label", [1, 0])
    @pytest.mark.parametrize("seed", range(3))
    def test_matches_finite_differences(self, seed, label):
        model = toy_model(seed, d_in=5, d_text=5, h=4, d_out=3)
        rng = np.random.default_rng(100 + seed)
        pair = TrainingPair(rng.normal(size=(2, 5)), rng.normal(size=5), label)
        x = mean_pool(model.video.forward(pair.frames))
        alpha = 2 * float(np.sum((x - model.text.forward(pair.y)) ** 2)) + 1.0
        _, analytic = loss_gradients(pair, model, alpha)
        numeric = numeric_gradients(pair, model, alpha, 1e-3)
        for name in analytic:
            assert relative_error(analytic[name], numeric[name]) <= 1e-4, name

    def test_duplicated_pair_doubles_gradient(self):
        model = toy_model(4)
        pair = toy_pairs(1, 1)[0]
        loss1, g1 = batch_gradients([pair], model, 1.0)
        loss2, g2 = batch_gradients([pair, pair], model, 1.0)
        assert loss2 == 2 * loss1
        for k in g1:
            np.testing.assert_array_equal(g2[k], 2 * g1[k])

    def test_shared_segment_batch_equals_sum_of_pairs(self):
        model = toy_model(5)
        rng = np.random.default_rng(5)
        frames = rng.normal(size=(3, 5))
        ys = rng.normal(size=(4, 6))
        labels = [1, 0, 0, 0]
        x = mean_pool(model.video.forward(frames))
        alpha = float(np.max(np.sum((x - model.text.forward(ys)) ** 2, axis=1))) + 0.3
        total, _, grads = segment_gradients(frames, ys, labels, model, alpha)
        pairs = [TrainingPair(frames, y, t) for y, t in zip(ys, labels)]
        ref_total, ref = batch_gradients(pairs, model, alpha)
        assert total == pytest.approx(ref_total, rel=1e-13)
        for k in grads:
            np.testing.assert_allclose(grads[k], ref[k], rtol=1e-12, atol=1e-15)

    def test_gradient_check_report(self):
        rep = gradient_check(seed=3, dims=(6, 5, 2), frames=2)
        assert rep["passed"] and set(rep["max_relative_error"]) == {
            "video.W1", "video.b1", "video.W2", "video.b2", "text.W1", "text.b1", "text.W2", "text.b2"}

    def test_gradient_check_flags_wrong_tolerance(self):
        assert not gradient_check(seed=0, dims=(4, 3, 2), tolerance=1e-12)["passed"]


class TestAdam:
    def test_first_step_moves_by_lr(self):
        model = toy_model(0)
        before = {k: v.copy() for k, v in model.named_tensors().items()}
        grads = {k: np.full_like(v, 2.0) for k, v in before.items()}
        cfg = TrainConfig(learning_rate=0.01)
        adam_update(model, grads, AdamState.zeros_like(model), cfg)
        for k, v in model.named_tensors().items():
            # bias-corrected first step is lr * g / (|g| + eps)
            np.testing.assert_allclose(before[k] - v, 0.01 * 2.0 / (2.0 + 1e-8), rtol=1e-12)

    def test_zero_learning_rate_keeps_parameters(self):
        pairs = toy_pairs()
        cfg = TrainConfig(learning_rate=0.0, hidden=4, embed_dim=3, epochs=2, negatives_per_positive=3, seed=9)
        mf, _ = train(pairs, cfg)
        from deepsum.embedding import init_model as im
        init_seed, _ = np.random.SeedSequence(9).spawn(2)
        ref = im(5, 6, 4, 3, init_seed)
        for k, v in mf.model.named_tensors().items():
            assert np.array_equal(v, ref.named_tensors()[k])


class TestTrain:
    def test_deterministic_model_files(self, tmp_path):
        pairs = toy_pairs()
        cfg = TrainConfig(hidden=4, embed_dim=3, epochs=2, negatives_per_positive=5, learning_rate=1e-2, seed=3)
        a, log_a = train(pairs, cfg)
        b, log_b = train(pairs, cfg)
        write_model(tmp_path / "a.bin", a)
        write_model(tmp_path / "b.bin", b)
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
        assert log_a.records == log_b.records and log_a.epoch_losses == log_b.epoch_losses

    def test_needs_two_videos(self):
        with pytest.raises(ValueError, match="two distinct videos"):
            train(toy_pairs(n_videos=1), TrainConfig(hidden=4, embed_dim=3))

    def test_log_contents(self):
        pairs = toy_pairs()
        cfg = TrainConfig(hidden=4, embed_dim=3, epochs=3, negatives_per_positive=2, learning_rate=1e-2)
        mf, log = train(pairs, cfg)
        assert len(log.records) == 3 * len(pairs)
        assert len(log.epoch_losses) == 3
        assert all(r["alpha"] == log.alpha for r in log.records)
        assert mf.metadata["alpha"] == log.alpha and mf.metadata["steps"] == 3 * len(pairs)

    def test_max_steps(self):
        _, log = train(toy_pairs(), TrainConfig(hidden=4, embed_dim=3, epochs=50, max_steps=7))
        assert len(log.records) == 7

    def test_fixed_margin(self):
        _, log = train(toy_pairs(), TrainConfig(hidden=4, embed_dim=3, epochs=1, margin=0.25))
        assert log.alpha == 0.25

    def test_non_finite_loss_aborts(self, monkeypatch):
        import deepsum.trainer as tr
        orig = tr.segment_gradients

        def poisoned(*args):
            total, losses, grads = orig(*args)
            return float("nan"), losses, grads

        monkeypatch.setattr(tr, "segment_gradients", poisoned)
        with pytest.raises(TrainingError, match="non-finite"):
            tr.train(toy_pairs(), TrainConfig(hidden=4, embed_dim=3, epochs=1))

    def test_negatives_come_from_other_videos(self, monkeypatch):
        import deepsum.trainer as tr
        pairs = toy_pairs(n_videos=3, per_video=2)
        y_owner = {p.y.tobytes(): p.video_id for p in pairs}
        seen = []
        orig = tr.segment_gradients

        def spy(frames, ys, labels, model, alpha):
            owner = next(p.video_id for p in pairs if np.array_equal(p.frames, frames))
            seen.append((owner, [y_owner[y.tobytes()] for y in ys[1:]]))
            return orig(frames, ys, labels, model, alpha)

        monkeypatch.setattr(tr, "segment_gradients", spy)
        tr.train(pairs, TrainConfig(hidden=4, embed_dim=3, epochs=2, negatives_per_positive=6))
        assert seen and all(owner not in negs and len(negs) == 6 for owner, negs in seen)

    def test_trained_model_round_trips(self, tmp_path, trained):
        mf, _, _ = trained
        write_model(tmp_path / "m.bin", mf)
        back = read_model(tmp_path / "m.bin")
        assert back.metadata["embed_dim"] == 4
        np.testing.assert_allclose(back.model.video.W1, mf.model.video.W1, rtol=1e-7, atol=1e-8)

    def test_config_validation(self):
        for bad in (dict(margin=0.0), dict(negatives_per_positive=0), dict(learning_rate=-1.0),
                    dict(epochs=0), dict(beta1=1.0), dict(eps=0.0), dict(max_steps=0)):
            with pytest.raises(ValueError):
                TrainConfig(**bad)
