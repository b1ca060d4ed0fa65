import numpy as np
import pytest

from eegmatch.errors import InvalidInputError, TrainingDivergedError
from eegmatch.model import ArchitectureConfig, SpeechPart, init_params
from eegmatch.training import (
    EpochLog,
    SubjectResult,
    TrainConfig,
    evaluate_per_subject,
    evaluate_set,
    read_subject_results,
    train,
    write_subject_results,
    write_training_log,
)
from eegmatch.windows import RecordingData, assemble_dataset

L = 7040  # shortest length with one window per partition piece


def noise_recordings(n_subjects=2, length=L, eeg_ch=6, feat_dim=1, seed=0):
    rng = np.random.default_rng(seed)
    return [
        RecordingData(
            subject_id=f"s{i}",
            recording_id=f"s{i}_r0",
            eeg=rng.standard_normal((eeg_ch, length)),
            feature=rng.standard_normal((feat_dim, length)),
        )
        for i in range(n_subjects)
    ]


def small_arch(eeg_ch=6, feat_dim=1, dtype="float32"):
    variant = "no-conv" if feat_dim == 1 else "conv"
    return ArchitectureConfig(
        eeg_channels=eeg_ch,
        frames=320,
        eeg_conv_filters=4,
        eeg_conv_kernel=8,
        embed_dim=4,
        lstm_units=4,
        speech_conv_filters=4,
        parts=(SpeechPart(feat_dim, variant),),
        dtype=dtype,
    )


@pytest.fixture(scope="module")
def noise_sets():
    return assemble_dataset(noise_recordings(), seed=1)


class TestTrainLoop:
    def test_same_seed_bit_identical(self, noise_sets):
        cfg = TrainConfig(rng_seed=7, batch_size=32, max_epochs=2, patience=5)
        init = init_params(small_arch(), np.random.default_rng(2))
        a = train(init, noise_sets["train"], noise_sets["val"], cfg)
        b = train(init, noise_sets["train"], noise_sets["val"], cfg)
        for key in a.params.tensors:
            np.testing.assert_array_equal(a.params.tensors[key], b.params.tensors[key])
        assert [r.val_loss for r in a.log] == [r.val_loss for r in b.log]

    def test_different_seed_differs(self, noise_sets):
        init = init_params(small_arch(), np.random.default_rng(2))
        a = train(init, noise_sets["train"], noise_sets["val"],
                  TrainConfig(rng_seed=7, batch_size=32, max_epochs=2))
        b = train(init, noise_sets["train"], noise_sets["val"],
                  TrainConfig(rng_seed=8, batch_size=32, max_epochs=2))
        assert any(
            not np.array_equal(a.params.tensors[k], b.params.tensors[k])
            for k in a.params.tensors
        )

    def test_early_stop_returns_min_val_snapshot(self, noise_sets):
        cfg = TrainConfig(rng_seed=3, batch_size=32, max_epochs=6, patience=2,
                          learning_rate=5e-3)
        init = init_params(small_arch(), np.random.default_rng(4))
        result = train(init, noise_sets["train"], noise_sets["val"], cfg)
        val_losses = [r.val_loss for r in result.log]
        best_logged = min(val_losses)
        assert result.best_epoch == val_losses.index(best_logged) + 1
        recomputed, _, _ = evaluate_set(result.params, noise_sets["val"], 32)
        assert recomputed == pytest.approx(best_logged, abs=1e-7)

    def test_patience_stops_early(self, noise_sets):
        cfg = TrainConfig(rng_seed=5, batch_size=32, max_epochs=50, patience=2,
                          learning_rate=5e-3)
        init = init_params(small_arch(), np.random.default_rng(6))
        result = train(init, noise_sets["train"], noise_sets["val"], cfg)
        assert len(result.log) < 50

    def test_training_never_reads_test_partition(self):
        recs_a = noise_recordings(seed=10)
        recs_b = noise_recordings(seed=10)
        sets_a = assemble_dataset(recs_a, seed=2)
        sets_b = assemble_dataset(recs_b, seed=2)
        lo, hi = int(0.5 * L), int(0.6 * L)
        for rec in recs_b:  # poison the test region after windowing
            rec.eeg[:, lo:hi] = 1e6
            rec.feature[:, lo:hi] = -1e6
        cfg = TrainConfig(rng_seed=11, batch_size=32, max_epochs=2)
        init = init_params(small_arch(), np.random.default_rng(12))
        log_a = train(init, sets_a["train"], sets_a["val"], cfg).log
        log_b = train(init, sets_b["train"], sets_b["val"], cfg).log
        assert [r.train_loss for r in log_a] == [r.train_loss for r in log_b]
        assert [r.val_loss for r in log_a] == [r.val_loss for r in log_b]

    def test_nan_loss_aborts_with_diagnostic(self, noise_sets):
        init = init_params(small_arch(), np.random.default_rng(13))
        init.tensors["eeg_conv_w"][:] = 1e30
        init.tensors["eeg_dense_w"][:] = 1e30
        cfg = TrainConfig(rng_seed=14, batch_size=32, max_epochs=1)
        with pytest.raises(TrainingDivergedError, match="epoch 1"):
            with np.errstate(all="ignore"):
                train(init, noise_sets["train"], noise_sets["val"], cfg)

    def test_empty_partition_rejected(self, noise_sets):
        init = init_params(small_arch(), np.random.default_rng(15))
        empty = assemble_dataset(noise_recordings(seed=16), seed=3)["train"]
        empty.rec_index = empty.rec_index[:0]
        empty.start_frame = empty.start_frame[:0]
        with pytest.raises(InvalidInputError):
            train(init, empty, noise_sets["val"], TrainConfig(rng_seed=1))


class TestEvaluation:
    def test_accuracy_order_invariant(self, noise_sets):
        params = init_params(small_arch(), np.random.default_rng(20))
        _, acc, correct = evaluate_set(params, noise_sets["test"], batch_size=8)
        _, acc_large_batch, correct2 = evaluate_set(params, noise_sets["test"], batch_size=64)
        assert acc == acc_large_batch
        np.testing.assert_array_equal(correct, correct2)

    def test_degenerate_model_scores_exactly_half(self, noise_sets):
        params = init_params(small_arch(), np.random.default_rng(21))
        params.tensors["eeg_conv_w"][:] = 0.0
        params.tensors["eeg_conv_b"][:] = -1.0  # dead EEG path -> p = 0.5 everywhere
        _, acc, _ = evaluate_set(params, noise_sets["test"])
        assert acc == 0.5

    def test_per_subject_recount(self, noise_sets):
        from eegmatch.model import forward

        params = init_params(small_arch(), np.random.default_rng(22))
        results = evaluate_per_subject(params, noise_sets["test"], feature_name="noise")
        assert {r.subject_id for r in results} == {"s0", "s1"}
        ws = noise_sets["test"]
        for res in results:
            hits = 0
            n = 0
            for s in range(ws.n_samples):
                if ws.subject_of_sample(s) != res.subject_id:
                    continue
                eeg, a, b, label = ws.gather_samples(np.array([s]))
                p, _ = forward(params, eeg[0], a[0], b[0])
                hits += int((p >= 0.5) == (label[0] > 0.5))
                n += 1
            assert res.n_windows == n
            assert res.test_accuracy == pytest.approx(hits / n)

    def test_all_correct_gives_one(self):
        recs = noise_recordings(n_subjects=1, seed=30)
        # perfect coupling: EEG channels replicate the feature exactly
        recs[0].eeg = np.tile(recs[0].feature, (6, 1))
        sets = assemble_dataset(recs, seed=4)
        arch = small_arch()
        init = init_params(arch, np.random.default_rng(31))
        cfg = TrainConfig(rng_seed=32, batch_size=32, max_epochs=6, patience=6,
                          learning_rate=5e-3)
        result = train(init, sets["train"], sets["val"], cfg)
        results = evaluate_per_subject(result.params, sets["test"])
        assert results[0].test_accuracy == 1.0


class TestCsvIO:
    def test_training_log_roundtrip(self, tmp_path):
        log = [EpochLog(1, 0.7, 0.69, 0.5), EpochLog(2, 0.6, 0.58, 0.75)]
        write_training_log(tmp_path / "log.csv", log)
        text = (tmp_path / "log.csv").read_text().splitlines()
        assert text[0] == "epoch,train_loss,val_loss,val_acc"
        assert len(text) == 3

    def test_subject_results_roundtrip(self, tmp_path):
        rows = [
            SubjectResult("s0", 0.8125, 32, "mel"),
            SubjectResult("s1", 0.75, 32, "mel"),
        ]
        write_subject_results(tmp_path / "res.csv", rows)
        back = read_subject_results(tmp_path / "res.csv")
        assert back[0].subject_id == "s0"
        assert back[0].test_accuracy == pytest.approx(0.8125)
        assert back[1].n_windows == 32
        assert back[1].feature_name == "mel"
