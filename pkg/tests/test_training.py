import math
import os

import numpy as np
import pytest

from ambispeech import autodiff as ad
from ambispeech import training as tr
from ambispeech.autodiff import Tensor
from ambispeech.corpus import Example, INTENT_LABELS
from ambispeech.errors import ConfigError, LabelError
from ambispeech.features import end_align
from ambispeech.models import IntentClassifier, ModelVariant


def make_examples(n, rng, audio_dim=5, speakers=("alba", "brim")):
    out = []
    for i in range(n):
        audio = end_align(rng.normal(size=(int(rng.integers(3, 7)), audio_dim)), 6)
        out.append(Example(
            id=f"ex{i:03d}",
            audio=audio,
            text=None,
            label=int(rng.integers(0, 7)),
            speaker=speakers[i % len(speakers)],
            transcript=f"script{i // 2}",
        ))
    return out


def tiny_model(seed=0, audio_dim=5):
    v = ModelVariant("audio_bre", "none")
    return IntentClassifier(v, audio_dim=audio_dim, hidden=4, head_hidden=8, seed=seed)


# ------------------------------------------------------------- cross entropy


def test_cross_entropy_of_certainty_is_zero():
    p = np.full(7, 1e-12)
    p[3] = 1.0
    assert tr.cross_entropy(Tensor(p), 3).item() == 0.0


def test_cross_entropy_of_uniform_is_log7():
    loss = tr.cross_entropy(Tensor(np.full(7, 1.0 / 7.0)), 2)
    assert abs(loss.item() - math.log(7.0)) < 1e-12


def test_cross_entropy_batched_is_mean():
    probs = np.stack([np.full(7, 1.0 / 7.0), np.eye(7)[4]])
    loss = tr.cross_entropy(Tensor(probs), np.array([0, 4]))
    assert abs(loss.item() - math.log(7.0) / 2.0) < 1e-12


def test_cross_entropy_floor_keeps_loss_finite():
    p = np.zeros(7)
    p[0] = 1.0
    loss = tr.cross_entropy(Tensor(p), 1).item()
    assert abs(loss - (-math.log(1e-12))) < 1e-9


def test_cross_entropy_rejects_bad_labels():
    p = Tensor(np.full(7, 1.0 / 7.0))
    for bad in (7, -1, np.array([0.5])):
        with pytest.raises(LabelError):
            tr.cross_entropy(p, bad)


def test_softmax_cross_entropy_gradient_closed_form():
    rng = np.random.default_rng(1)
    z = Tensor(rng.normal(size=(3, 7)), requires_grad=True)
    labels = np.array([2, 0, 6])
    probs = ad.masked_softmax(z, np.ones((3, 7)))
    tr.cross_entropy(probs, labels).backward()
    onehot = np.eye(7)[labels]
    np.testing.assert_allclose(z.grad, (probs.data - onehot) / 3.0, atol=1e-12)


# --------------------------------------------------------------------- Adam


def test_adam_first_step_closed_form():
    p = Tensor(np.array([1.0, -2.0, 0.5]), requires_grad=True)
    g = np.array([0.3, -4.0, 1e-6])
    p.grad = g.copy()
    opt = tr.Adam([p], lr=0.01)
    opt.step()
    expected = np.array([1.0, -2.0, 0.5]) - 0.01 * g / (np.abs(g) + opt.eps)
    np.testing.assert_allclose(p.data, expected, atol=1e-15)


def test_adam_skips_missing_grads():
    p = Tensor(np.ones(3), requires_grad=True)
    opt = tr.Adam([p], lr=0.1)
    opt.step()
    np.testing.assert_array_equal(p.data, np.ones(3))
    opt.zero_grad()
    assert p.grad is None


def test_adam_single_step_reduces_loss_across_inits():
    rng = np.random.default_rng(2)
    examples = make_examples(8, rng)
    arrs = tr._Arrays(examples)
    idx = np.arange(8)
    for seed in range(20):
        m = tiny_model(seed=seed)
        opt = tr.Adam(m.parameters(), lr=1e-4)
        probs, _ = arrs.forward(m, idx)
        loss0 = tr.cross_entropy(probs, arrs.labels)
        opt.zero_grad()
        loss0.backward()
        opt.step()
        probs, _ = arrs.forward(m, idx)
        loss1 = tr.cross_entropy(probs, arrs.labels)
        assert loss1.item() < loss0.item(), seed


# --------------------------------------------------------------- selection


def rec(epoch, acc, f1):
    return tr.EpochRecord(epoch, acc, f1, None, 0.0)


def test_select_checkpoint_hand_example():
    accs = [0.80, 0.90, 0.85, 0.92, 0.91, 0.89, 0.88]
    f1s = [0.70, 0.60, 0.72, 0.71, 0.73, 0.69, 0.68]
    records = [rec(i + 1, a, f) for i, (a, f) in enumerate(zip(accs, f1s))]
    assert tr.select_checkpoint(records).epoch == 4


def test_select_checkpoint_few_epochs_is_argmax():
    records = [rec(1, 0.5, 0.9), rec(2, 0.7, 0.1), rec(3, 0.6, 0.5)]
    assert tr.select_checkpoint(records).epoch == 2


def test_select_checkpoint_disjoint_pools_fall_back_to_accuracy():
    # ranks perfectly inverted, so the two top-5 sets cannot overlap
    records = [rec(i + 1, 1.0 - i * 0.05, i * 0.05) for i in range(10)]
    assert tr.select_checkpoint(records).epoch == 1


def test_select_checkpoint_breaks_ties_toward_later_epoch():
    records = [rec(1, 0.9, 0.8), rec(2, 0.9, 0.8), rec(3, 0.1, 0.1)]
    assert tr.select_checkpoint(records).epoch == 2


def test_select_checkpoint_empty_rejected():
    with pytest.raises(ConfigError):
        tr.select_checkpoint([])


def monotone_transforms():
    return [
        lambda x: 2.0 * x + 3.0,
        lambda x: math.exp(x),
        lambda x: x**3,
        lambda x: 1.0 / (1.0 + math.exp(-x)),
    ]


def test_selection_is_invariant_under_monotone_rescaling():
    rng = np.random.default_rng(3)
    for trial in range(100):
        n = int(rng.integers(6, 30))
        # distinct values in both metrics keep every ranking unambiguous
        accs = rng.permutation(n) / n + rng.uniform(0, 1e-4)
        f1s = rng.permutation(n) / n + rng.uniform(0, 1e-4)
        records = [rec(i + 1, float(a), float(f)) for i, (a, f) in enumerate(zip(accs, f1s))]
        baseline = tr.select_checkpoint(records).epoch
        for g in monotone_transforms():
            for h in monotone_transforms():
                warped = [rec(r.epoch, g(r.accuracy), h(r.macro_f1)) for r in records]
                assert tr.select_checkpoint(warped).epoch == baseline, trial


# ------------------------------------------------------------------ metrics


def test_metrics_hand_example():
    s, yn = 0, 1
    report = tr.report_from_predictions([s, s, yn, yn], [s, yn, yn, yn])
    assert report.accuracy == 0.75
    assert abs(report.macro_f1 - (2.0 / 3.0 + 0.8) / 7.0) < 1e-12
    assert report.precision[s] == 1.0
    assert report.recall[s] == 0.5
    assert abs(report.precision[yn] - 2.0 / 3.0) < 1e-12
    assert report.recall[yn] == 1.0
    assert report.confusion[s, s] == 1
    assert report.confusion[s, yn] == 1
    assert report.confusion[yn, yn] == 2
    assert report.n_records == 4


def test_single_class_perfect_macro_f1_is_one_seventh():
    report = tr.report_from_predictions([0] * 5, [0] * 5)
    assert report.accuracy == 1.0
    assert abs(report.macro_f1 - 1.0 / 7.0) < 1e-12


def test_confusion_marginals_match_counts():
    rng = np.random.default_rng(4)
    truth = rng.integers(0, 7, size=200)
    pred = rng.integers(0, 7, size=200)
    m = tr.confusion_matrix(truth, pred)
    np.testing.assert_array_equal(m.sum(axis=1), np.bincount(truth, minlength=7))
    np.testing.assert_array_equal(m.sum(axis=0), np.bincount(pred, minlength=7))
    assert m.sum() == 200


def test_absent_class_scores_zero_not_nan():
    p, r, f1 = tr.precision_recall_f1(np.zeros((7, 7), dtype=np.int64))
    for arr in (p, r, f1):
        assert np.all(arr == 0.0)
        assert np.all(np.isfinite(arr))


def test_format_report_structure():
    report = tr.report_from_predictions([0, 1, 2], [0, 1, 1])
    text = tr.format_report(report)
    lines = text.splitlines()
    assert lines[0] == "accuracy: 0.666667"
    assert lines[4] == "class,precision,recall,f1"
    class_rows = lines[5:12]
    assert [row.split(",")[0] for row in class_rows] == list(INTENT_LABELS)
    assert lines[13] == "confusion," + ",".join(INTENT_LABELS)
    assert len(lines) == 21


# ------------------------------------------------------------------- splits


def test_split_is_deterministic_and_partitions():
    rng = np.random.default_rng(5)
    examples = make_examples(40, rng)
    a_train, a_test = tr.split_records(examples, 0.8, seed=11)
    b_train, b_test = tr.split_records(examples, 0.8, seed=11)
    assert [e.id for e in a_train] == [e.id for e in b_train]
    assert [e.id for e in a_test] == [e.id for e in b_test]
    ids = {e.id for e in a_train} | {e.id for e in a_test}
    assert ids == {e.id for e in examples}
    assert not ({e.id for e in a_train} & {e.id for e in a_test})


def test_split_ratio_holds_per_speaker():
    rng = np.random.default_rng(6)
    examples = make_examples(40, rng)
    train, _ = tr.split_records(examples, 0.75, seed=1)
    for speaker in ("alba", "brim"):
        n_train = sum(1 for e in train if e.speaker == speaker)
        assert n_train == int(20 * 0.75)


def test_split_seed_changes_assignment():
    rng = np.random.default_rng(7)
    examples = make_examples(40, rng)
    a_train, _ = tr.split_records(examples, 0.8, seed=1)
    b_train, _ = tr.split_records(examples, 0.8, seed=2)
    assert {e.id for e in a_train} != {e.id for e in b_train}


def test_grouped_split_keeps_transcripts_together():
    rng = np.random.default_rng(8)
    examples = make_examples(40, rng, speakers=("solo",))
    train, test = tr.split_records(examples, 0.7, seed=3, group_by_script=True)
    assert not ({e.transcript for e in train} & {e.transcript for e in test})
    assert train and test


def test_split_validation():
    rng = np.random.default_rng(9)
    examples = make_examples(4, rng)
    with pytest.raises(ConfigError):
        tr.split_records(examples, 1.0, seed=0)
    with pytest.raises(ConfigError):
        tr.split_records(examples[:2], 0.4, seed=0)  # cut of 0 empties train


def test_hash_str_is_stable():
    assert tr.hash_str("") == 2166136261
    assert tr.hash_str("a") == 0xE40C292C
    assert tr.hash_str("alba") == tr.hash_str("alba")


# ----------------------------------------------------------------- training


def test_config_validation():
    with pytest.raises(ConfigError):
        tr.TrainConfig(max_epochs=0)
    with pytest.raises(ConfigError):
        tr.TrainConfig(split_ratio=1.5)
    with pytest.raises(ConfigError):
        tr.TrainConfig(batch_size=0)
    with pytest.raises(ConfigError):
        tr.TrainConfig(learning_rate=0.0)


def test_same_seed_runs_are_identical():
    rng = np.random.default_rng(10)
    examples = make_examples(12, rng)
    cfg = tr.TrainConfig(max_epochs=3, batch_size=4, seed=5, split_ratio=0.75)
    logs = []
    for _ in range(2):
        records = tr.train(tiny_model(seed=1), examples, cfg, snapshot=False)
        logs.append(tr.log_lines(records))
    assert logs[0] == logs[1]
    assert len(logs[0]) == 4


def test_first_batch_loss_is_initial_cross_entropy():
    rng = np.random.default_rng(11)
    examples = make_examples(8, rng)
    cfg = tr.TrainConfig(max_epochs=1, batch_size=8, seed=6, split_ratio=0.5)
    seen = []
    tr.train(tiny_model(seed=2), examples, cfg, snapshot=False,
             batch_hook=lambda epoch, b, ids, loss: seen.append((epoch, b, ids, loss)))
    epoch, b, ids, loss = seen[0]
    assert (epoch, b) == (1, 0)
    by_id = {e.id: e for e in examples}
    batch = [by_id[i] for i in ids]
    twin = tiny_model(seed=2)
    probs, _ = tr._Arrays(batch).forward(twin, np.arange(len(batch)))
    want = tr.cross_entropy(probs, np.array([e.label for e in batch])).item()
    assert abs(loss - want) < 1e-12


def test_eval_records_bypass_the_split():
    rng = np.random.default_rng(12)
    examples = make_examples(6, rng)
    cfg = tr.TrainConfig(max_epochs=1, batch_size=6, seed=0)
    counted = []
    tr.train(tiny_model(), examples, cfg, snapshot=False, eval_records=examples,
             batch_hook=lambda e, b, ids, loss: counted.extend(ids))
    # the whole dataset trains when an eval set is supplied explicitly
    assert sorted(counted) == sorted(e.id for e in examples)


def test_checkpoint_modes(tmp_path):
    rng = np.random.default_rng(13)
    examples = make_examples(8, rng)
    cfg = tr.TrainConfig(max_epochs=2, batch_size=4, seed=7, split_ratio=0.5)

    records = tr.train(tiny_model(seed=3), examples, cfg, checkpoint_dir=str(tmp_path))
    assert [os.path.basename(r.checkpoint) for r in records] == [
        "epoch_001.ambi", "epoch_002.ambi"]
    assert all(os.path.exists(r.checkpoint) for r in records)

    m = tiny_model(seed=3)
    records = tr.train(m, examples, cfg)
    assert isinstance(records[0].checkpoint, dict)
    # snapshots must be frozen copies, not views of the live parameters
    before = records[0].checkpoint["model.audio_bre.head.W1"].copy()
    for p in m.parameters():
        p.data += 1.0
    np.testing.assert_array_equal(records[0].checkpoint["model.audio_bre.head.W1"], before)

    records = tr.train(tiny_model(seed=3), examples, cfg, snapshot=False)
    assert all(r.checkpoint is None for r in records)


def test_selected_snapshot_restores_reported_accuracy():
    rng = np.random.default_rng(14)
    examples = make_examples(16, rng)
    cfg = tr.TrainConfig(max_epochs=4, batch_size=4, seed=8, split_ratio=0.5)
    m = tiny_model(seed=4)
    records = tr.train(m, examples, cfg)
    best = tr.select_checkpoint(records)
    _, test_set = tr.split_records(examples, cfg.split_ratio, cfg.seed)
    m.load_state(best.checkpoint)
    assert tr.evaluate(m, test_set).accuracy == best.accuracy


def test_evaluate_rejects_empty():
    with pytest.raises(ConfigError):
        tr.evaluate(tiny_model(), [])


def test_log_lines_format():
    records = [tr.EpochRecord(1, 0.75, 0.2095238, None, 1.2345678),
               tr.EpochRecord(2, 1.0, 1.0, None, 0.5)]
    assert tr.log_lines(records) == [
        "epoch,acc,f1,loss",
        "1,0.750000,0.209524,1.234568",
        "2,1.000000,1.000000,0.500000",
    ]
