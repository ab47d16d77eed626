import json
import os
import subprocess
import sys

import numpy as np
import pytest

from ambispeech import cli
from ambispeech import features as ft


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert cli.main(["synth", "--out", str(root / "corpus"),
                     "--n-scripts", "6", "--seed", "1"]) == 0
    (root / "cfg.json").write_text(json.dumps({
        "features": {"n_mels": 8, "n_fft": 256, "hop": 128},
        "train": {"max_epochs": 3, "batch_size": 4, "split_ratio": 0.5},
        "model": {"hidden": 6, "head_hidden": 12},
    }), encoding="utf-8")
    return root


def manifest(corpus):
    return str(corpus / "corpus" / "manifest.tsv")


@pytest.fixture(scope="module")
def trained(corpus):
    out = corpus / "run"
    code = cli.main(["train", "--config", str(corpus / "cfg.json"),
                     "--manifest", manifest(corpus), "--cache-dir", str(corpus / "cache"),
                     "--out", str(out), "--variant", "mha_a", "--text-mode", "sparse",
                     "--seed", "3"])
    assert code == 0
    return out


# -------------------------------------------------------------------- synth


def test_synth_writes_corpus(corpus, capsys):
    assert cli.main(["synth", "--out", str(corpus / "again"),
                     "--n-scripts", "2", "--seed", "9"]) == 0
    assert "wrote 4 records" in capsys.readouterr().out
    assert (corpus / "again" / "manifest.tsv").exists()
    assert len(list((corpus / "again" / "wav").iterdir())) == 4


def test_synth_rejects_bad_types(corpus):
    assert cli.main(["synth", "--out", str(corpus / "nope"),
                     "--n-scripts", "2", "--types", "ynwh,zzz"]) == 2


# ---------------------------------------------------------------- featurize


def test_featurize_fills_then_reuses_cache(corpus, capsys):
    cache = str(corpus / "feat_cache")
    argv = ["featurize", "--manifest", manifest(corpus), "--cache-dir", cache]
    assert cli.main(argv) == 0
    assert "computed 12, reused 0" in capsys.readouterr().out
    assert len(os.listdir(cache)) == 12
    assert cli.main(argv) == 0
    assert "computed 0, reused 12" in capsys.readouterr().out


def test_featurize_reports_unreadable_wavs(corpus, capsys, tmp_path):
    bad = tmp_path / "corpus"
    assert cli.main(["synth", "--out", str(bad), "--n-scripts", "2", "--seed", "2"]) == 0
    wavs = sorted((bad / "wav").iterdir())
    wavs[0].write_bytes(b"not a wav file")
    code = cli.main(["featurize", "--manifest", str(bad / "manifest.tsv"),
                     "--cache-dir", str(tmp_path / "cache")])
    captured = capsys.readouterr()
    assert code == 1
    assert "featurized 3/4" in captured.out
    assert "FAILED syn0000a" in captured.err


def test_featurize_requires_cache_dir_and_manifest(corpus):
    assert cli.main(["featurize", "--manifest", manifest(corpus)]) == 2
    assert cli.main(["featurize", "--cache-dir", str(corpus / "c")]) == 2
    assert cli.main(["featurize", "--manifest", str(corpus / "absent.tsv"),
                     "--cache-dir", str(corpus / "c")]) == 1


def test_cache_dir_precedence(corpus, monkeypatch, tmp_path):
    env_cache, flag_cache = tmp_path / "env", tmp_path / "flag"
    monkeypatch.setenv(cli.CACHE_ENV, str(env_cache))
    assert cli.main(["featurize", "--manifest", manifest(corpus)]) == 0
    assert len(os.listdir(env_cache)) == 12
    assert cli.main(["featurize", "--manifest", manifest(corpus),
                     "--cache-dir", str(flag_cache)]) == 0
    assert len(os.listdir(flag_cache)) == 12
    assert len(os.listdir(env_cache)) == 12  # untouched: the flag won


# -------------------------------------------------------------------- train


def test_train_writes_artifacts(corpus, trained):
    log = (trained / "log.csv").read_text(encoding="utf-8").splitlines()
    assert log[0] == "epoch,acc,f1,loss"
    assert len(log) == 4
    assert sorted(os.listdir(trained / "checkpoints")) == [
        "epoch_001.ambi", "epoch_002.ambi", "epoch_003.ambi"]
    assert (trained / "selected.ambi").exists()
    meta = json.loads((trained / "selected.ambi.json").read_text(encoding="utf-8"))
    assert meta["variant"] == "mha_a"
    assert meta["text_mode"] == "sparse"
    report = (trained / "report.txt").read_text(encoding="utf-8").splitlines()
    assert report[0] == "variant: mha_a"
    assert report[1] == "text_mode: sparse"
    assert report[2].startswith("selected_epoch: ")
    f1_rows = (trained / "per_class_f1.csv").read_text(encoding="utf-8").splitlines()
    assert f1_rows[0] == "class,precision,recall,f1"
    assert len(f1_rows) == 8
    conf_rows = (trained / "confusion.csv").read_text(encoding="utf-8").splitlines()
    assert len(conf_rows) == 8
    assert sum(int(x) for row in conf_rows[1:] for x in row.split(",")[1:]) == 6


def test_train_same_seed_reproduces_log(corpus, trained):
    out2 = corpus / "run2"
    assert cli.main(["train", "--config", str(corpus / "cfg.json"),
                     "--manifest", manifest(corpus), "--cache-dir", str(corpus / "cache"),
                     "--out", str(out2), "--variant", "mha_a", "--text-mode", "sparse",
                     "--seed", "3"]) == 0
    assert (out2 / "log.csv").read_bytes() == (trained / "log.csv").read_bytes()


def test_train_flag_overrides_config(corpus, capsys):
    out = corpus / "run_short"
    assert cli.main(["train", "--config", str(corpus / "cfg.json"),
                     "--manifest", manifest(corpus), "--cache-dir", str(corpus / "cache"),
                     "--out", str(out), "--variant", "audio_bre", "--epochs", "1"]) == 0
    capsys.readouterr()
    log = (out / "log.csv").read_text(encoding="utf-8").splitlines()
    assert len(log) == 2  # config said 3 epochs, the flag said 1


def test_train_config_errors(corpus, tmp_path):
    base = ["train", "--manifest", manifest(corpus), "--cache-dir", str(corpus / "cache"),
            "--out", str(tmp_path / "x")]
    assert cli.main(base + ["--variant", "banana"]) == 2
    assert cli.main(base) == 2  # no variant anywhere

    cfg = tmp_path / "bad.json"
    cfg.write_text('{"optimizer": {}}', encoding="utf-8")
    assert cli.main(base + ["--variant", "audio_bre", "--config", str(cfg)]) == 2
    cfg.write_text('{"train": {"momentum": 0.9}}', encoding="utf-8")
    assert cli.main(base + ["--variant", "audio_bre", "--config", str(cfg)]) == 2
    cfg.write_text('{"model": {"layers": 2}}', encoding="utf-8")
    assert cli.main(base + ["--variant", "audio_bre", "--config", str(cfg)]) == 2
    cfg.write_text("{oops", encoding="utf-8")
    assert cli.main(base + ["--variant", "audio_bre", "--config", str(cfg)]) == 2
    assert cli.main(base + ["--variant", "audio_bre",
                            "--config", str(tmp_path / "ghost.json")]) == 1


# --------------------------------------------------------------------- eval


def test_eval_prints_report(corpus, trained, capsys):
    assert cli.main(["eval", "--checkpoint", str(trained / "selected.ambi"),
                     "--manifest", manifest(corpus),
                     "--cache-dir", str(corpus / "cache")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("accuracy: ")
    assert "n_records: 12" in out


def test_eval_writes_report_file(corpus, trained, tmp_path):
    dest = tmp_path / "report.txt"
    assert cli.main(["eval", "--checkpoint", str(trained / "selected.ambi"),
                     "--manifest", manifest(corpus), "--cache-dir", str(corpus / "cache"),
                     "--out", str(dest)]) == 0
    assert dest.read_text(encoding="utf-8").startswith("accuracy: ")


def test_eval_alt_transcript_needs_alt_column(corpus, trained):
    assert cli.main(["eval", "--checkpoint", str(trained / "selected.ambi"),
                     "--manifest", manifest(corpus), "--cache-dir", str(corpus / "cache"),
                     "--use-alt-transcript"]) == 2


def test_eval_missing_checkpoint(corpus):
    assert cli.main(["eval", "--checkpoint", str(corpus / "ghost.ambi"),
                     "--manifest", manifest(corpus)]) == 1


# ------------------------------------------------------------------ predict


def test_predict_emits_distribution_and_attention(corpus, trained, capsys):
    wav = str(corpus / "corpus" / "wav" / "syn0000a.wav")
    transcript = "가나 다라까"
    assert cli.main(["predict", "--checkpoint", str(trained / "selected.ambi"),
                     "--wav", wav, "--transcript", transcript]) == 0
    out = json.loads(capsys.readouterr().out)
    probs = out["probs"]
    assert set(probs) == {"S", "YN", "WH", "RQ", "C", "R", "RC"}
    assert abs(sum(probs.values()) - 1.0) < 1e-9
    assert out["label"] == max(probs, key=probs.get)
    assert set(out["attention"]) == {"audio_self", "text_cross"}
    assert len(out["attention"]["text_cross"]) == len(transcript)
    meta = json.loads((trained / "selected.ambi.json").read_text(encoding="utf-8"))
    fcfg = ft.FeatureConfig.from_dict(meta["features"])
    n_frames = ft.audio_frame_matrix(ft.read_wav(wav), fcfg).shape[0]
    assert len(out["attention"]["audio_self"]) == min(n_frames, fcfg.audio_t_max)
    for weights in out["attention"].values():
        assert abs(sum(weights) - 1.0) < 1e-6
        assert all(w >= 0.0 for w in weights)


def test_predict_requires_transcript_for_text_models(corpus, trained):
    wav = str(corpus / "corpus" / "wav" / "syn0000a.wav")
    assert cli.main(["predict", "--checkpoint", str(trained / "selected.ambi"),
                     "--wav", wav]) == 2


# ------------------------------------------------------------- entry points


def test_console_script_help():
    result = subprocess.run([sys.executable, "-m", "ambispeech.cli", "--help"],
                            capture_output=True, text=True)
    assert result.returncode == 0
    for sub in ("synth", "featurize", "train", "eval", "predict"):
        assert sub in result.stdout


def test_missing_subcommand_is_usage_error():
    result = subprocess.run([sys.executable, "-m", "ambispeech.cli"],
                            capture_output=True, text=True)
    assert result.returncode == 2
    assert "usage:" in result.stderr
