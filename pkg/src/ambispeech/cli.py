"""Command-line surface: featurize, synth, train, eval, predict.

Configuration comes from an optional JSON file plus flag overrides; the
cache directory can also come from AMBISPEECH_CACHE_DIR (flag beats env
beats config). Exit codes: 0 success, 1 data error, 2 config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import checkpoint as ck
from . import corpus as cp
from . import features as ft
from . import models as md
from . import synth as sy
from . import training as tr
from .errors import (ConfigError, DataError, DegenerateMaskError,
                     EmptyInputError, LabelError, ModalityError, ShapeError)

CACHE_ENV = "AMBISPEECH_CACHE_DIR"
_CACHE_VERSION = "ambf1"


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    known = {"variant", "text_mode", "features", "train", "model", "paths"}
    unknown = set(cfg) - known
    if unknown:
        raise ConfigError(f"config {path}: unknown sections {sorted(unknown)}")
    return cfg


def _feature_config(cfg: dict) -> ft.FeatureConfig:
    return ft.FeatureConfig.from_dict(cfg.get("features", {}))


def _train_config(cfg: dict, args) -> tr.TrainConfig:
    section = dict(cfg.get("train", {}))
    unknown = set(section) - set(tr.TrainConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
    tc = tr.TrainConfig(**section)
    for field, attr in (("seed", "seed"), ("max_epochs", "epochs"),
                        ("batch_size", "batch_size"), ("learning_rate", "lr")):
        val = getattr(args, attr, None)
        if val is not None:
            tc = replace(tc, **{field: val})
    return tc


def _cache_dir(args, cfg: dict) -> str | None:
    if getattr(args, "cache_dir", None):
        return args.cache_dir
    if os.environ.get(CACHE_ENV):
        return os.environ[CACHE_ENV]
    return cfg.get("paths", {}).get("cache_dir")


def _path_opt(args, cfg: dict, flag: str, key: str) -> str | None:
    return getattr(args, flag, None) or cfg.get("paths", {}).get(key)


def _cache_key(wav_bytes: bytes, fcfg: ft.FeatureConfig) -> str:
    tag = f"{_CACHE_VERSION}|{fcfg.sample_rate}|{fcfg.n_fft}|{fcfg.hop}|{fcfg.n_mels}|{fcfg.log_mel}|"
    return hashlib.sha256(tag.encode() + wav_bytes).hexdigest()


def _caching_frame_loader(fcfg: ft.FeatureConfig, cache_dir: str | None, base_dir: str,
                          counters: dict | None = None):
    """Frame loader for featurize_corpus that reads/writes the cache.

    The cache stores the unaligned frame matrix (all-ones mask), so one
    record serves any later t_max.
    """
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)

    def load(record: cp.UtteranceRecord) -> np.ndarray:
        path = os.path.join(base_dir, record.audio)
        if cache_dir is None:
            return ft.audio_frame_matrix(ft.read_wav(path), fcfg)
        with open(path, "rb") as fh:
            key = _cache_key(fh.read(), fcfg)
        entry = os.path.join(cache_dir, key + ".ambf")
        if os.path.exists(entry):
            if counters is not None:
                counters["reused"] = counters.get("reused", 0) + 1
            return ft.load_feature_sequence(entry).valid_rows()
        mat = ft.audio_frame_matrix(ft.read_wav(path), fcfg)
        ft.save_feature_sequence(entry, ft.end_align(mat))
        if counters is not None:
            counters["computed"] = counters.get("computed", 0) + 1
        return mat

    return load


def _featurize(records, fcfg, text_mode, table, cache_dir, base_dir,
               use_alt=False, counters=None):
    loader = _caching_frame_loader(fcfg, cache_dir, base_dir, counters)
    return cp.featurize_corpus(records, fcfg, text_mode, table=table,
                               use_alt_transcript=use_alt, frame_loader=loader)


# -------------------------------------------------------------- subcommands


def cmd_synth(args) -> int:
    spec = sy.SyntheticSpec(
        n_scripts=args.n_scripts,
        variants_per_script=args.variants,
        seed=args.seed,
        script_types=tuple(args.types.split(",")) if args.types else sy.DEFAULT_TYPE_CYCLE,
    )
    manifest, records = sy.generate_synthetic(spec, args.out)
    print(f"wrote {len(records)} records to {manifest}")
    return 0


def cmd_featurize(args) -> int:
    cfg = _load_config(args.config)
    fcfg = _feature_config(cfg)
    manifest = _path_opt(args, cfg, "manifest", "manifest")
    if manifest is None:
        raise ConfigError("featurize needs a manifest (flag or config)")
    cache_dir = _cache_dir(args, cfg)
    if cache_dir is None:
        raise ConfigError("featurize needs a cache dir (flag, env, or config)")
    records = cp.load_manifest(manifest)
    base_dir = os.path.dirname(os.path.abspath(manifest))
    loader = _caching_frame_loader(fcfg, cache_dir, base_dir,
                                   counters := {"computed": 0, "reused": 0})
    failures = []
    for r in records:
        try:
            loader(r)
        except (DataError, OSError, ValueError) as exc:
            failures.append((r.id, str(exc)))
    print(f"featurized {len(records) - len(failures)}/{len(records)} records "
          f"(computed {counters['computed']}, reused {counters['reused']})")
    if failures:
        for rid, msg in failures:
            print(f"FAILED {rid}: {msg}", file=sys.stderr)
        return 1
    return 0


def _build_run(args):
    """Shared train-time assembly: records, examples, model, configs."""
    cfg = _load_config(args.config)
    variant = md.ModelVariant.parse(
        args.variant or cfg.get("variant", ""),
        args.text_mode or cfg.get("text_mode", "none"),
    )
    fcfg = _feature_config(cfg)
    tcfg = _train_config(cfg, args)
    manifest = _path_opt(args, cfg, "manifest", "manifest")
    if manifest is None:
        raise ConfigError("train needs a manifest (flag or config)")
    records = cp.load_manifest(manifest)
    base_dir = os.path.dirname(os.path.abspath(manifest))
    table = None
    embedding_path = _path_opt(args, cfg, "embedding", "embedding")
    if variant.text_mode == "dense":
        if embedding_path is None:
            raise ConfigError("dense text mode needs an embedding table path")
        table = cp.load_embedding_table(embedding_path)
    examples, resolved = _featurize(records, fcfg, variant.text_mode, table,
                                    _cache_dir(args, cfg), base_dir)
    msec = cfg.get("model", {})
    unknown = set(msec) - {"hidden", "head_hidden"}
    if unknown:
        raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
    model = md.IntentClassifier(
        variant,
        audio_dim=resolved.audio_dim,
        text_dim=examples[0].text.dim if examples[0].text is not None else None,
        hidden=args.hidden or msec.get("hidden", 64),
        head_hidden=msec.get("head_hidden", 128),
        seed=tcfg.seed,
    )
    return cfg, variant, fcfg, tcfg, resolved, examples, model, embedding_path


def cmd_train(args) -> int:
    (cfg, variant, _fcfg, tcfg, resolved, examples, model, embedding_path) = _build_run(args)
    out_dir = _path_opt(args, cfg, "out", "out_dir")
    if out_dir is None:
        raise ConfigError("train needs an output dir (flag or config)")
    ckpt_dir = os.path.join(out_dir, "checkpoints")
    os.makedirs(ckpt_dir, exist_ok=True)

    train_set, test_set = tr.split_records(examples, tcfg.split_ratio, tcfg.seed,
                                           tcfg.group_by_script)
    records = tr.train(model, train_set, tcfg, checkpoint_dir=ckpt_dir,
                       eval_records=test_set)
    with open(os.path.join(out_dir, "log.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(tr.log_lines(records)) + "\n")

    chosen = tr.select_checkpoint(records)
    model.load_state(ck.load_params(chosen.checkpoint))
    md.save_model(os.path.join(out_dir, "selected.ambi"), model, resolved,
                  embedding_path=embedding_path)
    report = tr.evaluate(model, test_set)
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"variant: {variant.tag}\ntext_mode: {variant.text_mode}\n"
                 f"selected_epoch: {chosen.epoch}\n" + tr.format_report(report))
    _write_plot_csvs(out_dir, report)
    print(f"selected epoch {chosen.epoch}: accuracy {report.accuracy:.4f}, "
          f"macro F1 {report.macro_f1:.4f} ({out_dir})")
    return 0


def _write_plot_csvs(out_dir: str, report: tr.EvalReport) -> None:
    with open(os.path.join(out_dir, "per_class_f1.csv"), "w", encoding="utf-8") as fh:
        fh.write("class,precision,recall,f1\n")
        for i, name in enumerate(cp.INTENT_LABELS):
            fh.write(f"{name},{report.precision[i]:.6f},{report.recall[i]:.6f},"
                     f"{report.f1[i]:.6f}\n")
    with open(os.path.join(out_dir, "confusion.csv"), "w", encoding="utf-8") as fh:
        fh.write("true\\pred," + ",".join(cp.INTENT_LABELS) + "\n")
        for i, name in enumerate(cp.INTENT_LABELS):
            fh.write(name + "," + ",".join(str(int(x)) for x in report.confusion[i]) + "\n")


def cmd_eval(args) -> int:
    model, fcfg, meta = md.load_model(args.checkpoint)
    cfg = _load_config(args.config)
    manifest = _path_opt(args, cfg, "manifest", "manifest")
    if manifest is None:
        raise ConfigError("eval needs a manifest (flag or config)")
    records = cp.load_manifest(manifest)
    base_dir = os.path.dirname(os.path.abspath(manifest))
    table = None
    if meta["text_mode"] == "dense":
        path = args.embedding or meta.get("embedding_path")
        if path is None:
            raise ConfigError("dense checkpoint without an embedding table path")
        table = cp.load_embedding_table(path)
    examples, _ = _featurize(records, fcfg, meta["text_mode"], table,
                             _cache_dir(args, cfg), base_dir,
                             use_alt=args.use_alt_transcript)
    report = tr.evaluate(model, examples)
    text = tr.format_report(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text, end="")
    return 0


def cmd_predict(args) -> int:
    model, fcfg, meta = md.load_model(args.checkpoint)
    signal = ft.read_wav(args.wav)
    audio_fs = ft.audio_features(signal, fcfg)
    text_fs = None
    if meta["text_mode"] != "none":
        if args.transcript is None:
            raise ConfigError(f"variant {meta['variant']} needs --transcript")
        if meta["text_mode"] == "sparse":
            text_fs = ft.encode_sparse(args.transcript, fcfg.text_t_max)
        else:
            path = args.embedding or meta.get("embedding_path")
            if path is None:
                raise ConfigError("dense checkpoint without an embedding table path")
            text_fs = ft.encode_dense(args.transcript, cp.load_embedding_table(path),
                                      fcfg.text_t_max)
    probs, aux = model.forward(audio_fs, text=text_fs)
    attention = {}
    for key, weights in aux.items():
        if key == "logits":
            continue
        n = text_fs.valid_len if key.startswith("text") else audio_fs.valid_len
        attention[key] = [float(w) for w in weights[-n:]]
    out = {
        "label": cp.INTENT_LABELS[int(np.argmax(probs.data))],
        "probs": {name: float(p) for name, p in zip(cp.INTENT_LABELS, probs.data)},
        "attention": attention,
    }
    print(json.dumps(out, indent=1))
    return 0


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ambispeech",
        description="Intent classification for prosodically ambiguous speech.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-scripts", type=int, default=20)
    p.add_argument("--variants", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--types", default=None,
                   help="comma-separated script type cycle (ynwh,rqrc,decl,cmd)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("featurize", help="fill the audio feature cache")
    p.add_argument("--config", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--cache-dir", default=None)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train one variant end to end")
    p.add_argument("--config", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--variant", default=None)
    p.add_argument("--text-mode", default=None)
    p.add_argument("--embedding", default=None)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--embedding", default=None)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--use-alt-transcript", action="store_true")
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="classify one WAV (+ transcript)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--transcript", default=None)
    p.add_argument("--embedding", default=None)
    p.set_defaults(func=cmd_predict)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ModalityError, ShapeError, LabelError, EmptyInputError,
            DegenerateMaskError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
