"""Loss, optimization, the checkpoint-selection rule, and metrics."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import checkpoint as ckpt
from .autodiff import Tensor
from .corpus import Example, INTENT_LABELS
from .errors import ConfigError, LabelError
from .models import IntentClassifier

Array = np.ndarray

N_CLASSES = len(INTENT_LABELS)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    split_ratio: float = 0.9
    group_by_script: bool = False  # keep all variants of a transcript on one side

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError(f"split_ratio must be in (0, 1), got {self.split_ratio}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")


@dataclass
class EpochRecord:
    epoch: int  # 1-based
    accuracy: float
    macro_f1: float
    checkpoint: object  # path, in-memory state dict, or None
    mean_loss: float


@dataclass
class EvalReport:
    accuracy: float
    macro_f1: float
    precision: Array  # (7,)
    recall: Array  # (7,)
    f1: Array  # (7,)
    confusion: Array  # (7, 7) ints, rows = truth
    n_records: int


class Adam:
    """Adaptive-moment optimizer with bias correction."""

    def __init__(self, params: list[Tensor], lr: float = 5e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.t = 0

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data = p.data - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def cross_entropy(probs: Tensor, label) -> Tensor:
    """-log p[label] with a 1e-12 probability floor; batched input gives the mean."""
    labels = np.atleast_1d(np.asarray(label))
    if labels.dtype.kind not in "iu" or np.any(labels < 0) or np.any(labels >= N_CLASSES):
        raise LabelError(f"labels must be integers in 0..{N_CLASSES - 1}, got {label!r}")
    p = probs if probs.ndim == 2 else ad.reshape(probs, (1, N_CLASSES))
    if p.shape != (labels.shape[0], N_CLASSES):
        raise ConfigError(f"probs shape {probs.shape} does not fit {labels.shape[0]} labels")
    onehot = np.zeros((labels.shape[0], N_CLASSES))
    onehot[np.arange(labels.shape[0]), labels] = 1.0
    picked = ad.sum_axis(ad.mul(p, onehot), axis=1)
    return ad.mean(ad.mul(ad.log(ad.clip_min(picked, 1e-12)), -1.0))


# ------------------------------------------------------------------ metrics


def confusion_matrix(truth, pred, n_classes: int = N_CLASSES) -> Array:
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    m = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(m, (truth, pred), 1)
    return m


def precision_recall_f1(confusion: Array) -> tuple[Array, Array, Array]:
    """Per-class scores; any 0/0 (absent class) scores 0."""
    tp = np.diag(confusion).astype(np.float64)
    col = confusion.sum(axis=0).astype(np.float64)
    row = confusion.sum(axis=1).astype(np.float64)
    precision = np.divide(tp, col, out=np.zeros_like(tp), where=col > 0)
    recall = np.divide(tp, row, out=np.zeros_like(tp), where=row > 0)
    pr = precision + recall
    f1 = np.divide(2.0 * precision * recall, pr, out=np.zeros_like(tp), where=pr > 0)
    return precision, recall, f1


def report_from_predictions(truth, pred) -> EvalReport:
    m = confusion_matrix(truth, pred)
    n = int(m.sum())
    precision, recall, f1 = precision_recall_f1(m)
    return EvalReport(
        accuracy=float(np.trace(m)) / n,
        macro_f1=float(f1.mean()),
        precision=precision,
        recall=recall,
        f1=f1,
        confusion=m,
        n_records=n,
    )


def format_report(report: EvalReport) -> str:
    """Key:value metrics, a per-class CSV block, and the confusion CSV."""
    lines = [
        f"accuracy: {report.accuracy:.6f}",
        f"macro_f1: {report.macro_f1:.6f}",
        f"n_records: {report.n_records}",
        "",
        "class,precision,recall,f1",
    ]
    for i, name in enumerate(INTENT_LABELS):
        lines.append(f"{name},{report.precision[i]:.6f},{report.recall[i]:.6f},{report.f1[i]:.6f}")
    lines.append("")
    lines.append("confusion," + ",".join(INTENT_LABELS))
    for i, name in enumerate(INTENT_LABELS):
        lines.append(name + "," + ",".join(str(int(x)) for x in report.confusion[i]))
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------- batching


class _Arrays:
    """A featurized example list stacked into contiguous batch-ready arrays."""

    def __init__(self, examples: list[Example]):
        self.ids = [e.id for e in examples]
        self.audio = np.stack([e.audio.data for e in examples])
        self.audio_mask = np.stack([e.audio.mask for e in examples])
        if examples[0].text is not None:
            self.text = np.stack([e.text.data for e in examples])
            self.text_mask = np.stack([e.text.mask for e in examples])
        else:
            self.text = None
            self.text_mask = None
        self.labels = np.array([e.label for e in examples], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.ids)

    def forward(self, model: IntentClassifier, idx) -> tuple[Tensor, dict]:
        if self.text is None:
            return model.forward(self.audio[idx], self.audio_mask[idx])
        return model.forward(self.audio[idx], self.audio_mask[idx],
                             self.text[idx], self.text_mask[idx])


def predict_batch(model: IntentClassifier, examples: list[Example],
                  batch_size: int = 256) -> tuple[Array, Array]:
    """(probs (N, 7), argmax predictions (N,)) without building gradients."""
    arrs = _Arrays(examples)
    probs = np.empty((len(arrs), N_CLASSES))
    for lo in range(0, len(arrs), batch_size):
        idx = np.arange(lo, min(lo + batch_size, len(arrs)))
        p, _ = arrs.forward(model, idx)
        probs[idx] = p.data
    return probs, probs.argmax(axis=1)


def evaluate(model: IntentClassifier, examples: list[Example]) -> EvalReport:
    """Full-set evaluation; see report_from_predictions for the metric rules."""
    if not examples:
        raise ConfigError("cannot evaluate an empty set")
    _, preds = predict_batch(model, examples)
    truth = np.array([e.label for e in examples], dtype=np.int64)
    return report_from_predictions(truth, preds)


# ------------------------------------------------------------------- splits


def split_records(examples: list, ratio: float, seed: int,
                  group_by_script: bool = False) -> tuple[list, list]:
    """Seeded shuffle split at `ratio`, independently within each speaker.

    With group_by_script, whole transcripts move to one side or the other.
    """
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must be in (0, 1), got {ratio}")
    by_speaker: dict[str, list] = {}
    for e in examples:
        by_speaker.setdefault(e.speaker, []).append(e)
    train: list = []
    test: list = []
    for speaker in sorted(by_speaker):
        group = by_speaker[speaker]
        rng = np.random.default_rng([seed, 1299709, hash_str(speaker)])
        if group_by_script:
            scripts = sorted({e.transcript for e in group})
            order = rng.permutation(len(scripts))
            quota = int(len(group) * ratio)
            chosen: set[str] = set()
            count = 0
            for i in order:
                if count >= quota:
                    break
                chosen.add(scripts[i])
                count += sum(1 for e in group if e.transcript == scripts[i])
            train += [e for e in group if e.transcript in chosen]
            test += [e for e in group if e.transcript not in chosen]
        else:
            order = rng.permutation(len(group))
            cut = int(len(group) * ratio)
            train += [group[i] for i in order[:cut]]
            test += [group[i] for i in order[cut:]]
    if not train or not test:
        raise ConfigError(f"split produced an empty side ({len(train)} train, {len(test)} test)")
    return train, test


def hash_str(s: str) -> int:
    """Deterministic 32-bit string hash (builtin hash is salted per process)."""
    h = 2166136261
    for ch in s.encode("utf-8"):
        h = ((h ^ ch) * 16777619) & 0xFFFFFFFF
    return h


# ------------------------------------------------------------------ training


def train(model: IntentClassifier, dataset: list[Example], cfg: TrainConfig,
          checkpoint_dir=None, snapshot: bool = True, eval_records=None,
          batch_hook=None) -> list[EpochRecord]:
    """Optimize for cfg.max_epochs, evaluating after every epoch.

    The dataset is split per cfg unless eval_records is given, in which
    case all of `dataset` is trained on and `eval_records` scored (the
    overfit protocol passes the same list twice). Checkpoints go to
    checkpoint_dir when set, otherwise live as in-memory state dicts;
    snapshot=False keeps metrics only. batch_hook(epoch, batch_index,
    record_ids, loss) observes every optimization step. Deterministic for
    a fixed cfg.seed.
    """
    if eval_records is None:
        train_set, test_set = split_records(dataset, cfg.split_ratio, cfg.seed,
                                            cfg.group_by_script)
    else:
        train_set, test_set = list(dataset), list(eval_records)
    if not train_set or not test_set:
        raise ConfigError("empty train or eval set")
    arrs = _Arrays(train_set)
    opt = Adam(model.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    records: list[EpochRecord] = []
    for epoch in range(1, cfg.max_epochs + 1):
        rng = np.random.default_rng([cfg.seed, 15485863, epoch])
        order = rng.permutation(len(arrs))
        losses = []
        for b, lo in enumerate(range(0, len(order), cfg.batch_size)):
            idx = order[lo : lo + cfg.batch_size]
            probs, _ = arrs.forward(model, idx)
            loss = cross_entropy(probs, arrs.labels[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(loss.item())
            if batch_hook is not None:
                batch_hook(epoch, b, [arrs.ids[i] for i in idx], losses[-1])
        report = evaluate(model, test_set)
        if checkpoint_dir is not None:
            ref = os.path.join(checkpoint_dir, f"epoch_{epoch:03d}.ambi")
            ckpt.save_params(ref, model.state())
        elif snapshot:
            ref = {k: v.copy() for k, v in model.state().items()}
        else:
            ref = None
        records.append(EpochRecord(epoch, report.accuracy, report.macro_f1, ref,
                                   float(np.mean(losses))))
    return records


def select_checkpoint(records: list[EpochRecord]) -> EpochRecord:
    """Intersect the 5-best-accuracy and 5-best-F1 epochs; pick the highest
    accuracy there (ties toward later epochs); fall back to plain argmax
    accuracy when the intersection is empty. Rank-based, so invariant
    under monotone rescaling of either metric."""
    if not records:
        raise ConfigError("no epoch records to select from")
    k = min(5, len(records))

    def top(key) -> set[int]:
        ranked = sorted(records, key=lambda r: (key(r), r.epoch), reverse=True)
        return {r.epoch for r in ranked[:k]}

    pool_epochs = top(lambda r: r.accuracy) & top(lambda r: r.macro_f1)
    pool = [r for r in records if r.epoch in pool_epochs] or list(records)
    return max(pool, key=lambda r: (r.accuracy, r.epoch))


def log_lines(records: list[EpochRecord]) -> list[str]:
    """CSV training log, one "epoch,acc,f1,loss" line per epoch."""
    out = ["epoch,acc,f1,loss"]
    for r in records:
        out.append(f"{r.epoch},{r.accuracy:.6f},{r.macro_f1:.6f},{r.mean_loss:.6f}")
    return out
