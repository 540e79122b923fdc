"""Dataset preparation, the training loop, and the SNR-sweep evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..audio_io import (CLEAN, AudioClip, NoiseSpec, load_wav, mix_noise_at_snr,
                        peak_normalize, pink_noise, resample_to_16k)
from ..corpus import ShoutClass, Style, UtteranceRecord
from ..errors import ConfigError, DegenerateInputError, NumericError
from ..features import FeatureKind, FeatureStats, feature_matrix, parse_feature_kind, split_blocks
from ..models import (Arch, FusionModel, HeadKind, NetworkGraph, build_baseline_mlp,
                      build_fusion_model, build_single_model, predict_clip)
from ..neural import Adam, loss as loss_fn, no_grad
from .config import ExperimentConfig, derive_seed, snr_label
from .folds import Fold, check_speaker_independence, split_train_validation
from .metrics import binary_f1, confusion_matrix, rmse, weighted_f1

CLASS_INDEX = {ShoutClass.NORMAL: 0, ShoutClass.SHOUT_H: 1,
               ShoutClass.SHOUT_L: 2, ShoutClass.SHOUT_HL: 3}

HEAD_FOR_TASK = {"binary": HeadKind.BINARY, "four_class": HeadKind.FOUR_CLASS,
                 "regression": HeadKind.REGRESSION}


@dataclass
class ClipExample:
    """One prepared clip: 16 kHz, peak-normalized, with its task label."""

    clip_id: str
    speaker_id: str
    clip: AudioClip
    label: float | int


def prepare_clip(clip: AudioClip) -> AudioClip:
    """Fixed ingestion order: resample to 16 kHz, then peak-normalize.

    Noise mixing happens later, at evaluation (or training augmentation)
    time, always after this stage.
    """
    return peak_normalize(resample_to_16k(clip))


def label_for_task(record: UtteranceRecord, task: str):
    if task == "binary":
        return int(record.style is Style.SHOUT)
    if task == "four_class":
        return CLASS_INDEX[record.class_label]
    if task == "regression":
        return record.intensity
    raise ConfigError(f"unknown task {task!r}")


def corpus_examples(records: list[UtteranceRecord], audio_root, task: str) -> list[ClipExample]:
    """Load and prepare the clips a task trains on.

    The regression task uses only shouted, intensity-labeled records; the
    classification tasks use everything.
    """
    audio_root = Path(audio_root)
    examples = []
    for r in records:
        if task == "regression":
            if r.style is not Style.SHOUT:
                continue
            if r.intensity is None:
                raise ConfigError(f"shout record {r.path} lacks intensity for regression")
        clip = prepare_clip(load_wav(audio_root / r.path))
        examples.append(ClipExample(clip_id=r.path, speaker_id=r.speaker_id,
                                    clip=clip, label=label_for_task(r, task)))
    if not examples:
        raise ConfigError("no usable examples for this task")
    return examples


def load_noise(spec: str, sample_rate: int = 16000) -> AudioClip | None:
    """Noise source from config: a WAV path or ``pink:<seed>:<seconds>``."""
    if not spec:
        return None
    if spec.startswith("pink:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"pink noise spec must be pink:<seed>:<seconds>, got {spec!r}")
        try:
            seed, seconds = int(parts[1]), float(parts[2])
        except ValueError:
            raise ConfigError(f"bad pink noise spec {spec!r}")
        return pink_noise(int(seconds * sample_rate), sample_rate, seed=seed)
    clip = load_wav(spec)
    if clip.sample_rate != sample_rate:
        clip = resample_to_16k(clip)
    return clip


# -- fold data -------------------------------------------------------------------


@dataclass
class FoldData:
    kinds: tuple[FeatureKind, ...]
    stats: dict
    train_x: dict            # kind -> (N, D, 20)
    train_y: np.ndarray
    train_clip_slices: list  # (clip_id, label, start, stop) into the block axis
    val_x: dict
    val_y: np.ndarray
    test_examples: list[ClipExample]
    train_examples: list[ClipExample]
    validation_speakers: tuple[str, ...]


def _augment_training_clip(example: ClipExample, cfg: ExperimentConfig,
                           noise: AudioClip | None) -> ClipExample:
    """Optional train-time noise mixing, off by default (models train on
    clean speech): one SNR drawn per clip from the configured sweep."""
    if not cfg.train_snr_augment or noise is None:
        return example
    rng = np.random.default_rng(derive_seed(cfg.seed, "augment.pick", example.clip_id))
    snr = cfg.snrs_db[int(rng.integers(0, len(cfg.snrs_db)))]
    spec = NoiseSpec(snr_db=snr, noise=noise,
                     seed=derive_seed(cfg.seed, "augment.mix", example.clip_id))
    return ClipExample(clip_id=example.clip_id, speaker_id=example.speaker_id,
                       clip=mix_noise_at_snr(example.clip, spec), label=example.label)


def build_fold_data(examples: list[ClipExample], fold: Fold,
                    kinds: tuple[FeatureKind, ...], cfg: ExperimentConfig,
                    noise: AudioClip | None = None) -> FoldData:
    """Feature matrices, training statistics and block tensors for one fold.

    Statistics come from the training split only; validation and test reuse
    them. Test clips stay as audio so each SNR condition can re-mix them.
    """
    check_speaker_independence(fold)
    train_speakers, val_speakers = split_train_validation(
        fold, seed=derive_seed(cfg.seed, "validation"), validation_fraction=cfg.validation_fraction)
    train = [e for e in examples if e.speaker_id in train_speakers]
    val = [e for e in examples if e.speaker_id in val_speakers]
    test = [e for e in examples if e.speaker_id in fold.test_speakers]
    if not train or not test:
        raise ConfigError("fold produced an empty train or test split")
    if cfg.train_snr_augment:
        train = [_augment_training_clip(e, cfg, noise) for e in train]
        val = [_augment_training_clip(e, cfg, noise) for e in val]

    matrices = {kind: {e.clip_id: feature_matrix(e.clip, kind) for e in train + val}
                for kind in kinds}
    stats = {kind: FeatureStats.fit([matrices[kind][e.clip_id] for e in train])
             for kind in kinds}

    def stack(split):
        xs: dict = {kind: [] for kind in kinds}
        ys = []
        slices = []
        start = 0
        for e in split:
            per_kind = {kind: split_blocks(matrices[kind][e.clip_id], kind,
                                           clip_ref=e.clip_id, stats=stats[kind])
                        for kind in kinds}
            n_blocks = len(per_kind[kinds[0]])
            if any(len(v) != n_blocks for v in per_kind.values()):
                raise DegenerateInputError(f"block count mismatch across kinds for {e.clip_id}")
            for kind in kinds:
                xs[kind].extend(b.data for b in per_kind[kind])
            ys.extend([e.label] * n_blocks)
            slices.append((e.clip_id, e.label, start, start + n_blocks))
            start += n_blocks
        x_arrays = {kind: np.stack(xs[kind]) if xs[kind] else
                    np.zeros((0, kind.dim, 20)) for kind in kinds}
        return x_arrays, np.asarray(ys), slices

    train_x, train_y, train_slices = stack(train)
    val_x, val_y, _ = stack(val)
    return FoldData(kinds=kinds, stats=stats, train_x=train_x, train_y=train_y,
                    train_clip_slices=train_slices, val_x=val_x, val_y=val_y,
                    test_examples=test, train_examples=train,
                    validation_speakers=val_speakers)


# -- training loop -----------------------------------------------------------------


@dataclass
class TrainSettings:
    epochs: int
    batch_size: int
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    shuffle_seed: int = 0
    early_stop_patience: int = 0   # 0 disables early stopping


@dataclass
class TrainingLog:
    epochs: list = field(default_factory=list)  # dicts: epoch, train_loss, val_loss
    best_epoch: int = 0
    best_val_loss: float = float("inf")
    stopped_early: bool = False
    best_state: dict | None = None              # best-validation parameters

    def summary(self) -> dict:
        return {"epochs_run": len(self.epochs), "best_epoch": self.best_epoch,
                "best_val_loss": self.best_val_loss, "stopped_early": self.stopped_early,
                "final_train_loss": self.epochs[-1]["train_loss"] if self.epochs else None}


def _model_batch(model: NetworkGraph, x: dict | np.ndarray, idx=None):
    """Arrange per-kind arrays into the forward-pass input for this model."""
    if isinstance(model, FusionModel):
        left, right = model.kinds
        xl, xr = x[left], x[right]
        if idx is not None:
            xl, xr = xl[idx], xr[idx]
        return (xl.astype(model.dtype, copy=False), xr.astype(model.dtype, copy=False))
    arr = x[model.kinds[0]] if isinstance(x, dict) else x
    if idx is not None:
        arr = arr[idx]
    return arr.astype(model.dtype, copy=False)


def _targets(y: np.ndarray, head: HeadKind, dtype):
    if head is HeadKind.FOUR_CLASS:
        return y.astype(np.int64)
    return y.astype(dtype).reshape(-1, 1)


def train_model(model: NetworkGraph, data: FoldData | None, settings: TrainSettings,
                train_x=None, train_y=None, val_x=None, val_y=None) -> TrainingLog:
    """Seeded mini-batch training with Adam; logs per-epoch losses.

    The final-epoch parameters always stand on the model; the best-validation
    parameters are kept on the log (``best_state``) so both checkpoints can be
    saved. With early_stop_patience > 0, training stops after that many
    epochs without validation improvement and the best-validation parameters
    are restored onto the model instead.
    """
    if data is not None:
        train_x, train_y = data.train_x, data.train_y
        val_x, val_y = data.val_x, data.val_y
    head = model.head.kind
    loss_kind = head.loss_kind
    n = len(train_y)
    if n == 0:
        raise ConfigError("empty training set")
    optimizer = Adam(model.parameters(), lr=settings.learning_rate,
                     beta1=settings.beta1, beta2=settings.beta2,
                     epsilon=settings.epsilon)
    rng = np.random.default_rng(settings.shuffle_seed)
    log = TrainingLog()
    patience_left = settings.early_stop_patience
    y_train = _targets(train_y, head, model.dtype)
    has_val = val_y is not None and len(val_y) > 0
    y_val = _targets(val_y, head, model.dtype) if has_val else None

    for epoch in range(1, settings.epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, settings.batch_size):
            idx = order[start : start + settings.batch_size]
            batch = _model_batch(model, train_x, idx)
            target = y_train[idx]
            model.zero_grad()
            out = model.forward(batch)
            batch_loss = loss_fn(out, target, loss_kind)
            value = batch_loss.item()
            if not np.isfinite(value):
                raise NumericError(f"non-finite loss at epoch {epoch}, "
                                   f"batch starting {start}")
            batch_loss.backward()
            optimizer.step()
            epoch_loss += value * len(idx)
        epoch_loss /= n
        val_loss = None
        if has_val:
            val_loss = evaluate_loss(model, val_x, y_val, loss_kind)
        log.epochs.append({"epoch": epoch, "train_loss": epoch_loss,
                           "val_loss": val_loss})
        if has_val and val_loss < log.best_val_loss:
            log.best_val_loss = val_loss
            log.best_epoch = epoch
            patience_left = settings.early_stop_patience
            log.best_state = model.state_dict()
        elif settings.early_stop_patience and has_val:
            patience_left -= 1
            if patience_left <= 0:
                log.stopped_early = True
                break
    if settings.early_stop_patience and log.best_state is not None:
        model.load_state_dict(log.best_state)
    return log


def evaluate_loss(model: NetworkGraph, x, y, loss_kind) -> float:
    with no_grad():
        out = model.forward(_model_batch(model, x))
        return loss_fn(out, y, loss_kind).item()


# -- evaluation under the SNR sweep ----------------------------------------------------


def _clip_blocks(model: NetworkGraph, clip: AudioClip, kinds, stats):
    per_kind = [split_blocks(feature_matrix(clip, kind), kind,
                             clip_ref=clip.source_id, stats=stats[kind])
                for kind in kinds]
    if isinstance(model, FusionModel):
        return list(zip(*per_kind))
    return per_kind[0]


def evaluate_model(model: NetworkGraph, test_examples: list[ClipExample],
                   stats: dict, task: str, snrs_db, noise: AudioClip | None,
                   seed: int, per_block: bool = False) -> dict:
    """Score one trained model across the SNR sweep.

    Returns {snr label: {"metric": value, ...details}}. Noise segments are
    seeded per (seed, clip, SNR), so a re-run reproduces every mix exactly.
    """
    if not test_examples:
        raise ConfigError("empty test set")
    kinds = model.kinds
    results = {}
    for snr in snrs_db:
        if snr != CLEAN and noise is None:
            raise ConfigError(f"SNR {snr_label(snr)} requested but no noise source configured")
        y_true = []
        y_pred = []
        for example in test_examples:
            spec = NoiseSpec(snr_db=snr, noise=noise,
                             seed=derive_seed(seed, example.clip_id, snr_label(snr)))
            mixed = mix_noise_at_snr(example.clip, spec)
            blocks = _clip_blocks(model, mixed, kinds, stats)
            if per_block:
                for block in blocks:
                    prediction = predict_clip(model, [block])
                    y_true.append(example.label)
                    y_pred.append(_decision(prediction, task))
            else:
                prediction = predict_clip(model, blocks)
                y_true.append(example.label)
                y_pred.append(_decision(prediction, task))
        results[snr_label(snr)] = _score(task, y_true, y_pred)
    return results


def _decision(prediction, task: str):
    if task == "regression":
        return prediction.value
    return prediction.label


def _score(task: str, y_true, y_pred) -> dict:
    if task == "binary":
        return {"metric": binary_f1(np.asarray(y_true), np.asarray(y_pred))}
    if task == "four_class":
        counts, percent = confusion_matrix(np.asarray(y_true), np.asarray(y_pred), 4)
        return {"metric": weighted_f1(np.asarray(y_true), np.asarray(y_pred), 4),
                "confusion_counts": counts.tolist(),
                "confusion_percent": percent.tolist()}
    return {"metric": rmse(np.asarray(y_true, dtype=float), np.asarray(y_pred, dtype=float)),
            "pairs": [[float(a), float(p)] for a, p in zip(y_true, y_pred)]}


# -- model construction for a grid cell --------------------------------------------------


def parse_feature_set(spec: str) -> tuple[FeatureKind, ...]:
    kinds = tuple(parse_feature_kind(part) for part in spec.split("+"))
    if len(kinds) not in (1, 2):
        raise ConfigError(f"a feature set holds one or two kinds, got {spec!r}")
    return kinds


def build_cell_model(arch: str, kinds: tuple[FeatureKind, ...], cfg: ExperimentConfig,
                     data: FoldData, fold_index: int, log_sink: list | None = None,
                     raw_logs: list | None = None) -> NetworkGraph:
    """Build and train the model for one (arch, features, fold) cell.

    Fusion cells pretrain each branch on its own feature, then fine-tune the
    fused network end to end. ``log_sink`` collects JSON-safe stage summaries;
    ``raw_logs`` collects the TrainingLog objects (including best_state).
    """
    head = HEAD_FOR_TASK[cfg.task]
    dtype = np.dtype(cfg.dtype)
    pretrain_epochs = cfg.pretrain_epochs or cfg.epochs
    finetune_epochs = cfg.finetune_epochs or cfg.epochs
    common = dict(batch_size=cfg.batch_size, learning_rate=cfg.learning_rate,
                  beta1=cfg.beta1, beta2=cfg.beta2, epsilon=cfg.epsilon,
                  early_stop_patience=cfg.early_stop_patience)

    def single(kind: FeatureKind, tag: str, epochs: int):
        if arch == Arch.MLP_BASELINE.value:
            if kind is not FeatureKind.MFCC_DELTA_DELTA:
                raise ConfigError("the baseline MLP consumes mfcc_delta_delta features")
            model = build_baseline_mlp(head, seed=derive_seed(cfg.seed, "model", tag, fold_index),
                                       dtype=dtype, width_scale=cfg.width_scale)
        else:
            model = build_single_model(arch, kind, head,
                                       seed=derive_seed(cfg.seed, "model", tag, fold_index),
                                       dtype=dtype, width_scale=cfg.width_scale,
                                       gru_concat_width=cfg.gru_concat_width)
        settings = TrainSettings(epochs=epochs,
                                 shuffle_seed=derive_seed(cfg.seed, "shuffle", tag, fold_index),
                                 **common)
        sub_x = {kind: data.train_x[kind]}
        sub_val = {kind: data.val_x[kind]}
        log = train_model(model, None, settings, train_x=sub_x, train_y=data.train_y,
                          val_x=sub_val, val_y=data.val_y)
        if log_sink is not None:
            log_sink.append({"stage": tag, "fold": fold_index, **log.summary()})
        if raw_logs is not None:
            raw_logs.append(log)
        return model

    if len(kinds) == 1:
        return single(kinds[0], kinds[0].value, cfg.epochs)

    left = single(kinds[0], f"left.{kinds[0].value}", pretrain_epochs)
    right = single(kinds[1], f"right.{kinds[1].value}", pretrain_epochs)
    fusion = build_fusion_model(left, right,
                                seed=derive_seed(cfg.seed, "fusion", fold_index))
    settings = TrainSettings(epochs=finetune_epochs,
                             shuffle_seed=derive_seed(cfg.seed, "shuffle.fusion", fold_index),
                             **common)
    log = train_model(fusion, data, settings)
    if log_sink is not None:
        log_sink.append({"stage": "fusion", "fold": fold_index, **log.summary()})
    if raw_logs is not None:
        raw_logs.append(log)
    return fusion
