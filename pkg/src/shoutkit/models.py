"""Model assembly: single-feature networks, the two-branch fusion network,
and the three task heads.

Architectures operate on 20-frame feature blocks:

  cnn      3 x (conv 5x5/16ch + max-pool along the feature axis), flatten,
           dense, ReLU, head
  gru      BiGRU over the 20 frames, final state, dense, ReLU, head
  cnn_gru  conv/pool stack, per-frame features to a BiGRU, final state,
           dense, ReLU, head

High-dimensional features (spectrogram, cepstrogram, 512 per frame) and
low-dimensional ones (mel spectrogram, tMFCCs, 30 per frame) use different
width tables. The fusion network concatenates the last-ReLU embeddings of two
pretrained single-feature networks, passes them through one dense layer with
ReLU, and attaches a fresh head; every parameter stays trainable.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateInputError, ShapeError
from .features import BLOCK_FRAMES, FeatureBlock, FeatureKind
from .neural import (BiGRU, Conv2d, Dense, LossKind, MaxPool2d, Tensor,
                     load_checkpoint, no_grad, save_checkpoint)
from .neural import tensor as T


class Arch(Enum):
    CNN = "cnn"
    GRU = "gru"
    CNN_GRU = "cnn_gru"
    MLP_BASELINE = "mlp_baseline_standin"


class HeadKind(Enum):
    BINARY = "binary"
    FOUR_CLASS = "four_class"
    REGRESSION = "regression"

    @property
    def n_outputs(self) -> int:
        return 4 if self is HeadKind.FOUR_CLASS else 1

    @property
    def loss_kind(self) -> LossKind:
        if self is HeadKind.FOUR_CLASS:
            return LossKind.CROSS_ENTROPY
        return LossKind.MEAN_SQUARED_ERROR


def parse_arch(name: str) -> Arch:
    try:
        return Arch(name.strip().lower())
    except ValueError:
        raise ConfigError(f"unknown architecture {name!r}")


def parse_head(name: str) -> HeadKind:
    try:
        return HeadKind(name.strip().lower())
    except ValueError:
        raise ConfigError(f"unknown task head {name!r}")


@dataclass(frozen=True)
class ModelDimTable:
    """Layer width table; d1..d4 are feature-axis sizes through the pools,
    d5 the first dense width, (gru_d1, gru_d2) the BiGRU/dense widths of the
    GRU model, d6 the dense width of the CNN-GRU model."""

    variant: str
    d1: int
    d2: int
    d3: int
    d4: int
    d5: int
    gru_d1: int
    gru_d2: int
    d6: int
    pool_kernel: int
    channels: int = 16

    def scaled(self, factor: int) -> "ModelDimTable":
        """Reduced-width clone: widths divided by ``factor``, topology kept."""
        if factor == 1:
            return self
        shrink = lambda v: max(1, v // factor)
        return ModelDimTable(
            variant=self.variant, d1=self.d1, d2=self.d2, d3=self.d3, d4=self.d4,
            d5=shrink(self.d5), gru_d1=max(2, (self.gru_d1 // factor) // 2 * 2),
            gru_d2=shrink(self.gru_d2), d6=shrink(self.d6),
            pool_kernel=self.pool_kernel, channels=max(1, self.channels // factor))


HIGH_DIM_TABLE = ModelDimTable(variant="high", d1=512, d2=102, d3=20, d4=4, d5=64,
                               gru_d1=1024, gru_d2=64, d6=64, pool_kernel=5)
LOW_DIM_TABLE = ModelDimTable(variant="low", d1=30, d2=10, d3=3, d4=1, d5=16,
                              gru_d1=60, gru_d2=16, d6=16, pool_kernel=3)


def dim_table_for_kind(kind: FeatureKind) -> ModelDimTable:
    if kind in (FeatureKind.SPECTROGRAM, FeatureKind.CEPSTROGRAM):
        return HIGH_DIM_TABLE
    if kind in (FeatureKind.MEL_SPECTROGRAM, FeatureKind.TMFCC):
        return LOW_DIM_TABLE
    raise ConfigError(f"feature kind {kind.value} has no single-feature architecture; "
                      "it is served by the baseline MLP")


class TaskHead:
    """Final dense layer plus the task-specific output mapping."""

    def __init__(self, kind: HeadKind, embedding_dim: int, rng, dtype):
        self.kind = kind
        self.dense = Dense(embedding_dim, kind.n_outputs, rng, dtype)

    def __call__(self, embedding: Tensor) -> Tensor:
        z = self.dense(embedding)
        if self.kind is HeadKind.BINARY:
            return T.sigmoid(z)
        if self.kind is HeadKind.FOUR_CLASS:
            return T.softmax(z, axis=1)
        # Regression output bounded into [1, 7] smoothly, so gradients exist
        # everywhere: 1 + 6 * sigmoid(z).
        return 1.0 + 6.0 * T.sigmoid(z)

    def parameters(self):
        return {f"head.{k}": v for k, v in self.dense.parameters().items()}


class NetworkGraph:
    """A built architecture instance: layers, dimension ledger, task head.

    Instances are single-writer during forward/backward; a trained model is
    immutable under inference calls and can be shared across evaluation
    workers.
    """

    arch: Arch
    kinds: tuple[FeatureKind, ...]
    head: TaskHead
    dims: ModelDimTable
    dtype: np.dtype
    seed: int
    width_scale: int

    def embed(self, x, ledger=None) -> Tensor:
        raise NotImplementedError

    def forward(self, x) -> Tensor:
        return self.head(self.embed(x))

    __call__ = forward

    def parameters(self) -> dict[str, Tensor]:
        raise NotImplementedError

    def zero_grad(self):
        for p in self.parameters().values():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        params = self.parameters()
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise ConfigError(f"checkpoint mismatch; missing {sorted(missing)}, "
                              f"unexpected {sorted(extra)}")
        for name, p in params.items():
            value = np.asarray(state[name], dtype=p.data.dtype)
            if value.shape != p.data.shape:
                raise ShapeError(f"parameter {name}: checkpoint shape {value.shape} "
                                 f"!= model shape {p.data.shape}")
            p.data = value.copy()

    def shape_ledger(self) -> dict[str, object]:
        """Realized intermediate sizes, from a probe forward pass."""
        ledger: dict[str, object] = {}
        with no_grad():
            self.embed(self._probe_input(), ledger=ledger)
        return ledger

    def _probe_input(self):
        raise NotImplementedError

    def _as_tensor(self, x) -> Tensor:
        if isinstance(x, Tensor):
            return x
        return Tensor(np.asarray(x, dtype=self.dtype))


class SingleFeatureModel(NetworkGraph):
    def __init__(self, arch: Arch, kind: FeatureKind, head_kind: HeadKind, seed: int,
                 dtype=np.float64, width_scale: int = 1, gru_concat_width: bool = True):
        if arch not in (Arch.CNN, Arch.GRU, Arch.CNN_GRU):
            raise ConfigError(f"unknown single-feature architecture {arch}")
        self.arch = arch
        self.kind = kind
        self.kinds = (kind,)
        self.seed = seed
        self.dtype = np.dtype(dtype)
        self.width_scale = width_scale
        self.gru_concat_width = gru_concat_width
        self.dims = dim_table_for_kind(kind).scaled(width_scale)
        d = self.dims
        rng = np.random.default_rng(seed)

        if arch in (Arch.CNN, Arch.CNN_GRU):
            self.convs = []
            self.pools = []
            in_ch = 1
            for _ in range(3):
                self.convs.append(Conv2d(in_ch, d.channels, kernel=5, padding=2,
                                         rng=rng, dtype=self.dtype))
                self.pools.append(MaxPool2d(d.pool_kernel, 1))
                in_ch = d.channels
            self.pooled_heights = []
            h = d.d1
            for _ in range(3):
                h = h // d.pool_kernel
                self.pooled_heights.append(h)

        if arch is Arch.CNN:
            flat = d.channels * self.pooled_heights[-1] * BLOCK_FRAMES
            self.dense = Dense(flat, d.d5, rng, self.dtype)
            self.embedding_dim = d.d5
        elif arch is Arch.GRU:
            per_direction = d.gru_d1 // 2 if gru_concat_width else d.gru_d1
            self.bigru = BiGRU(d.d1, per_direction, rng, self.dtype)
            self.dense = Dense(2 * per_direction, d.gru_d2, rng, self.dtype)
            self.embedding_dim = d.gru_d2
        else:  # CNN_GRU
            per_frame = d.channels * self.pooled_heights[-1]
            self.bigru = BiGRU(per_frame, max(1, d.d5 // 2), rng, self.dtype)
            self.dense = Dense(2 * max(1, d.d5 // 2), d.d6, rng, self.dtype)
            self.embedding_dim = d.d6

        self.head = TaskHead(head_kind, self.embedding_dim, rng, self.dtype)

    def _probe_input(self):
        return np.zeros((1, self.dims.d1, BLOCK_FRAMES), dtype=self.dtype)

    def _conv_stack(self, t: Tensor, ledger=None) -> Tensor:
        heights = []
        if ledger is not None:
            ledger["input_height"] = t.data.shape[2]
        for conv, pool in zip(self.convs, self.pools):
            t = pool(T.relu(conv(t)))
            heights.append(t.data.shape[2])
        if ledger is not None:
            ledger["pooled_heights"] = heights
            ledger["conv_output"] = list(t.data.shape[1:])
        return t

    def embed(self, x, ledger=None) -> Tensor:
        t = self._as_tensor(x)
        if t.data.ndim == 2:
            t = T.reshape(t, (1,) + t.data.shape)
        if t.data.ndim != 3 or t.data.shape[1] != self.dims.d1 or t.data.shape[2] != BLOCK_FRAMES:
            raise ShapeError(f"expected blocks of shape (N, {self.dims.d1}, {BLOCK_FRAMES}), "
                             f"got {t.data.shape}")
        n = t.data.shape[0]

        if self.arch is Arch.CNN:
            t = T.reshape(t, (n, 1, self.dims.d1, BLOCK_FRAMES))
            t = self._conv_stack(t, ledger)
            flat_dim = t.data.shape[1] * t.data.shape[2] * t.data.shape[3]
            t = T.reshape(t, (n, flat_dim))
            if ledger is not None:
                ledger["flatten"] = flat_dim
        elif self.arch is Arch.GRU:
            t = T.transpose(t, (0, 2, 1))  # (N, 20, D)
            sequence, final = self.bigru(t)
            if ledger is not None:
                ledger["bigru_sequence"] = list(sequence.data.shape[1:])
                ledger["bigru_width"] = final.data.shape[1]
            t = final
        else:  # CNN_GRU
            t = T.reshape(t, (n, 1, self.dims.d1, BLOCK_FRAMES))
            t = self._conv_stack(t, ledger)
            c, h, w = t.data.shape[1], t.data.shape[2], t.data.shape[3]
            t = T.transpose(t, (0, 3, 1, 2))  # (N, 20, C, H)
            t = T.reshape(t, (n, w, c * h))
            if ledger is not None:
                ledger["per_frame_dim"] = c * h
            sequence, final = self.bigru(t)
            if ledger is not None:
                ledger["bigru_sequence"] = list(sequence.data.shape[1:])
                ledger["bigru_width"] = final.data.shape[1]
            t = final

        emb = T.relu(self.dense(t))
        if ledger is not None:
            ledger["dense"] = emb.data.shape[1]
            ledger["embedding"] = self.embedding_dim
        return emb

    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        if self.arch in (Arch.CNN, Arch.CNN_GRU):
            for i, conv in enumerate(self.convs):
                for name, p in conv.parameters().items():
                    params[f"conv{i + 1}.{name}"] = p
        if self.arch in (Arch.GRU, Arch.CNN_GRU):
            for name, p in self.bigru.parameters().items():
                params[f"bigru.{name}"] = p
        for name, p in self.dense.parameters().items():
            params[f"dense.{name}"] = p
        params.update(self.head.parameters())
        return params


class BaselineMlp(NetworkGraph):
    """Stand-in multilayer perceptron for the MFCC+second-derivative baseline.

    The reference system's exact network is external to this project, so a
    plain 1200-512-512 MLP with ReLU is used and labeled as a stand-in in all
    reports.
    """

    HIDDEN = 512

    def __init__(self, head_kind: HeadKind, seed: int, dtype=np.float64,
                 width_scale: int = 1):
        self.arch = Arch.MLP_BASELINE
        self.kind = FeatureKind.MFCC_DELTA_DELTA
        self.kinds = (self.kind,)
        self.seed = seed
        self.dtype = np.dtype(dtype)
        self.width_scale = width_scale
        self.dims = None
        hidden = max(1, self.HIDDEN // width_scale)
        self.input_dim = self.kind.dim * BLOCK_FRAMES
        rng = np.random.default_rng(seed)
        self.dense1 = Dense(self.input_dim, hidden, rng, self.dtype)
        self.dense2 = Dense(hidden, hidden, rng, self.dtype)
        self.embedding_dim = hidden
        self.head = TaskHead(head_kind, hidden, rng, self.dtype)

    def _probe_input(self):
        return np.zeros((1, self.kind.dim, BLOCK_FRAMES), dtype=self.dtype)

    def embed(self, x, ledger=None) -> Tensor:
        t = self._as_tensor(x)
        if t.data.ndim == 2:
            t = T.reshape(t, (1,) + t.data.shape)
        if t.data.shape[1:] != (self.kind.dim, BLOCK_FRAMES):
            raise ShapeError(f"expected (N, {self.kind.dim}, {BLOCK_FRAMES}), got {t.data.shape}")
        n = t.data.shape[0]
        t = T.reshape(t, (n, self.input_dim))
        if ledger is not None:
            ledger["flatten"] = self.input_dim
        t = T.relu(self.dense1(t))
        emb = T.relu(self.dense2(t))
        if ledger is not None:
            ledger["dense"] = emb.data.shape[1]
            ledger["embedding"] = self.embedding_dim
        return emb

    def parameters(self) -> dict[str, Tensor]:
        params = {}
        for tag, layer in (("dense1", self.dense1), ("dense2", self.dense2)):
            for name, p in layer.parameters().items():
                params[f"{tag}.{name}"] = p
        params.update(self.head.parameters())
        return params


class FusionModel(NetworkGraph):
    """Two pretrained single-feature branches, embeddings concatenated."""

    def __init__(self, left: SingleFeatureModel, right: SingleFeatureModel,
                 seed: int):
        if left.arch is not right.arch:
            raise ConfigError(f"fusion branches must share an architecture family, "
                              f"got {left.arch.value} and {right.arch.value}")
        if left.head.kind is not right.head.kind:
            raise ConfigError(f"fusion branches must share a task head, got "
                              f"{left.head.kind.value} and {right.head.kind.value}")
        if left.dims.variant != right.dims.variant:
            raise ConfigError("cannot fuse a high-dimensional branch with a "
                              "low-dimensional one")
        self.arch = left.arch
        self.left = left
        self.right = right
        self.kinds = (left.kind, right.kind)
        self.seed = seed
        self.dtype = left.dtype
        self.width_scale = left.width_scale
        self.dims = left.dims
        self.concat_dim = left.embedding_dim + right.embedding_dim
        self.embedding_dim = self.concat_dim
        rng = np.random.default_rng(seed)
        self.fusion_dense = Dense(self.concat_dim, self.concat_dim, rng, self.dtype)
        self.head = TaskHead(left.head.kind, self.concat_dim, rng, self.dtype)

    def _probe_input(self):
        return (self.left._probe_input(), self.right._probe_input())

    def embed(self, x, ledger=None) -> Tensor:
        if not isinstance(x, tuple) or len(x) != 2:
            raise ShapeError("fusion model expects a (left_blocks, right_blocks) pair")
        left_ledger = {} if ledger is not None else None
        right_ledger = {} if ledger is not None else None
        emb_left = self.left.embed(x[0], left_ledger)
        emb_right = self.right.embed(x[1], right_ledger)
        joined = T.concat([emb_left, emb_right], axis=1)
        if ledger is not None:
            ledger["left"] = left_ledger
            ledger["right"] = right_ledger
            ledger["concat"] = joined.data.shape[1]
        emb = T.relu(self.fusion_dense(joined))
        if ledger is not None:
            ledger["dense"] = emb.data.shape[1]
        return emb

    def parameters(self) -> dict[str, Tensor]:
        params = {}
        for name, p in self.left.parameters().items():
            params[f"left.{name}"] = p
        for name, p in self.right.parameters().items():
            params[f"right.{name}"] = p
        for name, p in self.fusion_dense.parameters().items():
            params[f"fusion.{name}"] = p
        # the branch heads stay out: the fusion head replaces them
        params = {k: v for k, v in params.items() if ".head." not in k}
        params.update(self.head.parameters())
        return params


def build_single_model(arch: Arch | str, kind: FeatureKind, head: HeadKind | str,
                       seed: int = 0, dtype=np.float64, width_scale: int = 1,
                       gru_concat_width: bool = True) -> SingleFeatureModel:
    arch = parse_arch(arch) if isinstance(arch, str) else arch
    head = parse_head(head) if isinstance(head, str) else head
    if arch is Arch.MLP_BASELINE:
        raise ConfigError("use build_baseline_mlp for the stand-in baseline")
    return SingleFeatureModel(arch, kind, head, seed=seed, dtype=dtype,
                              width_scale=width_scale, gru_concat_width=gru_concat_width)


def build_baseline_mlp(head: HeadKind | str, seed: int = 0, dtype=np.float64,
                       width_scale: int = 1) -> BaselineMlp:
    head = parse_head(head) if isinstance(head, str) else head
    return BaselineMlp(head, seed=seed, dtype=dtype, width_scale=width_scale)


def build_fusion_model(left: SingleFeatureModel, right: SingleFeatureModel,
                       seed: int = 0) -> FusionModel:
    return FusionModel(left, right, seed=seed)


@dataclass
class ClipPrediction:
    """Clip-level decision from averaged block outputs."""

    head: HeadKind
    label: int | None = None          # 1 = shout for binary; class index for 4-way
    value: float | None = None        # regression output in [1, 7]
    probability: float | None = None  # binary mean probability
    probabilities: np.ndarray | None = None
    tie: bool = False


def predict_clip(model: NetworkGraph, blocks) -> ClipPrediction:
    """Average block outputs into one clip decision.

    ``blocks`` is a list of FeatureBlock for a single-feature model, or a list
    of (left, right) FeatureBlock pairs for a fusion model.
    """
    if not blocks:
        raise DegenerateInputError("predict_clip needs at least one feature block")
    if isinstance(model, FusionModel):
        left = np.stack([_block_data(b[0]) for b in blocks])
        right = np.stack([_block_data(b[1]) for b in blocks])
        batch = (left, right)
    else:
        batch = np.stack([_block_data(b) for b in blocks])
    with no_grad():
        out = model.forward(batch).data
    head = model.head.kind
    if head is HeadKind.BINARY:
        p = float(out.mean())
        return ClipPrediction(head=head, label=int(p > 0.5), probability=p)
    if head is HeadKind.FOUR_CLASS:
        probs = out.mean(axis=0)
        top = probs.max()
        tie = int((probs == top).sum()) > 1
        return ClipPrediction(head=head, label=int(probs.argmax()),
                              probabilities=probs, tie=tie)
    value = float(np.clip(out.mean(), 1.0, 7.0))
    return ClipPrediction(head=head, value=value)


def _block_data(block) -> np.ndarray:
    return block.data if isinstance(block, FeatureBlock) else np.asarray(block)


# -- descriptor + checkpoint persistence -----------------------------------------


def save_model(model: NetworkGraph, directory, name: str) -> Path:
    """Write <name>.ckpt and a human-readable <name>.descriptor; returns the
    descriptor path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ckpt = directory / f"{name}.ckpt"
    save_checkpoint(model.state_dict(), ckpt)
    lines = [
        f"arch = {model.arch.value}",
        f"features = {'+'.join(k.value for k in model.kinds)}",
        f"head = {model.head.kind.value}",
        f"seed = {model.seed}",
        f"dtype = {np.dtype(model.dtype).name}",
        f"width_scale = {model.width_scale}",
        f"checkpoint = {ckpt.name}",
    ]
    if isinstance(model, SingleFeatureModel) and model.arch is Arch.GRU:
        lines.append(f"gru_concat_width = {model.gru_concat_width}")
    if model.dims is not None:
        d = model.dims
        lines.append(f"variant = {d.variant}")
        lines.append(f"dims = {d.d1},{d.d2},{d.d3},{d.d4},{d.d5} "
                     f"gru={d.gru_d1},{d.gru_d2} d6={d.d6} "
                     f"pool={d.pool_kernel} channels={d.channels}")
    descriptor = directory / f"{name}.descriptor"
    descriptor.write_text("\n".join(lines) + "\n")
    return descriptor


def load_model(descriptor_path) -> NetworkGraph:
    descriptor_path = Path(descriptor_path)
    fields: dict[str, str] = {}
    for line in descriptor_path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    try:
        arch = Arch(fields["arch"])
        kinds = tuple(FeatureKind(k) for k in fields["features"].split("+"))
        head = HeadKind(fields["head"])
        seed = int(fields["seed"])
        dtype = np.dtype(fields["dtype"])
        width_scale = int(fields.get("width_scale", "1"))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad model descriptor {descriptor_path}: {exc}") from exc
    if arch is Arch.MLP_BASELINE:
        model: NetworkGraph = build_baseline_mlp(head, seed=seed, dtype=dtype,
                                                 width_scale=width_scale)
    elif len(kinds) == 2:
        concat = fields.get("gru_concat_width", "True") == "True"
        left = build_single_model(arch, kinds[0], head, seed=seed, dtype=dtype,
                                  width_scale=width_scale, gru_concat_width=concat)
        right = build_single_model(arch, kinds[1], head, seed=seed + 1, dtype=dtype,
                                   width_scale=width_scale, gru_concat_width=concat)
        model = build_fusion_model(left, right, seed=seed)
    else:
        concat = fields.get("gru_concat_width", "True") == "True"
        model = build_single_model(arch, kinds[0], head, seed=seed, dtype=dtype,
                                   width_scale=width_scale, gru_concat_width=concat)
    model.load_state_dict(load_checkpoint(descriptor_path.parent / fields["checkpoint"]))
    return model
