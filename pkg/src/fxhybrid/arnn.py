"""Attention-based encoder-decoder recurrent network (ARNN).

Encoder: stacked simple RNNs over indicator windows, projected per step.
Decoder: stacked LSTMs over the exogenous close window, projected per step.
Attention: dot-product scores, softmax over encoder steps, context fused with
the decoder state by elementwise product. Head: LSTM over the fused sequence,
last state through dense layers to a scalar.

``kind="rnn"`` and ``kind="lstm"`` give the plain baselines used in the
benchmark: a stack over the concatenated ``[X; Z]`` window followed by the
same dense head.
"""
from __future__ import annotations

import json
import logging
import struct
import zlib
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DataError, NumericError, WeightFileError
from .nn import tape as tp
from .nn.init import glorot_uniform
from .nn.optim import AdamState, adam_update, sgd_update
from .nn.recurrent import GATES, DenseParams, LstmParams, RnnParams, lstm_sequence, rnn_sequence

logger = logging.getLogger(__name__)

KINDS = ("arnn", "rnn", "lstm")
OPTIMIZERS = {"adam": adam_update, "sgd": sgd_update}
MAGIC = b"ARNN"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ArnnArchitecture:
    T: int = 10
    encoder_layers: tuple = (64, 32)
    decoder_layers: tuple = (64, 32)
    step_feature_dim: int = 10
    head_rnn_width: int = 32
    head_dense: tuple = (16, 1)
    n_features: int = 16
    n_exo: int = 1
    kind: str = "arnn"
    forget_bias: float = 1.0
    rnn_bias: bool = True

    def __post_init__(self):
        for name in ("encoder_layers", "decoder_layers", "head_dense"):
            object.__setattr__(self, name, tuple(int(w) for w in getattr(self, name)))
        if self.kind not in KINDS:
            raise DataError(f"unknown architecture kind {self.kind!r}; expected one of {KINDS}")
        if not self.head_dense or self.head_dense[-1] != 1:
            raise DataError("head_dense must end in a width-1 layer")
        sizes = [self.T, self.step_feature_dim, self.head_rnn_width, self.n_features, self.n_exo]
        sizes += list(self.encoder_layers) + list(self.decoder_layers) + list(self.head_dense)
        if min(sizes) < 1:
            raise DataError("all architecture sizes must be positive")
        if self.kind == "arnn" and not (self.encoder_layers and self.decoder_layers):
            raise DataError("ARNN needs at least one encoder and one decoder layer")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("encoder_layers", "decoder_layers", "head_dense"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ArnnArchitecture":
        return cls(**d)

    def tensor_shapes(self) -> dict:
        """Name -> shape for every trainable tensor, in canonical order."""
        shapes = {}

        def add_lstm(prefix, n_in, m):
            for g in GATES:
                shapes[f"{prefix}.W_{g}"] = (m, m + n_in)
            for g in GATES:
                shapes[f"{prefix}.b_{g}"] = (m,)

        def add_rnn(prefix, n_in, m):
            shapes[f"{prefix}.W_hh"] = (m, m)
            shapes[f"{prefix}.W_xh"] = (m, n_in)
            if self.rnn_bias:
                shapes[f"{prefix}.b"] = (m,)

        def add_dense(prefix, n_in, m):
            shapes[f"{prefix}.W"] = (m, n_in)
            shapes[f"{prefix}.b"] = (m,)

        if self.kind == "arnn":
            width = self.n_features
            for k, m in enumerate(self.encoder_layers):
                add_rnn(f"encoder.{k}", width, m)
                width = m
            add_dense("encoder.proj", width, self.step_feature_dim)
            width = self.n_exo
            for k, m in enumerate(self.decoder_layers):
                add_lstm(f"decoder.{k}", width, m)
                width = m
            add_dense("decoder.proj", width, self.step_feature_dim)
            add_lstm("head.lstm", self.step_feature_dim, self.head_rnn_width)
            width = self.head_rnn_width
        else:
            width = self.n_features + self.n_exo
            layers = self.encoder_layers if self.kind == "rnn" else self.decoder_layers
            for k, m in enumerate(layers):
                (add_rnn if self.kind == "rnn" else add_lstm)(f"stack.{k}", width, m)
                width = m
        for k, m in enumerate(self.head_dense):
            add_dense(f"head.dense.{k}", width, m)
            width = m
        return shapes


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    epochs: int = 100
    learning_rate: float = 0.001
    seed: int = 0
    keep_best: bool = True
    optimizer: str = "adam"

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 0 or not self.learning_rate > 0:
            raise DataError("batch_size and learning_rate must be positive, epochs non-negative")
        if self.optimizer not in OPTIMIZERS:
            raise DataError(f"optimizer must be one of {tuple(OPTIMIZERS)}")


@dataclass(frozen=True, eq=False)
class ArnnWeights:
    architecture: ArnnArchitecture
    tensors: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = self.architecture.tensor_shapes()
        if set(shapes) != set(self.tensors):
            missing = sorted(set(shapes) - set(self.tensors))
            extra = sorted(set(self.tensors) - set(shapes))
            raise DataError(f"tensor names do not match the architecture (missing {missing}, extra {extra})")
        ordered = {}
        for name, shape in shapes.items():
            a = np.asarray(self.tensors[name], dtype=np.float64)
            if a.shape != shape:
                raise DataError(f"tensor {name} has shape {a.shape}, architecture needs {shape}")
            if not np.all(np.isfinite(a)):
                raise DataError(f"tensor {name} has non-finite values")
            ordered[name] = a
        object.__setattr__(self, "tensors", ordered)

    def lstm(self, prefix: str) -> LstmParams:
        t = self.tensors
        return LstmParams(*[t[f"{prefix}.W_{g}"] for g in GATES], *[t[f"{prefix}.b_{g}"] for g in GATES])

    def rnn(self, prefix: str) -> RnnParams:
        return RnnParams(self.tensors[f"{prefix}.W_hh"], self.tensors[f"{prefix}.W_xh"],
                         self.tensors.get(f"{prefix}.b"))

    def dense(self, prefix: str, activation: str = "identity") -> DenseParams:
        return DenseParams(self.tensors[f"{prefix}.W"], self.tensors[f"{prefix}.b"], activation)

    def n_parameters(self) -> int:
        return int(sum(a.size for a in self.tensors.values()))


def init_weights(arch: ArnnArchitecture, seed: int = 0) -> ArnnWeights:
    """Glorot-uniform matrices, zero biases, LSTM forget bias ``arch.forget_bias``."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in arch.tensor_shapes().items():
        if len(shape) == 2:
            tensors[name] = glorot_uniform(rng, shape)
        elif name.endswith(".b_f"):
            tensors[name] = np.full(shape, float(arch.forget_bias))
        else:
            tensors[name] = np.zeros(shape)
    return ArnnWeights(arch, tensors, {"seed": seed, "epochs_run": 0})


# ---------------------------------------------------------------- forward


def _lstm_layer(p: dict, prefix: str, x):
    return lstm_sequence(x, *[p[f"{prefix}.W_{g}"] for g in GATES], *[p[f"{prefix}.b_{g}"] for g in GATES])


def _rnn_layer(p: dict, prefix: str, x):
    return rnn_sequence(x, p[f"{prefix}.W_hh"], p[f"{prefix}.W_xh"], p.get(f"{prefix}.b"))


def _batch(x, width: int, T: int, what: str) -> np.ndarray:
    a = np.asarray(x.value if isinstance(x, tp.Tensor) else x, dtype=np.float64)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3 or a.shape[1:] != (T, width):
        raise DataError(f"{what} window must be (T={T}, {width}), got {a.shape[-2:] if a.ndim >= 2 else a.shape}")
    return a


def _encode(p: dict, arch: ArnnArchitecture, X):
    h = X
    for k in range(len(arch.encoder_layers)):
        h = _rnn_layer(p, f"encoder.{k}", h)
    return tp.relu(tp.dense(h, p["encoder.proj.W"], p["encoder.proj.b"]))


def _decode(p: dict, arch: ArnnArchitecture, Z):
    h = Z
    for k in range(len(arch.decoder_layers)):
        h = _lstm_layer(p, f"decoder.{k}", h)
    return tp.relu(tp.dense(h, p["decoder.proj.W"], p["decoder.proj.b"]))


def _attend(E, D):
    scores = tp.bmm(D, tp.transpose12(E))  # (B, T_dec, T_enc)
    alpha = tp.softmax(scores, axis=-1)
    context = tp.bmm(alpha, E)
    return tp.mul(D, context), alpha


def _head(p: dict, arch: ArnnArchitecture, seq):
    n = len(arch.head_dense)
    h = seq
    for k in range(n):
        h = tp.dense(h, p[f"head.dense.{k}.W"], p[f"head.dense.{k}.b"])
        if k < n - 1:
            h = tp.relu(h)
    return h


def forward(params: dict, arch: ArnnArchitecture, X, Z):
    """Batched forward pass over tape ops; returns predictions of shape (B,)."""
    if arch.kind == "arnn":
        fused, _ = _attend(_encode(params, arch, X), _decode(params, arch, Z))
        H = _lstm_layer(params, "head.lstm", fused)
    else:
        Xv = X.value if isinstance(X, tp.Tensor) else X
        Zv = Z.value if isinstance(Z, tp.Tensor) else Z
        H = np.concatenate([Xv, Zv], axis=-1)
        layers = arch.encoder_layers if arch.kind == "rnn" else arch.decoder_layers
        for k in range(len(layers)):
            H = (_rnn_layer if arch.kind == "rnn" else _lstm_layer)(params, f"stack.{k}", H)
    last = tp.getitem(H, (slice(None), -1))
    out = _head(params, arch, last)
    return tp.reshape(out, (out.value.shape[0],))


def encode(weights: ArnnWeights, X_window) -> np.ndarray:
    arch = weights.architecture
    if arch.kind != "arnn":
        raise DataError("encode is only defined for the ARNN architecture")
    X = _batch(X_window, arch.n_features, arch.T, "encoder")
    out = _encode(weights.tensors, arch, X).value
    return out[0] if np.ndim(X_window) == 2 else out


def decode(weights: ArnnWeights, Z_window) -> np.ndarray:
    arch = weights.architecture
    if arch.kind != "arnn":
        raise DataError("decode is only defined for the ARNN architecture")
    Z = _batch(Z_window, arch.n_exo, arch.T, "decoder")
    out = _decode(weights.tensors, arch, Z).value
    return out[0] if np.ndim(Z_window) == 2 else out


def attention_weights(encoder_states, decoder_states) -> np.ndarray:
    E = np.asarray(encoder_states, dtype=np.float64)
    D = np.asarray(decoder_states, dtype=np.float64)
    if E.ndim != 2 or D.ndim != 2 or E.shape[1] != D.shape[1]:
        raise DataError(f"attention needs (T, d) inputs with equal d, got {E.shape} and {D.shape}")
    s = D @ E.T
    e = np.exp(s - s.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def attend(encoder_states, decoder_states) -> np.ndarray:
    """Fused sequence ``d_i * sum_j alpha_ij e_j`` with ``alpha_i = softmax(<d_i, e_j>)``."""
    alpha = attention_weights(encoder_states, decoder_states)
    E = np.asarray(encoder_states, dtype=np.float64)
    return np.asarray(decoder_states, dtype=np.float64) * (alpha @ E)


def predict(weights: ArnnWeights, X_window, Z_window) -> float:
    """Scalar prediction (normalized units) for one window."""
    arch = weights.architecture
    X = _batch(X_window, arch.n_features, arch.T, "encoder")
    Z = _batch(Z_window, arch.n_exo, arch.T, "decoder")
    if X.shape[0] != 1 or Z.shape[0] != 1:
        raise DataError("predict takes a single window; use predict_batch")
    return float(forward(weights.tensors, arch, X, Z).value[0])


def predict_batch(weights: ArnnWeights, X, Z, batch_size: int = 1024) -> np.ndarray:
    arch = weights.architecture
    X = _batch(X, arch.n_features, arch.T, "encoder")
    Z = _batch(Z, arch.n_exo, arch.T, "decoder")
    if X.shape[0] != Z.shape[0]:
        raise DataError("X and Z hold different numbers of windows")
    out = np.empty(X.shape[0])
    for s in range(0, X.shape[0], batch_size):
        out[s:s + batch_size] = forward(weights.tensors, arch, X[s:s + batch_size], Z[s:s + batch_size]).value
    return out


def loss_and_grads(params: dict, arch: ArnnArchitecture, X, Z, y):
    """MSE loss and its gradient for every tensor in ``params``."""
    leaves = {k: tp.Tensor(v, name=k) for k, v in params.items()}
    with tp.GradientTape() as tape:
        loss = tp.mse(forward(leaves, arch, X, Z), y)
    if not np.isfinite(loss.value):
        raise NumericError(_nan_hint(float(loss.value)))
    names = list(leaves)
    grads = tape.gradient(loss, [leaves[k] for k in names])
    return float(loss.value), dict(zip(names, grads))


def _nan_hint(value: float) -> str:
    return (f"training loss became {value}; try a smaller learning rate, and check the "
            "inputs are min-max scaled and free of NaN rows")


# ---------------------------------------------------------------- training


def _mse(weights_params: dict, arch, ds) -> float:
    if ds is None or len(ds) == 0:
        return float("nan")
    pred = np.empty(len(ds))
    for s in range(0, len(ds), 1024):
        pred[s:s + 1024] = forward(weights_params, arch, ds.X[s:s + 1024], ds.Z[s:s + 1024]).value
    return float(np.mean((pred - ds.Y) ** 2))


def train(train_set, arch: ArnnArchitecture = ArnnArchitecture(), cfg: TrainConfig = TrainConfig(),
          val_set=None, init: Optional[ArnnWeights] = None) -> ArnnWeights:
    """Adam (or plain SGD) on MSE over seeded shuffled mini-batches.

    With ``cfg.keep_best`` and a non-empty ``val_set`` the weights with the
    lowest validation loss seen (including the initialisation) are returned.
    Loss curves are stored in ``metadata``.
    """
    if len(train_set) == 0:
        raise DataError("empty training set")
    _batch(train_set.X[:1], arch.n_features, arch.T, "encoder")
    _batch(train_set.Z[:1], arch.n_exo, arch.T, "decoder")
    weights = init if init is not None else init_weights(arch, cfg.seed)
    params = dict(weights.tensors)
    rng = np.random.default_rng([cfg.seed, 1])
    step = OPTIMIZERS[cfg.optimizer]
    state = AdamState()
    has_val = val_set is not None and len(val_set) > 0
    train_curve, val_curve = [], []
    best_val = _mse(params, arch, val_set) if has_val else float("nan")
    best_params, best_epoch = params, 0
    n = len(train_set)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            loss, grads = loss_and_grads(params, arch, train_set.X[idx], train_set.Z[idx], train_set.Y[idx])
            total += loss * idx.shape[0]
            params, state = step(params, grads, state, lr=cfg.learning_rate)
        train_curve.append(total / n)
        if has_val:
            v = _mse(params, arch, val_set)
            if not np.isfinite(v):
                raise NumericError(_nan_hint(v))
            val_curve.append(v)
            if v < best_val or not cfg.keep_best:
                best_val, best_params, best_epoch = v, params, epoch
        else:
            best_params, best_epoch = params, epoch
    meta = dict(weights.metadata)
    meta.update({
        "seed": cfg.seed,
        "epochs_run": cfg.epochs,
        "best_epoch": best_epoch,
        "best_val_loss": best_val if has_val else None,
        "train_loss": train_curve,
        "val_loss": val_curve,
        "train_config": asdict(cfg),
    })
    return ArnnWeights(arch, best_params, meta)


# ---------------------------------------------------------------- serialization


def _descriptor(weights: ArnnWeights) -> bytes:
    doc = {"architecture": weights.architecture.to_dict(), "metadata": weights.metadata}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False,
                      default=float).encode("utf-8")


def weights_to_bytes(weights: ArnnWeights) -> bytes:
    meta = {k: (None if isinstance(v, float) and not np.isfinite(v) else v)
            for k, v in weights.metadata.items()}
    desc = _descriptor(replace(weights, metadata=meta))
    parts = [MAGIC, struct.pack("<H", FORMAT_VERSION), struct.pack("<I", len(desc)), desc,
             struct.pack("<I", len(weights.tensors))]
    for name, a in weights.tensors.items():
        nb = name.encode("utf-8")
        parts.append(struct.pack("<H", len(nb)) + nb)
        parts.append(struct.pack("<I", a.ndim))
        parts.append(struct.pack(f"<{a.ndim}Q", *a.shape))
        parts.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def weights_from_bytes(blob: bytes, expect: Optional[ArnnArchitecture] = None) -> ArnnWeights:
    if len(blob) < 4 + 2 + 4 + 4 + 4 or blob[:4] != MAGIC:
        raise WeightFileError("not an ARNN weight file (bad magic or too short)")
    body, crc = blob[:-4], struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise WeightFileError("weight file checksum mismatch (file truncated or corrupted)")
    (version,) = struct.unpack_from("<H", body, 4)
    if version != FORMAT_VERSION:
        raise WeightFileError(f"unsupported weight file version {version} (expected {FORMAT_VERSION})")
    pos = 6
    (dlen,) = struct.unpack_from("<I", body, pos)
    pos += 4
    doc = json.loads(body[pos:pos + dlen].decode("utf-8"))
    pos += dlen
    try:
        arch = ArnnArchitecture.from_dict(doc["architecture"])
    except (TypeError, KeyError) as exc:
        raise WeightFileError(f"bad architecture descriptor: {exc}") from exc
    if expect is not None and arch != expect:
        raise WeightFileError(f"weight file architecture {arch} does not match {expect}")
    (count,) = struct.unpack_from("<I", body, pos)
    pos += 4
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", body, pos)
        pos += 2
        name = body[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (rank,) = struct.unpack_from("<I", body, pos)
        pos += 4
        dims = struct.unpack_from(f"<{rank}Q", body, pos)
        pos += 8 * rank
        size = int(np.prod(dims)) if rank else 1
        tensors[name] = np.frombuffer(body, dtype="<f8", count=size, offset=pos).astype(np.float64).reshape(dims)
        pos += 8 * size
    if pos != len(body):
        raise WeightFileError("trailing bytes after the last tensor")
    try:
        return ArnnWeights(arch, tensors, doc.get("metadata", {}))
    except DataError as exc:
        raise WeightFileError(f"tensors inconsistent with the architecture descriptor: {exc}") from exc


def save_weights(weights: ArnnWeights, path) -> None:
    with open(path, "wb") as fh:
        fh.write(weights_to_bytes(weights))


def load_weights(path, expect: Optional[ArnnArchitecture] = None) -> ArnnWeights:
    with open(path, "rb") as fh:
        return weights_from_bytes(fh.read(), expect)
