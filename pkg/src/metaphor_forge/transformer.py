"""Encoder-decoder transformer with training and greedy decoding.

Everything is plain numpy with hand-written backpropagation; the row-wise
hot loops (softmax, layer normalization, Adam, cross-entropy) live in
:mod:`.kernels` and come in numba and pure-numpy flavors.  Compute is
float64 so gradients can be checked against central finite differences;
checkpoints store float32.

Layout follows the post-normalization convention: each sublayer computes
``LayerNorm(x + Sublayer(x))``.  The token embedding matrix is shared by
the encoder input, the decoder input, and the output projection; input
embeddings are scaled by sqrt(d_model).  Masking is additive ``-inf``, so
causality and source-padding invariance hold exactly, not just within a
tolerance.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Sequence

import numpy as np

from . import kernels
from .mask_corpus import (
    BOS_ID,
    EOS_ID,
    Label,
    LabeledVerbInstance,
    MET,
    MaskingConfig,
    PAD_ID,
    Vocab,
    decode as decode_ids,
    encode as encode_tokens,
    window_trim,
)
from .text_core import TokenSentence

__all__ = [
    "TransformerConfig",
    "ModelParams",
    "OptimizerState",
    "ConfigError",
    "SequenceError",
    "NonFiniteLossError",
    "AllPadTargetError",
    "CheckpointError",
    "sinusoidal_position_table",
    "init_params",
    "init_optimizer",
    "forward",
    "loss",
    "train_step",
    "greedy_decode",
    "generate_metaphor",
    "save_checkpoint",
    "load_checkpoint",
]


class ConfigError(ValueError):
    """Raised for impossible model dimensions."""


class SequenceError(ValueError):
    """Raised for empty, overlong, or out-of-vocabulary id sequences."""


class NonFiniteLossError(FloatingPointError):
    """Raised when a training step produces a NaN or infinite loss."""


class AllPadTargetError(ValueError):
    """Raised when a loss target contains no non-padding positions."""


class CheckpointError(ValueError):
    """Raised for unreadable or mismatched checkpoint files."""


_LN_EPS = 1e-6


@dataclass(frozen=True)
class TransformerConfig:
    """Model dimensions.  Defaults are desk scale, not the full-size recipe."""

    vocab_size: int
    encoder_layers: int = 2
    decoder_layers: int = 2
    heads: int = 4
    d_model: int = 64
    d_ff: int = 256
    max_len: int = 64
    dropout_rate: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        dims = {
            "vocab_size": self.vocab_size,
            "encoder_layers": self.encoder_layers,
            "decoder_layers": self.decoder_layers,
            "heads": self.heads,
            "d_model": self.d_model,
            "d_ff": self.d_ff,
            "max_len": self.max_len,
        }
        for name, value in dims.items():
            if value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.d_model % self.heads != 0:
            raise ConfigError(
                f"d_model {self.d_model} is not divisible by heads {self.heads}"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


@dataclass
class ModelParams:
    config: TransformerConfig
    tensors: dict[str, np.ndarray]
    position_table: np.ndarray


@dataclass
class OptimizerState:
    """Adam accumulators plus the learning-rate schedule.

    ``schedule`` is either ``"warmup"`` (inverse-square-root warmup scaled
    by ``base_rate``) or ``"constant"`` (raw ``base_rate``, which diverges
    at large values and exists for comparison runs).
    """

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    base_rate: float = 0.5
    warmup_steps: int = 4000
    schedule: str = "warmup"
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    def learning_rate(self, d_model: int) -> float:
        if self.schedule == "constant":
            return self.base_rate
        step = max(self.step, 1)
        return (
            self.base_rate
            * d_model ** -0.5
            * min(step ** -0.5, step * self.warmup_steps ** -1.5)
        )


def sinusoidal_position_table(max_len: int, d_model: int) -> np.ndarray:
    positions = np.arange(max_len, dtype=np.float64)[:, None]
    dims = np.arange(d_model, dtype=np.float64)[None, :]
    angles = positions / np.power(10000.0, 2.0 * np.floor(dims / 2.0) / d_model)
    return np.where(dims % 2 == 0, np.sin(angles), np.cos(angles))


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _layer_names(config: TransformerConfig) -> list[tuple[str, tuple[int, ...]]]:
    d, f = config.d_model, config.d_ff
    attn = lambda prefix: [
        (f"{prefix}.wq", (d, d)),
        (f"{prefix}.wk", (d, d)),
        (f"{prefix}.wv", (d, d)),
        (f"{prefix}.wo", (d, d)),
    ]
    ln = lambda prefix: [(f"{prefix}.gain", (d,)), (f"{prefix}.bias", (d,))]
    ffn = lambda prefix: [
        (f"{prefix}.w1", (d, f)),
        (f"{prefix}.b1", (f,)),
        (f"{prefix}.w2", (f, d)),
        (f"{prefix}.b2", (d,)),
    ]
    names: list[tuple[str, tuple[int, ...]]] = [
        ("embedding", (config.vocab_size, d))
    ]
    for i in range(config.encoder_layers):
        names += attn(f"enc{i}.attn") + ln(f"enc{i}.ln1") + ffn(f"enc{i}.ffn") + ln(f"enc{i}.ln2")
    for i in range(config.decoder_layers):
        names += (
            attn(f"dec{i}.self")
            + ln(f"dec{i}.ln1")
            + attn(f"dec{i}.cross")
            + ln(f"dec{i}.ln2")
            + ffn(f"dec{i}.ffn")
            + ln(f"dec{i}.ln3")
        )
    return names


def init_params(config: TransformerConfig) -> ModelParams:
    """Glorot-uniform weights, unit normalization gains, zero biases."""
    rng = np.random.default_rng(config.seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in _layer_names(config):
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "gain":
            tensors[name] = np.ones(shape, dtype=np.float64)
        elif leaf in ("bias", "b1", "b2"):
            tensors[name] = np.zeros(shape, dtype=np.float64)
        else:
            tensors[name] = _glorot(rng, *shape)
    table = sinusoidal_position_table(config.max_len, config.d_model)
    return ModelParams(config=config, tensors=tensors, position_table=table)


def init_optimizer(
    params: ModelParams,
    base_rate: float = 0.5,
    warmup_steps: int = 4000,
    schedule: str = "warmup",
) -> OptimizerState:
    if schedule not in ("warmup", "constant"):
        raise ConfigError(f"unknown schedule {schedule!r}")
    if warmup_steps < 1:
        raise ConfigError(f"warmup_steps must be >= 1, got {warmup_steps}")
    zeros = {name: np.zeros_like(t) for name, t in params.tensors.items()}
    return OptimizerState(
        m=zeros,
        v={name: np.zeros_like(t) for name, t in params.tensors.items()},
        base_rate=base_rate,
        warmup_steps=warmup_steps,
        schedule=schedule,
        rng=np.random.default_rng(params.config.seed + 1),
    )


# ---------------------------------------------------------------------------
# forward / backward building blocks
# ---------------------------------------------------------------------------


def _dropout_forward(x, rate, rng):
    if rng is None or rate <= 0.0:
        return x, None
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def _dropout_backward(d, mask):
    return d if mask is None else d * mask


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    b, length, d = x.shape
    return x.reshape(b, length, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, heads, length, dk = x.shape
    return np.ascontiguousarray(x.transpose(0, 2, 1, 3)).reshape(b, length, heads * dk)


def _attn_forward(xq, xkv, wq, wk, wv, wo, mask, heads):
    b, lq, d = xq.shape
    lk = xkv.shape[1]
    q = _split_heads(xq @ wq, heads)
    k = _split_heads(xkv @ wk, heads)
    v = _split_heads(xkv @ wv, heads)
    scale = (d // heads) ** -0.5
    scores = q @ k.transpose(0, 1, 3, 2) * scale
    if mask is not None:
        scores = scores + mask
    probs2 = kernels.softmax_rows(np.ascontiguousarray(scores).reshape(-1, lk))
    probs = probs2.reshape(b, heads, lq, lk)
    ctx = _merge_heads(probs @ v)
    out = ctx @ wo
    cache = (xq, xkv, q, k, v, probs, ctx, wq, wk, wv, wo, scale, heads)
    return out, cache


def _attn_backward(dout, cache):
    xq, xkv, q, k, v, probs, ctx, wq, wk, wv, wo, scale, heads = cache
    b, lq, d = xq.shape
    lk = xkv.shape[1]
    dwo = ctx.reshape(-1, d).T @ dout.reshape(-1, d)
    dctx = _split_heads(dout @ wo.T, heads)
    dprobs = dctx @ v.transpose(0, 1, 3, 2)
    dv = probs.transpose(0, 1, 3, 2) @ dctx
    dscores2 = kernels.softmax_rows_backward(
        np.ascontiguousarray(probs).reshape(-1, lk),
        np.ascontiguousarray(dprobs).reshape(-1, lk),
    )
    dscores = dscores2.reshape(b, heads, lq, lk) * scale
    dq = dscores @ k
    dk = dscores.transpose(0, 1, 3, 2) @ q
    dq_m, dk_m, dv_m = (_merge_heads(t) for t in (dq, dk, dv))
    dwq = xq.reshape(-1, d).T @ dq_m.reshape(-1, d)
    dwk = xkv.reshape(-1, d).T @ dk_m.reshape(-1, d)
    dwv = xkv.reshape(-1, d).T @ dv_m.reshape(-1, d)
    dxq = dq_m @ wq.T
    dxkv = dk_m @ wk.T + dv_m @ wv.T
    return dxq, dxkv, dwq, dwk, dwv, dwo


def _ln_forward(x, gain, bias):
    b, length, d = x.shape
    y2, xhat2, inv_std = kernels.layernorm_forward(
        np.ascontiguousarray(x).reshape(-1, d), gain, bias, _LN_EPS
    )
    return y2.reshape(b, length, d), (xhat2, inv_std, gain, x.shape)


def _ln_backward(dout, cache):
    xhat2, inv_std, gain, shape = cache
    d = shape[-1]
    dx2, dgain, dbias = kernels.layernorm_backward(
        np.ascontiguousarray(dout).reshape(-1, d), xhat2, inv_std, gain
    )
    return dx2.reshape(shape), dgain, dbias


def _ffn_forward(x, w1, b1, w2, b2):
    b, length, d = x.shape
    x2 = x.reshape(-1, d)
    pre = x2 @ w1 + b1
    hidden = np.maximum(pre, 0.0)
    out = hidden @ w2 + b2
    return out.reshape(b, length, d), (x2, pre, hidden, w1, w2, x.shape)


def _ffn_backward(dout, cache):
    x2, pre, hidden, w1, w2, shape = cache
    d = shape[-1]
    dout2 = dout.reshape(-1, d)
    dw2 = hidden.T @ dout2
    db2 = dout2.sum(axis=0)
    dpre = (dout2 @ w2.T) * (pre > 0.0)
    dw1 = x2.T @ dpre
    db1 = dpre.sum(axis=0)
    dx = (dpre @ w1.T).reshape(shape)
    return dx, dw1, db1, dw2, db2


def _embed(params: ModelParams, ids: np.ndarray) -> np.ndarray:
    scale = math.sqrt(params.config.d_model)
    return params.tensors["embedding"][ids] * scale + params.position_table[: ids.shape[1]]


def _key_pad_mask(ids: np.ndarray) -> np.ndarray:
    # shape (batch, 1, 1, keys); -inf where the key is padding
    return np.where(ids[:, None, None, :] == PAD_ID, -np.inf, 0.0)


def _causal_mask(length: int) -> np.ndarray:
    return np.triu(np.full((length, length), -np.inf), k=1)[None, None, :, :]


def _forward_batch(params, src, tgt, rng=None, collect_attention=False):
    cfg = params.config
    t = params.tensors
    rate = cfg.dropout_rate
    src_mask = _key_pad_mask(src)
    dec_mask = _key_pad_mask(tgt) + _causal_mask(tgt.shape[1])
    attention: dict[str, np.ndarray] = {}
    cache: dict[str, object] = {"src": src, "tgt": tgt}

    x = _embed(params, src)
    x, cache["enc_drop"] = _dropout_forward(x, rate, rng)
    enc_caches = []
    for i in range(cfg.encoder_layers):
        p = f"enc{i}"
        a, c_attn = _attn_forward(
            x, x, t[f"{p}.attn.wq"], t[f"{p}.attn.wk"], t[f"{p}.attn.wv"],
            t[f"{p}.attn.wo"], src_mask, cfg.heads,
        )
        a, drop1 = _dropout_forward(a, rate, rng)
        x, c_ln1 = _ln_forward(x + a, t[f"{p}.ln1.gain"], t[f"{p}.ln1.bias"])
        f, c_ffn = _ffn_forward(
            x, t[f"{p}.ffn.w1"], t[f"{p}.ffn.b1"], t[f"{p}.ffn.w2"], t[f"{p}.ffn.b2"]
        )
        f, drop2 = _dropout_forward(f, rate, rng)
        x, c_ln2 = _ln_forward(x + f, t[f"{p}.ln2.gain"], t[f"{p}.ln2.bias"])
        enc_caches.append((c_attn, drop1, c_ln1, c_ffn, drop2, c_ln2))
        if collect_attention:
            attention[f"{p}.attn"] = c_attn[5]
    memory = x

    y = _embed(params, tgt)
    y, cache["dec_drop"] = _dropout_forward(y, rate, rng)
    dec_caches = []
    for i in range(cfg.decoder_layers):
        p = f"dec{i}"
        a, c_self = _attn_forward(
            y, y, t[f"{p}.self.wq"], t[f"{p}.self.wk"], t[f"{p}.self.wv"],
            t[f"{p}.self.wo"], dec_mask, cfg.heads,
        )
        a, drop1 = _dropout_forward(a, rate, rng)
        y, c_ln1 = _ln_forward(y + a, t[f"{p}.ln1.gain"], t[f"{p}.ln1.bias"])
        c, c_cross = _attn_forward(
            y, memory, t[f"{p}.cross.wq"], t[f"{p}.cross.wk"], t[f"{p}.cross.wv"],
            t[f"{p}.cross.wo"], src_mask, cfg.heads,
        )
        c, drop2 = _dropout_forward(c, rate, rng)
        y, c_ln2 = _ln_forward(y + c, t[f"{p}.ln2.gain"], t[f"{p}.ln2.bias"])
        f, c_ffn = _ffn_forward(
            y, t[f"{p}.ffn.w1"], t[f"{p}.ffn.b1"], t[f"{p}.ffn.w2"], t[f"{p}.ffn.b2"]
        )
        f, drop3 = _dropout_forward(f, rate, rng)
        y, c_ln3 = _ln_forward(y + f, t[f"{p}.ln3.gain"], t[f"{p}.ln3.bias"])
        dec_caches.append((c_self, drop1, c_ln1, c_cross, drop2, c_ln2, c_ffn, drop3, c_ln3))
        if collect_attention:
            attention[f"{p}.self"] = c_self[5]
            attention[f"{p}.cross"] = c_cross[5]

    b, length, d = y.shape
    logits = (y.reshape(-1, d) @ t["embedding"].T).reshape(b, length, cfg.vocab_size)
    cache.update(enc_caches=enc_caches, dec_caches=dec_caches, memory=memory, dec_out=y)
    if collect_attention:
        cache["attention"] = attention
    return logits, cache


def _backward_batch(params, cache, dlogits):
    cfg = params.config
    t = params.tensors
    grads = {name: np.zeros_like(tensor) for name, tensor in t.items()}
    scale = math.sqrt(cfg.d_model)
    emb = t["embedding"]

    y = cache["dec_out"]
    b, length, d = y.shape
    dl2 = dlogits.reshape(-1, cfg.vocab_size)
    grads["embedding"] += dl2.T @ y.reshape(-1, d)
    dy = (dl2 @ emb).reshape(b, length, d)

    for i in reversed(range(cfg.decoder_layers)):
        p = f"dec{i}"
        c_self, drop1, c_ln1, c_cross, drop2, c_ln2, c_ffn, drop3, c_ln3 = cache["dec_caches"][i]
        dy, dg, db = _ln_backward(dy, c_ln3)
        grads[f"{p}.ln3.gain"] += dg
        grads[f"{p}.ln3.bias"] += db
        df = _dropout_backward(dy, drop3)
        dx, dw1, db1, dw2, db2 = _ffn_backward(df, c_ffn)
        grads[f"{p}.ffn.w1"] += dw1
        grads[f"{p}.ffn.b1"] += db1
        grads[f"{p}.ffn.w2"] += dw2
        grads[f"{p}.ffn.b2"] += db2
        dy = dy + dx

        dy, dg, db = _ln_backward(dy, c_ln2)
        grads[f"{p}.ln2.gain"] += dg
        grads[f"{p}.ln2.bias"] += db
        dc = _dropout_backward(dy, drop2)
        dxq, dmem, dwq, dwk, dwv, dwo = _attn_backward(dc, c_cross)
        grads[f"{p}.cross.wq"] += dwq
        grads[f"{p}.cross.wk"] += dwk
        grads[f"{p}.cross.wv"] += dwv
        grads[f"{p}.cross.wo"] += dwo
        cache["dmemory"] = cache.get("dmemory", 0) + dmem
        dy = dy + dxq

        dy, dg, db = _ln_backward(dy, c_ln1)
        grads[f"{p}.ln1.gain"] += dg
        grads[f"{p}.ln1.bias"] += db
        da = _dropout_backward(dy, drop1)
        dxq, dxkv, dwq, dwk, dwv, dwo = _attn_backward(da, c_self)
        grads[f"{p}.self.wq"] += dwq
        grads[f"{p}.self.wk"] += dwk
        grads[f"{p}.self.wv"] += dwv
        grads[f"{p}.self.wo"] += dwo
        dy = dy + dxq + dxkv

    dy = _dropout_backward(dy, cache["dec_drop"])
    np.add.at(grads["embedding"], cache["tgt"].reshape(-1), dy.reshape(-1, d) * scale)

    dx = cache["dmemory"]
    for i in reversed(range(cfg.encoder_layers)):
        p = f"enc{i}"
        c_attn, drop1, c_ln1, c_ffn, drop2, c_ln2 = cache["enc_caches"][i]
        dx, dg, db = _ln_backward(dx, c_ln2)
        grads[f"{p}.ln2.gain"] += dg
        grads[f"{p}.ln2.bias"] += db
        df = _dropout_backward(dx, drop2)
        dxf, dw1, db1, dw2, db2 = _ffn_backward(df, c_ffn)
        grads[f"{p}.ffn.w1"] += dw1
        grads[f"{p}.ffn.b1"] += db1
        grads[f"{p}.ffn.w2"] += dw2
        grads[f"{p}.ffn.b2"] += db2
        dx = dx + dxf

        dx, dg, db = _ln_backward(dx, c_ln1)
        grads[f"{p}.ln1.gain"] += dg
        grads[f"{p}.ln1.bias"] += db
        da = _dropout_backward(dx, drop1)
        dxq, dxkv, dwq, dwk, dwv, dwo = _attn_backward(da, c_attn)
        grads[f"{p}.attn.wq"] += dwq
        grads[f"{p}.attn.wk"] += dwk
        grads[f"{p}.attn.wv"] += dwv
        grads[f"{p}.attn.wo"] += dwo
        dx = dx + dxq + dxkv

    dx = _dropout_backward(dx, cache["enc_drop"])
    np.add.at(grads["embedding"], cache["src"].reshape(-1), dx.reshape(-1, d) * scale)
    return grads


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def _validate_ids(name: str, ids: Sequence[int], config: TransformerConfig) -> np.ndarray:
    arr = np.asarray(list(ids), dtype=np.int64)
    if arr.size == 0:
        raise SequenceError(f"{name} must be non-empty")
    if arr.size > config.max_len:
        raise SequenceError(
            f"{name} has {arr.size} tokens, exceeding max_len {config.max_len}"
        )
    if arr.min() < 0 or arr.max() >= config.vocab_size:
        raise SequenceError(
            f"{name} contains ids outside [0, {config.vocab_size})"
        )
    return arr


def forward(
    params: ModelParams,
    source_ids: Sequence[int],
    target_prefix_ids: Sequence[int],
    return_attention: bool = False,
):
    """Next-token logits, one row per target prefix position.

    Inference only: dropout is disabled.  With ``return_attention`` the
    per-layer attention distributions come back alongside the logits.
    """
    src = _validate_ids("source_ids", source_ids, params.config)[None, :]
    tgt = _validate_ids("target_prefix_ids", target_prefix_ids, params.config)[None, :]
    logits, cache = _forward_batch(params, src, tgt, rng=None, collect_attention=return_attention)
    if return_attention:
        return logits[0], cache["attention"]
    return logits[0]


def loss(logits: np.ndarray, target_ids: Sequence[int], pad_id: int = PAD_ID) -> float:
    """Cross-entropy summed over non-padding targets, divided by their count."""
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(list(target_ids), dtype=np.int64)
    if logits.ndim != 2 or logits.shape[0] != targets.size:
        raise ValueError(
            f"logits shape {logits.shape} does not align with {targets.size} targets"
        )
    valid = (targets != pad_id).astype(np.float64)
    count = valid.sum()
    if count == 0:
        raise AllPadTargetError("target contains only padding tokens")
    losses, _ = kernels.cross_entropy_rows(
        np.ascontiguousarray(logits), targets, valid
    )
    return float(losses.sum() / count)


def _pad_batch(batch: Sequence[tuple[Sequence[int], Sequence[int]]], config):
    if not batch:
        raise SequenceError("batch must be non-empty")
    srcs, tgts = [], []
    for src_ids, tgt_ids in batch:
        srcs.append(_validate_ids("source_ids", src_ids, config))
        tgt = _validate_ids("target_ids", tgt_ids, config)
        if tgt.size < 2:
            raise SequenceError("target sequences need at least two tokens to shift")
        tgts.append(tgt)
    s_max = max(a.size for a in srcs)
    t_max = max(a.size for a in tgts)
    src = np.full((len(batch), s_max), PAD_ID, dtype=np.int64)
    tgt_in = np.full((len(batch), t_max - 1), PAD_ID, dtype=np.int64)
    tgt_out = np.full((len(batch), t_max - 1), PAD_ID, dtype=np.int64)
    for row, (a, b) in enumerate(zip(srcs, tgts)):
        src[row, : a.size] = a
        tgt_in[row, : b.size - 1] = b[:-1]
        tgt_out[row, : b.size - 1] = b[1:]
    return src, tgt_in, tgt_out


def compute_gradients(params: ModelParams, batch, dropout_rng=None):
    """Mean per-token loss and gradients for one teacher-forced batch."""
    src, tgt_in, tgt_out = _pad_batch(batch, params.config)
    logits, cache = _forward_batch(params, src, tgt_in, rng=dropout_rng)
    flat_logits = np.ascontiguousarray(logits).reshape(-1, params.config.vocab_size)
    flat_targets = tgt_out.reshape(-1)
    valid = (flat_targets != PAD_ID).astype(np.float64)
    count = valid.sum()
    if count == 0:
        raise AllPadTargetError("batch contains only padding targets")
    losses, dlogits = kernels.cross_entropy_rows(flat_logits, flat_targets, valid)
    total = float(losses.sum() / count)
    grads = _backward_batch(params, cache, (dlogits / count).reshape(logits.shape))
    return total, grads


def train_step(params: ModelParams, state: OptimizerState, batch):
    """One Adam step on a batch of (source_ids, target_ids) pairs.

    The step aborts, leaving parameters and optimizer state untouched,
    if the batch loss is not finite.
    """
    rng = state.rng if params.config.dropout_rate > 0.0 else None
    batch_loss, grads = compute_gradients(params, batch, dropout_rng=rng)
    if not math.isfinite(batch_loss):
        raise NonFiniteLossError(f"loss is not finite: {batch_loss}")
    state.step += 1
    lr = state.learning_rate(params.config.d_model)
    corr1 = 1.0 / (1.0 - state.beta1 ** state.step)
    corr2 = 1.0 / (1.0 - state.beta2 ** state.step)
    for name, tensor in params.tensors.items():
        kernels.adam_update(
            tensor.reshape(-1),
            np.ascontiguousarray(grads[name]).reshape(-1),
            state.m[name].reshape(-1),
            state.v[name].reshape(-1),
            lr,
            state.beta1,
            state.beta2,
            state.eps,
            corr1,
            corr2,
        )
        if not np.all(np.isfinite(tensor)):
            raise NonFiniteLossError(f"parameter {name} became non-finite after update")
    return params, state, batch_loss


def greedy_decode(params: ModelParams, source_ids: Sequence[int], max_len: int) -> list[int]:
    """Argmax decoding from BOS; returns generated ids including EOS."""
    if max_len < 1:
        raise SequenceError(f"max_len must be >= 1, got {max_len}")
    max_len = min(max_len, params.config.max_len - 1)
    prefix = [BOS_ID]
    out: list[int] = []
    for _ in range(max_len):
        logits = forward(params, source_ids, prefix)
        nxt = int(np.argmax(logits[-1]))
        out.append(nxt)
        if nxt == EOS_ID:
            break
        prefix.append(nxt)
    return out


def generate_metaphor(
    params: ModelParams,
    vocab: Vocab,
    literal: TokenSentence,
    window: int = 7,
) -> TokenSentence:
    """Mask the marked verb, decode, and return the model's rewriting.

    The sentence is trimmed to the verb's context window first, mirroring
    what the training pairs saw.
    """
    if literal.verb_index is None:
        raise ValueError("generate_metaphor requires a sentence with a marked verb")
    trimmed = window_trim(
        LabeledVerbInstance(
            tokens=literal.tokens,
            verb_index=literal.verb_index,
            label=Label.METAPHORIC,  # masking at generation time is unconditional
        ),
        MaskingConfig(window=window),
    )
    masked = list(trimmed.tokens)
    masked[trimmed.verb_index] = MET
    source = encode_tokens(masked, vocab)
    generated = greedy_decode(params, source, params.config.max_len)
    tokens = decode_ids(generated, vocab)
    verb_index = None
    if len(tokens) == len(trimmed.tokens) and tokens[trimmed.verb_index] != MET:
        verb_index = trimmed.verb_index
    return TokenSentence(tokens=tuple(tokens), verb_index=verb_index)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

_MAGIC = b"MFCKPT01"


def save_checkpoint(params: ModelParams, sink: BinaryIO) -> None:
    """Self-describing container: JSON header, then float32 LE payloads."""
    manifest = [
        {"name": name, "shape": list(tensor.shape)}
        for name, tensor in params.tensors.items()
    ]
    header = {
        "config": {
            "vocab_size": params.config.vocab_size,
            "encoder_layers": params.config.encoder_layers,
            "decoder_layers": params.config.decoder_layers,
            "heads": params.config.heads,
            "d_model": params.config.d_model,
            "d_ff": params.config.d_ff,
            "max_len": params.config.max_len,
            "dropout_rate": params.config.dropout_rate,
            "seed": params.config.seed,
        },
        "tensors": manifest,
        "dtype": "float32-le",
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    sink.write(_MAGIC)
    sink.write(struct.pack("<Q", len(blob)))
    sink.write(blob)
    for tensor in params.tensors.values():
        sink.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def load_checkpoint(source: BinaryIO) -> ModelParams:
    magic = source.read(len(_MAGIC))
    if magic != _MAGIC:
        raise CheckpointError(f"bad magic {magic!r}; not a model checkpoint")
    raw_len = source.read(8)
    if len(raw_len) != 8:
        raise CheckpointError("truncated checkpoint header length")
    (blob_len,) = struct.unpack("<Q", raw_len)
    blob = source.read(blob_len)
    if len(blob) != blob_len:
        raise CheckpointError("truncated checkpoint header")
    try:
        header = json.loads(blob.decode("utf-8"))
        config = TransformerConfig(**header["config"])
        manifest = header["tensors"]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
    expected = dict(_layer_names(config))
    if set(entry["name"] for entry in manifest) != set(expected):
        raise CheckpointError("checkpoint tensor names do not match the config")
    tensors: dict[str, np.ndarray] = {}
    for entry in manifest:
        name, shape = entry["name"], tuple(entry["shape"])
        if shape != expected[name]:
            raise CheckpointError(
                f"tensor {name} has shape {shape}, config implies {expected[name]}"
            )
        n_bytes = 4 * int(np.prod(shape, dtype=np.int64))
        payload = source.read(n_bytes)
        if len(payload) != n_bytes:
            raise CheckpointError(f"truncated payload for tensor {name}")
        tensors[name] = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(shape)
    table = sinusoidal_position_table(config.max_len, config.d_model)
    return ModelParams(config=config, tensors=tensors, position_table=table)
