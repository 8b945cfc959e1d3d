"""Desk-scale encoder-decoder transformer in numpy with hand-written backprop.

Float64 throughout, pre-norm residual blocks, learned absolute positions,
multi-head attention without biases, ReLU feed-forward blocks.  Three loss
heads sit on top:

- a vocabulary projection over decoder states for span/identifier denoising
  and plain sequence-to-sequence training (teacher forced, causal mask);
- a scalar sigmoid projection over encoder states for identifier tagging,
  which by construction touches only encoder-side parameters;
- an optional class projection over the last decoder hidden state.

Forward passes cache activations so the explicit backward passes can be
checked against central finite differences.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .objectives import IT, MIP, MSP, TrainingInstance

NEG_INF = -1e30
LN_EPS = 1e-6

CHECKPOINT_VERSION = 1


class InstanceObjectiveError(ValueError):
    """A loss was called on an instance built for a different objective."""


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 128
    num_heads: int = 4
    encoder_layers: int = 2
    decoder_layers: int = 2
    feedforward_dim: int = 512
    max_src_len: int = 512
    max_tgt_len: int = 256
    dropout: float = 0.0
    pad_id: int = 0

    def __post_init__(self):
        if self.d_model % self.num_heads != 0:
            raise ValueError("d_model must be divisible by num_heads")
        if self.max_src_len > 512 or self.max_tgt_len > 256:
            raise ValueError("length caps are 512 (source) and 256 (target)")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


def _init_params(config: ModelConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    d, ff, v = config.d_model, config.feedforward_dim, config.vocab_size
    params: dict[str, np.ndarray] = {}

    def w(name, shape, scale=0.02):
        params[name] = rng.normal(0.0, scale, size=shape)

    def ln(prefix):
        params[f"{prefix}.g"] = np.ones(d)
        params[f"{prefix}.b"] = np.zeros(d)

    def attn(prefix):
        for part in ("wq", "wk", "wv", "wo"):
            w(f"{prefix}.{part}", (d, d))

    def ffn(prefix):
        w(f"{prefix}.w1", (d, ff))
        params[f"{prefix}.b1"] = np.zeros(ff)
        w(f"{prefix}.w2", (ff, d))
        params[f"{prefix}.b2"] = np.zeros(d)

    w("embed.tok", (v, d))
    w("embed.src_pos", (config.max_src_len, d))
    w("embed.tgt_pos", (config.max_tgt_len, d))
    for i in range(config.encoder_layers):
        ln(f"enc{i}.ln1")
        attn(f"enc{i}.attn")
        ln(f"enc{i}.ln2")
        ffn(f"enc{i}.ffn")
    ln("enc.ln_f")
    for i in range(config.decoder_layers):
        ln(f"dec{i}.ln1")
        attn(f"dec{i}.self")
        ln(f"dec{i}.ln2")
        attn(f"dec{i}.cross")
        ln(f"dec{i}.ln3")
        ffn(f"dec{i}.ffn")
    ln("dec.ln_f")
    w("lm.w", (d, v))
    params["lm.b"] = np.zeros(v)
    w("tag.w", (d,))
    params["tag.b"] = np.zeros(())
    return params


def is_encoder_param(name: str) -> bool:
    """Parameters reachable from the encoder-side losses (token and source
    position embeddings included)."""
    return name.startswith(("enc", "embed.tok", "embed.src_pos"))


def is_decoder_param(name: str) -> bool:
    return name.startswith(("dec", "embed.tgt_pos", "lm."))


class Seq2SeqModel:
    """Parameter container; all math lives in the module-level functions."""

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray] | None = None, seed: int = 0):
        self.config = config
        self.params = params if params is not None else _init_params(config, np.random.default_rng(seed))

    def clone(self) -> "Seq2SeqModel":
        return Seq2SeqModel(self.config, {k: v.copy() for k, v in self.params.items()})

    def add_classifier_head(self, num_classes: int, seed: int = 0) -> None:
        rng = np.random.default_rng(seed)
        self.params["cls.w"] = rng.normal(0.0, 0.02, size=(self.config.d_model, num_classes))
        self.params["cls.b"] = np.zeros(num_classes)

    def zeros_like_params(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def save(self, path: str | Path) -> None:
        meta = {"checkpoint_version": CHECKPOINT_VERSION, "config": asdict(self.config)}
        arrays = {f"param::{k}": v for k, v in self.params.items()}
        np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8), **arrays)

    @classmethod
    def load(cls, path: str | Path) -> "Seq2SeqModel":
        with np.load(path) as data:
            meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
            if meta.get("checkpoint_version") != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version: {meta.get('checkpoint_version')}")
            config = ModelConfig(**meta["config"])
            params = {k[len("param::"):]: data[k] for k in data.files if k.startswith("param::")}
        return cls(config, params)


# --------------------------------------------------------------------------
# layer primitives (forward returns a cache consumed by the matching backward)
# --------------------------------------------------------------------------


def _ln_fwd(params, prefix, x):
    g, b = params[f"{prefix}.g"], params[f"{prefix}.b"]
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv
    return g * xhat + b, (prefix, xhat, inv, g)


def _ln_bwd(dy, cache, grads):
    prefix, xhat, inv, g = cache
    axes = tuple(range(dy.ndim - 1))
    grads[f"{prefix}.g"] += (dy * xhat).sum(axis=axes)
    grads[f"{prefix}.b"] += dy.sum(axis=axes)
    dxhat = dy * g
    m = dxhat.mean(axis=-1, keepdims=True)
    mx = (dxhat * xhat).mean(axis=-1, keepdims=True)
    return inv * (dxhat - m - xhat * mx)


def _split_heads(x, num_heads):
    b, t, d = x.shape
    return x.reshape(b, t, num_heads, d // num_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def _attn_fwd(params, prefix, q_in, kv_in, mask, num_heads):
    """mask is additive, broadcastable to (batch, heads, q_len, k_len)."""
    wq, wk, wv, wo = (params[f"{prefix}.{p}"] for p in ("wq", "wk", "wv", "wo"))
    q = _split_heads(q_in @ wq, num_heads)
    k = _split_heads(kv_in @ wk, num_heads)
    v = _split_heads(kv_in @ wv, num_heads)
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = q @ k.transpose(0, 1, 3, 2) * scale + mask
    scores -= scores.max(axis=-1, keepdims=True)
    exps = np.exp(scores)
    attn = exps / exps.sum(axis=-1, keepdims=True)
    ctx = attn @ v
    merged = _merge_heads(ctx)
    out = merged @ wo
    return out, (prefix, q_in, kv_in, q, k, v, attn, merged, scale, num_heads)


def _attn_bwd(dy, cache, params, grads):
    prefix, q_in, kv_in, q, k, v, attn, merged, scale, num_heads = cache
    wq, wk, wv, wo = (params[f"{prefix}.{p}"] for p in ("wq", "wk", "wv", "wo"))
    b, tq, d = q_in.shape
    grads[f"{prefix}.wo"] += merged.reshape(-1, d).T @ dy.reshape(-1, d)
    dmerged = dy @ wo.T
    dctx = _split_heads(dmerged, num_heads)
    dattn = dctx @ v.transpose(0, 1, 3, 2)
    dv = attn.transpose(0, 1, 3, 2) @ dctx
    dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
    dq = dscores @ k * scale
    dk = dscores.transpose(0, 1, 3, 2) @ q * scale
    dq_flat = _merge_heads(dq)
    dk_flat = _merge_heads(dk)
    dv_flat = _merge_heads(dv)
    grads[f"{prefix}.wq"] += q_in.reshape(-1, d).T @ dq_flat.reshape(-1, d)
    grads[f"{prefix}.wk"] += kv_in.reshape(-1, d).T @ dk_flat.reshape(-1, d)
    grads[f"{prefix}.wv"] += kv_in.reshape(-1, d).T @ dv_flat.reshape(-1, d)
    dq_in = dq_flat @ wq.T
    dkv_in = dk_flat @ wk.T + dv_flat @ wv.T
    return dq_in, dkv_in


def _ffn_fwd(params, prefix, x):
    w1, b1, w2, b2 = (params[f"{prefix}.{p}"] for p in ("w1", "b1", "w2", "b2"))
    pre = x @ w1 + b1
    act = np.maximum(pre, 0.0)
    return act @ w2 + b2, (prefix, x, pre, act)


def _ffn_bwd(dy, cache, params, grads):
    prefix, x, pre, act = cache
    w1, w2 = params[f"{prefix}.w1"], params[f"{prefix}.w2"]
    d_in = x.shape[-1]
    ff = act.shape[-1]
    grads[f"{prefix}.w2"] += act.reshape(-1, ff).T @ dy.reshape(-1, dy.shape[-1])
    grads[f"{prefix}.b2"] += dy.sum(axis=tuple(range(dy.ndim - 1)))
    dact = dy @ w2.T
    dpre = dact * (pre > 0)
    grads[f"{prefix}.w1"] += x.reshape(-1, d_in).T @ dpre.reshape(-1, ff)
    grads[f"{prefix}.b1"] += dpre.sum(axis=tuple(range(dpre.ndim - 1)))
    return dpre @ w1.T


def _dropout_fwd(x, p, rng):
    if p <= 0.0 or rng is None:
        return x, None
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * keep, keep


def _dropout_bwd(dy, keep):
    return dy if keep is None else dy * keep


def _length_mask(lengths: np.ndarray, max_len: int) -> np.ndarray:
    return np.arange(max_len)[None, :] < lengths[:, None]


def _key_mask(lengths: np.ndarray, max_len: int) -> np.ndarray:
    """(batch, 1, 1, max_len) additive mask hiding padded key positions."""
    valid = _length_mask(lengths, max_len)
    return np.where(valid, 0.0, NEG_INF)[:, None, None, :]


def _causal_mask(t: int) -> np.ndarray:
    return np.where(np.tril(np.ones((t, t), dtype=bool)), 0.0, NEG_INF)[None, None, :, :]


# --------------------------------------------------------------------------
# encoder / decoder stacks
# --------------------------------------------------------------------------


def encoder_forward(model: Seq2SeqModel, src: np.ndarray, src_len: np.ndarray, drop_rng=None):
    cfg, params = model.config, model.params
    b, s = src.shape
    x = params["embed.tok"][src] + params["embed.src_pos"][:s]
    mask = _key_mask(src_len, s)
    caches = []
    for i in range(cfg.encoder_layers):
        h, c_ln1 = _ln_fwd(params, f"enc{i}.ln1", x)
        a, c_attn = _attn_fwd(params, f"enc{i}.attn", h, h, mask, cfg.num_heads)
        a, k1 = _dropout_fwd(a, cfg.dropout, drop_rng)
        x = x + a
        h2, c_ln2 = _ln_fwd(params, f"enc{i}.ln2", x)
        f, c_ffn = _ffn_fwd(params, f"enc{i}.ffn", h2)
        f, k2 = _dropout_fwd(f, cfg.dropout, drop_rng)
        x = x + f
        caches.append((c_ln1, c_attn, k1, c_ln2, c_ffn, k2))
    out, c_lnf = _ln_fwd(params, "enc.ln_f", x)
    return out, (src, caches, c_lnf)


def encoder_backward(model: Seq2SeqModel, dout: np.ndarray, cache, grads) -> None:
    cfg, params = model.config, model.params
    src, caches, c_lnf = cache
    dx = _ln_bwd(dout, c_lnf, grads)
    for i in reversed(range(cfg.encoder_layers)):
        c_ln1, c_attn, k1, c_ln2, c_ffn, k2 = caches[i]
        df = _dropout_bwd(dx, k2)
        dh2 = _ffn_bwd(df, c_ffn, params, grads)
        dx = dx + _ln_bwd(dh2, c_ln2, grads)
        da = _dropout_bwd(dx, k1)
        dq, dkv = _attn_bwd(da, c_attn, params, grads)
        dx = dx + _ln_bwd(dq + dkv, c_ln1, grads)
    np.add.at(grads["embed.tok"], src, dx)
    grads["embed.src_pos"][: src.shape[1]] += dx.sum(axis=0)


def decoder_forward(
    model: Seq2SeqModel,
    tgt_in: np.ndarray,
    tgt_len: np.ndarray,
    enc_out: np.ndarray,
    src_len: np.ndarray,
    drop_rng=None,
):
    cfg, params = model.config, model.params
    b, t = tgt_in.shape
    x = params["embed.tok"][tgt_in] + params["embed.tgt_pos"][:t]
    self_mask = _causal_mask(t) + _key_mask(tgt_len, t)
    cross_mask = _key_mask(src_len, enc_out.shape[1])
    caches = []
    for i in range(cfg.decoder_layers):
        h, c_ln1 = _ln_fwd(params, f"dec{i}.ln1", x)
        a, c_self = _attn_fwd(params, f"dec{i}.self", h, h, self_mask, cfg.num_heads)
        a, k1 = _dropout_fwd(a, cfg.dropout, drop_rng)
        x = x + a
        h2, c_ln2 = _ln_fwd(params, f"dec{i}.ln2", x)
        c_out, c_cross = _attn_fwd(params, f"dec{i}.cross", h2, enc_out, cross_mask, cfg.num_heads)
        c_out, k2 = _dropout_fwd(c_out, cfg.dropout, drop_rng)
        x = x + c_out
        h3, c_ln3 = _ln_fwd(params, f"dec{i}.ln3", x)
        f, c_ffn = _ffn_fwd(params, f"dec{i}.ffn", h3)
        f, k3 = _dropout_fwd(f, cfg.dropout, drop_rng)
        x = x + f
        caches.append((c_ln1, c_self, k1, c_ln2, c_cross, k2, c_ln3, c_ffn, k3))
    hidden, c_lnf = _ln_fwd(params, "dec.ln_f", x)
    return hidden, (tgt_in, caches, c_lnf)


def decoder_backward(model: Seq2SeqModel, dhidden: np.ndarray, cache, grads) -> np.ndarray:
    """Returns the gradient with respect to the encoder output."""
    cfg, params = model.config, model.params
    tgt_in, caches, c_lnf = cache
    dx = _ln_bwd(dhidden, c_lnf, grads)
    denc = None
    for i in reversed(range(cfg.decoder_layers)):
        c_ln1, c_self, k1, c_ln2, c_cross, k2, c_ln3, c_ffn, k3 = caches[i]
        df = _dropout_bwd(dx, k3)
        dh3 = _ffn_bwd(df, c_ffn, params, grads)
        dx = dx + _ln_bwd(dh3, c_ln3, grads)
        dc = _dropout_bwd(dx, k2)
        dq, dkv = _attn_bwd(dc, c_cross, params, grads)
        denc = dkv if denc is None else denc + dkv
        dx = dx + _ln_bwd(dq, c_ln2, grads)
        da = _dropout_bwd(dx, k1)
        dq2, dkv2 = _attn_bwd(da, c_self, params, grads)
        dx = dx + _ln_bwd(dq2 + dkv2, c_ln1, grads)
    np.add.at(grads["embed.tok"], tgt_in, dx)
    grads["embed.tgt_pos"][: tgt_in.shape[1]] += dx.sum(axis=0)
    return denc


# --------------------------------------------------------------------------
# batching
# --------------------------------------------------------------------------


@dataclass
class Batch:
    src: np.ndarray       # (B, S) int64
    src_len: np.ndarray   # (B,)
    tgt: np.ndarray       # (B, T) int64, padded targets
    tgt_len: np.ndarray   # (B,)
    tgt_in: np.ndarray    # (B, T) shift-right decoder input
    tag_labels: np.ndarray | None = None  # (B, S) float64 where defined
    tag_mask: np.ndarray | None = None    # (B, S) bool


def make_batch(instances: list[TrainingInstance], config: ModelConfig) -> Batch:
    pad = config.pad_id
    b = len(instances)
    s = max(len(i.source_ids) for i in instances)
    t = max((len(i.target_ids) for i in instances), default=0)
    t = max(t, 1)
    if s > config.max_src_len or t > config.max_tgt_len:
        raise ValueError(f"batch exceeds length caps: src {s}, tgt {t}")
    src = np.full((b, s), pad, dtype=np.int64)
    tgt = np.full((b, t), pad, dtype=np.int64)
    src_len = np.zeros(b, dtype=np.int64)
    tgt_len = np.zeros(b, dtype=np.int64)
    has_tags = any(i.tag_labels is not None for i in instances)
    tags = np.zeros((b, s)) if has_tags else None
    tag_mask = np.zeros((b, s), dtype=bool) if has_tags else None
    for j, inst in enumerate(instances):
        ids = np.asarray(inst.source_ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= config.vocab_size):
            raise ValueError("source id outside vocabulary")
        src[j, : len(inst.source_ids)] = inst.source_ids
        src_len[j] = len(inst.source_ids)
        tgt[j, : len(inst.target_ids)] = inst.target_ids
        tgt_len[j] = len(inst.target_ids)
        if inst.tag_labels is not None:
            n = len(inst.tag_labels)
            start = len(inst.source_ids) - 1 - n  # code segment sits before final [SEP]
            if start < 1:
                raise ValueError("tag labels longer than the code segment")
            tags[j, start : start + n] = inst.tag_labels
            tag_mask[j, start : start + n] = True
    tgt_in = np.full((b, t), pad, dtype=np.int64)
    tgt_in[:, 1:] = tgt[:, :-1]
    return Batch(src, src_len, tgt, tgt_len, tgt_in, tags, tag_mask)


# --------------------------------------------------------------------------
# losses
# --------------------------------------------------------------------------


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def seq2seq_loss_and_grads(
    model: Seq2SeqModel,
    instances: list[TrainingInstance],
    drop_rng=None,
    compute_grads: bool = True,
):
    """Teacher-forced token cross entropy, summed over real target tokens.

    Returns (loss_sum, token_count, grads or None).
    """
    if any(len(i.target_ids) == 0 for i in instances):
        raise ValueError("sequence loss needs non-empty targets")
    batch = make_batch(instances, model.config)
    params = model.params
    enc_out, enc_cache = encoder_forward(model, batch.src, batch.src_len, drop_rng)
    hidden, dec_cache = decoder_forward(
        model, batch.tgt_in, batch.tgt_len, enc_out, batch.src_len, drop_rng
    )
    logits = hidden @ params["lm.w"] + params["lm.b"]
    logp = _log_softmax(logits)
    mask = _length_mask(batch.tgt_len, batch.tgt.shape[1])
    b_idx, t_idx = np.nonzero(mask)
    token_count = int(mask.sum())
    loss = -logp[b_idx, t_idx, batch.tgt[b_idx, t_idx]].sum()
    if not compute_grads:
        return float(loss), token_count, None

    probs = np.exp(logp)
    dlogits = probs * mask[..., None]
    dlogits[b_idx, t_idx, batch.tgt[b_idx, t_idx]] -= 1.0
    grads = model.zeros_like_params()
    d = model.config.d_model
    grads["lm.w"] += hidden.reshape(-1, d).T @ dlogits.reshape(-1, model.config.vocab_size)
    grads["lm.b"] += dlogits.sum(axis=(0, 1))
    dhidden = dlogits @ params["lm.w"].T
    denc = decoder_backward(model, dhidden, dec_cache, grads)
    encoder_backward(model, denc, enc_cache, grads)
    return float(loss), token_count, grads


def tagging_loss_and_grads(
    model: Seq2SeqModel,
    instances: list[TrainingInstance],
    drop_rng=None,
    compute_grads: bool = True,
):
    """Binary cross entropy of the tagging head over code-segment positions.

    Runs the encoder only, so decoder parameters receive no gradient.
    Returns (loss_sum, position_count, grads or None).
    """
    if any(i.tag_labels is None for i in instances):
        raise ValueError("tagging loss needs instances with tag labels")
    batch = make_batch(instances, model.config)
    params = model.params
    enc_out, enc_cache = encoder_forward(model, batch.src, batch.src_len, drop_rng)
    z = enc_out @ params["tag.w"] + params["tag.b"]
    y = batch.tag_labels
    m = batch.tag_mask
    # log sigmoid pieces, numerically stable
    log_p = -np.logaddexp(0.0, -z)
    log_1mp = -np.logaddexp(0.0, z)
    loss = -(y * log_p + (1.0 - y) * log_1mp)[m].sum()
    count = int(m.sum())
    if not compute_grads:
        return float(loss), count, None
    p = 1.0 / (1.0 + np.exp(-z))
    dz = np.where(m, p - y, 0.0)
    grads = model.zeros_like_params()
    grads["tag.w"] += (enc_out * dz[..., None]).sum(axis=(0, 1))
    grads["tag.b"] += dz.sum()
    denc = dz[..., None] * params["tag.w"]
    encoder_backward(model, denc, enc_cache, grads)
    return float(loss), count, grads


def _single_loss(model, instance, objective, reduction):
    if instance.objective != objective:
        raise InstanceObjectiveError(
            f"expected a {objective} instance, got {instance.objective}"
        )
    if objective == IT:
        loss, count, _ = tagging_loss_and_grads(model, [instance], compute_grads=False)
    else:
        loss, count, _ = seq2seq_loss_and_grads(model, [instance], compute_grads=False)
    if reduction == "mean":
        return loss / max(count, 1)
    return loss


def loss_msp(model: Seq2SeqModel, instance: TrainingInstance, reduction: str = "sum") -> float:
    """Span-denoising loss: summed token cross entropy of the target."""
    return _single_loss(model, instance, MSP, reduction)


def loss_mip(model: Seq2SeqModel, instance: TrainingInstance, reduction: str = "sum") -> float:
    """Identifier-denoising loss: summed token cross entropy of the target."""
    return _single_loss(model, instance, MIP, reduction)


def loss_it(model: Seq2SeqModel, instance: TrainingInstance, reduction: str = "sum") -> float:
    """Identifier-tagging loss: summed binary cross entropy over the code segment."""
    return _single_loss(model, instance, IT, reduction)


def forward_lm(model: Seq2SeqModel, source_ids, target_ids) -> np.ndarray:
    """Next-token distributions at each target position, teacher forced.

    Accepts a single pair of id sequences and returns (T, vocab) probabilities.
    """
    inst = TrainingInstance(tuple(source_ids), tuple(target_ids), MSP)
    batch = make_batch([inst], model.config)
    enc_out, _ = encoder_forward(model, batch.src, batch.src_len)
    hidden, _ = decoder_forward(model, batch.tgt_in, batch.tgt_len, enc_out, batch.src_len)
    logits = hidden @ model.params["lm.w"] + model.params["lm.b"]
    return np.exp(_log_softmax(logits))[0]


def forward_lm_batch(model: Seq2SeqModel, instances: list[TrainingInstance]) -> np.ndarray:
    batch = make_batch(instances, model.config)
    enc_out, _ = encoder_forward(model, batch.src, batch.src_len)
    hidden, _ = decoder_forward(model, batch.tgt_in, batch.tgt_len, enc_out, batch.src_len)
    logits = hidden @ model.params["lm.w"] + model.params["lm.b"]
    return np.exp(_log_softmax(logits))


def tag_probabilities(model: Seq2SeqModel, instance: TrainingInstance) -> np.ndarray:
    """Per-position identifier probabilities for the instance's code segment."""
    batch = make_batch([instance], model.config)
    enc_out, _ = encoder_forward(model, batch.src, batch.src_len)
    z = enc_out @ model.params["tag.w"] + model.params["tag.b"]
    return 1.0 / (1.0 + np.exp(-z[0][batch.tag_mask[0]]))
