"""Label attentive encoder: self-attention stack, label-graph GCN, per-level label attention."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .corpus import Batch
from .hierarchy import LabelHierarchy
from .numerics import Tensor


@dataclass(frozen=True)
class EncoderConfig:
    """Encoder sizes plus the decoder width ``d_h`` and architecture switches.

    Defaults are desk scale; ``d_e=100`` and ``gcn_layers=2`` follow the
    published settings, the transformer is a small stack trained from scratch.
    """

    layers: int = 2
    d_w: int = 64
    heads: int = 4
    d_ff: int = 128
    d_e: int = 100
    gcn_layers: int = 2
    d_h: int = 64
    dropout: float = 0.2
    max_arg_len: int = 64
    node_init: float = 0.01
    normalize_adjacency: bool = False
    no_gcn: bool = False
    no_label_attention: bool = False
    no_prev_pred: bool = False
    multitask_baseline: bool = False
    teacher_forcing: bool = False

    def __post_init__(self):
        if self.layers < 1 or self.gcn_layers < 1:
            raise ValueError("layers and gcn_layers must be >= 1")
        if self.d_w % self.heads:
            raise ValueError(f"d_w={self.d_w} is not divisible by heads={self.heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.multitask_baseline and self.no_label_attention:
            raise ValueError("the multitask baseline needs label attention contexts")

    @property
    def max_len(self) -> int:
        return 2 * self.max_arg_len + 3


@dataclass
class EncoderOutput:
    v_cls: Tensor                       # (B, d_w)
    hidden: Tensor                      # (B, T, d_w), every position
    content_mask: np.ndarray            # (B, T), argument tokens
    label_embeddings: list[Tensor]      # per level, (|C^m|, d_e)
    contexts: list[Tensor] | None       # per level, (B, d_w)
    attention: list[np.ndarray] | None  # per level, (B, T)

    def local(self, i) -> np.ndarray:
        """Rows of the argument-token representations for instance ``i``."""
        return self.hidden.data[i][self.content_mask[i]]


def init_encoder(store: nx.ParamStore, cfg: EncoderConfig, vocab_size: int,
                 hierarchy: LabelHierarchy, rng):
    d, p = cfg.d_w, "encoder"

    def linear(name, n_in, n_out):
        bound = f"uniform:{1 / math.sqrt(n_in)!r}"
        store.add(f"{name}.w", p, (n_in, n_out), bound, rng)
        store.add(f"{name}.b", p, (n_out,), bound, rng)

    store.add("enc.tok_emb", p, (vocab_size, d), "normal:1.0", rng)
    for k in range(cfg.layers):
        pre = f"enc.layer{k}"
        for part in ("q", "v", "o"):
            linear(f"{pre}.attn.{part}", d, d)
        # no key bias: softmax over keys cancels it
        store.add(f"{pre}.attn.k.w", p, (d, d), f"uniform:{1 / math.sqrt(d)!r}", rng)
        store.add(f"{pre}.ln1.g", p, (d,), "ones")
        store.add(f"{pre}.ln1.b", p, (d,), "zeros")
        linear(f"{pre}.ff1", d, cfg.d_ff)
        linear(f"{pre}.ff2", cfg.d_ff, d)
        store.add(f"{pre}.ln2.g", p, (d,), "ones")
        store.add(f"{pre}.ln2.b", p, (d,), "zeros")
    store.add("enc.node_emb", p, (hierarchy.n_nodes, cfg.d_e), f"uniform:{cfg.node_init!r}", rng)
    for l in range(cfg.gcn_layers):
        linear(f"enc.gcn{l}", cfg.d_e, cfg.d_e)
    for m in range(hierarchy.depth):
        store.add(f"enc.la{m + 1}.w", p, (d, cfg.d_e), f"uniform:{1 / math.sqrt(cfg.d_e)!r}", rng)


def positions(length: int, width: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    rate = np.exp(-math.log(10000.0) * (np.arange(0, width, 2) / width))
    out = np.zeros((length, width))
    out[:, 0::2] = np.sin(pos * rate)
    out[:, 1::2] = np.cos(pos * rate[: width // 2])
    return out


def _linear(x, params, name):
    return x @ params[f"{name}.w"] + params[f"{name}.b"]


def self_attention(x: Tensor, params, prefix: str, heads: int, key_mask: np.ndarray) -> Tensor:
    b, t, d = x.shape
    dh = d // heads

    def split(z):
        return nx.transpose(nx.reshape(z, (b, t, heads, dh)), (0, 2, 1, 3))

    q = split(_linear(x, params, f"{prefix}.q"))
    k = split(x @ params[f"{prefix}.k.w"])
    v = split(_linear(x, params, f"{prefix}.v"))
    scores = nx.mul(q @ nx.transpose(k, (0, 1, 3, 2)), 1.0 / math.sqrt(dh))
    att = nx.softmax(scores, axis=-1, mask=key_mask[:, None, None, :])
    out = nx.reshape(nx.transpose(att @ v, (0, 2, 1, 3)), (b, t, d))
    return _linear(out, params, f"{prefix}.o")


def encode_tokens(batch: Batch, params, cfg: EncoderConfig, training=False, rng=None):
    """Run ``[CLS] arg1 [SEP] arg2 [SEP]`` through the stack; return ``(v_cls, H)``.

    ``H`` covers every position; the argument tokens are the rows selected by
    ``batch.content_mask``.
    """
    t = batch.ids.shape[1]
    if t > cfg.max_len:
        raise ValueError(f"sequence length {t} exceeds the configured maximum {cfg.max_len}")
    x = nx.take_rows(params["enc.tok_emb"], batch.ids) + positions(t, cfg.d_w)
    for k in range(cfg.layers):
        pre = f"enc.layer{k}"
        a = self_attention(x, params, f"{pre}.attn", cfg.heads, batch.key_mask)
        x = nx.layer_norm(x + a, params[f"{pre}.ln1.g"], params[f"{pre}.ln1.b"])
        f = _linear(nx.gelu(_linear(x, params, f"{pre}.ff1")), params, f"{pre}.ff2")
        x = nx.layer_norm(x + f, params[f"{pre}.ln2.g"], params[f"{pre}.ln2.b"])
    x = nx.dropout_apply(x, cfg.dropout, rng, training)
    return x[:, 0, :], x


def gcn_forward(e0: Tensor, adjacency: np.ndarray, layers) -> Tensor:
    """Stacked graph convolution ``relu(A @ E @ W + b)`` over all label nodes.

    Node embeddings are rows; ``layers`` is a sequence of ``(W, b)`` pairs.
    """
    a = Tensor(adjacency)
    e = e0
    for w, b in layers:
        e = nx.relu(a @ (e @ w) + b)
    return e


def split_levels(nodes: Tensor, hierarchy: LabelHierarchy) -> list[Tensor]:
    return [nodes[off:off + size] for off, size in zip(hierarchy.offsets, hierarchy.sizes)]


def label_attention(v: Tensor, labels: Tensor, w: Tensor, mask=None):
    """Context of one level: ``alpha = softmax(max_labels(V W E^T))``, ``c = alpha V``.

    ``v`` is ``(..., N, d_w)`` with tokens as rows, ``labels`` is ``(C, d_e)``.
    Scores are max-pooled over the label axis, leaving one score per token.
    Returns ``(c, alpha)``.
    """
    scores = nx.max_pool((v @ w) @ nx.transpose(labels), axis=-1)
    alpha = nx.softmax(scores, axis=-1, mask=mask)
    n, d = v.shape[-2], v.shape[-1]
    c = nx.reshape(nx.reshape(alpha, alpha.shape[:-1] + (1, n)) @ v, v.shape[:-2] + (d,))
    return c, alpha


def label_embeddings(params, cfg: EncoderConfig, hierarchy: LabelHierarchy, adjacency) -> list[Tensor]:
    nodes = params["enc.node_emb"]
    if not cfg.no_gcn:
        nodes = gcn_forward(nodes, adjacency,
                            [(params[f"enc.gcn{l}.w"], params[f"enc.gcn{l}.b"]) for l in range(cfg.gcn_layers)])
    return split_levels(nodes, hierarchy)


def encode(batch: Batch, hierarchy: LabelHierarchy, params, cfg: EncoderConfig, adjacency,
           training=False, rng=None) -> EncoderOutput:
    v_cls, hidden = encode_tokens(batch, params, cfg, training, rng)
    embeds = label_embeddings(params, cfg, hierarchy, adjacency)
    contexts = attention = None
    if not cfg.no_label_attention:
        contexts, attention = [], []
        for m, e in enumerate(embeds):
            c, alpha = label_attention(hidden, e, params[f"enc.la{m + 1}.w"], batch.content_mask)
            contexts.append(c)
            attention.append(alpha.data)
    return EncoderOutput(v_cls, hidden, batch.content_mask, embeds, contexts, attention)
