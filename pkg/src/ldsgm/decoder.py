"""GRU label-sequence decoders (top-down and bottom-up) and the baseline heads."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .encoder import EncoderConfig, EncoderOutput
from .hierarchy import LabelHierarchy
from .numerics import Tensor

TOPDOWN, BOTTOMUP = "topdown", "bottomup"


@dataclass
class LevelDistributions:
    """Per-level probabilities, always stored top level first."""

    probs: list[Tensor]                 # level m: (B, |C^m|)
    direction: str
    attention: list[np.ndarray] | None = None

    def arrays(self) -> list[np.ndarray]:
        return [p.data for p in self.probs]

    def __len__(self):
        return len(self.probs)


def init_decoder(store: nx.ParamStore, prefix: str, partition: str, cfg: EncoderConfig,
                 hierarchy: LabelHierarchy, rng):
    d_in = 2 * cfg.d_w + cfg.d_e
    dh = cfg.d_h
    gru = f"uniform:{1 / math.sqrt(dh)!r}"
    store.add(f"{prefix}.gru.w_x", partition, (d_in, 3 * dh), gru, rng)
    store.add(f"{prefix}.gru.w_hzr", partition, (dh, 2 * dh), gru, rng)
    store.add(f"{prefix}.gru.w_hc", partition, (dh, dh), gru, rng)
    store.add(f"{prefix}.gru.b", partition, (3 * dh,), gru, rng)
    store.add(f"{prefix}.h0", partition, (1, dh), "zeros")
    store.add(f"{prefix}.g0", partition, (1, cfg.d_e), "zeros")
    out = f"uniform:{1 / math.sqrt(dh)!r}"
    for m, size in enumerate(hierarchy.sizes, start=1):
        store.add(f"{prefix}.out{m}.w", partition, (dh, size), out, rng)
        store.add(f"{prefix}.out{m}.b", partition, (size,), out, rng)
        if cfg.no_label_attention:
            store.add(f"{prefix}.query{m}.w", partition, (cfg.d_w, dh),
                      f"uniform:{1 / math.sqrt(cfg.d_w)!r}", rng)


def init_multitask(store: nx.ParamStore, cfg: EncoderConfig, hierarchy: LabelHierarchy, rng):
    bound = f"uniform:{1 / math.sqrt(2 * cfg.d_w)!r}"
    for m, size in enumerate(hierarchy.sizes, start=1):
        store.add(f"mt.out{m}.w", "decoder", (2 * cfg.d_w, size), bound, rng)
        store.add(f"mt.out{m}.b", "decoder", (size,), bound, rng)


def gru_params(params, prefix: str) -> dict[str, Tensor]:
    return {k: params[f"{prefix}.gru.{k}"] for k in ("w_x", "w_hzr", "w_hc", "b")}


def gru_step(h: Tensor, x: Tensor, p) -> Tensor:
    """One GRU update, ``h' = (1 - z) * h + z * h_cand``.

    ``z = sigmoid(x Wz + h Uz + bz)``, ``r = sigmoid(x Wr + h Ur + br)`` and
    ``h_cand = tanh(x Wc + (r * h) Uc + bc)``; gate blocks are packed z, r, c.
    """
    dh = h.shape[-1]
    gx = x @ p["w_x"] + p["b"]
    gh = h @ p["w_hzr"]
    z = nx.sigmoid(gx[..., :dh] + gh[..., :dh])
    r = nx.sigmoid(gx[..., dh:2 * dh] + gh[..., dh:])
    cand = nx.tanh(gx[..., 2 * dh:] + (r * h) @ p["w_hc"])
    return (1.0 - z) * h + z * cand


def query_attention(enc: EncoderOutput, h: Tensor, w: Tensor):
    """Attention over argument tokens queried by a decoder state (no label embeddings)."""
    b, t, d = enc.hidden.shape
    q = nx.reshape(h @ nx.transpose(w), (b, d, 1))
    scores = nx.reshape(enc.hidden @ q, (b, t))
    alpha = nx.softmax(scores, axis=-1, mask=enc.content_mask)
    c = nx.reshape(nx.reshape(alpha, (b, 1, t)) @ enc.hidden, (b, d))
    return c, alpha


def decode(enc: EncoderOutput, params, hierarchy: LabelHierarchy, cfg: EncoderConfig,
           prefix: str, direction: str, gold=None) -> LevelDistributions:
    """Generate one distribution per level, feeding back ``E^m @ y_m`` between steps.

    ``gold`` (B, M) is only consulted when ``cfg.teacher_forcing`` is set.
    """
    depth = hierarchy.depth
    order = range(depth) if direction == TOPDOWN else range(depth - 1, -1, -1)
    b = enc.v_cls.shape[0]
    ones = np.ones((b, 1))
    h = ones * params[f"{prefix}.h0"]
    g = ones * params[f"{prefix}.g0"]
    gp = gru_params(params, prefix)
    probs: list[Tensor | None] = [None] * depth
    attention = [None] * depth if cfg.no_label_attention else enc.attention
    for m in order:
        if cfg.no_label_attention:
            c, alpha = query_attention(enc, h, params[f"{prefix}.query{m + 1}.w"])
            attention[m] = alpha.data
        else:
            c = enc.contexts[m]
        h = gru_step(h, nx.concat([enc.v_cls, c, g], axis=-1), gp)
        y = nx.softmax(h @ params[f"{prefix}.out{m + 1}.w"] + params[f"{prefix}.out{m + 1}.b"])
        probs[m] = y
        if not cfg.no_prev_pred:
            src = y
            if cfg.teacher_forcing and gold is not None:
                src = Tensor(np.eye(hierarchy.sizes[m])[gold[:, m]])
            g = src @ enc.label_embeddings[m]
    return LevelDistributions(probs, direction, attention)


def decode_topdown(enc, params, hierarchy, cfg, gold=None) -> LevelDistributions:
    return decode(enc, params, hierarchy, cfg, "dec", TOPDOWN, gold)


def decode_bottomup(enc, params, hierarchy, cfg, gold=None) -> LevelDistributions:
    return decode(enc, params, hierarchy, cfg, "aux", BOTTOMUP, gold)


def multitask_softmax_predict(enc: EncoderOutput, params) -> LevelDistributions:
    """Independent softmax head per level over ``[v_cls; c_m]``."""
    probs = []
    for m, c in enumerate(enc.contexts, start=1):
        x = nx.concat([enc.v_cls, c], axis=-1)
        probs.append(nx.softmax(x @ params[f"mt.out{m}.w"] + params[f"mt.out{m}.b"]))
    return LevelDistributions(probs, "multitask", enc.attention)


def ensemble_predict(d1: LevelDistributions, d2: LevelDistributions) -> LevelDistributions:
    """Level-wise mean of two decoders' distributions, renormalised."""
    if len(d1) != len(d2):
        raise ValueError("distributions cover different numbers of levels")
    probs = []
    for a, b in zip(d1.arrays(), d2.arrays()):
        if a.shape != b.shape:
            raise ValueError(f"level shape mismatch: {a.shape} vs {b.shape}")
        avg = 0.5 * (a + b)
        probs.append(Tensor(avg / avg.sum(axis=-1, keepdims=True)))
    return LevelDistributions(probs, "ensemble")


def argmax_paths(dists: LevelDistributions) -> np.ndarray:
    """(B, M) within-level indices; ties go to the lowest index."""
    return np.stack([np.argmax(np.atleast_2d(p), axis=-1) for p in dists.arrays()], axis=-1)


def predict_path(dists: LevelDistributions, hierarchy: LabelHierarchy):
    """Argmax label path per instance with its hierarchy-validity flag."""
    idx = argmax_paths(dists)
    valid = hierarchy.valid_index_paths(idx)
    return [(tuple(hierarchy.levels[m][i] for m, i in enumerate(row)), bool(ok))
            for row, ok in zip(idx, valid)]
