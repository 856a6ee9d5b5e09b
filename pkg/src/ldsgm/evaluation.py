"""Accuracy, macro-F1, multi-level consistency metrics and report files."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import encode_batch
from .decoder import argmax_paths
from .hierarchy import LabelHierarchy


def _column(paths, m):
    return [p[m - 1] for p in paths]


def _check(preds, golds):
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predictions for {len(golds)} gold paths")
    if not golds:
        raise ValueError("no instances to score")


def accuracy(preds, golds, m) -> float:
    """Share of instances whose level-``m`` label (1-based) is correct."""
    _check(preds, golds)
    return sum(p == g for p, g in zip(_column(preds, m), _column(golds, m))) / len(golds)


def labelwise_f1(preds, golds, m, labels=None) -> dict[str, dict]:
    """Precision, recall and F1 per label at level ``m``; 0/0 counts as 0."""
    p_col, g_col = _column(preds, m), _column(golds, m)
    if labels is None:
        labels = sorted(set(p_col) | set(g_col))
    table = {}
    for label in labels:
        tp = sum(p == label and g == label for p, g in zip(p_col, g_col))
        n_pred = sum(p == label for p in p_col)
        n_gold = sum(g == label for g in g_col)
        prec = tp / n_pred if n_pred else 0.0
        rec = tp / n_gold if n_gold else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        table[label] = {"precision": prec, "recall": rec, "f1": f1, "support": n_gold, "predicted": n_pred}
    return table


def macro_f1(preds, golds, m, labels, present_only=False) -> float:
    """Unweighted mean F1 over every label of the level.

    Labels never predicted and never gold score 0 unless ``present_only``
    restricts the mean to labels that occur among the gold paths.
    """
    if present_only:
        gold_labels = set(_column(golds, m))
        labels = [l for l in labels if l in gold_labels]
    if not labels:
        return 0.0
    table = labelwise_f1(preds, golds, m, labels)
    return sum(row["f1"] for row in table.values()) / len(labels)


def _joint(preds, golds, levels) -> float:
    _check(preds, golds)
    hits = sum(all(p[k] == g[k] for k in range(levels)) for p, g in zip(preds, golds))
    return hits / len(golds)


def top_sec(preds, golds) -> float:
    """Share of instances correct at both of the first two levels."""
    if len(golds[0]) < 2:
        raise ValueError("top_sec needs at least two levels")
    return _joint(preds, golds, 2)


def top_sec_con(preds, golds) -> float:
    """Share of instances correct at every level (three or more)."""
    if len(golds[0]) < 3:
        raise ValueError("top_sec_con needs at least three levels")
    return _joint(preds, golds, len(golds[0]))


def validity_rate(preds, hierarchy: LabelHierarchy) -> float:
    return sum(hierarchy.is_valid_path(p) for p in preds) / len(preds)


def score_paths(preds, golds, hierarchy: LabelHierarchy, labelwise_level=None) -> dict:
    """Every metric for one set of predicted paths."""
    depth = hierarchy.depth
    if labelwise_level is None:
        labelwise_level = min(2, depth)
    return {
        "n": len(golds),
        "accuracy": [accuracy(preds, golds, m) for m in range(1, depth + 1)],
        "macro_f1": [macro_f1(preds, golds, m, list(hierarchy.levels[m - 1])) for m in range(1, depth + 1)],
        "top_sec": top_sec(preds, golds) if depth >= 2 else None,
        "top_sec_con": top_sec_con(preds, golds) if depth >= 3 else None,
        "validity_rate": validity_rate(preds, hierarchy),
        "labelwise": {"level": labelwise_level,
                      "labels": labelwise_f1(preds, golds, labelwise_level,
                                             list(hierarchy.levels[labelwise_level - 1]))},
    }


def predict_dataset(model, dataset, vocab, scheme=None, batch_size=256):
    """Predicted index paths ``(n, M)`` and per-level probability arrays."""
    scheme = scheme or model.default_scheme
    paths, probs = [], [[] for _ in range(model.hierarchy.depth)]
    for s in range(0, len(dataset), batch_size):
        chunk = dataset[s:s + batch_size]
        batch = encode_batch(chunk, vocab, None, model.config.max_arg_len)
        dists = model.distributions(batch, scheme)
        paths.append(argmax_paths(dists))
        for m, p in enumerate(dists.arrays()):
            probs[m].append(p)
    return np.concatenate(paths), [np.concatenate(p) for p in probs]


def index_to_names(idx_paths, hierarchy: LabelHierarchy):
    return [tuple(hierarchy.levels[m][i] for m, i in enumerate(row)) for row in idx_paths]


def evaluate(model, dataset, vocab, scheme=None, batch_size=256) -> dict:
    idx, _ = predict_dataset(model, dataset, vocab, scheme, batch_size)
    preds = index_to_names(idx, model.hierarchy)
    return score_paths(preds, [inst.gold_path for inst in dataset], model.hierarchy)


SCALAR_FIELDS = ("top_sec", "top_sec_con", "validity_rate")


def mean_metrics(runs: list[dict]) -> dict:
    """Average per-seed metric dicts (vectors elementwise, ``None`` stays ``None``)."""
    out = {"accuracy": list(np.mean([r["accuracy"] for r in runs], axis=0)),
           "macro_f1": list(np.mean([r["macro_f1"] for r in runs], axis=0))}
    out = {k: [float(x) for x in v] for k, v in out.items()}
    for key in SCALAR_FIELDS:
        vals = [r[key] for r in runs]
        out[key] = None if any(v is None for v in vals) else float(np.mean(vals))
    return out


@dataclass
class EvalReport:
    scheme: str
    split: str
    seeds: list
    per_seed: list
    mean: dict
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _rounded(obj):
    if isinstance(obj, float):
        return round(obj, 6)
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_rounded(v) for v in obj]
    return obj


def write_report(report: EvalReport, path):
    """Canonical JSON: sorted keys, raw values plus a 6-decimal display copy."""
    raw = report.to_dict()
    text = json.dumps({"raw": raw, "display": _rounded(raw)}, sort_keys=True, indent=2) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def read_report(path) -> EvalReport:
    with open(path, encoding="utf-8") as fh:
        return EvalReport(**json.load(fh)["raw"])
