"""Argument-pair instances, JSONL I/O, vocabulary, synthetic corpora, batching."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from .hierarchy import LabelHierarchy

CLS, SEP, PAD, UNK = "[CLS]", "[SEP]", "[PAD]", "[UNK]"
SPECIALS = (CLS, SEP, PAD, UNK)
CLS_ID, SEP_ID, PAD_ID, UNK_ID = range(4)
MAX_MARKERS = 10_000


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Instance:
    arg1: tuple[str, ...]
    arg2: tuple[str, ...]
    gold_path: tuple[str, ...]

    def to_json(self) -> str:
        return json.dumps({"arg1": " ".join(self.arg1), "arg2": " ".join(self.arg2),
                           "labels": list(self.gold_path)}, ensure_ascii=False)


def tokenize(text: str) -> tuple[str, ...]:
    return tuple(text.lower().split())


def make_instance(arg1: str, arg2: str, labels, hierarchy: LabelHierarchy) -> Instance:
    a1, a2 = tokenize(arg1), tokenize(arg2)
    if not a1 or not a2:
        raise CorpusError("empty argument")
    labels = tuple(labels)
    if len(labels) != hierarchy.depth:
        raise CorpusError(f"expected {hierarchy.depth} labels, got {len(labels)}")
    for lv, name in enumerate(labels):
        try:
            hierarchy.index_of(lv, name)
        except KeyError as exc:
            raise CorpusError(exc.args[0]) from None
    return Instance(a1, a2, labels)


def parse_jsonl(lines, hierarchy: LabelHierarchy) -> tuple[Instance, ...]:
    out = []
    for no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise CorpusError("line is not a JSON object")
            missing = {"arg1", "arg2", "labels"} - set(obj)
            if missing:
                raise CorpusError(f"missing fields {sorted(missing)}")
            if not isinstance(obj["labels"], list):
                raise CorpusError("'labels' must be an array")
            out.append(make_instance(obj["arg1"], obj["arg2"], obj["labels"], hierarchy))
        except (CorpusError, json.JSONDecodeError, AttributeError) as exc:
            raise CorpusError(f"line {no}: {exc}") from None
    return tuple(out)


def load_jsonl(path, hierarchy: LabelHierarchy) -> tuple[Instance, ...]:
    with open(path, encoding="utf-8") as fh:
        return parse_jsonl(fh, hierarchy)


def write_jsonl(path, instances):
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(inst.to_json() + "\n")


class Vocab:
    """Token ids with the four reserved ids first."""

    def __init__(self, tokens):
        self.tokens = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        self.ids = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.ids

    def id(self, token) -> int:
        return self.ids.get(token, UNK_ID)

    def encode(self, tokens) -> list[int]:
        return [self.ids.get(t, UNK_ID) for t in tokens]


def build_vocab(dataset, min_count=1) -> Vocab:
    """Tokens seen at least ``min_count`` times, most frequent first, ties by name."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter()
    for inst in dataset:
        counts.update(inst.arg1)
        counts.update(inst.arg2)
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return Vocab(kept)


@dataclass
class Batch:
    ids: np.ndarray           # (B, T) token ids, [CLS] a1 [SEP] a2 [SEP] then padding
    key_mask: np.ndarray      # (B, T) True for non-pad positions
    content_mask: np.ndarray  # (B, T) True for argument tokens only
    gold: np.ndarray | None   # (B, M) within-level label indices

    def __len__(self):
        return len(self.ids)


def encode_batch(instances, vocab: Vocab, hierarchy: LabelHierarchy | None = None,
                 max_arg_len=64) -> Batch:
    rows, content = [], []
    for inst in instances:
        a1 = vocab.encode(inst.arg1[:max_arg_len])
        a2 = vocab.encode(inst.arg2[:max_arg_len])
        rows.append([CLS_ID] + a1 + [SEP_ID] + a2 + [SEP_ID])
        content.append([False] + [True] * len(a1) + [False] + [True] * len(a2) + [False])
    width = max(len(r) for r in rows)
    ids = np.full((len(rows), width), PAD_ID, dtype=np.int64)
    cmask = np.zeros((len(rows), width), dtype=bool)
    kmask = np.zeros((len(rows), width), dtype=bool)
    for i, (r, c) in enumerate(zip(rows, content)):
        ids[i, :len(r)] = r
        cmask[i, :len(c)] = c
        kmask[i, :len(r)] = True
    gold = None
    if hierarchy is not None:
        gold = np.array([[hierarchy.index_of(lv, name) for lv, name in enumerate(inst.gold_path)]
                         for inst in instances], dtype=np.int64).reshape(len(rows), hierarchy.depth)
    return Batch(ids, kmask, cmask, gold)


def batches(dataset, batch_size, shuffle_seed=None, epoch=0) -> list[tuple[Instance, ...]]:
    """Split into batches; order is a seeded permutation per (seed, epoch)."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = np.arange(len(dataset))
    if shuffle_seed is not None:
        order = np.random.default_rng([shuffle_seed, epoch]).permutation(len(dataset))
    return [tuple(dataset[i] for i in order[s:s + batch_size])
            for s in range(0, len(dataset), batch_size)]


# --- synthetic corpora -----------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic hierarchical corpus.

    Every instance gets a marker token naming its deepest gold label; with
    probability ``noise`` that marker is dropped or swapped for another leaf's.
    ``marker_rate`` is the per-level probability of an extra hint marker naming
    the ancestor at each upper level.
    """

    branching: tuple[int, ...] = (4, 3, 2)
    n_train: int = 2000
    n_valid: int = 500
    n_test: int = 500
    noise: float = 0.0
    marker_rate: float = 0.5
    arg_len: tuple[int, int] = (4, 10)
    filler_vocab: int = 200
    seed: int = 0

    def validate(self):
        if not self.branching or any(b < 1 for b in self.branching):
            raise ValueError("branching: every level needs at least one label")
        for name in ("noise", "marker_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}: must be within [0, 1], got {v}")
        lo, hi = self.arg_len
        if lo < 1 or hi < lo:
            raise ValueError(f"arg_len: need 1 <= min <= max, got {self.arg_len}")
        for name in ("n_train", "n_valid", "n_test"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name}: must be >= 0")
        if self.filler_vocab < 1:
            raise ValueError("filler_vocab: must be >= 1")
        if int(np.sum(np.cumprod(self.branching))) > MAX_MARKERS:
            raise ValueError(f"branching: more than {MAX_MARKERS} labels overflow the marker vocabulary")

    def to_dict(self):
        return asdict(self)


def marker_token(label: str) -> str:
    return "mk_" + label.replace(".", "_").lower()


def synthetic_hierarchy(branching) -> LabelHierarchy:
    from .hierarchy import from_document

    levels, edges = [], []
    prev = [""]
    for m, b in enumerate(branching):
        tag = chr(ord("a") + m % 26)
        cur = []
        for p in prev:
            for j in range(b):
                name = f"{p}.{tag}{j}" if p else f"{tag}{j}"
                cur.append(name)
                if p:
                    edges.append([name, p])
        levels.append(cur)
        prev = cur
    return from_document({"levels": levels, "edges": edges})


def generate_synthetic(spec: SyntheticSpec):
    """Return ``(hierarchy, train, valid, test)`` fully determined by ``spec.seed``."""
    spec.validate()
    h = synthetic_hierarchy(spec.branching)
    rng = np.random.default_rng(spec.seed)
    leaves = h.levels[-1]
    chains = []
    for leaf in leaves:
        parts = leaf.split(".")
        chains.append(tuple(".".join(parts[:k + 1]) for k in range(len(parts))))
    fillers = [f"w{k}" for k in range(spec.filler_vocab)]
    seen = set()

    def one():
        leaf = int(rng.integers(len(leaves)))
        path = chains[leaf]
        a1 = [fillers[k] for k in rng.integers(len(fillers), size=rng.integers(spec.arg_len[0], spec.arg_len[1] + 1))]
        a2 = [fillers[k] for k in rng.integers(len(fillers), size=rng.integers(spec.arg_len[0], spec.arg_len[1] + 1))]
        inserts = []
        if rng.random() >= spec.noise:
            inserts.append(marker_token(leaves[leaf]))
        elif rng.random() < 0.5 and len(leaves) > 1:
            other = (leaf + 1 + int(rng.integers(len(leaves) - 1))) % len(leaves)
            inserts.append(marker_token(leaves[other]))
        for label in path[:-1]:
            if rng.random() < spec.marker_rate:
                inserts.append(marker_token(label))
        for tok in inserts:
            arg = a1 if rng.random() < 0.5 else a2
            arg.insert(int(rng.integers(len(arg) + 1)), tok)
        return Instance(tuple(a1), tuple(a2), path)

    splits = []
    for n in (spec.n_train, spec.n_valid, spec.n_test):
        out = []
        while len(out) < n:
            inst = one()
            key = (inst.arg1, inst.arg2)
            if key in seen:
                continue
            seen.add(key)
            out.append(inst)
        splits.append(tuple(out))
    return (h, *splits)


def marker_oracle(instance: Instance, hierarchy: LabelHierarchy) -> tuple[str, ...] | None:
    """Rule-based classifier: the path implied by the first leaf marker, if any."""
    by_marker = {marker_token(leaf): leaf for leaf in hierarchy.levels[-1]}
    for tok in instance.arg1 + instance.arg2:
        if tok in by_marker:
            parts = by_marker[tok].split(".")
            return tuple(".".join(parts[:k + 1]) for k in range(len(parts)))
    return None
