"""Multi-level label taxonomy, its JSON file format, and the GCN adjacency."""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from importlib import resources

import numpy as np


class HierarchyError(ValueError):
    """Invalid hierarchy document. ``location`` names the offending field."""

    def __init__(self, message, location=None, line=None):
        self.location = location
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if location is not None:
            where.append(location)
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


@dataclass(frozen=True)
class LabelHierarchy:
    """Labels per level (top first) and child -> parents links.

    Global node ids run level-major, file order within a level. ``parents[m][i]``
    holds the within-level indices, at level ``m-1``, of the parents of label
    ``i`` at level ``m`` (levels 0-based here; the top level has no parents).
    """

    levels: tuple[tuple[str, ...], ...]
    parents: tuple[tuple[tuple[int, ...], ...], ...]

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(lv) for lv in self.levels)

    @property
    def n_nodes(self) -> int:
        return sum(self.sizes)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.sizes)[:-1]]))

    @cached_property
    def _lookup(self):
        return tuple({name: i for i, name in enumerate(lv)} for lv in self.levels)

    def index_of(self, level: int, name: str) -> int:
        """Within-level index of ``name`` at 0-based ``level``."""
        try:
            return self._lookup[level][name]
        except KeyError:
            raise KeyError(f"label {name!r} is not defined at level {level + 1}") from None

    def global_id(self, level: int, i: int) -> int:
        return self.offsets[level] + i

    def labels_at_level(self, m: int) -> list[tuple[str, int]]:
        """Labels of 1-based level ``m`` with their global node ids."""
        if not 1 <= m <= self.depth:
            raise IndexError(f"level {m} out of range 1..{self.depth}")
        off = self.offsets[m - 1]
        return [(name, off + i) for i, name in enumerate(self.levels[m - 1])]

    def parent_pairs(self) -> list[tuple[int, int]]:
        """(child, parent) global id pairs."""
        pairs = []
        for lv in range(1, self.depth):
            for i, ps in enumerate(self.parents[lv]):
                for p in ps:
                    pairs.append((self.global_id(lv, i), self.global_id(lv - 1, p)))
        return pairs

    def edge_counts(self) -> dict[str, int]:
        """Edge totals under both counting conventions (with/without self-loops)."""
        n = len(self.parent_pairs())
        return {"parent_child": n, "with_self_loops": n + self.n_nodes}

    def is_valid_path(self, path) -> bool:
        """True iff consecutive labels of ``path`` are parent-child pairs."""
        if len(path) != self.depth:
            raise ValueError(f"path has {len(path)} labels, hierarchy has {self.depth} levels")
        idx = [self.index_of(lv, name) if isinstance(name, str) else int(name)
               for lv, name in enumerate(path)]
        for lv, i in enumerate(idx):
            if not 0 <= i < self.sizes[lv]:
                raise KeyError(f"index {i} is not defined at level {lv + 1}")
        return all(idx[lv - 1] in self.parents[lv][idx[lv]] for lv in range(1, self.depth))

    def valid_index_paths(self, idx_paths: np.ndarray) -> np.ndarray:
        """Vectorised validity for an ``(n, depth)`` array of within-level indices."""
        ok = np.ones(len(idx_paths), dtype=bool)
        for lv in range(1, self.depth):
            table = np.zeros((self.sizes[lv], self.sizes[lv - 1]), dtype=bool)
            for i, ps in enumerate(self.parents[lv]):
                table[i, list(ps)] = True
            ok &= table[idx_paths[:, lv], idx_paths[:, lv - 1]]
        return ok

    def to_document(self) -> dict:
        edges = []
        for lv in range(1, self.depth):
            for i, ps in enumerate(self.parents[lv]):
                for p in ps:
                    edges.append([self.levels[lv][i], self.levels[lv - 1][p]])
        return {"levels": [list(lv) for lv in self.levels], "edges": edges}

    def dumps(self) -> str:
        return json.dumps(self.to_document(), indent=2, ensure_ascii=False) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())


def from_document(doc) -> LabelHierarchy:
    if not isinstance(doc, dict):
        raise HierarchyError("hierarchy document must be a JSON object", "$")
    unknown = set(doc) - {"levels", "edges"}
    if unknown:
        raise HierarchyError(f"unknown fields {sorted(unknown)}", "$")
    levels = doc.get("levels")
    if not isinstance(levels, list) or not levels:
        raise HierarchyError("'levels' must be a nonempty array", "levels")
    lookup = []
    for m, lv in enumerate(levels):
        if not isinstance(lv, list) or not lv:
            raise HierarchyError("empty level", f"levels[{m}]")
        seen = {}
        for i, name in enumerate(lv):
            if not isinstance(name, str) or not name:
                raise HierarchyError("label names must be nonempty strings", f"levels[{m}][{i}]")
            if name in seen:
                raise HierarchyError(f"duplicate label {name!r}", f"levels[{m}][{i}]")
            seen[name] = i
        lookup.append(seen)

    edges = doc.get("edges", [])
    if not isinstance(edges, list):
        raise HierarchyError("'edges' must be an array", "edges")
    parents = [[set() for _ in lv] for lv in levels]
    for e, edge in enumerate(edges):
        if not (isinstance(edge, list) and len(edge) == 2 and all(isinstance(x, str) for x in edge)):
            raise HierarchyError("edge must be a [child, parent] pair of names", f"edges[{e}]")
        child, parent = edge
        levels_of_child = [m for m in range(1, len(levels)) if child in lookup[m]]
        if not levels_of_child:
            raise HierarchyError(f"unknown child label {child!r}", f"edges[{e}][0]")
        placed = False
        for m in levels_of_child:
            if parent in lookup[m - 1]:
                parents[m][lookup[m][child]].add(lookup[m - 1][parent])
                placed = True
                break
        if not placed:
            raise HierarchyError(f"unknown parent {parent!r} for {child!r}", f"edges[{e}][1]")

    deepest = len(levels) - 1
    for m in range(1, len(levels)):
        for i, ps in enumerate(parents[m]):
            if not ps:
                raise HierarchyError(f"label {levels[m][i]!r} has no parent", f"levels[{m}][{i}]")
            if len(ps) > 1 and m != deepest:
                raise HierarchyError(
                    f"label {levels[m][i]!r} has several parents above the deepest level",
                    f"levels[{m}][{i}]")
    return LabelHierarchy(
        levels=tuple(tuple(lv) for lv in levels),
        parents=tuple(tuple(tuple(sorted(ps)) for ps in lv) for lv in parents),
    )


def parse_hierarchy(text: str) -> LabelHierarchy:
    """Parse hierarchy JSON text (``levels`` + ``edges``) into a validated hierarchy."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise HierarchyError(f"malformed JSON: {exc.msg}", f"column {exc.colno}", exc.lineno) from None
    return from_document(doc)


def load_hierarchy(path) -> LabelHierarchy:
    with open(path, encoding="utf-8") as fh:
        return parse_hierarchy(fh.read())


def pdtb_hierarchy() -> LabelHierarchy:
    """Bundled PDTB 2.0 top-level (4) and second-level (11) senses."""
    text = resources.files("ldsgm.data").joinpath("pdtb2_top_second.json").read_text("utf-8")
    return parse_hierarchy(text)


def build_adjacency(h: LabelHierarchy) -> np.ndarray:
    """Symmetric 0/1 matrix with unit diagonal and an entry per parent-child pair."""
    a = np.eye(h.n_nodes)
    for child, parent in h.parent_pairs():
        a[child, parent] = a[parent, child] = 1.0
    return a


def normalized_adjacency(a: np.ndarray) -> np.ndarray:
    d = 1.0 / np.sqrt(a.sum(axis=1))
    return a * d[:, None] * d[None, :]
