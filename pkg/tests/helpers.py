"""Shared hypothesis strategies and brute-force oracles for the tests."""
import math

from hypothesis import strategies as st

from ldsgm.hierarchy import from_document


@st.composite
def hierarchies(draw, max_depth=4, max_width=5, allow_multi=True):
    """Random valid hierarchy documents; extra parents only at the deepest level."""
    depth = draw(st.integers(1, max_depth))
    levels, edges = [], []
    for lv in range(depth):
        width = draw(st.integers(1, max_width))
        names = [f"L{lv}_{i}" for i in range(width)]
        if lv:
            prev = levels[-1]
            for name in names:
                parents = [draw(st.sampled_from(prev))]
                if allow_multi and lv == depth - 1 and len(prev) > 1 and draw(st.booleans()):
                    parents.append(draw(st.sampled_from([p for p in prev if p != parents[0]])))
                edges += [[name, p] for p in parents]
        levels.append(names)
    return from_document({"levels": levels, "edges": edges})


def brute_accuracy(preds, golds, m):
    hit = 0
    for p, g in zip(preds, golds):
        if p[m - 1] == g[m - 1]:
            hit += 1
    return hit / len(golds)


def brute_f1_table(preds, golds, m, labels):
    out = {}
    for lab in labels:
        tp = fp = fn = 0
        for p, g in zip(preds, golds):
            if p[m - 1] == lab and g[m - 1] == lab:
                tp += 1
            elif p[m - 1] == lab:
                fp += 1
            elif g[m - 1] == lab:
                fn += 1
        # F1 = 2tp / (2tp + fp + fn), 0 when the denominator is 0
        out[lab] = 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)
    return out


def brute_macro_f1(preds, golds, m, labels):
    table = brute_f1_table(preds, golds, m, labels)
    return math.fsum(table.values()) / len(labels)


def brute_joint(preds, golds, k):
    return sum(1 for p, g in zip(preds, golds) if list(p[:k]) == list(g[:k])) / len(golds)
