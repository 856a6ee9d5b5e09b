"""
Label hierarchies and the label graph
=====================================

The model sees its label taxonomy as a graph: every label is a node, every
parent-child pair an undirected edge, and each node also keeps a self-loop.
"""
import numpy as np

from ldsgm.hierarchy import build_adjacency, parse_hierarchy, pdtb_hierarchy

# %%
# The bundled two-level discourse sense inventory: 4 top-level senses, 11 below.
h = pdtb_hierarchy()
for m in (1, 2):
    print(f"level {m}:", [name for name, _ in h.labels_at_level(m)])
print("edges:", h.edge_counts())

# %%
# A label path is valid when each label is a child of the one above it.
print(h.is_valid_path(("Cont", "Cont.Cause")), h.is_valid_path(("Temp", "Cont.Cause")))

# %%
# Hierarchies are plain JSON. The deepest level may have several parents,
# like an ambiguous connective sitting under two senses.
doc = """{"levels": [["Temp", "Comp"], ["Temp.Synchrony", "Comp.Contrast"], ["while"]],
          "edges": [["Temp.Synchrony", "Temp"], ["Comp.Contrast", "Comp"],
                    ["while", "Temp.Synchrony"], ["while", "Comp.Contrast"]]}"""
small = parse_hierarchy(doc)
a = build_adjacency(small)
print(a.astype(int))
assert np.array_equal(a, a.T) and np.all(np.diag(a) == 1)
