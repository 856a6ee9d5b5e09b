"""
A synthetic corpus with a known answer
======================================

Each instance hides a marker token naming its deepest label, plus optional
hints for the ancestors. With noise=0 a rule that reads markers is perfect,
so a model that fails to learn it has a bug.
"""
import numpy as np

from ldsgm.corpus import SyntheticSpec, generate_synthetic, marker_oracle

spec = SyntheticSpec(branching=(4, 3, 2), n_train=2000, n_valid=500, n_test=500, noise=0.0)
h, train, valid, test = generate_synthetic(spec)
print("labels per level:", h.sizes, "nodes:", h.n_nodes)

inst = train[0]
print("arg1:", " ".join(inst.arg1))
print("arg2:", " ".join(inst.arg2))
print("gold:", inst.gold_path)

# %%
# The marker oracle reaches 100% when there is no noise...
print("oracle accuracy, noise 0:", np.mean([marker_oracle(i, h) == i.gold_path for i in test]))

# %%
# ...and about 1 - noise when markers are dropped or swapped.
_, _, _, noisy = generate_synthetic(SyntheticSpec(noise=0.2))
print("oracle accuracy, noise 0.2:", np.mean([marker_oracle(i, h) == i.gold_path for i in noisy]))
