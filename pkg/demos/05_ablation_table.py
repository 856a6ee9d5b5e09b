"""
The ablation grid
=================

Seven variants plus a sweep of the mutual-learning weight, all on the same
data and seeds. Cells with identical effective settings are trained once.
"""
import os
import tempfile

from ldsgm import cli

os.environ.setdefault(cli.ENV_ROOT, tempfile.mkdtemp(prefix="ldsgm-ablate-"))
cfg = cli.config_from_dict({
    "train": {"epochs": 8, "lr": 3e-3, "model": {"layers": 1, "d_w": 16, "heads": 2, "d_ff": 32, "d_e": 16, "d_h": 16}},
    "synthetic": {"n_train": 800, "n_valid": 200, "n_test": 200, "noise": 0.2},
    "seeds": [0, 1],
})
out, table = cli.run_ablation(cfg)
print(open(out / "ablation.txt").read())

# %%
# lambda=0 is the same experiment as switching mutual learning off.
rows = {r["name"]: r for r in table}
print(rows["lambda=0"]["hash"] == rows["no_mutual_learning"]["hash"])
