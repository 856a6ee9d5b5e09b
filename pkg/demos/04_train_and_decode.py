"""
Training with mutual learning, then decoding four ways
======================================================

A top-down decoder and a bottom-up auxiliary decoder are trained together;
each also pulls its per-level distributions toward the other's. Afterwards the
same checkpoint can be decoded top-down, bottom-up or as their ensemble.
"""
from ldsgm.corpus import SyntheticSpec, generate_synthetic
from ldsgm.encoder import EncoderConfig
from ldsgm.evaluation import evaluate
from ldsgm.training import TrainConfig, train

h, tr, va, te = generate_synthetic(SyntheticSpec(n_train=1000, n_valid=200, n_test=200, noise=0.2))
cfg = TrainConfig(epochs=6, lr=3e-3, lam=1.0, model=EncoderConfig(layers=1, d_w=32, heads=2, d_ff=64, d_e=32, d_h=32))


def show(entry, model):
    print(f"epoch {entry['epoch']}: loss {entry['train_loss_main']:.3f}  "
          f"valid acc {[round(a, 3) for a in entry['valid_accuracy']]}  decoder KL {entry['valid_kl']:.4f}")


record, history = train(cfg, tr, va, h, on_epoch=show)
model, vocab, _ = record.build()

# %%
for scheme in ("topdown", "bottomup", "ensemble"):
    m = evaluate(model, te, vocab, scheme)
    print(f"{scheme:<9} acc {[round(a, 3) for a in m['accuracy']]}  top-sec {m['top_sec']:.3f}  "
          f"top-sec-con {m['top_sec_con']:.3f}  valid paths {m['validity_rate']:.3f}")
