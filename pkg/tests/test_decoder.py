import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldsgm import decoder as dec
from ldsgm import numerics as nx
from ldsgm.corpus import SyntheticSpec, build_vocab, encode_batch, generate_synthetic
from ldsgm.decoder import LevelDistributions
from ldsgm.encoder import EncoderConfig
from ldsgm.hierarchy import parse_hierarchy
from ldsgm.model import LDSGM
from ldsgm.numerics import Tensor

from conftest import TINY


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def softmax(x):
    e = np.exp(x - x.max())
    return e / e.sum()


def gru_oracle(h, x, p):
    """Scalar-loop GRU, one unit at a time."""
    dh = len(h)
    wx, whzr, whc, b = p["w_x"], p["w_hzr"], p["w_hc"], p["b"]
    z = np.zeros(dh)
    r = np.zeros(dh)
    for j in range(dh):
        z[j] = sigmoid(sum(x[i] * wx[i, j] for i in range(len(x))) + sum(h[i] * whzr[i, j] for i in range(dh)) + b[j])
        r[j] = sigmoid(sum(x[i] * wx[i, dh + j] for i in range(len(x)))
                       + sum(h[i] * whzr[i, dh + j] for i in range(dh)) + b[dh + j])
    out = np.zeros(dh)
    for j in range(dh):
        cand = np.tanh(sum(x[i] * wx[i, 2 * dh + j] for i in range(len(x)))
                       + sum(r[i] * h[i] * whc[i, j] for i in range(dh)) + b[2 * dh + j])
        out[j] = (1 - z[j]) * h[j] + z[j] * cand
    return out


def gru_arrays(rng, d_in, dh, scale=0.5):
    return {"w_x": rng.normal(scale=scale, size=(d_in, 3 * dh)), "w_hzr": rng.normal(scale=scale, size=(dh, 2 * dh)),
            "w_hc": rng.normal(scale=scale, size=(dh, dh)), "b": rng.normal(scale=scale, size=3 * dh)}


def test_gru_zero_weights_halves_state(rng):
    dh, d_in = 4, 6
    p = {k: Tensor(np.zeros_like(v)) for k, v in gru_arrays(rng, d_in, dh).items()}
    h = rng.normal(size=(2, dh))
    out = dec.gru_step(Tensor(h), Tensor(rng.normal(size=(2, d_in))), p)
    np.testing.assert_allclose(out.data, 0.5 * h, atol=1e-15)


def test_gru_candidate_bias_limit():
    dh, d_in = 3, 2
    p = {"w_x": np.zeros((d_in, 3 * dh)), "w_hzr": np.zeros((dh, 2 * dh)), "w_hc": np.zeros((dh, dh)),
         "b": np.concatenate([np.zeros(2 * dh), np.full(dh, 4.0)])}
    out = dec.gru_step(Tensor(np.zeros((1, dh))), Tensor(np.ones((1, d_in))), {k: Tensor(v) for k, v in p.items()})
    np.testing.assert_allclose(out.data, 0.5 * np.tanh(4.0) * np.ones((1, dh)), atol=1e-15)


@pytest.mark.parametrize("seed", range(3))
def test_gru_matches_scalar_oracle(seed):
    r = np.random.default_rng(seed)
    p = gru_arrays(r, 5, 3)
    h, x = r.normal(size=3), r.normal(size=5)
    got = dec.gru_step(Tensor(h[None]), Tensor(x[None]), {k: Tensor(v) for k, v in p.items()}).data[0]
    np.testing.assert_allclose(got, gru_oracle(h, x, p), rtol=1e-12, atol=1e-14)


# --- full decoders -------------------------------------------------------------

TWO_LEVEL = parse_hierarchy('{"levels": [["A", "B"], ["A.x", "A.y", "B.z"]],'
                            ' "edges": [["A.x", "A"], ["A.y", "A"], ["B.z", "B"]]}')


def toy(cfg=TINY, hierarchy=TWO_LEVEL, seed=4):
    spec = SyntheticSpec(branching=(2,), n_train=6, n_valid=0, n_test=0, seed=seed)
    _, data, _, _ = generate_synthetic(spec)
    vocab = build_vocab(data)
    model = LDSGM(hierarchy, len(vocab), cfg, seed=seed)
    batch = encode_batch(data[:3], vocab, None, cfg.max_arg_len)
    # non-zero start values so the oracle exercises h0 and g0
    r = np.random.default_rng(seed)
    for prefix in ("dec", "aux"):
        if f"{prefix}.h0" in model.params:
            model.params[f"{prefix}.h0"].data = r.normal(size=(1, cfg.d_h))
            model.params[f"{prefix}.g0"].data = r.normal(size=(1, cfg.d_e))
    return model, batch


def decode_oracle(model, encoded, prefix, order):
    """Independent per-instance evaluation of the generation recurrence."""
    P = {n: model.params[n].data for n in model.params.names()}
    gp = {k: P[f"{prefix}.gru.{k}"] for k in ("w_x", "w_hzr", "w_hc", "b")}
    embeds = [e.data for e in encoded.label_embeddings]
    out = [np.zeros((len(encoded.v_cls.data), s)) for s in model.hierarchy.sizes]
    for i in range(len(encoded.v_cls.data)):
        h, g = P[f"{prefix}.h0"][0], P[f"{prefix}.g0"][0]
        for m in order:
            x = np.concatenate([encoded.v_cls.data[i], encoded.contexts[m].data[i], g])
            h = gru_oracle(h, x, gp)
            y = softmax(h @ P[f"{prefix}.out{m + 1}.w"] + P[f"{prefix}.out{m + 1}.b"])
            out[m][i] = y
            if not model.config.no_prev_pred:
                g = y @ embeds[m]
    return out


def test_topdown_matches_oracle():
    model, batch = toy()
    enc = model.encode(batch)
    got = model.topdown(enc).arrays()
    for a, b in zip(got, decode_oracle(model, enc, "dec", [0, 1])):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-13)


def test_bottomup_matches_oracle_and_reports_top_first():
    model, batch = toy()
    enc = model.encode(batch)
    d = model.bottomup(enc)
    assert d.direction == dec.BOTTOMUP
    assert [p.shape[1] for p in d.probs] == [2, 3]
    for a, b in zip(d.arrays(), decode_oracle(model, enc, "aux", [1, 0])):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-13)


def test_no_prev_pred_matches_oracle():
    model, batch = toy(EncoderConfig(**{**TINY.__dict__, "no_prev_pred": True}))
    enc = model.encode(batch)
    for a, b in zip(model.topdown(enc).arrays(), decode_oracle(model, enc, "dec", [0, 1])):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-13)


@pytest.mark.parametrize("prefix", ["dec", "aux"])
def test_zero_projection_gives_uniform(prefix):
    model, batch = toy()
    for m in (1, 2):
        model.params[f"{prefix}.out{m}.w"].data = np.zeros_like(model.params[f"{prefix}.out{m}.w"].data)
        model.params[f"{prefix}.out{m}.b"].data = np.zeros_like(model.params[f"{prefix}.out{m}.b"].data)
    enc = model.encode(batch)
    d = model.topdown(enc) if prefix == "dec" else model.bottomup(enc)
    np.testing.assert_allclose(d.arrays()[0], 0.5, atol=1e-15)
    np.testing.assert_allclose(d.arrays()[1], 1 / 3, atol=1e-15)


def test_single_level_decoder():
    one = parse_hierarchy('{"levels": [["p", "q", "r"]]}')
    model, batch = toy(hierarchy=one)
    d = model.topdown(model.encode(batch))
    assert len(d) == 1 and d.arrays()[0].shape == (3, 3)


def test_constant_logit_shift_leaves_distribution():
    model, batch = toy()
    before = model.topdown(model.encode(batch)).arrays()
    model.params["dec.out2.b"].data = model.params["dec.out2.b"].data + 7.5
    after = model.topdown(model.encode(batch)).arrays()
    np.testing.assert_allclose(before[1], after[1], atol=1e-12)


def test_gold_never_reaches_feedback_without_teacher_forcing():
    model, batch = toy()
    enc = model.encode(batch)
    a = model.topdown(enc, gold=np.array([[0, 0], [0, 0], [0, 0]])).arrays()
    b = model.topdown(enc, gold=np.array([[1, 2], [1, 2], [1, 2]])).arrays()
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    forced, _ = toy(EncoderConfig(**{**TINY.__dict__, "teacher_forcing": True}))
    e2 = forced.encode(batch)
    c = forced.topdown(e2, gold=np.array([[0, 0], [0, 0], [0, 0]])).arrays()
    d = forced.topdown(e2, gold=np.array([[1, 2], [1, 2], [1, 2]])).arrays()
    assert not np.allclose(c[1], d[1])


def test_multitask_heads():
    cfg = EncoderConfig(**{**TINY.__dict__, "multitask_baseline": True})
    model, batch = toy(cfg)
    enc = model.encode(batch)
    d = model.multitask(enc)
    assert [p.shape for p in d.arrays()] == [(3, 2), (3, 3)]
    for m in (1, 2):
        w, b = model.params[f"mt.out{m}.w"].data, model.params[f"mt.out{m}.b"].data
        for i in range(3):
            x = np.concatenate([enc.v_cls.data[i], enc.contexts[m - 1].data[i]])
            np.testing.assert_allclose(d.arrays()[m - 1][i], softmax(x @ w + b), rtol=1e-12)
        model.params[f"mt.out{m}.w"].data = np.zeros_like(w)
        model.params[f"mt.out{m}.b"].data = np.zeros_like(b)
    z = model.multitask(model.encode(batch)).arrays()
    np.testing.assert_allclose(z[0], 0.5, atol=1e-15)
    np.testing.assert_allclose(z[1], 1 / 3, atol=1e-15)


# --- path prediction and ensembling ----------------------------------------------

def dists(*rows):
    return LevelDistributions([Tensor(np.array([r])) for r in rows], dec.TOPDOWN)


def test_predict_path_argmax_and_validity():
    ((names, valid),) = dec.predict_path(dists([0.9, 0.1], [0.2, 0.7, 0.1]), TWO_LEVEL)
    assert names == ("A", "A.y") and valid
    ((names, valid),) = dec.predict_path(dists([0.9, 0.1], [0.2, 0.1, 0.7]), TWO_LEVEL)
    assert names == ("A", "B.z") and not valid


def test_predict_path_ties_take_lowest_index():
    ((names, _),) = dec.predict_path(dists([0.5, 0.5], [1 / 3, 1 / 3, 1 / 3]), TWO_LEVEL)
    assert names == ("A", "A.x")


def test_ensemble_examples():
    a = dists([0.3, 0.7], [0.2, 0.3, 0.5])
    same = dec.ensemble_predict(a, a)
    for x, y in zip(same.arrays(), a.arrays()):
        np.testing.assert_allclose(x, y, atol=1e-15)
    out = dec.ensemble_predict(dists([1.0, 0.0]), dists([0.0, 1.0]))
    np.testing.assert_array_equal(out.arrays()[0], [[0.5, 0.5]])


@given(st.integers(0, 10_000))
def test_ensemble_random_pair(seed):
    r = np.random.default_rng(seed)
    p = [r.dirichlet(np.ones(k), size=4) for k in (2, 5)]
    q = [r.dirichlet(np.ones(k), size=4) for k in (2, 5)]
    out = dec.ensemble_predict(LevelDistributions([Tensor(x) for x in p], "t"),
                               LevelDistributions([Tensor(x) for x in q], "b"))
    for o, x, y in zip(out.arrays(), p, q):
        np.testing.assert_allclose(o, (x + y) / 2, atol=1e-15)


def test_ensemble_shape_mismatch():
    with pytest.raises(ValueError):
        dec.ensemble_predict(dists([0.5, 0.5]), dists([0.2, 0.3, 0.5]))
    with pytest.raises(ValueError):
        dec.ensemble_predict(dists([0.5, 0.5]), dists([0.5, 0.5], [0.2, 0.3, 0.5]))


# --- distribution invariants and gradients --------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["full", "no_label_attention", "no_prev_pred", "no_gcn"]))
def test_every_distribution_is_normalised(seed, variant):
    flags = {} if variant == "full" else {variant: True}
    model, batch = toy(EncoderConfig(**{**TINY.__dict__, **flags}), seed=seed % 50)
    for scheme in ("topdown", "bottomup", "ensemble"):
        d = model.distributions(batch, scheme)
        for p in d.arrays():
            assert np.all(p >= 0)
            np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-9)


def test_decoders_pass_gradient_check_with_encoder():
    model, batch = toy()
    gold = np.array([[0, 1], [1, 2], [0, 0]])

    def loss():
        enc = model.encode(batch)
        total = None
        for d in (model.topdown(enc), model.bottomup(enc)):
            for m, p in enumerate(d.probs):
                t = nx.mean(nx.cross_entropy_onehot(p, gold[:, m]))
                total = t if total is None else total + t
        return total

    res = nx.finite_diff_check(loss, model.params, coords_per_param=6)
    assert res.passed(1e-4), res
