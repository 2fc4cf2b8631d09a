import math

import numpy as np
import pytest
from gradcheck import max_relative_errors, toy_model

from ffdp.features import ATTRIBUTES, FeatureBatch, FeatureTemplate, FeatureVector, input_dim
from ffdp.network import (
    REDUCTIONS,
    ModelParams,
    Scorer,
    SizeConfig,
    backward,
    cross_entropy,
    forward,
    glorot_init,
    reduced_sizes,
    sgd_step,
    softmax,
)
from ffdp.serialization import ModelFormatError, dumps_model, loads_model


def test_glorot_bounds_and_mean():
    rng = np.random.default_rng(0)
    m = glorot_init(100, 100, rng)
    assert m.dtype == np.float32
    assert np.abs(m).max() <= math.sqrt(6 / 200) + 1e-7
    big = glorot_init(200, 200, np.random.default_rng(1))
    assert abs(float(big.mean())) < 0.01
    again = glorot_init(200, 200, np.random.default_rng(1))
    assert np.array_equal(big, again)


def _toy_two_transition():
    # one FORM feature of dim 2, nothing else; hand-set weights
    params = ModelParams(
        embeddings={"FORM": np.array([[0.0, 0.0], [0.5, -1.0]]),
                    "UPOS": np.zeros((1, 1)), "FEATS": np.zeros((1, 1)), "DEPREL": np.zeros((1, 1))},
        W1=np.array([[1.0, 2.0], [-1.0, 0.5]]),
        b1=np.array([0.1, 2.0]),
        W2=np.array([[1.0, -1.0], [0.5, 0.25]]),
        b2=np.array([0.0, 0.3]),
        feature_counts={"FORM": 1, "UPOS": 0, "FEATS": 0, "DEPREL": 0},
    )
    empty = np.zeros((1, 0), dtype=np.int64)
    batch = FeatureBatch(np.array([[1]]), empty, empty, empty)
    return params, batch


def test_forward_toy_model_by_hand():
    params, batch = _toy_two_transition()
    v = (0.5, -1.0)
    h1 = max(0.0, 1.0 * v[0] + 2.0 * v[1] + 0.1)    # -1.4 -> 0
    h2 = max(0.0, -1.0 * v[0] + 0.5 * v[1] + 2.0)   # 1.0
    z1 = 1.0 * h1 - 1.0 * h2 + 0.0
    z2 = 0.5 * h1 + 0.25 * h2 + 0.3
    p1 = math.exp(z1) / (math.exp(z1) + math.exp(z2))
    probs = forward(params, batch).probs[0]
    assert probs[0] == pytest.approx(p1, abs=1e-9)
    assert probs[1] == pytest.approx(1 - p1, abs=1e-9)


def test_softmax_normalized_and_shift_invariant():
    rng = np.random.default_rng(2)
    for _ in range(100):
        z = rng.normal(0, 10, (3, 7))
        p = softmax(z)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-6)
        assert np.allclose(softmax(z + rng.normal(0, 100)), p, atol=1e-9)
    assert np.isfinite(softmax(np.array([1000.0, -1000.0]))).all()


def _standard_model(rng, n_out=7, hidden=16):
    sizes = SizeConfig()
    vocab = {a: 12 for a in ATTRIBUTES}
    params = ModelParams.initialize(vocab, FeatureTemplate.STANDARD, sizes, n_out, hidden, rng)
    batch = FeatureBatch(rng.integers(0, 12, (5, 18)), rng.integers(0, 12, (5, 18)),
                         rng.integers(0, 12, (5, 18)), rng.integers(0, 12, (5, 12)))
    return params, batch


def test_forward_output_sums_to_one_and_uniform_when_w2_zero():
    rng = np.random.default_rng(3)
    params, batch = _standard_model(rng)
    trace = forward(params, batch)
    assert trace.v.shape == (5, 1860)
    assert np.allclose(trace.probs.sum(axis=1), 1.0, atol=1e-6)
    params.W2[:] = 0
    assert np.allclose(forward(params, batch).probs, 1 / 7, atol=1e-7)


@pytest.mark.parametrize("template", list(FeatureTemplate))
@pytest.mark.parametrize("percent", REDUCTIONS)
def test_input_length_matches_input_dim(template, percent):
    sizes = reduced_sizes(SizeConfig(), percent)
    params = ModelParams.initialize({a: 6 for a in ATTRIBUTES}, template, sizes, 3, 4)
    counts = params.feature_counts
    batch = FeatureBatch(*(np.zeros((1, counts[a]), dtype=np.int64) for a in ATTRIBUTES))
    assert forward(params, batch).v.shape[1] == input_dim(template, sizes) == params.input_dim


def test_forward_dimension_mismatch():
    params, batch = _standard_model(np.random.default_rng(4))
    short = FeatureBatch(batch.form[:, :14], batch.upos[:, :14], batch.feats[:, :14], batch.deprel[:, :8])
    with pytest.raises(ValueError):
        forward(params, short)


def test_forward_dropout_contract():
    params, batch = _standard_model(np.random.default_rng(5))
    with pytest.raises(ValueError):
        forward(params, batch, dropout_rate=0.5)
    with pytest.raises(ValueError):
        forward(params, batch, dropout_rate=1.0, rng=np.random.default_rng(0))
    a, b = forward(params, batch), forward(params, batch)
    assert np.array_equal(a.probs, b.probs)


def test_dropout_expectation():
    params, batch = _standard_model(np.random.default_rng(6), hidden=50)
    plain = forward(params, batch).h
    rng = np.random.default_rng(7)
    total = np.zeros_like(plain, dtype=np.float64)
    for _ in range(10_000):
        total += forward(params, batch, 0.5, rng).h
    mean = total / 10_000
    live = plain > 0.05
    assert np.all(np.abs(mean[live] - plain[live]) <= 0.02 * plain[live] + 1e-3)
    assert np.all(mean[~(plain > 0)] == 0)


def test_scorer_matches_forward():
    rng = np.random.default_rng(8)
    params, batch = _standard_model(rng)
    probs_ref = forward(params, batch).probs
    scorer = Scorer(params)
    for i in range(len(batch)):
        fv = batch.take([i])
        vec = FeatureVector(*(tuple(int(x) for x in arr[0]) for arr in (fv.form, fv.upos, fv.feats, fv.deprel)))
        assert np.allclose(softmax(scorer(vec).astype(np.float64)), probs_ref[i], atol=1e-6)


def test_gradient_check_twenty_toy_models():
    rng = np.random.default_rng(11)
    for _ in range(20):
        params, batch, gold = toy_model(rng)
        errors = max_relative_errors(params, batch, gold)
        assert max(errors.values()) <= 1e-4, errors


def test_output_gradient_is_p_minus_onehot():
    params, batch, _ = toy_model(np.random.default_rng(12))
    one = batch.take([0])
    trace = forward(params, one)
    grads = backward(params, trace, [1])
    expected = trace.probs[0].copy()
    expected[1] -= 1
    assert np.allclose(grads.b2, expected, atol=1e-12)


def test_unused_embedding_rows_get_zero_gradient():
    params, batch = _toy_two_transition()
    grads = backward(params, forward(params, batch), [0])
    dense = grads.dense_embedding("FORM", params.embeddings["FORM"].shape)
    assert np.all(dense[0] == 0) and np.any(dense[1] != 0)


def test_backward_dropout_mask_respected():
    params, batch = _standard_model(np.random.default_rng(13), hidden=30)
    one = batch.take([0])
    trace = forward(params, one, 0.5, np.random.default_rng(1))
    grads = backward(params, trace, [0])
    dropped = trace.mask[0] == 0
    assert dropped.any()
    assert np.all(grads.W1[dropped] == 0) and np.all(grads.b1[dropped] == 0)


def test_backward_gold_out_of_range():
    params, batch = _standard_model(np.random.default_rng(14))
    with pytest.raises(ValueError):
        backward(params, forward(params, batch), [7] * len(batch))


def test_sgd_scalar_example_and_zero_gradient():
    params, batch = _toy_two_transition()
    params = params.astype(np.float32)
    params.b2[:] = 1.0
    grads = backward(params, forward(params, batch), [0])
    zero = type(grads)(*(np.zeros_like(g) for g in (grads.W1, grads.b1, grads.W2, grads.b2)),
                       {a: (r, np.zeros_like(g)) for a, (r, g) in grads.embeddings.items()})
    before = params.copy()
    sgd_step(params, zero, 0.02)
    assert all(np.array_equal(x, y) for (_, x), (_, y) in zip(before.tensors(), params.tensors()))
    zero.b2[:] = 2.0
    sgd_step(params, zero, 0.02)
    assert np.allclose(params.b2, 0.96, atol=1e-7)


def test_sgd_leaves_untouched_rows_and_descends():
    rng = np.random.default_rng(15)
    params, batch = _standard_model(rng)
    gold = rng.integers(0, 7, len(batch))
    before = params.copy()
    trace = forward(params, batch)
    loss0 = cross_entropy(trace.probs, gold)
    grads = backward(params, trace, gold)
    sgd_step(params, grads, 1e-4)
    assert cross_entropy(forward(params, batch).probs, gold) < loss0
    used = set(np.unique(batch.form))
    for row in range(params.embeddings["FORM"].shape[0]):
        same = np.array_equal(params.embeddings["FORM"][row], before.embeddings["FORM"][row])
        assert same == (row not in used)


def test_sgd_errors():
    params, batch = _toy_two_transition()
    grads = backward(params, forward(params, batch), [0])
    with pytest.raises(ValueError):
        sgd_step(params, grads, 0.0)
    grads.W1[0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        sgd_step(params, grads, 0.1)


@pytest.mark.parametrize("percent, dims", [
    (0, (50, 20, 20, 20)), (10, (45, 18, 18, 18)), (20, (40, 16, 16, 16)),
    (30, (35, 14, 14, 14)), (40, (30, 12, 12, 12)), (50, (25, 10, 10, 10)),
])
def test_reduced_sizes(percent, dims):
    s = reduced_sizes(SizeConfig(), percent)
    assert (s.form_dim, s.upos_dim, s.feats_dim, s.deprel_dim) == dims
    assert s.reduction_percent == percent


def test_reduced_sizes_rounding_and_errors():
    assert reduced_sizes(SizeConfig(15, 5, 3, 1), 50) == SizeConfig(8, 3, 2, 1, 50)
    for bad in (5, 60, -10):
        with pytest.raises(ValueError):
            reduced_sizes(SizeConfig(), bad)


def test_model_file_round_trip_byte_identical():
    params, _ = _standard_model(np.random.default_rng(16))
    meta = {"template": "standard", "system": "arc-standard", "input_dim": 1860, "vocab_hash": "x"}
    blob = dumps_model(params, meta)
    p2, m2 = loads_model(blob)
    assert m2 == meta
    assert dumps_model(p2, m2) == blob
    assert all(np.array_equal(x, y) for (_, x), (_, y) in zip(params.tensors(), p2.tensors()))


def test_model_file_rejects_corruption():
    params, _ = _standard_model(np.random.default_rng(17))
    blob = dumps_model(params, {})
    with pytest.raises(ModelFormatError):
        loads_model(b"XXXXXXXX" + blob[8:])
    with pytest.raises(ModelFormatError):
        loads_model(blob + b"\0")
