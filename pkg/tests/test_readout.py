import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lsmfx import readout
from lsmfx.errors import DegenerateDataError, ShapeError
from lsmfx.readout import ReadoutModel, SampledState, TrainConfig

import oracles


def test_sample_indices():
    assert readout.sample_indices(250, 5) == [50, 100, 150, 200, 250]
    assert readout.sample_indices(5, 5) == [1, 2, 3, 4, 5]
    with pytest.raises(ShapeError):
        readout.sample_indices(3, 5)


@given(st.integers(1, 400), st.integers(1, 20))
def test_sample_indices_properties(T, frames):
    if T < frames:
        return
    idx = readout.sample_indices(T, frames)
    assert len(idx) == frames and idx[-1] == T
    assert all(a < b for a, b in zip(idx, idx[1:]))


def test_sample_states_layout():
    values = np.arange(250 * 8, dtype=float).reshape(250, 8)
    s = readout.sample_states(values, 5, label=3)
    assert s.vector.shape == (40,) and s.label == 3
    # neuron-major: entry n*5 + k is neuron n at the k-th sampled row
    assert s.vector[1 * 5 + 2] == values[149, 1]
    assert readout.sample_states(values[:5, :], 5).vector.reshape(8, 5).T.tolist() == values[:5].tolist()


def _toy(n=40, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 4))
    y = (x[:, 0] + x[:, 1] > 0).astype(int)
    return x, y


def test_separable_toy_reaches_full_accuracy():
    x, y = _toy()
    m = readout.train((x, y), TrainConfig(epochs=3000), n_classes=2)
    assert readout.accuracy(m, x, y) == 1.0
    assert m.log["train_accuracy"] == 1.0


def test_lm_optimizer():
    x, y = _toy()
    m = readout.train((x, y), TrainConfig(epochs=200, optimizer="lm", hidden=5), n_classes=2)
    assert m.log["optimizer"] == "lm" and readout.accuracy(m, x, y) == 1.0


def test_zero_epochs_returns_initial_model():
    x, y = _toy()
    cfg = TrainConfig(epochs=0, seed=4)
    m = readout.train((x, y), cfg, n_classes=2)
    init = ReadoutModel.init(4, cfg.hidden, 2, seed=4)
    assert np.array_equal(m.params(), init.params())
    assert m.log["epochs"] == 0 and m.log["converged"] is False


def test_degenerate_data():
    x = np.zeros((5, 3))
    with pytest.raises(DegenerateDataError):
        readout.train((x, np.zeros(5, dtype=int)))
    with pytest.raises(DegenerateDataError):
        readout.train([])


def test_memorized_sample_classified_as_own_label():
    x, y = _toy()
    m = readout.train((x, y), TrainConfig(epochs=3000), n_classes=2)
    label, scores = readout.classify(m, SampledState(x[0], y[0]))
    assert label == y[0] and scores.shape == (2,)


def test_tie_goes_to_lowest_class():
    m = ReadoutModel(np.zeros((3, 4)), np.zeros(3), np.zeros((5, 3)), np.zeros(5))
    label, scores = readout.classify(m, np.zeros(4))
    assert label == 0 and np.all(scores == 0.5)


def test_dimension_mismatch():
    m = ReadoutModel.init(40, 30, 10)
    with pytest.raises(ShapeError):
        readout.classify(m, np.zeros(20))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_gradient_check_small(seed):
    rng = np.random.default_rng(seed)
    m = ReadoutModel.init(6, 4, 3, seed=seed)
    assert readout.gradient_check(m, SampledState(rng.normal(size=6), int(rng.integers(3)))) < 1e-4


def test_gradient_matches_independent_loss():
    rng = np.random.default_rng(1)
    m = ReadoutModel.init(5, 4, 3, seed=2)
    z = rng.normal(size=(7, 5))
    t = readout.one_hot(rng.integers(0, 3, 7), 3)
    loss, grad = readout.loss_and_grad(m, z, t)
    assert loss == pytest.approx(oracles.mlp_loss(m.w1, m.b1, m.w2, m.b2, z, t), rel=1e-12)
    h = 1e-6
    i = 3  # an input-layer weight
    up, dn = m.params(), m.params()
    up[i] += h
    dn[i] -= h
    p = ReadoutModel.init(5, 4, 3)
    p.set_params(up)
    lu = oracles.mlp_loss(p.w1, p.b1, p.w2, p.b2, z, t)
    p.set_params(dn)
    ld = oracles.mlp_loss(p.w1, p.b1, p.w2, p.b2, z, t)
    assert grad[i] == pytest.approx((lu - ld) / (2 * h), rel=1e-5)


def test_zero_weights_zero_input_gradient():
    m = ReadoutModel(np.zeros((3, 4)), np.zeros(3), np.zeros((2, 3)), np.zeros(2))
    _, grad = readout.loss_and_grad(m, np.zeros((1, 4)), readout.one_hot([1], 2))
    assert np.all(grad[:12] == 0)


def test_gradient_check_is_pure():
    m = ReadoutModel.init(8, 5, 3, seed=1)
    s = SampledState(np.linspace(-1, 1, 8), 2)
    before = m.params().copy()
    assert readout.gradient_check(m, s) == readout.gradient_check(m, s)
    assert np.array_equal(before, m.params())


def test_model_json_round_trip(tmp_path):
    x, y = _toy()
    m = readout.train((x, y), TrainConfig(epochs=50), n_classes=2)
    m.save(tmp_path / "m.json")
    back = ReadoutModel.load(tmp_path / "m.json")
    assert np.array_equal(back.predict_scores(x), m.predict_scores(x))
    assert back.log["epochs"] == 50


def test_stratified_split():
    labels = np.repeat(np.arange(10), 20)
    tr, te = readout.stratified_split(labels, 0.75, seed=1)
    assert len(tr) == 150 and len(te) == 50
    assert np.bincount(labels[te]).tolist() == [5] * 10
    assert not set(tr) & set(te)


def test_confusion_matrix_counts():
    x, y = _toy()
    m = readout.train((x, y), TrainConfig(epochs=3000), n_classes=2)
    cm = readout.confusion_matrix(m, x, y)
    assert cm.sum() == len(y) and np.trace(cm) == len(y)


def test_states_csv_round_trip(tmp_path):
    states = [SampledState(np.arange(40.0) + i, i % 10) for i in range(3)]
    readout.write_states_csv(tmp_path / "s.csv", states)
    x, y = readout.read_states_csv(tmp_path / "s.csv")
    assert x.shape == (3, 40) and y.tolist() == [0, 1, 2]
    assert (tmp_path / "s.csv").read_text().splitlines()[0].split(",")[:2] == ["label", "s00"]
