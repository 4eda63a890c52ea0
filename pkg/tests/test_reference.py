import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lsmfx.errors import ConfigError, ShapeError
from lsmfx.neuron import NeuronParams
from lsmfx.reference import RefConfig, divergence, ref_run
from lsmfx.reservoir import Reservoir, ReservoirConfig, SynapseSpec, default_config

import oracles


def single(w, **kw):
    return RefConfig(1, 1, np.array([[w]]), np.zeros((1, 1)), **kw)


def test_immediate_spike():
    tr = ref_run(single(0.16), np.array([[1, 0]]))
    assert tr.spikes[:, 0].tolist() == [1, 0]
    assert tr.values[0, 0] == 0.001


def test_zero_weights_constant():
    tr = ref_run(single(0.0), np.ones((1, 20)))
    assert np.all(tr.values == 0.001) and not tr.spikes.any()


def test_constant_drive_period_without_refractory():
    tr = ref_run(single(0.05, decay_constant=0.0, refractory_steps=0), np.ones((1, 12)))
    assert np.flatnonzero(tr.spikes[:, 0]).tolist() == [2, 5, 8, 11]


def test_constant_drive_period_with_refractory():
    tr = ref_run(single(0.05, decay_constant=0.0), np.ones((1, 12)))
    assert np.flatnonzero(tr.spikes[:, 0]).tolist() == [2, 6, 10]


def test_float_decay_ratio():
    tr = ref_run(single(0.0), np.zeros((1, 30)))
    v = np.concatenate([[0.001], tr.values[:, 0]])
    assert np.all(v == 0.001)
    cfg = single(0.0)
    vals, _ = oracles.float_membrane([0.0] * 30, v0=0.1)
    d = np.array([0.1] + vals) - 0.001
    assert np.allclose(d[1:] / d[:-1], 0.89, atol=1e-12, rtol=0)
    assert cfg.decay_constant == -0.11


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=40), st.floats(-0.2, 0.2))
def test_single_neuron_matches_oracle(bits, w):
    tr = ref_run(single(w), np.array([bits]))
    vals, spikes = oracles.float_membrane([w * b for b in bits])
    assert np.allclose(tr.values[:, 0], vals, rtol=0, atol=1e-15)
    assert tr.spikes[:, 0].tolist() == spikes


def test_shape_errors():
    with pytest.raises(ShapeError):
        ref_run(single(0.1), np.ones((2, 5)))
    with pytest.raises(ConfigError):
        RefConfig(2, 1, np.zeros((1, 1)), np.zeros((2, 2)))


def test_effective_weights_from_reservoir():
    ref = RefConfig.from_reservoir(default_config())
    # input synapse of neuron 1 has w = 0.125: expected gain 3/7 * 0.125
    assert ref.input_weights[1, 2] == pytest.approx(0.125 * 3 / 7)
    assert ref.input_weights[0, 0] == pytest.approx(-0.125)
    assert ref.recurrent_weights[3, 0] == pytest.approx(0.125)
    assert np.count_nonzero(ref.input_weights) + np.count_nonzero(ref.recurrent_weights) == 16


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.sampled_from([-0.375, 0.375]), min_size=16, max_size=16))
def test_engines_agree_exactly_without_quantization(seed, signs):
    base = default_config()
    syn = tuple(SynapseSpec(s.source_kind, s.source, s.target, w) for s, w in zip(base.synapses, signs))
    cfg = ReservoirConfig(synapses=syn, feedback_edges=base.feedback_edges,
                          neuron_params=NeuronParams.from_volts(decay_constant=0.0))
    x = (np.random.default_rng(seed).random((20, 80)) < 0.3).astype(np.uint8)
    r = Reservoir(cfg)
    fixed, flt = r.run(x), ref_run(RefConfig.from_reservoir(r), x)
    assert np.array_equal(fixed.spikes, flt.spikes)
    assert np.array_equal(fixed.values, flt.values)


def test_divergence():
    assert divergence(0.98, 0.99) == 1.0
    assert divergence(0.98, 1.0) == 2.0
    assert divergence(0.5, 0.5) == 0
    with pytest.raises(ValueError):
        divergence(98, 99)
