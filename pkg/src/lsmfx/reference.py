"""
Floating-point reference reservoir.

Same topology and update order as the fixed-point engine, but weights are
applied directly as real numbers (no stochastic synapse, no quantization):

    V_s(t)  = sum_i w_i x_i(t)
    V_m(t)  = V_m(t-1) + V_s(t) + decay * (V_m(t-1) - V_reset)
    spike  <=> V_m(t) >= V_th, after which V_m = V_reset for the refractory period
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .neuron import pass_probability
from .reservoir import INPUT, Reservoir, ReservoirConfig, StateTrace, _stimulus_matrix


@dataclass(frozen=True)
class RefConfig:
    n_neurons: int
    input_channels: int
    input_weights: np.ndarray      # (neurons, channels)
    recurrent_weights: np.ndarray  # (neurons, neurons), [target, source]
    v_threshold: float = 0.15
    v_reset: float = 0.001
    decay_constant: float = -0.11
    refractory_steps: int = 1
    dt: float = 0.000125

    def __post_init__(self):
        if self.input_weights.shape != (self.n_neurons, self.input_channels):
            raise ConfigError(f"input_weights shape {self.input_weights.shape} does not match "
                              f"({self.n_neurons}, {self.input_channels})")
        if self.recurrent_weights.shape != (self.n_neurons, self.n_neurons):
            raise ConfigError("recurrent_weights must be square over neurons")
        if not self.v_reset < self.v_threshold:
            raise ConfigError("v_reset must be below v_threshold")
        if not -1 < self.decay_constant <= 0:
            raise ConfigError("decay_constant must lie in (-1, 0]")

    @classmethod
    def from_reservoir(cls, r: Reservoir | ReservoirConfig) -> "RefConfig":
        """Mirror a fixed-point reservoir.

        Each synapse's real weight is the expected contribution of its
        stochastic counterpart: ``sign(w) * 2**-shift * P(compare passes)``.
        Only pulse_count_target == 1 synapses have this closed form; larger
        targets are divided by the target.
        """
        if isinstance(r, ReservoirConfig):
            r = Reservoir(r)
        cfg = r.cfg
        p = cfg.neuron_params
        n, c = cfg.n_neurons, cfg.input_channels
        w_in = np.zeros((n, c))
        w_rec = np.zeros((n, n))
        unit = p.unit_contribution.value
        for spec, sc in zip(r.synapses, r.synapse_configs):
            w = float(np.sign(sc.weight.raw)) * unit * pass_probability(sc.weight, sc.compare_mode)
            w /= sc.pulse_count_target
            if spec.source_kind == INPUT:
                w_in[spec.target, spec.source] += w
            else:
                w_rec[spec.target, spec.source] += w
        return cls(n, c, w_in, w_rec, p.v_threshold.value, p.v_reset.value,
                   p.decay_constant.value, p.refractory_steps, cfg.dt)


def ref_run(cfg: RefConfig, stimulus) -> StateTrace:
    x = _stimulus_matrix(stimulus).astype(float)
    if x.shape[0] != cfg.input_channels:
        raise ShapeError(f"stimulus has {x.shape[0]} channels, reference expects {cfg.input_channels}")
    T, n = x.shape[1], cfg.n_neurons
    drive = cfg.input_weights @ x  # (n, T)
    v = np.full(n, cfg.v_reset)
    refr = np.zeros(n, dtype=int)
    last = np.zeros(n)
    values = np.zeros((T, n))
    spikes = np.zeros((T, n), dtype=np.uint8)
    for t in range(T):
        v_s = drive[:, t] + cfg.recurrent_weights @ last
        candidate = v + v_s + cfg.decay_constant * (v - cfg.v_reset)
        active = refr == 0
        fire = active & (candidate >= cfg.v_threshold)
        v = np.where(active & ~fire, candidate, cfg.v_reset)
        refr = np.where(fire, cfg.refractory_steps, np.maximum(refr - 1, 0))
        last = fire.astype(float)
        values[t] = v
        spikes[t] = fire
    return StateTrace(values, spikes)


def divergence(fixed_accuracy: float, float_accuracy: float) -> float:
    """Absolute accuracy gap in percentage points."""
    for a in (fixed_accuracy, float_accuracy):
        if not 0 <= a <= 1:
            raise ValueError(f"accuracy must be a fraction in [0, 1], got {a}")
    # rounded so that e.g. 0.98 vs 1.0 gives exactly 2.0, not 2.0000000000000018
    return round(abs(fixed_accuracy - float_accuracy) * 100.0, 9)

