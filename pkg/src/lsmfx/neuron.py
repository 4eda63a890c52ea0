"""
Hardware-faithful LIF neuron.

A synapse counts incoming pulses and, on a pulse that brings the counter to
its target, compares its stored Fix_4_3 weight with the current LFSR sample.
If the comparison passes, the synapse emits a fixed-size contribution
``sign(weight) * 2**-shift``. No multiplier sits in the synapse path.

The membrane is an 18-bit accumulator with 12 fractional bits. The only
multiplication is the leak: ``decay * (v_m - v_reset)`` once per step.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

from . import fxp
from .fxp import FIX_4_3, FIX_18_12, FxValue, quantize
from .lfsr import WEIGHT_GRID


_ONE = quantize(1, FIX_18_12)
_ZERO = fxp.zero(FIX_18_12)


class CompareMode(enum.Enum):
    EQUALITY = "equality"
    THRESHOLD = "threshold"


@dataclass(frozen=True, slots=True)
class SynapseConfig:
    weight: FxValue
    pulse_count_target: int = 1
    compare_mode: CompareMode = CompareMode.THRESHOLD

    def __post_init__(self):
        if self.weight.fmt != FIX_4_3:
            raise ValueError(f"synapse weight must be {FIX_4_3}, got {self.weight.fmt}")
        if self.pulse_count_target < 1:
            raise ValueError("pulse_count_target must be >= 1")


@dataclass(frozen=True, slots=True)
class NeuronParams:
    v_threshold: FxValue = quantize(0.15, FIX_18_12)
    v_reset: FxValue = quantize(0.001, FIX_18_12)
    decay_constant: FxValue = quantize(-0.11, FIX_18_12)
    refractory_steps: int = 1
    contribution_shift: int = 3

    def __post_init__(self):
        for name in ("v_threshold", "v_reset", "decay_constant"):
            if getattr(self, name).fmt != FIX_18_12:
                raise ValueError(f"{name} must be {FIX_18_12}")
        if not self.v_reset < self.v_threshold:
            raise ValueError("v_reset must be below v_threshold")
        if not -(1 << FIX_18_12.frac_bits) < self.decay_constant.raw <= 0:
            raise ValueError("decay_constant must lie in (-1, 0]")
        if self.refractory_steps < 0:
            raise ValueError("refractory_steps must be >= 0")
        if not 0 <= self.contribution_shift < FIX_18_12.total_bits:
            raise ValueError("contribution_shift out of range")

    @classmethod
    def from_volts(cls, v_threshold=0.15, v_reset=0.001, decay_constant=-0.11,
                   refractory_steps=1, contribution_shift=3) -> "NeuronParams":
        return cls(quantize(v_threshold, FIX_18_12), quantize(v_reset, FIX_18_12),
                   quantize(decay_constant, FIX_18_12), refractory_steps, contribution_shift)

    @property
    def unit_contribution(self) -> FxValue:
        return fxp.shr(_ONE, self.contribution_shift)


@dataclass(frozen=True, slots=True)
class NeuronState:
    v_m: FxValue
    refractory_remaining: int = 0
    pulse_counters: tuple[int, ...] = ()

    @classmethod
    def reset(cls, params: NeuronParams, n_synapses: int) -> "NeuronState":
        return cls(params.v_reset, 0, (0,) * n_synapses)


def compare_passes(cfg: SynapseConfig, sample: FxValue) -> bool:
    if cfg.compare_mode is CompareMode.EQUALITY:
        return sample.raw == cfg.weight.raw
    return abs(sample.raw) <= abs(cfg.weight.raw)


def synapse_step(cfg: SynapseConfig, counter: int, input_spike: int,
                 lfsr_sample: FxValue, shift: int = 3) -> tuple[int, FxValue]:
    """Advance one synapse by one step.

    Returns the new pulse counter and the contribution in Fix_18_12.
    The AND gate needs a pulse on this step; a counter at target with no
    pulse does not fire.
    """
    if not input_spike:
        return counter, _ZERO
    counter += 1
    if counter >= cfg.pulse_count_target and compare_passes(cfg, lfsr_sample):
        w = cfg.weight.raw
        if w == 0:
            return 0, _ZERO
        unit = fxp.shr(_ONE, shift)
        return 0, unit if w > 0 else fxp.neg(unit)
    return counter, _ZERO


def accumulate(contributions) -> FxValue:
    """Saturating Fix_18_12 sum of synapse contributions."""
    return fxp.sum_saturating(contributions, FIX_18_12)


def leak(params: NeuronParams, v_m: FxValue) -> FxValue:
    return fxp.mul_const(fxp.sub(v_m, params.v_reset), params.decay_constant)


def membrane_step(params: NeuronParams, state: NeuronState,
                  v_s: FxValue) -> tuple[NeuronState, int]:
    """One membrane update; returns the new state and the output spike bit."""
    if state.refractory_remaining > 0:
        return NeuronState(params.v_reset, state.refractory_remaining - 1,
                           state.pulse_counters), 0
    candidate = fxp.add(fxp.add(state.v_m, v_s), leak(params, state.v_m))
    if candidate >= params.v_threshold:
        return NeuronState(params.v_reset, params.refractory_steps, state.pulse_counters), 1
    return NeuronState(candidate, 0, state.pulse_counters), 0


def pass_probability(weight: FxValue, mode: CompareMode = CompareMode.THRESHOLD) -> float:
    """Fraction of the LFSR grid for which the comparison passes."""
    cfg = SynapseConfig(weight, 1, mode)
    return sum(compare_passes(cfg, s) for s in WEIGHT_GRID) / len(WEIGHT_GRID)
