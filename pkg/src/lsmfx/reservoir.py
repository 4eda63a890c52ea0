"""
Layered recurrent reservoir of fixed-point LIF neurons.

Simulation is synchronous. On each step the shared LFSR is advanced once per
synapse, in synapse-index order, and the resulting sample vector is handed
to every synapse. Neuron-to-neuron synapses see the source's spike from the
previous step. These spikes are the delay registers, so no neuron update
depends on another neuron's update in the same step.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import lfsr as lfsr_mod
from . import neuron
from .errors import ConfigError, DegenerateError, ShapeError
from .fxp import FIX_4_3, FIX_18_12, FxValue, quantize
from .lfsr import Lfsr6
from .neuron import CompareMode, NeuronParams, NeuronState, SynapseConfig

INPUT = "input"
NEURON = "neuron"
RANDOM = "random"

DEFAULT_LAYERS = (3, 2, 3)
DEFAULT_INPUTS = 20
DEFAULT_DT = 0.000125


@dataclass(frozen=True)
class SynapseSpec:
    """One synapse as written in a config file.

    ``weight`` is a real number quantized to Fix_4_3 on build, or
    ``"random"`` for a seeded draw from the LFSR grid.
    """
    source_kind: str
    source: int
    target: int
    weight: float | str = RANDOM
    pulse_count_target: int = 1
    compare_mode: CompareMode = CompareMode.THRESHOLD

    def to_dict(self) -> dict:
        return {
            "source": f"{self.source_kind}:{self.source}",
            "target": self.target,
            "weight": self.weight,
            "pulse_count_target": self.pulse_count_target,
            "compare_mode": self.compare_mode.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynapseSpec":
        try:
            kind, _, idx = str(d["source"]).partition(":")
            return cls(kind, int(idx), int(d["target"]), d.get("weight", RANDOM),
                       int(d.get("pulse_count_target", 1)),
                       CompareMode(d.get("compare_mode", CompareMode.THRESHOLD.value)))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad synapse entry {d!r}: {exc}") from exc


@dataclass(frozen=True)
class ReservoirConfig:
    layer_sizes: tuple[int, ...] = DEFAULT_LAYERS
    input_channels: int = DEFAULT_INPUTS
    synapses: tuple[SynapseSpec, ...] = ()
    feedback_edges: tuple[tuple[int, int], ...] = ()
    neuron_params: NeuronParams = field(default_factory=NeuronParams)
    lfsr: Lfsr6 = field(default_factory=Lfsr6)
    dt: float = DEFAULT_DT
    seed: int = 0

    @property
    def n_neurons(self) -> int:
        return sum(self.layer_sizes)

    def layer_of(self, neuron_id: int) -> int:
        edge = 0
        for i, size in enumerate(self.layer_sizes):
            edge += size
            if neuron_id < edge:
                return i
        raise IndexError(neuron_id)

    def validate(self) -> None:
        if not self.layer_sizes or any(s < 1 for s in self.layer_sizes):
            raise ConfigError(f"layer_sizes must be positive integers, got {self.layer_sizes}")
        if self.input_channels < 1:
            raise ConfigError("input_channels must be >= 1")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        n = self.n_neurons
        incoming = [0] * n
        neuron_edges = set()
        for i, s in enumerate(self.synapses):
            if not 0 <= s.target < n:
                raise ConfigError(f"synapse {i} targets neuron {s.target}, valid ids are 0..{n - 1}")
            if s.source_kind == INPUT:
                if not 0 <= s.source < self.input_channels:
                    raise ConfigError(f"synapse {i} reads input channel {s.source}, "
                                      f"valid channels are 0..{self.input_channels - 1}")
            elif s.source_kind == NEURON:
                if not 0 <= s.source < n:
                    raise ConfigError(f"synapse {i} reads neuron {s.source}, valid ids are 0..{n - 1}")
                neuron_edges.add((s.source, s.target))
            else:
                raise ConfigError(f"synapse {i} has unknown source kind {s.source_kind!r}")
            if s.pulse_count_target < 1:
                raise ConfigError(f"synapse {i} has pulse_count_target < 1")
            incoming[s.target] += 1
        for nid, count in enumerate(incoming):
            if count < 2:
                raise ConfigError(f"neuron {nid} has {count} incoming synapses, minimum is 2")
        for src, dst in self.feedback_edges:
            if not (0 <= src < n and 0 <= dst < n):
                raise ConfigError(f"feedback edge ({src}, {dst}) references an unknown neuron")
            if (src, dst) not in neuron_edges:
                raise ConfigError(f"feedback edge ({src}, {dst}) has no matching neuron synapse")

    def to_dict(self) -> dict:
        p = self.neuron_params
        return {
            "layer_sizes": list(self.layer_sizes),
            "input_channels": self.input_channels,
            "synapses": [s.to_dict() for s in self.synapses],
            "feedback_edges": [list(e) for e in self.feedback_edges],
            "neuron": {
                "v_threshold": p.v_threshold.value,
                "v_reset": p.v_reset.value,
                "decay_constant": p.decay_constant.value,
                "refractory_steps": p.refractory_steps,
                "contribution_shift": p.contribution_shift,
            },
            "lfsr": {"seed": self.lfsr.state, "taps": list(self.lfsr.taps)},
            "dt": self.dt,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReservoirConfig":
        try:
            nd = d.get("neuron", {})
            params = NeuronParams.from_volts(
                nd.get("v_threshold", 0.15), nd.get("v_reset", 0.001),
                nd.get("decay_constant", -0.11), int(nd.get("refractory_steps", 1)),
                int(nd.get("contribution_shift", 3)))
            ld = d.get("lfsr", {})
            lf = Lfsr6(int(ld.get("seed", lfsr_mod.DEFAULT_SEED)),
                       tuple(int(t) for t in ld.get("taps", lfsr_mod.DEFAULT_TAPS)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        layers = tuple(int(s) for s in d.get("layer_sizes", DEFAULT_LAYERS))
        inputs = int(d.get("input_channels", DEFAULT_INPUTS))
        if "synapses" not in d:
            base = default_config(layer_sizes=layers, input_channels=inputs)
            synapses, feedback = base.synapses, base.feedback_edges
        else:
            synapses = tuple(SynapseSpec.from_dict(s) for s in d["synapses"])
            feedback = tuple((int(a), int(b)) for a, b in d.get("feedback_edges", ()))
        cfg = cls(
            layer_sizes=layers,
            input_channels=inputs,
            synapses=synapses,
            feedback_edges=feedback,
            neuron_params=params,
            lfsr=lf,
            dt=float(d.get("dt", DEFAULT_DT)),
            seed=int(d.get("seed", 0)),
        )
        cfg.validate()
        return cfg

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ReservoirConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data)


def default_wiring(layer_sizes=DEFAULT_LAYERS, input_channels=DEFAULT_INPUTS):
    """Default synapse list and feedback edges for a layered reservoir.

    Every neuron gets one input synapse, with channels spread evenly over
    the input width. Consecutive layers are linked neuron ``j`` to neuron
    ``j mod size``, so every neuron past the first layer gets at least one
    forward synapse. The last layer feeds back one-to-one into the first.
    For (3, 2, 3) this gives 8 + 2 + 3 + 3 = 16 synapses.
    """
    n = sum(layer_sizes)
    starts = np.cumsum((0,) + tuple(layer_sizes))[:-1].tolist()
    synapses = [SynapseSpec(INPUT, i * input_channels // n, i) for i in range(n)]
    for li in range(1, len(layer_sizes)):
        prev, cur = layer_sizes[li - 1], layer_sizes[li]
        for j in range(cur):
            synapses.append(SynapseSpec(NEURON, starts[li - 1] + j % prev, starts[li] + j))
    feedback = []
    if len(layer_sizes) > 1:
        last, first = layer_sizes[-1], layer_sizes[0]
        for j in range(max(last, first)):
            src, dst = starts[-1] + j % last, j % first
            if (src, dst) not in feedback:
                synapses.append(SynapseSpec(NEURON, src, dst))
                feedback.append((src, dst))
    else:
        for j in range(layer_sizes[0]):
            synapses.append(SynapseSpec(INPUT, (j + n) * input_channels // (2 * n) % input_channels, j))
    return tuple(synapses), tuple(feedback)


# Weights for the default (3, 2, 3) wiring, in synapse order: eight input
# synapses, then 0->3, 1->4, 3->5, 4->6, 3->7, and feedback 5->0, 6->1, 7->2.
# Most inputs inhibit, so those membranes integrate their input rate below
# threshold; neurons 1 and 5 are excited, fire, and drive 4 and (inhibiting) 0.
DEFAULT_WEIGHTS = (-0.375, 0.125, -0.375, -0.25, -0.375, 0.125, -0.25, -0.375,
                   0.375, 0.375, -0.25, 0.375, 0.375, -0.25, 0.375, 0.375)


def default_config(**overrides) -> ReservoirConfig:
    """The (3, 2, 3) reservoir with 16 synapses, or default wiring for other sizes.

    Weights are the fixed ``DEFAULT_WEIGHTS`` for the default layout and
    seeded random draws otherwise.
    """
    layers = tuple(overrides.get("layer_sizes", DEFAULT_LAYERS))
    inputs = overrides.get("input_channels", DEFAULT_INPUTS)
    synapses, feedback = default_wiring(layers, inputs)
    if layers == DEFAULT_LAYERS and inputs == DEFAULT_INPUTS:
        synapses = tuple(replace(s, weight=w) for s, w in zip(synapses, DEFAULT_WEIGHTS))
    cfg = ReservoirConfig(layer_sizes=tuple(layers), input_channels=inputs,
                          synapses=synapses, feedback_edges=feedback)
    cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


@dataclass(frozen=True, slots=True)
class ReservoirState:
    neurons: tuple[NeuronState, ...]
    last_spikes: tuple[int, ...]
    step_index: int = 0


@dataclass
class StateTrace:
    """Membrane potentials (volts) per step and neuron, plus output spikes."""
    values: np.ndarray
    spikes: np.ndarray
    raw: np.ndarray | None = None

    @property
    def shape(self):
        return self.values.shape

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"n{i}" for i in range(self.values.shape[1])])
        for row in self.values:
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "StateTrace":
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        n = len(rows[0])
        values = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, n)
        return cls(values, np.zeros(values.shape, dtype=np.uint8))


class Reservoir:
    """A built, validated reservoir with resolved weights and its run state."""

    def __init__(self, cfg: ReservoirConfig):
        cfg.validate()
        self.cfg = cfg
        self.synapses = tuple(cfg.synapses)
        self.synapse_configs = tuple(_resolve_weights(cfg))
        n = cfg.n_neurons
        self.incoming = tuple(
            tuple(i for i, s in enumerate(self.synapses) if s.target == nid) for nid in range(n))
        # the generator restarts from its seed on reset, so one period covers every run
        self._cycle = lfsr_mod.cycle(cfg.lfsr)
        self.reset()

    @property
    def n_neurons(self) -> int:
        return self.cfg.n_neurons

    @property
    def n_inputs(self) -> int:
        return self.cfg.input_channels

    def reset(self) -> None:
        p = self.cfg.neuron_params
        self.state = ReservoirState(
            tuple(NeuronState.reset(p, len(inc)) for inc in self.incoming),
            (0,) * self.n_neurons, 0)
        self._draws = 0

    @property
    def lfsr(self) -> Lfsr6:
        """Generator state after the draws made so far."""
        lf = self.cfg.lfsr
        for _ in range(self._draws % len(self._cycle)):
            lf, _ = lfsr_mod.step(lf)
        return lf

    @property
    def delayed_spikes(self) -> tuple[int, ...]:
        return tuple(self.state.last_spikes[src] for src, _ in self.cfg.feedback_edges)

    def step(self, input_spikes) -> tuple[tuple[int, ...], tuple[FxValue, ...]]:
        """Advance one synchronous step; returns output spikes and membranes."""
        if len(input_spikes) != self.n_inputs:
            raise ShapeError(f"expected {self.n_inputs} input bits, got {len(input_spikes)}")
        p = self.cfg.neuron_params
        samples = self._next_samples(len(self.synapses))
        last = self.state.last_spikes
        new_neurons, spikes = [], []
        for nid, ns in enumerate(self.state.neurons):
            counters, contribs = [], []
            for slot, si in enumerate(self.incoming[nid]):
                syn = self.synapses[si]
                bit = input_spikes[syn.source] if syn.source_kind == INPUT else last[syn.source]
                c, contrib = neuron.synapse_step(self.synapse_configs[si], ns.pulse_counters[slot],
                                                 int(bit), samples[si], p.contribution_shift)
                counters.append(c)
                contribs.append(contrib)
            ns = NeuronState(ns.v_m, ns.refractory_remaining, tuple(counters))
            ns, out = neuron.membrane_step(p, ns, neuron.accumulate(contribs))
            new_neurons.append(ns)
            spikes.append(out)
        self.state = ReservoirState(tuple(new_neurons), tuple(spikes), self.state.step_index + 1)
        return self.state.last_spikes, tuple(ns.v_m for ns in self.state.neurons)

    def _next_samples(self, n: int) -> list[FxValue]:
        period = len(self._cycle)
        start = self._draws
        self._draws += n
        return [self._cycle[(start + i) % period] for i in range(n)]

    def run(self, stimulus) -> StateTrace:
        """Run from the reset state over a (channels x timesteps) spike matrix."""
        spikes_in = _stimulus_matrix(stimulus)
        if spikes_in.shape[0] != self.n_inputs:
            raise ShapeError(f"stimulus has {spikes_in.shape[0]} channels, "
                             f"reservoir expects {self.n_inputs}")
        self.reset()
        T, n = spikes_in.shape[1], self.n_neurons
        raw = np.zeros((T, n), dtype=np.int64)
        out = np.zeros((T, n), dtype=np.uint8)
        cols = spikes_in.T.tolist()
        for t in range(T):
            s, v = self.step(cols[t])
            raw[t] = [x.raw for x in v]
            out[t] = s
        return StateTrace(raw / float(1 << FIX_18_12.frac_bits), out, raw)


def _stimulus_matrix(stimulus) -> np.ndarray:
    m = getattr(stimulus, "spikes", stimulus)
    m = np.asarray(m)
    if m.ndim != 2:
        raise ShapeError(f"stimulus must be 2-D (channels x timesteps), got shape {m.shape}")
    return m.astype(np.uint8)


def _resolve_weights(cfg: ReservoirConfig) -> list[SynapseConfig]:
    rng = np.random.default_rng(cfg.seed)
    grid = lfsr_mod.WEIGHT_GRID
    out = []
    for i, s in enumerate(cfg.synapses):
        if isinstance(s.weight, str):
            if s.weight != RANDOM:
                raise ConfigError(f"synapse {i}: weight must be a number or 'random'")
            w = grid[int(rng.integers(len(grid)))]
        else:
            try:
                w = quantize(s.weight, FIX_4_3)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"synapse {i}: bad weight {s.weight!r}") from exc
            if abs(w.raw) > grid[-1].raw:
                raise ConfigError(f"synapse {i}: weight {s.weight!r} outside [-0.4, 0.4]")
        out.append(SynapseConfig(w, s.pulse_count_target, s.compare_mode))
    return out


def build(cfg: ReservoirConfig) -> Reservoir:
    return Reservoir(cfg)


def run(r: Reservoir, stimulus) -> StateTrace:
    return r.run(stimulus)


def separation_metric(traces_a, traces_b) -> float:
    """Mean inter-class over mean intra-class Euclidean state distance.

    Distances are averaged over all ordered pairs, self-pairs included, so
    two identical sets give exactly 1.
    """
    a = _stack(traces_a)
    b = _stack(traces_b)
    if a.shape[1:] != b.shape[1:]:
        raise ShapeError(f"trace shapes differ: {a.shape[1:]} vs {b.shape[1:]}")
    inter = _mean_pairwise(a, b)
    intra = 0.5 * (_mean_pairwise(a, a) + _mean_pairwise(b, b))
    if intra == 0:
        if inter == 0:
            raise DegenerateError("all traces are identical; separation is undefined")
        return float("inf")
    return inter / intra


def _stack(traces) -> np.ndarray:
    arrs = [np.asarray(getattr(t, "values", t), dtype=float).ravel() for t in traces]
    if not arrs:
        raise ShapeError("empty trace set")
    shapes = {x.shape for x in arrs}
    if len(shapes) != 1:
        raise ShapeError(f"traces within a set differ in shape: {shapes}")
    return np.stack(arrs)


def _mean_pairwise(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1).mean())
