"""Acceptance suite: one test per numbered criterion, each printing a verdict line.

Run with ``pytest tests/test_acceptance.py -v``. The verdict lines are
written past pytest's capture so they always appear in the log.
"""
import random
import time
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from lsmfx import fxp, lfsr, neuron, readout, resources
from lsmfx.cli import main
from lsmfx.encoding import encode_poisson
from lsmfx.fxp import FIX_4_3, FIX_18_12, FxValue, quantize
from lsmfx.neuron import NeuronParams, NeuronState
from lsmfx.pipeline import (PipelineConfig, encode_all, run_engine, synthetic_features)
from lsmfx.reference import RefConfig, divergence, ref_run
from lsmfx.reservoir import INPUT, Reservoir, ReservoirConfig, SynapseSpec, default_config, separation_metric
from lsmfx.readout import ReadoutModel, SampledState, TrainConfig

import oracles


@pytest.fixture
def verdict(capsys):
    def emit(n: int, ok: bool, detail: str, seconds: float, budget: float):
        within = seconds < budget
        line = (f"criterion {n:>2}: {'PASS' if ok and within else 'FAIL'}  {detail}  "
                f"[{seconds:.2f} s of {budget:g} s]")
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
        assert within, line
    return emit


@pytest.fixture(scope="module")
def default_run():
    """Default synthetic pipeline through both engines (seed 0, 200 utterances)."""
    cfg = PipelineConfig()
    t0 = time.perf_counter()
    labels, feats = synthetic_features(cfg)
    stims = encode_all(labels, feats, cfg)
    out = {e: run_engine(labels, stims, cfg, e) for e in ("fixed", "float")}
    return cfg, labels, out, time.perf_counter() - t0


def test_criterion_01_resource_model(verdict):
    t0 = time.perf_counter()
    got = [
        resources.estimate(1, 2).slices,
        resources.estimate(8, 16).slices,
        resources.estimate(8, 16).multipliers,
        resources.estimate(8, 16, resources.Design.TRADITIONAL).multipliers,
        resources.estimate(1, 100).synapse_slices,
    ]
    expected = [85, 680, 8, 24, 400]
    verdict(1, got == expected, f"resource points {got} vs {expected}", time.perf_counter() - t0, 1)


def test_criterion_02_lfsr_maximal_length(verdict):
    t0 = time.perf_counter()
    reg, seen = lfsr.Lfsr6(), []
    for _ in range(63):
        reg, s = lfsr.step(reg)
        seen.append(s)
    ok = (seen[-1] == 1 and seen.index(1) == 62 and sorted(seen) == list(range(1, 64))
          and lfsr.period(lfsr.Lfsr6()) == 63 and seen == oracles.lfsr_states())
    verdict(2, ok, f"period {lfsr.period(lfsr.Lfsr6())}, {len(set(seen))} distinct nonzero states",
            time.perf_counter() - t0, 1)


def test_criterion_03_fixed_point_oracle(verdict):
    t0 = time.perf_counter()
    rng = random.Random(2024)
    lo, hi = FIX_18_12.raw_min, FIX_18_12.raw_max
    mismatches = exact = saturated = 0
    for _ in range(100_000):
        op = rng.choice(("add", "sub", "shr", "mul"))
        a = rng.randint(lo, hi)
        if op == "shr":
            k = rng.randint(0, 17)
            got = fxp.shr(FxValue(a, FIX_18_12), k)
            want, sat = a // 2 ** k, False
        elif op == "mul":
            fmt = rng.choice((FIX_18_12, FIX_4_3))
            c = rng.randint(fmt.raw_min, fmt.raw_max)
            got = fxp.mul_const(FxValue(a, FIX_18_12), FxValue(c, fmt))
            ideal = oracles.fx_round_even(Fraction(a * c, 2 ** fmt.frac_bits))
            want, sat = oracles.fx_saturate(ideal, 18), not lo <= ideal <= hi
        else:
            b = rng.randint(lo, hi)
            ideal = a + b if op == "add" else a - b
            got = fxp.add(FxValue(a, FIX_18_12), FxValue(b, FIX_18_12)) if op == "add" \
                else fxp.sub(FxValue(a, FIX_18_12), FxValue(b, FIX_18_12))
            want, sat = min(max(ideal, lo), hi), not lo <= ideal <= hi
        saturated += sat
        exact += not sat
        if got.raw != want or got.saturated != sat:
            mismatches += 1
    verdict(3, mismatches == 0 and saturated > 0,
            f"{mismatches} mismatches over 100000 ops ({exact} exact, {saturated} clamped)",
            time.perf_counter() - t0, 10)


def _leak_ratios_fixed():
    p = NeuronParams()
    s = NeuronState(quantize(0.1, FIX_18_12))
    gaps = [s.v_m.raw - p.v_reset.raw]
    while gaps[-1] > 10:
        s, _ = neuron.membrane_step(p, s, fxp.zero(FIX_18_12))
        gaps.append(s.v_m.raw - p.v_reset.raw)
    return gaps


def _leak_ratios_float():
    ref = RefConfig(1, 1, np.zeros((1, 1)), np.zeros((1, 1)))
    vals, _ = oracles.float_membrane([0.0] * 40, v0=0.1, decay=ref.decay_constant)
    d = np.array([0.1] + vals) - ref.v_reset
    return d[1:] / d[:-1]


@pytest.mark.xfail(strict=True, reason="Fix_18_12 has no successor within 0.89 +- 0.02 for "
                   "gaps of 12..15 quanta; see decisions ledger")
def test_criterion_04_leakage_dynamics(verdict):
    t0 = time.perf_counter()
    gaps = _leak_ratios_fixed()
    ratios = [b / a for a, b in zip(gaps, gaps[1:])]
    bad = [(a, b) for a, b in zip(gaps, gaps[1:]) if abs(b / a - 0.89) > 0.02]
    float_err = float(np.max(np.abs(_leak_ratios_float() - 0.89)))
    ok = not bad and float_err <= 1e-12 and all(b < a for a, b in zip(gaps, gaps[1:]))
    verdict(4, ok, f"{len(ratios)} fixed steps, out-of-band gap pairs {bad}, "
            f"float max |ratio - 0.89| {float_err:.1e}", time.perf_counter() - t0, 1)


def test_leakage_ratio_above_quantization_floor():
    # the attainable part of criterion 4: in band while the gap is >= 25 quanta
    gaps = _leak_ratios_fixed()
    pairs = [(a, b) for a, b in zip(gaps, gaps[1:]) if a >= 25]
    assert pairs and all(abs(b / a - 0.89) <= 0.02 for a, b in pairs)
    assert gaps[-1] <= 10 and all(b < a for a, b in zip(gaps, gaps[1:]))
    assert np.max(np.abs(_leak_ratios_float() - 0.89)) <= 1e-12


def test_criterion_05_spike_contract(verdict):
    t0 = time.perf_counter()
    p = NeuronParams()
    s0 = NeuronState.reset(p, 2)
    s1, spike = neuron.membrane_step(p, s0, FxValue(611, FIX_18_12))  # candidate raw 615
    s2, spike2 = neuron.membrane_step(p, s1, quantize(1.0, FIX_18_12))
    s3, spike3 = neuron.membrane_step(p, s2, quantize(1.0, FIX_18_12))
    below, none = neuron.membrane_step(p, s0, FxValue(609, FIX_18_12))  # candidate 613
    contract = (spike == 1 and s1.v_m.raw == 4 and s1.v_m.value == 0.0009765625
                and p.v_threshold.value == pytest.approx(0.149902, abs=5e-7)
                and spike2 == 0 and s2.v_m.raw == 4 and spike3 == 1 and none == 0)

    rng = np.random.default_rng(55)
    disagree = 0
    for _ in range(1000):
        raws = rng.integers(-3, 4, size=2)
        targets = rng.integers(1, 3, size=2)
        syn = tuple(SynapseSpec(INPUT, c, 0, int(w) / 8, int(t)) for c, w, t in zip((0, 1), raws, targets))
        r = Reservoir(ReservoirConfig(layer_sizes=(1,), input_channels=2, synapses=syn,
                                      lfsr=lfsr.Lfsr6(int(rng.integers(1, 64)))))
        x = (rng.random((2, 30)) < rng.uniform(0.2, 1.0)).astype(np.uint8)
        ors = [(s.source_kind, s.source, s.target, c.weight.raw, c.pulse_count_target)
               for s, c in zip(r.synapses, r.synapse_configs)]
        disagree += not np.array_equal(r.run(x).raw, oracles.reservoir_trace(1, ors, x, r.cfg.lfsr.state))
    verdict(5, contract and disagree == 0,
            f"single-spike contract {'held' if contract else 'broken'}, "
            f"{disagree}/1000 trace disagreements", time.perf_counter() - t0, 5)


def test_criterion_06_determinism(verdict, tmp_path, capsys):
    assert main(["features", "--out", str(tmp_path)]) == 0
    assert main(["encode", str(tmp_path / "features.csv"), "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    runs = {}
    slowest = 0.0
    for name, jobs in (("a", 1), ("b", 1), ("c", 2)):
        t0 = time.perf_counter()
        assert main(["simulate", str(tmp_path / "spikes"), "--jobs", str(jobs),
                     "--out", str(tmp_path / name)]) == 0
        slowest = max(slowest, time.perf_counter() - t0)
        d = tmp_path / name
        runs[name] = {p.relative_to(d): p.read_bytes() for p in sorted(d.rglob("*.csv"))}
    capsys.readouterr()
    ok = runs["a"] == runs["b"] == runs["c"] and len(runs["a"]) == 201
    verdict(6, ok, f"{len(runs['a'])} files byte-identical across 1, 1 and 2 workers", slowest, 30)


def test_criterion_07_separation(verdict):
    t0 = time.perf_counter()
    r = Reservoir(default_config())
    wins, scores = 0, []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        base = rng.uniform(10, 2000, 20)
        other = base.copy()
        changed = rng.choice(20, 10, replace=False)
        other[changed] *= rng.uniform(2.0, 4.0, 10)
        other = np.minimum(other, 1 / 0.000125)

        def trains(rates, tag):
            p = rates * 0.000125
            return [r.run((np.random.default_rng([seed, tag, k]).random((20, 250)) < p[:, None])
                          .astype(np.uint8)) for k in range(6)]
        s = separation_metric(trains(base, 0), trains(other, 1))
        scores.append(s)
        wins += s > 1
    verdict(7, wins >= 19, f"separation > 1 in {wins}/20 seeds (min {min(scores):.3f}, "
            f"median {np.median(scores):.3f})", time.perf_counter() - t0, 60)


def test_criterion_08_readout(verdict, default_run):
    cfg, labels, out, sim_time = default_run
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    errs = []
    for k in range(20):
        m = ReadoutModel.init(40, 30, 10, seed=k)
        m.w1 *= rng.uniform(0.5, 3.0)
        errs.append(readout.gradient_check(m, SampledState(rng.normal(size=40), int(rng.integers(10)))))
    states = out["fixed"][1]
    x = np.stack([s.vector for s in states])
    model = readout.train((x, labels), cfg.train_config(), 10)
    acc = readout.accuracy(model, x, labels)
    ok = max(errs) < 1e-4 and acc == 1.0 and model.log["epochs"] <= cfg.readout.epochs
    verdict(8, ok, f"max gradient rel. error {max(errs):.2e}; train accuracy {100 * acc:.2f} % "
            f"on {len(labels)} samples after {model.log['epochs']} epochs",
            time.perf_counter() - t0 + sim_time / 2, 120)


def test_criterion_09_fixed_vs_float(verdict, default_run):
    cfg, labels, out, sim_time = default_run
    fixed, flt = out["fixed"][2], out["float"][2]
    div = divergence(fixed.test_accuracy, flt.test_accuracy)
    ok = div <= 2.0 and flt.test_accuracy >= 0.90
    verdict(9, ok, f"test accuracy fixed {100 * fixed.test_accuracy:.2f} %, float "
            f"{100 * flt.test_accuracy:.2f} %, divergence {div:.2f} points",
            sim_time, 300)


def test_criterion_10_sampling(verdict):
    t0 = time.perf_counter()
    idx = readout.sample_indices(250, 5)
    vec = readout.sample_states(np.zeros((250, 8)), 5).vector
    verdict(10, idx == [50, 100, 150, 200, 250] and vec.shape == (40,),
            f"indices {idx}, vector length {len(vec)}", time.perf_counter() - t0, 1)
