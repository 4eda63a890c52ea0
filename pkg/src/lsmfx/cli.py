"""Command-line front end: one subcommand per pipeline stage."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, frontend, pipeline, readout, resources
from .errors import LsmError, ShapeError
from .pipeline import PipelineConfig


class StageError(Exception):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _out(args, default: str = ".") -> Path:
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_confusion(title: str, cm: np.ndarray) -> None:
    print(f"{title} (rows = true class, columns = predicted class, counts):")
    width = max(3, len(str(cm.max())) + 1)
    print("    " + "".join(f"{j:>{width}}" for j in range(cm.shape[1])))
    for i, row in enumerate(cm):
        print(f"{i:>3} " + "".join(f"{v:>{width}}" for v in row))


def _print_eval(name: str, rep: pipeline.EvalReport) -> None:
    log = rep.model.log
    print(f"[{name}] optimizer {log['optimizer']}, {log['epochs']} epochs, "
          f"final MSE {log['final_mse']:.6g}, converged {log['converged']}")
    print(f"[{name}] train accuracy {100 * rep.train_accuracy:.2f} %")
    print(f"[{name}] test accuracy {100 * rep.test_accuracy:.2f} %")
    _print_confusion(f"[{name}] test confusion matrix", rep.confusion)


# -- stages -------------------------------------------------------------------

def stage_features(cfg: PipelineConfig, inputs, out: Path) -> Path:
    if inputs:
        cfg.dataset = str(inputs)
    labels, feats = pipeline.make_features(cfg)
    path = out / "features.csv"
    frontend.write_feature_csv(path, labels, feats)
    print(f"features: {len(labels)} utterances x {feats.shape[1]} features -> {path}")
    return path


def stage_encode(cfg: PipelineConfig, features_csv, out: Path) -> Path:
    labels, feats = frontend.read_feature_csv(features_csv)
    if len(labels) == 0:
        raise ShapeError(f"{features_csv}: no feature rows")
    stims = pipeline.encode_all(labels, feats, cfg)
    spike_dir = out / "spikes"
    pipeline.write_spike_dir(spike_dir, stims)
    s = stims[0]
    print(f"encode: {len(stims)} spike trains of {s.channels} channels x {s.timesteps} steps "
          f"(dt {cfg.encoding.dt * 1e3:g} ms) -> {spike_dir}")
    return spike_dir


def stage_simulate(cfg: PipelineConfig, spike_dir, out: Path, engine: str, jobs: int) -> Path:
    stims = pipeline.read_spike_dir(spike_dir)
    labels = [s.label for s in stims]
    traces = pipeline.simulate_all(stims, cfg.reservoir, engine, jobs)
    trace_dir = out / f"traces_{engine}"
    trace_dir.mkdir(parents=True, exist_ok=True)
    for i, t in enumerate(traces):
        t.to_csv(trace_dir / f"{pipeline.utterance_name(i)}.csv")
    states = pipeline.sampled_states(traces, labels, cfg.readout.frames)
    path = out / f"states_{engine}.csv"
    readout.write_states_csv(path, states)
    rate = np.mean([t.spikes.mean() for t in traces])
    print(f"simulate[{engine}]: {len(traces)} traces of {traces[0].shape[0]} steps x "
          f"{traces[0].shape[1]} neurons -> {trace_dir}")
    print(f"simulate[{engine}]: mean firing {100 * rate:.3f} % of steps; "
          f"{len(states)} x {1 + len(states[0].vector)} sampled states -> {path}")
    return path


def stage_train(cfg: PipelineConfig, states_csv, out: Path, name: str = "train") -> Path:
    x, labels = readout.read_states_csv(states_csv)
    rep = pipeline.train_and_evaluate(x, labels, cfg)
    path = out / "model.json"
    rep.model.save(path)
    _print_eval(name, rep)
    print(f"[{name}] model -> {path}")
    return path


def stage_eval(states_csv, model_path, subset: str) -> float:
    x, labels = readout.read_states_csv(states_csv)
    model = readout.ReadoutModel.load(model_path)
    if x.shape[1] != model.dims[0]:
        raise ShapeError(f"{states_csv} has {x.shape[1]} state columns, "
                         f"model {model_path} expects {model.dims[0]}")
    if subset != "all":
        key = f"{subset}_indices"
        if key not in model.log:
            raise ShapeError(f"model {model_path} has no recorded {subset} split")
        idx = np.array(model.log[key], dtype=int)
        if len(idx) and idx.max() >= len(labels):
            raise ShapeError(f"{states_csv} has {len(labels)} rows, split refers to row {idx.max()}")
        x, labels = x[idx], labels[idx]
    acc = readout.accuracy(model, x, labels)
    print(f"eval: {subset} accuracy {100 * acc:.2f} % on {len(labels)} samples")
    _print_confusion(f"eval: {subset} confusion matrix",
                     readout.confusion_matrix(model, x, labels, model.dims[2]))
    return acc


def stage_compare(cfg: PipelineConfig, out: Path, jobs: int) -> pipeline.CompareReport:
    rep = pipeline.compare(cfg, jobs)
    _print_eval("fixed", rep.fixed)
    _print_eval("float", rep.float)
    print(f"compare: fixed test accuracy {100 * rep.fixed.test_accuracy:.2f} %, "
          f"float test accuracy {100 * rep.float.test_accuracy:.2f} %")
    print(f"compare: divergence {rep.divergence:.2f} percentage points")
    summary = {
        "fixed": {"train_accuracy": rep.fixed.train_accuracy,
                  "test_accuracy": rep.fixed.test_accuracy,
                  "confusion": rep.fixed.confusion.tolist()},
        "float": {"train_accuracy": rep.float.train_accuracy,
                  "test_accuracy": rep.float.test_accuracy,
                  "confusion": rep.float.confusion.tolist()},
        "divergence_points": rep.divergence,
    }
    (out / "compare.json").write_text(json.dumps(summary, indent=2) + "\n")
    return rep


def stage_resources(neurons: int, synapses: int, design: str, check: bool) -> None:
    designs = list(resources.Design) if design == "both" else [resources.Design(design)]
    ests = [((neurons, synapses), resources.estimate(neurons, synapses, d)) for d in designs]
    for (n, s), e in ests:
        print(f"resources[{e.design.value}]: {n} neurons, {s} synapses -> {e.slices} slices "
              f"({e.synapse_slices} slices in synapses), {e.multipliers} multipliers, "
              f"{100 * e.utilization:.3f} % of {e.device_slices} device slices")
    if check:
        for row in resources.fit_check():
            status = "ok" if row.ok else "MISMATCH"
            print(f"check: {row.description}: expected {row.expected}, got {row.got} [{status}]")


# -- argument parsing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON (defaults when omitted)")
    common.add_argument("--seed", type=int, help="global seed, overrides the config")
    common.add_argument("--out", help="output directory (default: current directory)")

    engine = argparse.ArgumentParser(add_help=False)
    engine.add_argument("--engine", choices=pipeline.ENGINES, default="fixed")
    engine.add_argument("--jobs", type=int, default=1, help="worker processes for simulation")

    p = argparse.ArgumentParser(prog="lsmfx", description="Fixed-point liquid state machine pipeline")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("config", parents=[common], help="write the default config")
    s = sub.add_parser("features", parents=[common], help="WAV directory or synthetic corpus -> features.csv")
    s.add_argument("--inputs", help="directory of WAV files; synthetic corpus when omitted")
    s = sub.add_parser("encode", parents=[common], help="features.csv -> spike trains")
    s.add_argument("features_csv")
    s = sub.add_parser("simulate", parents=[common, engine], help="spike trains -> traces and states")
    s.add_argument("spike_dir")
    s = sub.add_parser("train", parents=[common], help="states CSV -> readout model")
    s.add_argument("states_csv")
    s = sub.add_parser("eval", parents=[common], help="score a model on a states CSV")
    s.add_argument("states_csv")
    s.add_argument("model")
    s.add_argument("--subset", choices=("test", "train", "all"), default="test")
    s = sub.add_parser("compare", parents=[common, engine], help="fixed vs float engines end to end")
    s = sub.add_parser("resources", parents=[common], help="FPGA resource estimate")
    s.add_argument("--neurons", type=int, default=8)
    s.add_argument("--synapses", type=int, default=16)
    s.add_argument("--design", choices=("proposed", "traditional", "both"), default="both")
    s.add_argument("--check", action="store_true", help="also compare against the reference figures")
    s = sub.add_parser("pipeline", parents=[common, engine], help="run every stage for one engine")
    s.add_argument("--inputs", help="directory of WAV files; synthetic corpus when omitted")
    return p


def run(args) -> None:
    cmd = args.command
    stage = cmd
    try:
        if cmd == "resources":
            stage_resources(args.neurons, args.synapses, args.design, args.check)
            return
        if cmd == "eval":
            stage_eval(args.states_csv, args.model, args.subset)
            return
        stage = "config"
        cfg = _load_config(args)
        stage = cmd
        out = _out(args)
        if cmd == "config":
            cfg.save(out / "config.json")
            print(f"config -> {out / 'config.json'}")
        elif cmd == "features":
            stage_features(cfg, args.inputs, out)
        elif cmd == "encode":
            stage_encode(cfg, args.features_csv, out)
        elif cmd == "simulate":
            stage_simulate(cfg, args.spike_dir, out, args.engine, args.jobs)
        elif cmd == "train":
            stage_train(cfg, args.states_csv, out)
        elif cmd == "compare":
            stage_compare(cfg, out, args.jobs)
        elif cmd == "pipeline":
            cfg.save(out / "config.json")
            stage = "features"
            feats = stage_features(cfg, args.inputs, out)
            stage = "encode"
            spikes = stage_encode(cfg, feats, out)
            stage = "simulate"
            states = stage_simulate(cfg, spikes, out, args.engine, args.jobs)
            stage = "train"
            stage_train(cfg, states, out, args.engine)
    except (LsmError, OSError, ValueError) as exc:
        raise StageError(stage, exc) from exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except StageError as exc:
        print(f"lsmfx: error in stage {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
