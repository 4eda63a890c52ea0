"""
Pipeline configuration and stage runners shared by the CLI.

Every stage draws its randomness from ``stage_seed(global_seed, tag)``, so a
stage can be re-run on its own without disturbing the others. Per-utterance
work is keyed by utterance index and may run in worker processes; results
are gathered in index order, so output bytes do not depend on scheduling.
"""
from __future__ import annotations

import hashlib
import json
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import encoding, frontend, readout, reference
from .errors import ConfigError, FormatError, ShapeError
from .reservoir import Reservoir, ReservoirConfig, StateTrace, default_config

ENGINES = ("fixed", "float")


def stage_seed(seed: int, tag: str) -> int:
    digest = hashlib.blake2b(f"{seed}:{tag}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


@dataclass
class FrontendConfig:
    classes: int = 10
    per_class: int = 20
    frames: int = 40
    jitter: float = 0.02
    lpc_order: int = frontend.LPC_ORDER
    frame_ms: float = frontend.FRAME_MS
    hop_ms: float = frontend.HOP_MS
    pre_emphasis: float = frontend.PRE_EMPHASIS
    trim_threshold: float = 0.05


@dataclass
class EncodingConfig:
    timesteps: int = encoding.TIMESTEPS
    rate_min: float = encoding.RATE_MIN
    rate_max: float = encoding.RATE_MAX
    dt: float = encoding.DT


@dataclass
class ReadoutConfig:
    frames: int = readout.FRAMES
    hidden: int = readout.HIDDEN
    epochs: int = 2000
    learning_rate: float = 0.1
    momentum: float = 0.9
    goal_mse: float = 1e-3
    optimizer: str = "backprop"
    train_fraction: float = 0.75


@dataclass
class PipelineConfig:
    seed: int = 0
    dataset: str | None = None  # WAV directory; synthetic corpus when unset
    workdir: str = "work"
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    encoding: EncodingConfig = field(default_factory=EncodingConfig)
    reservoir: ReservoirConfig = field(default_factory=default_config)
    readout: ReadoutConfig = field(default_factory=ReadoutConfig)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "paths": {"dataset": self.dataset, "workdir": self.workdir},
            "frontend": asdict(self.frontend),
            "encoding": asdict(self.encoding),
            "reservoir": self.reservoir.to_dict(),
            "readout": asdict(self.readout),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        paths = d.get("paths", {})
        try:
            cfg = cls(
                seed=int(d.get("seed", 0)),
                dataset=paths.get("dataset"),
                workdir=paths.get("workdir", "work"),
                frontend=FrontendConfig(**d.get("frontend", {})),
                encoding=EncodingConfig(**d.get("encoding", {})),
                reservoir=ReservoirConfig.from_dict(d["reservoir"]) if "reservoir" in d
                else default_config(),
                readout=ReadoutConfig(**d.get("readout", {})),
            )
        except TypeError as exc:
            raise ConfigError(f"unknown or malformed config key: {exc}") from exc
        cfg.validate()
        return cfg

    def validate(self) -> None:
        f, e, r = self.frontend, self.encoding, self.readout
        if f.classes < 2 or f.per_class < 2:
            raise ConfigError("frontend: need at least 2 classes and 2 utterances per class")
        if e.rate_max * e.dt > 1 or e.rate_min < 0 or e.rate_max < e.rate_min:
            raise ConfigError("encoding: need 0 <= rate_min <= rate_max and rate_max * dt <= 1")
        if e.timesteps < r.frames:
            raise ConfigError("encoding: timesteps must be >= readout frames")
        if not 0 < r.train_fraction < 1:
            raise ConfigError("readout: train_fraction must be in (0, 1)")
        if r.optimizer not in ("backprop", "lm"):
            raise ConfigError(f"readout: unknown optimizer {r.optimizer!r}")
        self.reservoir.validate()

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if "reservoir" not in data and ("synapses" in data or "layer_sizes" in data):
            data = {"reservoir": data}
        return cls.from_dict(data)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def train_config(self) -> readout.TrainConfig:
        r = self.readout
        return readout.TrainConfig(r.epochs, r.learning_rate, r.momentum, r.goal_mse,
                                   stage_seed(self.seed, "readout-init"), r.optimizer, r.hidden)


# -- features -----------------------------------------------------------------

_LABEL_RE = re.compile(r"^(\d+)")


def wav_label(path: Path) -> int:
    """Label from a numeric parent directory, else a leading number in the name."""
    for name in (path.parent.name, path.stem):
        m = _LABEL_RE.match(name)
        if m:
            return int(m.group(1))
    raise FormatError(f"{path}: cannot infer a class label from the path")


def wav_features(directory, cfg: PipelineConfig) -> tuple[np.ndarray, np.ndarray]:
    directory = Path(directory)
    files = sorted(p for p in directory.rglob("*") if p.suffix.lower() == ".wav")
    if not files:
        raise FormatError(f"no inputs: no .wav files under {directory}")
    f = cfg.frontend
    labels, feats = [], []
    for path in files:
        u = frontend.load_wav(path, wav_label(path))
        try:
            u = frontend.trim_silence(u, f.trim_threshold)
            seq = frontend.extract_features(u, f.lpc_order, f.frame_ms, f.hop_ms, f.pre_emphasis)
            feats.append(frontend.pool_features(seq))
        except Exception as exc:
            raise FormatError(f"{path}: {exc}") from exc
        labels.append(u.label)
    return np.array(labels, dtype=int), np.array(feats)


def synthetic_features(cfg: PipelineConfig) -> tuple[np.ndarray, np.ndarray]:
    f = cfg.frontend
    seqs = frontend.synth_dataset(f.classes, f.per_class, stage_seed(cfg.seed, "dataset"),
                                  f.frames, f.lpc_order, f.jitter)
    return (np.array([s.label for s in seqs], dtype=int),
            np.array([frontend.pool_features(s) for s in seqs]))


def make_features(cfg: PipelineConfig):
    if cfg.dataset:
        return wav_features(cfg.dataset, cfg)
    return synthetic_features(cfg)


# -- encoding -----------------------------------------------------------------

def encode_all(labels, features, cfg: PipelineConfig) -> list[encoding.SpikeTrainSet]:
    e = cfg.encoding
    base = stage_seed(cfg.seed, "encode")
    return [encoding.encode_poisson(x, e.timesteps, e.rate_min, e.rate_max, e.dt,
                                    seed=stage_seed(base, f"utt{i}"), label=int(lab))
            for i, (lab, x) in enumerate(zip(labels, features))]


def utterance_name(i: int) -> str:
    return f"utt_{i:05d}"


def write_spike_dir(out_dir, stims) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, s in enumerate(stims):
        encoding.write_spikes(out / utterance_name(i), s)


def read_spike_dir(spike_dir) -> list[encoding.SpikeTrainSet]:
    d = Path(spike_dir)
    files = sorted(d.glob("utt_*.csv"))
    if not files:
        raise FormatError(f"no inputs: no utt_*.csv spike files in {d}")
    return [encoding.read_spikes(p) for p in files]


# -- simulation ---------------------------------------------------------------

def _simulate_one(args) -> StateTrace:
    engine, model, spikes = args
    if engine == "fixed":
        return model.run(spikes)
    return reference.ref_run(model, spikes)


def simulate_all(stims, rcfg: ReservoirConfig, engine: str = "fixed",
                 jobs: int = 1) -> list[StateTrace]:
    if engine not in ENGINES:
        raise ConfigError(f"engine must be one of {ENGINES}, got {engine!r}")
    r = Reservoir(rcfg)
    for i, s in enumerate(stims):
        if s.spikes.shape[0] != rcfg.input_channels:
            raise ShapeError(f"utterance {i}: stimulus has {s.spikes.shape[0]} channels, "
                             f"reservoir expects {rcfg.input_channels}")
    model = r if engine == "fixed" else reference.RefConfig.from_reservoir(r)
    work = [(engine, model, s.spikes) for s in stims]
    if jobs <= 1:
        return [_simulate_one(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_simulate_one, work, chunksize=max(1, len(work) // (4 * jobs))))


def sampled_states(traces, labels, frames: int) -> list[readout.SampledState]:
    return [readout.sample_states(t, frames, int(lab)) for t, lab in zip(traces, labels)]


# -- readout ------------------------------------------------------------------

@dataclass
class EvalReport:
    train_accuracy: float
    test_accuracy: float
    confusion: np.ndarray
    model: readout.ReadoutModel


def train_and_evaluate(x, labels, cfg: PipelineConfig) -> EvalReport:
    x, labels = np.asarray(x, dtype=float), np.asarray(labels, dtype=int)
    tr, te = readout.stratified_split(labels, cfg.readout.train_fraction,
                                      stage_seed(cfg.seed, "split"))
    n_classes = max(readout.CLASSES, int(labels.max()) + 1)
    model = readout.train((x[tr], labels[tr]), cfg.train_config(), n_classes)
    test_acc = readout.accuracy(model, x[te], labels[te]) if len(te) else float("nan")
    model.log["train_indices"] = tr.tolist()
    model.log["test_indices"] = te.tolist()
    model.log["test_accuracy"] = test_acc
    cm = readout.confusion_matrix(model, x[te], labels[te], n_classes)
    return EvalReport(model.log["train_accuracy"], test_acc, cm, model)


@dataclass
class CompareReport:
    fixed: EvalReport
    float: EvalReport

    @property
    def divergence(self) -> float:
        return reference.divergence(self.fixed.test_accuracy, self.float.test_accuracy)


def run_engine(labels, stims, cfg: PipelineConfig, engine: str, jobs: int = 1):
    traces = simulate_all(stims, cfg.reservoir, engine, jobs)
    states = sampled_states(traces, labels, cfg.readout.frames)
    x = np.stack([s.vector for s in states])
    return traces, states, train_and_evaluate(x, labels, cfg)


def compare(cfg: PipelineConfig, jobs: int = 1) -> CompareReport:
    labels, feats = make_features(cfg)
    stims = encode_all(labels, feats, cfg)
    reports = {e: run_engine(labels, stims, cfg, e, jobs)[2] for e in ENGINES}
    return CompareReport(reports["fixed"], reports["float"])
