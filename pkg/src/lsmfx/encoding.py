"""Poisson rate coding of feature vectors into spike trains."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError

TIMESTEPS = 250
RATE_MIN = 10.0
RATE_MAX = 4000.0
DT = 0.000125


@dataclass
class SpikeTrainSet:
    spikes: np.ndarray  # uint8, (channels, timesteps)
    dt: float = DT
    label: int = -1
    seed: int | None = None

    @property
    def channels(self) -> int:
        return self.spikes.shape[0]

    @property
    def timesteps(self) -> int:
        return self.spikes.shape[1]


def feature_rates(features, rate_min=RATE_MIN, rate_max=RATE_MAX) -> np.ndarray:
    """Min-max normalize across the vector onto [rate_min, rate_max] Hz."""
    f = np.asarray(features, dtype=float)
    lo, hi = f.min(), f.max()
    scaled = np.zeros_like(f) if hi == lo else (f - lo) / (hi - lo)
    return rate_min + scaled * (rate_max - rate_min)


def encode_poisson(features, timesteps: int = TIMESTEPS, rate_min: float = RATE_MIN,
                   rate_max: float = RATE_MAX, dt: float = DT, seed: int = 0,
                   label: int = -1) -> SpikeTrainSet:
    """Independent per-step Bernoulli(rate * dt) spikes on each channel."""
    if rate_min < 0 or rate_max < rate_min:
        raise ConfigError(f"need 0 <= rate_min <= rate_max, got {rate_min}, {rate_max}")
    if rate_max * dt > 1:
        raise ConfigError(f"rate_max * dt = {rate_max * dt} exceeds 1 spike per step")
    p = feature_rates(features, rate_min, rate_max) * dt
    rng = np.random.default_rng(seed)
    u = rng.random((len(p), timesteps))
    return SpikeTrainSet((u < p[:, None]).astype(np.uint8), dt, label, seed)


def write_spikes(base, s: SpikeTrainSet) -> tuple[Path, Path]:
    """Write ``<base>.csv`` (rows = channels) and a one-line ``<base>.meta``."""
    base = Path(base)
    data, meta = base.with_suffix(".csv"), base.with_suffix(".meta")
    with open(data, "w", newline="") as f:
        csv.writer(f, lineterminator="\n").writerows(s.spikes.tolist())
    meta.write_text(f"dt={s.dt!r},label={s.label},seed={s.seed}\n")
    return data, meta


def read_spikes(path) -> SpikeTrainSet:
    path = Path(path)
    try:
        with open(path.with_suffix(".csv"), newline="") as f:
            spikes = np.array([[int(v) for v in row] for row in csv.reader(f)], dtype=np.uint8)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if spikes.ndim != 2 or not np.isin(spikes, (0, 1)).all():
        raise FormatError(f"{path}: spike matrix must be rectangular 0/1")
    meta = {}
    mpath = path.with_suffix(".meta")
    if mpath.exists():
        for item in mpath.read_text().strip().split(","):
            k, _, v = item.partition("=")
            meta[k] = v
    seed = meta.get("seed")
    return SpikeTrainSet(spikes, float(meta.get("dt", DT)), int(meta.get("label", -1)),
                         None if seed in (None, "None") else int(seed))
