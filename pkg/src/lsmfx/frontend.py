"""
Utterance ingestion and LPC feature extraction.

WAV files are read through the stdlib ``wave`` module (PCM 8/16-bit, mono
or stereo). Features are autocorrelation LPC coefficients solved with the
Levinson-Durbin recursion, pooled per utterance into a 20-value vector:
mean LPC coefficients followed by mean log-area ratios.

``synth_dataset`` stands in for a licensed isolated-digit corpus. Each class
is a smooth trajectory of reflection coefficients; instances add Gaussian
jitter to the trajectory.
"""
from __future__ import annotations

import csv
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptySignalError, FormatError, NumericalError, ShapeError

LPC_ORDER = 10
FRAME_MS = 25.0
HOP_MS = 10.0
PRE_EMPHASIS = 0.97
N_FEATURES = 2 * LPC_ORDER


@dataclass
class Utterance:
    samples: np.ndarray
    sample_rate: int
    label: int = -1

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")


@dataclass
class FeatureSequence:
    frames: np.ndarray  # (frame count, lpc order)
    label: int = -1


# -- WAV ----------------------------------------------------------------------

def load_wav(path, label: int = -1) -> Utterance:
    """Read a PCM WAV file, averaging channels, samples scaled to [-1, 1]."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as w:
            nch, width, rate, n = w.getnchannels(), w.getsampwidth(), w.getframerate(), w.getnframes()
            data = w.readframes(n)
    except (wave.Error, EOFError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if width == 1:
        x = (np.frombuffer(data, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif width == 2:
        x = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    else:
        raise FormatError(f"{path}: unsupported sample width {8 * width} bits")
    if len(x) % nch:
        raise FormatError(f"{path}: truncated sample data")
    x = x.reshape(-1, nch).mean(axis=1)
    return Utterance(x, rate, label)


def write_wav(path, u: Utterance, sample_width: int = 2) -> None:
    """Write mono PCM. Samples that came from ``load_wav`` round-trip exactly."""
    x = np.asarray(u.samples, dtype=np.float64)
    if sample_width == 2:
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2").tobytes()
    elif sample_width == 1:
        data = np.clip(np.round(x * 128.0) + 128, 0, 255).astype(np.uint8).tobytes()
    else:
        raise FormatError(f"unsupported sample width {8 * sample_width} bits")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(sample_width)
        w.setframerate(int(u.sample_rate))
        w.writeframes(data)


# -- silence removal ----------------------------------------------------------

def trim_silence(u: Utterance, energy_threshold: float = 0.05, frame_ms: float = 10.0) -> Utterance:
    """Drop leading and trailing frames quieter than ``threshold * peak``."""
    if not 0 < energy_threshold < 1:
        raise ValueError("energy_threshold must be in (0, 1)")
    x = np.asarray(u.samples, dtype=float)
    flen = max(1, int(round(u.sample_rate * frame_ms / 1000.0)))
    nframes = -(-len(x) // flen)
    energy = np.array([np.sum(x[i * flen:(i + 1) * flen] ** 2) for i in range(nframes)])
    peak = energy.max() if nframes else 0.0
    if peak <= 0:
        raise EmptySignalError("signal is silent")
    loud = np.flatnonzero(energy >= energy_threshold * peak)
    start, stop = loud[0] * flen, min(len(x), (loud[-1] + 1) * flen)
    return Utterance(x[start:stop].copy(), u.sample_rate, u.label)


# -- LPC ----------------------------------------------------------------------

def autocorrelation(x: np.ndarray, maxlag: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = len(x)
    return np.array([np.dot(x[:n - k], x[k:]) for k in range(maxlag + 1)])


def levinson(r: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Solve the Toeplitz normal equations by the Levinson-Durbin recursion.

    Returns predictor coefficients ``a`` (x[n] ~ sum_k a[k] x[n-1-k]),
    reflection coefficients ``k``, and the final prediction error.
    """
    a = np.zeros(order)
    k = np.zeros(order)
    err = float(r[0])
    if err <= 0:
        raise NumericalError("zero-energy frame")
    for i in range(order):
        acc = r[i + 1] - np.dot(a[:i], r[i:0:-1])
        ki = acc / err
        prev = a[:i].copy()
        a[:i] = prev - ki * prev[::-1]
        a[i] = ki
        k[i] = ki
        err *= 1.0 - ki * ki
        if err <= 0:
            raise NumericalError(f"nonpositive prediction error at order {i + 1}")
    return a, k, err


def lpc(frame, order: int = LPC_ORDER) -> np.ndarray:
    """Autocorrelation-method LPC of an already windowed frame."""
    frame = np.asarray(frame, dtype=float)
    if order < 1:
        raise ValueError("order must be positive")
    if len(frame) <= order:
        raise ValueError(f"frame length {len(frame)} must exceed order {order}")
    a, _, _ = levinson(autocorrelation(frame, order), order)
    return a


def reflection_to_lpc(k) -> np.ndarray:
    a = np.zeros(0)
    for ki in k:
        a = np.concatenate([a - ki * a[::-1], [ki]])
    return a


def lpc_to_reflection(a) -> np.ndarray:
    """Step-down recursion; raises if the filter is not minimum phase."""
    a = np.asarray(a, dtype=float).copy()
    p = len(a)
    k = np.zeros(p)
    for i in range(p - 1, -1, -1):
        ki = a[i]
        if abs(ki) >= 1:
            raise NumericalError("unstable predictor (|reflection| >= 1)")
        k[i] = ki
        if i:
            a = (a[:i] + ki * a[:i][::-1]) / (1 - ki * ki)
    return k


def log_area_ratios(k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return np.log((1 + k) / (1 - k))


def frame_signal(x: np.ndarray, sample_rate: int, frame_ms=FRAME_MS, hop_ms=HOP_MS) -> np.ndarray:
    flen = int(round(sample_rate * frame_ms / 1000.0))
    hop = int(round(sample_rate * hop_ms / 1000.0))
    if len(x) < flen:
        x = np.pad(x, (0, flen - len(x)))
    n = 1 + (len(x) - flen) // hop
    idx = np.arange(flen)[None, :] + hop * np.arange(n)[:, None]
    return x[idx]


def extract_features(u: Utterance, order: int = LPC_ORDER, frame_ms=FRAME_MS,
                     hop_ms=HOP_MS, pre_emphasis=PRE_EMPHASIS) -> FeatureSequence:
    x = np.asarray(u.samples, dtype=float)
    x = np.append(x[0], x[1:] - pre_emphasis * x[:-1])
    frames = frame_signal(x, u.sample_rate, frame_ms, hop_ms) * np.hamming(
        int(round(u.sample_rate * frame_ms / 1000.0)))
    coeffs = []
    for f in frames:
        if np.dot(f, f) <= 0:
            continue
        coeffs.append(lpc(f, order))
    if not coeffs:
        raise EmptySignalError("no voiced frames")
    return FeatureSequence(np.array(coeffs), u.label)


def pool_features(seq: FeatureSequence) -> np.ndarray:
    """Mean LPC coefficients then mean log-area ratios, one vector per utterance."""
    frames = np.asarray(seq.frames, dtype=float)
    lar = np.array([log_area_ratios(lpc_to_reflection(a)) for a in frames])
    return np.concatenate([frames.mean(axis=0), lar.mean(axis=0)])


# -- synthetic corpus ---------------------------------------------------------

def synth_templates(classes: int = 10, frames: int = 40, order: int = LPC_ORDER,
                    seed: int = 0) -> np.ndarray:
    """Per-class reflection-coefficient trajectories, shape (classes, frames, order).

    Each coefficient sits near +0.8 or -0.8 (chosen per class) and wobbles
    slowly around it, so classes differ in the sign pattern of their
    reflection coefficients.
    """
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, frames)[None, :, None]
    base = rng.choice([-0.8, 0.8], size=(classes, 1, order)) \
        + rng.uniform(-0.1, 0.1, size=(classes, 1, order))
    amp = rng.uniform(0.05, 0.1, size=(classes, 1, order))
    freq = rng.uniform(0.5, 2.0, size=(classes, 1, order))
    phase = rng.uniform(0, 2 * np.pi, size=(classes, 1, order))
    return np.clip(base + amp * np.sin(2 * np.pi * freq * t + phase), -0.9, 0.9)


def synth_dataset(classes: int = 10, per_class: int = 20, seed: int = 0, frames: int = 40,
                  order: int = LPC_ORDER, jitter: float = 0.02) -> list[FeatureSequence]:
    """Digit-like synthetic corpus of LPC feature sequences, class-major order."""
    if per_class < 2:
        raise ValueError("per_class must be >= 2")
    templates = synth_templates(classes, frames, order, seed)
    rng = np.random.default_rng([seed, 1])
    out = []
    for c in range(classes):
        for _ in range(per_class):
            k = np.clip(templates[c] + rng.normal(0, jitter, templates[c].shape), -0.95, 0.95)
            out.append(FeatureSequence(np.array([reflection_to_lpc(row) for row in k]), c))
    return out


# -- feature CSV --------------------------------------------------------------

def feature_header(n: int = N_FEATURES) -> list[str]:
    return ["label"] + [f"f{i:02d}" for i in range(n)]


def write_feature_csv(path, labels, features) -> None:
    features = np.asarray(features, dtype=float)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(feature_header(features.shape[1]))
        for lab, row in zip(labels, features):
            w.writerow([int(lab)] + [repr(float(v)) for v in row])


def read_feature_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or not rows[0] or rows[0][0] != "label":
        raise ShapeError(f"{path}: first column must be 'label'")
    n = len(rows[0]) - 1
    if n < 1:
        raise ShapeError(f"{path}: no feature columns")
    labels, feats = [], []
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != n + 1:
            raise ShapeError(f"{path}:{i}: expected {n + 1} columns, got {len(r)}")
        labels.append(int(r[0]))
        feats.append([float(v) for v in r[1:]])
    return np.array(labels, dtype=int), np.array(feats, dtype=float).reshape(-1, n)
