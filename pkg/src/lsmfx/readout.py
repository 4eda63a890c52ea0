"""
State sampling and the MLP readout.

The readout is a one-hidden-layer perceptron with logistic hidden and output
units trained against one-hot targets under mean squared error. Inputs are
standardized with statistics from the training set, stored in the model.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateDataError, ShapeError

FRAMES = 5
HIDDEN = 30
CLASSES = 10


@dataclass
class SampledState:
    vector: np.ndarray
    label: int = -1


def sample_indices(timesteps: int, frames: int = FRAMES) -> list[int]:
    """1-based rows ceil(k*T/frames) for k = 1..frames."""
    if timesteps < frames or frames < 1:
        raise ShapeError(f"cannot take {frames} frames from {timesteps} steps")
    return [-(-k * timesteps // frames) for k in range(1, frames + 1)]


def sample_states(trace, frames: int = FRAMES, label: int = -1) -> SampledState:
    """Pick ``frames`` evenly spaced rows; neuron-major flattening.

    Entry ``n * frames + k`` is neuron ``n`` at the k-th sampled step.
    """
    values = np.asarray(getattr(trace, "values", trace), dtype=float)
    if values.ndim != 2:
        raise ShapeError(f"trace must be 2-D, got shape {values.shape}")
    rows = [i - 1 for i in sample_indices(values.shape[0], frames)]
    return SampledState(values[rows, :].T.reshape(-1).copy(), label)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class TrainConfig:
    epochs: int = 2000
    learning_rate: float = 0.1
    momentum: float = 0.9
    goal_mse: float = 1e-3
    seed: int = 0
    optimizer: str = "backprop"  # or "lm"
    hidden: int = HIDDEN
    mu: float = 1e-3  # LM initial damping


@dataclass
class ReadoutModel:
    w1: np.ndarray  # (hidden, inputs)
    b1: np.ndarray
    w2: np.ndarray  # (outputs, hidden)
    b2: np.ndarray
    x_mean: np.ndarray = None
    x_scale: np.ndarray = None
    activation_hidden: str = "sigmoid"
    activation_output: str = "sigmoid"
    log: dict = field(default_factory=dict)

    def __post_init__(self):
        n_in = self.w1.shape[1]
        if self.x_mean is None:
            self.x_mean = np.zeros(n_in)
        if self.x_scale is None:
            self.x_scale = np.ones(n_in)
        if self.w2.shape[1] != self.w1.shape[0] or self.b1.shape != (self.w1.shape[0],) \
                or self.b2.shape != (self.w2.shape[0],):
            raise ShapeError("inconsistent readout layer dimensions")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.w1.shape[1], self.w1.shape[0], self.w2.shape[0]

    @property
    def converged(self) -> bool:
        return bool(self.log.get("converged", False))

    @classmethod
    def init(cls, n_in: int, n_hidden: int = HIDDEN, n_out: int = CLASSES, seed: int = 0):
        """Uniform +-1/sqrt(fan_in) initialization."""
        rng = np.random.default_rng(seed)
        a1, a2 = 1 / math.sqrt(n_in), 1 / math.sqrt(n_hidden)
        return cls(rng.uniform(-a1, a1, (n_hidden, n_in)), rng.uniform(-a1, a1, n_hidden),
                   rng.uniform(-a2, a2, (n_out, n_hidden)), rng.uniform(-a2, a2, n_out))

    # parameter vector helpers, order: w1, b1, w2, b2
    def params(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    def set_params(self, theta: np.ndarray) -> None:
        h, i = self.w1.shape
        o = self.w2.shape[0]
        sizes = [h * i, h, o * h, o]
        parts = np.split(np.asarray(theta, dtype=float), np.cumsum(sizes)[:-1])
        self.w1 = parts[0].reshape(h, i).copy()
        self.b1 = parts[1].copy()
        self.w2 = parts[2].reshape(o, h).copy()
        self.b2 = parts[3].copy()

    def normalize(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.x_mean) / self.x_scale

    def forward(self, z: np.ndarray):
        """Forward pass on standardized inputs ``z`` (batch, inputs)."""
        h = _sigmoid(z @ self.w1.T + self.b1)
        y = _sigmoid(h @ self.w2.T + self.b2)
        return h, y

    def predict_scores(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dims[0]:
            raise ShapeError(f"readout expects {self.dims[0]} inputs, got {x.shape[1]}")
        return self.forward(self.normalize(x))[1]

    def to_dict(self) -> dict:
        i, h, o = self.dims
        return {
            "dims": {"inputs": i, "hidden": h, "outputs": o},
            "activation": {"hidden": self.activation_hidden, "output": self.activation_output},
            "w1": self.w1.ravel().tolist(), "b1": self.b1.tolist(),
            "w2": self.w2.ravel().tolist(), "b2": self.b2.tolist(),
            "x_mean": self.x_mean.tolist(), "x_scale": self.x_scale.tolist(),
            "log": self.log,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReadoutModel":
        i, h, o = d["dims"]["inputs"], d["dims"]["hidden"], d["dims"]["outputs"]
        return cls(np.array(d["w1"], dtype=float).reshape(h, i), np.array(d["b1"], dtype=float),
                   np.array(d["w2"], dtype=float).reshape(o, h), np.array(d["b2"], dtype=float),
                   np.array(d["x_mean"], dtype=float), np.array(d["x_scale"], dtype=float),
                   d["activation"]["hidden"], d["activation"]["output"], d.get("log", {}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "ReadoutModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def one_hot(labels, n: int) -> np.ndarray:
    t = np.zeros((len(labels), n))
    t[np.arange(len(labels)), labels] = 1.0
    return t


def loss_and_grad(model: ReadoutModel, z: np.ndarray, t: np.ndarray):
    """Mean over samples of half the summed squared output error, and its gradient."""
    n = len(z)
    h, y = model.forward(z)
    e = y - t
    loss = 0.5 * float(np.sum(e * e)) / n
    d2 = e * y * (1 - y) / n
    d1 = (d2 @ model.w2) * h * (1 - h)
    grad = np.concatenate([(d1.T @ z).ravel(), d1.sum(0), (d2.T @ h).ravel(), d2.sum(0)])
    return loss, grad


def _mse(model, z, t) -> float:
    return float(np.mean((model.forward(z)[1] - t) ** 2))


def _jacobian(model: ReadoutModel, z: np.ndarray) -> np.ndarray:
    """d y[n, o] / d theta, rows ordered sample-major."""
    h, y = model.forward(z)
    n, o = y.shape
    hd = h * (1 - h)
    sy = y * (1 - y)                                    # (n, o)
    g = sy[:, :, None] * model.w2[None, :, :] * hd[:, None, :]  # (n, o, hidden)
    j_w1 = g[:, :, :, None] * z[:, None, None, :]       # (n, o, hidden, inputs)
    j_b1 = g
    eye = np.eye(o)
    j_w2 = sy[:, :, None, None] * eye[None, :, :, None] * h[:, None, None, :]
    j_b2 = sy[:, :, None] * eye[None, :, :]
    return np.concatenate([j_w1.reshape(n, o, -1), j_b1, j_w2.reshape(n, o, -1), j_b2],
                          axis=2).reshape(n * o, -1)


def train(samples, cfg: TrainConfig | None = None, n_classes: int | None = None) -> ReadoutModel:
    """Fit a readout to ``samples`` (SampledState list or (X, labels) pair).

    Stops at ``goal_mse`` or after ``epochs`` epochs. A run that exhausts the
    budget is returned with ``log["converged"] = False``.
    """
    cfg = cfg or TrainConfig()
    x, labels = _as_arrays(samples)
    if len(np.unique(labels)) < 2:
        raise DegenerateDataError("training data must contain at least two classes")
    if not np.all(np.isfinite(x)):
        raise DegenerateDataError("non-finite feature values")
    n_out = n_classes or max(CLASSES, int(labels.max()) + 1)
    model = ReadoutModel.init(x.shape[1], cfg.hidden, n_out, cfg.seed)
    model.x_mean = x.mean(axis=0)
    scale = x.std(axis=0)
    model.x_scale = np.where(scale > 0, scale, 1.0)
    z = model.normalize(x)
    t = one_hot(labels, n_out)

    history = []
    mse = _mse(model, z, t)
    epoch = 0
    if cfg.optimizer == "backprop":
        theta = model.params()
        velocity = np.zeros_like(theta)
        while epoch < cfg.epochs and mse > cfg.goal_mse:
            _, grad = loss_and_grad(model, z, t)
            velocity = cfg.momentum * velocity - cfg.learning_rate * grad
            theta = theta + velocity
            model.set_params(theta)
            epoch += 1
            mse = _mse(model, z, t)
            history.append(mse)
    elif cfg.optimizer == "lm":
        mu = cfg.mu
        while epoch < cfg.epochs and mse > cfg.goal_mse:
            theta = model.params()
            r = (model.forward(z)[1] - t).ravel()
            J = _jacobian(model, z)
            A, g = J.T @ J, J.T @ r
            while True:
                step = np.linalg.solve(A + mu * np.eye(len(theta)), -g)
                model.set_params(theta + step)
                new = _mse(model, z, t)
                if new < mse:
                    mu = max(mu / 10, 1e-12)
                    break
                mu *= 10
                if mu > 1e10:
                    model.set_params(theta)
                    new = mse
                    break
            epoch += 1
            mse = new
            history.append(mse)
            if mu > 1e10:
                break
    else:
        raise ValueError(f"unknown optimizer {cfg.optimizer!r}")

    pred = classify_batch(model, x)
    model.log = {
        "optimizer": cfg.optimizer,
        "epochs": epoch,
        "final_mse": mse,
        "goal_mse": cfg.goal_mse,
        "converged": mse <= cfg.goal_mse,
        "train_accuracy": float(np.mean(pred == labels)),
        "mse_history": history,
    }
    return model


def classify(model: ReadoutModel, s) -> tuple[int, np.ndarray]:
    """Argmax class (ties go to the lowest id) and the output scores."""
    x = getattr(s, "vector", s)
    scores = model.predict_scores(x)[0]
    return int(np.argmax(scores)), scores


def classify_batch(model: ReadoutModel, x) -> np.ndarray:
    return np.argmax(model.predict_scores(x), axis=1)


def accuracy(model: ReadoutModel, x, labels) -> float:
    return float(np.mean(classify_batch(model, x) == np.asarray(labels)))


def confusion_matrix(model: ReadoutModel, x, labels, n_classes: int | None = None) -> np.ndarray:
    labels = np.asarray(labels)
    n = n_classes or model.dims[2]
    cm = np.zeros((n, n), dtype=int)
    for true, pred in zip(labels, classify_batch(model, x)):
        cm[true, pred] += 1
    return cm


def _loss_extended(model: ReadoutModel, theta, z, t):
    """The training loss evaluated in extended precision (np.longdouble)."""
    h, i = model.w1.shape
    o = model.w2.shape[0]
    theta = np.asarray(theta, dtype=np.longdouble)
    cut = np.cumsum([h * i, h, o * h])
    w1, b1 = theta[:cut[0]].reshape(h, i), theta[cut[0]:cut[1]]
    w2, b2 = theta[cut[1]:cut[2]].reshape(o, h), theta[cut[2]:]
    z = np.asarray(z, dtype=np.longdouble)
    hid = 1 / (1 + np.exp(-(z @ w1.T + b1)))
    e = 1 / (1 + np.exp(-(hid @ w2.T + b2))) - t
    return 0.5 * np.sum(e * e) / len(z)


def gradient_check(model: ReadoutModel, sample, h: float = 1e-5) -> float:
    """Max relative error between backprop and central-difference gradients.

    The loss is evaluated on one sample (vector in the model's input space,
    label giving the one-hot target). Finite differences are taken in
    extended precision where the platform has it: in float64 the cancellation
    in L(theta + h) - L(theta - h) alone leaves ~1e-11 of noise, which swamps
    the relative error of gradient entries near 1e-8.
    """
    x = getattr(sample, "vector", sample)
    label = getattr(sample, "label", 0)
    z = model.normalize(np.atleast_2d(x))
    t = one_hot([label], model.dims[2])
    _, analytic = loss_and_grad(model, z, t)
    theta = model.params().astype(np.longdouble)
    step = np.longdouble(h)
    numeric = np.zeros(len(theta))
    for i in range(len(theta)):
        up, down = theta.copy(), theta.copy()
        up[i] += step
        down[i] -= step
        numeric[i] = float((_loss_extended(model, up, z, t)
                            - _loss_extended(model, down, z, t)) / (2 * step))
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def stratified_split(labels, train_fraction: float = 0.75, seed: int = 0):
    """Per-class shuffled split; returns sorted (train_idx, test_idx)."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    tr, te = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        k = int(round(train_fraction * len(idx)))
        tr.extend(idx[:k])
        te.extend(idx[k:])
    return np.sort(np.array(tr, dtype=int)), np.sort(np.array(te, dtype=int))


def _as_arrays(samples):
    if isinstance(samples, tuple) and len(samples) == 2:
        x, labels = samples
        return np.asarray(x, dtype=float), np.asarray(labels, dtype=int)
    samples = list(samples)
    if not samples:
        raise DegenerateDataError("no training samples")
    return (np.stack([np.asarray(s.vector, dtype=float) for s in samples]),
            np.array([s.label for s in samples], dtype=int))


def state_header(n: int) -> list[str]:
    return ["label"] + [f"s{i:02d}" for i in range(n)]


def write_states_csv(path, states) -> None:
    states = list(states)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(state_header(len(states[0].vector) if states else 0))
        for s in states:
            w.writerow([int(s.label)] + [repr(float(v)) for v in s.vector])


def read_states_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0][:1] != ["label"]:
        raise ShapeError(f"{path}: first column must be 'label'")
    n = len(rows[0]) - 1
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != n + 1:
            raise ShapeError(f"{path}:{i}: expected {n + 1} columns, got {len(r)}")
    labels = np.array([int(r[0]) for r in rows[1:]], dtype=int)
    x = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float).reshape(-1, n)
    return x, labels
