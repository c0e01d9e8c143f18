"""Four-way shape classifier: shared per-point features, max pool, dense head.

Used to measure how much completion recovers category information from
partial inputs. Permutation invariant and size agnostic like the encoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .geometry import as_cloud, seed_sequence
from .shapes import CATEGORIES


@dataclass
class ClassifierConfig:
    point_channels: tuple = (64, 128, 256)
    head_widths: tuple = (128,)
    epochs: int = 60
    batch_size: int = 32
    lr: float = 1e-3


class PointClassifier:
    def __init__(self, config: ClassifierConfig = None, seed=0):
        self.config = config if config is not None else ClassifierConfig()
        rng = np.random.default_rng(seed)
        self.per_point = nn.MLP(
            [3, *self.config.point_channels], rng, hidden="relu", output="relu", name="cls.pp"
        )
        self.pool = nn.MaxPoolPoints()
        self.head = nn.MLP(
            [self.config.point_channels[-1], *self.config.head_widths, len(CATEGORIES)],
            rng,
            hidden="relu",
            name="cls.head",
        )
        self.trained = False

    def logits(self, points) -> np.ndarray:
        pts = as_cloud(points).astype(np.float32, copy=False)
        return self.head.forward(self.pool.forward(self.per_point.forward(pts)))

    def probabilities(self, points) -> np.ndarray:
        z = self.logits(points).astype(np.float64)
        z -= z.max()
        e = np.exp(z)
        return e / e.sum()

    def classify(self, points) -> str:
        if not self.trained:
            raise ValueError("classifier has not been trained or loaded")
        return CATEGORIES[int(np.argmax(self.logits(points)))]

    def params(self):
        return self.per_point.params() + self.head.params()

    def zero_grad(self):
        for p in self.params():
            p.grad[...] = 0

    def state(self):
        return {**self.per_point.state(), **self.head.state()}

    def load_state(self, state):
        self.per_point.load_state(state)
        self.head.load_state(state)
        self.trained = True
        return self


def _softmax_rows(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def train_classifier(clouds, labels, config: ClassifierConfig = None, seed=0, progress=None):
    """Cross-entropy training on complete shapes; returns (model, per-epoch mean loss)."""
    if len(clouds) == 0:
        raise ValueError("empty training dataset")
    config = config if config is not None else ClassifierConfig()
    init_ss, shuffle_ss = seed_sequence(seed).spawn(2)
    model = PointClassifier(config, seed=init_ss)
    rng = np.random.default_rng(shuffle_ss)
    data = np.stack([as_cloud(c).astype(np.float32, copy=False) for c in clouds])
    y = np.asarray(labels, dtype=np.int64)
    opt = nn.Adam(model.params(), lr=config.lr)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(data))
        total = 0.0
        for start in range(0, len(data), config.batch_size):
            idx = order[start:start + config.batch_size]
            batch, target = data[idx], y[idx]
            feats = model.per_point.forward(batch)
            pooled = model.pool.forward(feats)
            logits = model.head.forward(pooled)
            probs = _softmax_rows(logits.astype(np.float64))
            total += -float(np.log(np.maximum(probs[np.arange(len(idx)), target], 1e-12)).sum())
            dlogits = probs.copy()
            dlogits[np.arange(len(idx)), target] -= 1.0
            dlogits = (dlogits / len(idx)).astype(np.float32)
            model.zero_grad()
            model.per_point.backward(model.pool.backward(model.head.backward(dlogits)))
            opt.step()
        history.append(total / len(data))
        if progress is not None:
            progress(epoch, history[-1])
    model.trained = True
    return model, history


def evaluate_accuracy(model: PointClassifier, clouds, labels) -> float:
    """Fraction of clouds assigned their true category."""
    if len(clouds) == 0:
        raise ValueError("empty evaluation set")
    y = np.asarray(labels, dtype=np.int64)
    hits = sum(1 for c, t in zip(clouds, y) if model.classify(c) == CATEGORIES[t])
    return hits / len(clouds)
