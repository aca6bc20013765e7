"""Desk-scale models with hand-written gradients over a flat parameter vector."""

from __future__ import annotations

import numpy as np
from scipy.special import log_softmax, softmax


class LinearRegression:
    """Squared loss 0.5 * (w.x - r)^2 averaged over examples, no bias."""

    kind = "linear"

    def __init__(self, num_features: int):
        self.num_features = num_features

    @property
    def num_params(self) -> int:
        return self.num_features

    def init(self, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(self.num_params)

    def loss(self, w, X, r) -> float:
        resid = X @ w - r
        return float(0.5 * np.mean(resid**2))

    def gradient(self, w, X, r) -> np.ndarray:
        return X.T @ (X @ w - r) / X.shape[0]

    def per_example_gradients(self, w, X, r) -> np.ndarray:
        return (X @ w - r)[:, None] * X


class LogisticRegression:
    """Multinomial logistic regression: weights (C, d) followed by biases (C,)."""

    kind = "logistic"

    def __init__(self, num_features: int, num_classes: int):
        self.num_features = num_features
        self.num_classes = num_classes

    @property
    def num_params(self) -> int:
        return self.num_classes * (self.num_features + 1)

    def init(self, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(self.num_params)

    def _unpack(self, w):
        C, d = self.num_classes, self.num_features
        return w[: C * d].reshape(C, d), w[C * d:]

    def logits(self, w, X):
        W, b = self._unpack(w)
        return X @ W.T + b

    def loss(self, w, X, y) -> float:
        logp = log_softmax(self.logits(w, X), axis=1)
        return float(-np.mean(logp[np.arange(len(y)), y]))

    def gradient(self, w, X, y) -> np.ndarray:
        p = softmax(self.logits(w, X), axis=1)
        p[np.arange(len(y)), y] -= 1.0
        p /= X.shape[0]
        return np.concatenate([(p.T @ X).ravel(), p.sum(axis=0)])

    def predict(self, w, X) -> np.ndarray:
        return np.argmax(self.logits(w, X), axis=1)


class SmallMLP:
    """One tanh hidden layer and a softmax output."""

    kind = "mlp"

    def __init__(self, num_features: int, num_classes: int, hidden: int = 32):
        if not 1 <= hidden <= 64:
            raise ValueError("hidden width must be in [1, 64]")
        self.num_features = num_features
        self.num_classes = num_classes
        self.hidden = hidden

    @property
    def _shapes(self):
        d, H, C = self.num_features, self.hidden, self.num_classes
        return [(H, d), (H,), (C, H), (C,)]

    @property
    def num_params(self) -> int:
        return sum(int(np.prod(s)) for s in self._shapes)

    def init(self, rng: np.random.Generator) -> np.ndarray:
        d, H = self.num_features, self.hidden
        W1 = rng.uniform(-1, 1, (H, d)) / np.sqrt(d)
        W2 = rng.uniform(-1, 1, (self.num_classes, H)) / np.sqrt(H)
        return np.concatenate([W1.ravel(), np.zeros(H), W2.ravel(), np.zeros(self.num_classes)])

    def _unpack(self, w):
        out, pos = [], 0
        for s in self._shapes:
            n = int(np.prod(s))
            out.append(w[pos:pos + n].reshape(s))
            pos += n
        return out

    def _forward(self, w, X):
        W1, b1, W2, b2 = self._unpack(w)
        a = np.tanh(X @ W1.T + b1)
        return a, a @ W2.T + b2

    def loss(self, w, X, y) -> float:
        _, z = self._forward(w, X)
        logp = log_softmax(z, axis=1)
        return float(-np.mean(logp[np.arange(len(y)), y]))

    def gradient(self, w, X, y) -> np.ndarray:
        W1, b1, W2, b2 = self._unpack(w)
        a, z = self._forward(w, X)
        dz = softmax(z, axis=1)
        dz[np.arange(len(y)), y] -= 1.0
        dz /= X.shape[0]
        da = (dz @ W2) * (1 - a**2)
        return np.concatenate([(da.T @ X).ravel(), da.sum(0), (dz.T @ a).ravel(), dz.sum(0)])

    def predict(self, w, X) -> np.ndarray:
        return np.argmax(self._forward(w, X)[1], axis=1)


def build_model(kind: str, num_features: int, num_classes: int | None, hidden: int = 32):
    if kind == "linear":
        return LinearRegression(num_features)
    if num_classes is None:
        raise ValueError(f"model {kind!r} needs a classification dataset")
    if kind == "logistic":
        return LogisticRegression(num_features, num_classes)
    if kind == "mlp":
        return SmallMLP(num_features, num_classes, hidden)
    raise ValueError(f"unknown model kind {kind!r}")
