"""Linear classifiers: softmax regression via gradient descent, perceptron."""

from __future__ import annotations

import numpy as np

from metaselect.learners.base import NativeClassifier


def _softmax(scores):
    z = scores - scores.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


class LogisticRegressionGd(NativeClassifier):
    """Multinomial logistic regression by full-batch gradient descent.

    Minimizes mean cross-entropy plus an L2 penalty of ||W||^2 / (2 C n) on
    the non-bias weights. The step size 1/L uses a crude Lipschitz bound from
    the Frobenius norm of the design matrix, so no line search is needed; the
    iteration count is capped rather than run to convergence.
    """

    def __init__(self, C: float = 1.0, max_iter: int = 500):
        self.C = C
        self.max_iter = max_iter

    def _fit(self, X, y):
        n, p = X.shape
        n_classes = int(y.max()) + 1
        Xa = np.hstack([X, np.ones((n, 1))])
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y] = 1.0
        lam = 1.0 / (self.C * n)
        lipschitz = 0.5 * float((Xa * Xa).sum()) / n + lam
        step = 1.0 / lipschitz
        W = np.zeros((p + 1, n_classes))
        penalty_mask = np.ones((p + 1, 1))
        penalty_mask[-1] = 0.0  # bias unpenalized
        for _ in range(self.max_iter):
            probs = _softmax(Xa @ W)
            grad = Xa.T @ (probs - onehot) / n + lam * W * penalty_mask
            W -= step * grad
        self._W = W

    def _predict(self, X):
        Xa = np.hstack([X, np.ones((X.shape[0], 1))])
        return np.argmax(Xa @ self._W, axis=1)


class PerceptronClassifier(NativeClassifier):
    """Classic multiclass perceptron with seeded per-epoch shuffling."""

    def __init__(self, max_epochs: int = 50, random_state: int = 0):
        self.max_epochs = max_epochs
        self.random_state = random_state

    def _fit(self, X, y):
        n, p = X.shape
        n_classes = int(y.max()) + 1
        rng = np.random.default_rng(self.random_state)
        W = np.zeros((n_classes, p + 1))
        Xa = np.hstack([X, np.ones((n, 1))])
        for _ in range(self.max_epochs):
            mistakes = 0
            for i in rng.permutation(n):
                scores = W @ Xa[i]
                pred = int(np.argmax(scores))
                if pred != y[i]:
                    W[y[i]] += Xa[i]
                    W[pred] -= Xa[i]
                    mistakes += 1
            if mistakes == 0:
                break
        self._W = W

    def _predict(self, X):
        Xa = np.hstack([X, np.ones((X.shape[0], 1))])
        return np.argmax(Xa @ self._W.T, axis=1)
