"""Masked-softmax classifier core shared by the G2P and P2G models.

Scores for classes outside the per-example mask are excluded from the
log-sum-exp, so their probability is exactly zero and no inf-inf arithmetic
occurs. All math follows the parameter dtype, which lets gradient checks run
in extended precision.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


def masked_log_softmax(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise log-probabilities; entries outside ``mask`` are -inf."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any(axis=-1).all():
        raise ValueError("mask selects no class")
    neg_inf = np.array(-np.inf, dtype=scores.dtype)
    masked = np.where(mask, scores, neg_inf)
    top = masked.max(axis=-1, keepdims=True)
    shifted = np.where(mask, scores - top, neg_inf)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return np.where(mask, shifted - lse, neg_inf)


def masked_softmax(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    logp = masked_log_softmax(scores, mask)
    return np.where(mask, np.exp(logp), 0)


@dataclass(frozen=True)
class MaskedDistribution:
    probs: np.ndarray
    mask: np.ndarray

    @property
    def argmax(self) -> int:
        # np.argmax returns the first maximum: lowest class id wins ties
        return int(np.argmax(np.where(self.mask, self.probs, -1.0)))


def relu(x):
    return np.maximum(x, 0)


class MaskedMLP:
    """One hidden ReLU layer over a windowed input, masked softmax output.

    Subclasses supply the input layer (``_hidden_pre`` and
    ``_hidden_backward``); this class owns the output layer, the loss and the
    SGD loop. Parameters live in ``self.params`` in a fixed order.
    """

    role = "base"

    def __init__(self, hp, params: dict[str, np.ndarray], fingerprint: str):
        self.hp = hp
        self.params = params
        self.fingerprint = fingerprint
        self.history: list[tuple[int, float, float]] = []

    # input layer hooks
    def _hidden_pre(self, inputs):
        raise NotImplementedError

    def _hidden_backward(self, inputs, cache, dpre, grads):
        raise NotImplementedError

    def scores(self, inputs) -> np.ndarray:
        pre, _ = self._hidden_pre(inputs)
        return relu(pre) @ self.params["W2"] + self.params["b2"]

    def loss_and_grads(self, inputs, mask, gold) -> tuple[float, dict[str, np.ndarray]]:
        p = self.params
        pre, cache = self._hidden_pre(inputs)
        h = relu(pre)
        s = h @ p["W2"] + p["b2"]
        logp = masked_log_softmax(s, mask)
        n = len(gold)
        rows = np.arange(n)
        loss = -logp[rows, gold].mean()
        d = np.where(mask, np.exp(logp), 0)
        d[rows, gold] -= 1
        d /= n
        grads = {"W2": h.T @ d, "b2": d.sum(axis=0)}
        dpre = (d @ p["W2"].T) * (pre > 0)
        grads["b1"] = dpre.sum(axis=0)
        self._hidden_backward(inputs, cache, dpre, grads)
        return loss, grads

    def loss(self, inputs, mask, gold) -> float:
        logp = masked_log_softmax(self.scores(inputs), mask)
        return -logp[np.arange(len(gold)), gold].mean()

    def predict_ids(self, inputs, mask_matrix, mask_key, chunk: int = 4096) -> np.ndarray:
        """Masked argmax class per row, computed in fixed-size chunks."""
        n = len(mask_key)
        out = np.empty(n, dtype=np.int64)
        for a in range(0, n, chunk):
            sl = slice(a, min(a + chunk, n))
            s = self.scores(tuple(x[sl] for x in inputs))
            out[sl] = kernels.masked_argmax(s, mask_matrix[mask_key[sl]])
        return out

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def fit(
        self,
        inputs: tuple[np.ndarray, ...],
        mask_matrix: np.ndarray,
        mask_key: np.ndarray,
        gold: np.ndarray,
        dev_accuracy: Callable[["MaskedMLP"], float] | None = None,
    ) -> list[tuple[int, float, float]]:
        """Mini-batch SGD on masked cross-entropy.

        Keeps the parameters of the best epoch by ``dev_accuracy`` (training
        accuracy when not given; the earliest epoch wins ties). Returns the
        per-epoch history ``(epoch, mean_loss, accuracy)``.
        """
        hp = self.hp
        n = len(gold)
        rng = np.random.default_rng([hp.seed, 1])
        history = []
        best_acc, best = -1.0, self.copy_params()
        for epoch in range(1, hp.epochs + 1):
            order = rng.permutation(n)
            total = 0.0
            for a in range(0, n, hp.batch_size):
                idx = order[a:a + hp.batch_size]
                batch = tuple(x[idx] for x in inputs)
                loss, grads = self.loss_and_grads(batch, mask_matrix[mask_key[idx]], gold[idx])
                if not np.isfinite(loss):
                    raise TrainingError(f"{self.role}: non-finite loss {loss} at epoch {epoch}, batch offset {a}")
                total += loss * len(idx)
                for k, g in grads.items():
                    self.params[k] -= hp.lr * g
            if dev_accuracy is not None:
                acc = dev_accuracy(self)
            else:
                pred = self.predict_ids(inputs, mask_matrix, mask_key)
                acc = float((pred == gold).mean())
            for k, v in self.params.items():
                if not np.isfinite(v).all():
                    raise TrainingError(f"{self.role}: parameter {k} became non-finite at epoch {epoch}")
            history.append((epoch, total / n, acc))
            log.info("%s epoch %d loss %.4f acc %.4f", self.role, epoch, total / n, acc)
            if acc > best_acc:
                best_acc, best = acc, self.copy_params()
        self.params = best
        return history


def he_normal(rng, fan_in, shape):
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
