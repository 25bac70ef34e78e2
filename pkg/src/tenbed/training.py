"""Desk-scale trainer proving the compressed layers actually fit things.

Two tasks: reproduce a target embedding table under mean squared error, or
separate labelled word pairs with a cosine contrastive loss.  Gradients come
from the per-method adjoints; per-example slots are summed over a minibatch
and applied in one optimizer step.  Everything is deterministic given the
seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingDivergedError
from .gradients import backward
from .layers import EmbeddingLayer, forward


@dataclass
class TrainTask:
    kind: str  # "reconstruct_table" | "word_similarity"
    targets: np.ndarray | None = None  # (V, d) table for reconstruction
    pairs: list[tuple[int, int, int]] | None = None  # (a, b, label in {0,1})
    loss: str = "mse"  # "mse" | "cosine_contrastive"

    def validate(self, layer: EmbeddingLayer) -> None:
        if self.kind == "reconstruct_table":
            if self.targets is None:
                raise ValueError("reconstruct_table needs a target table")
            expected = (layer.config.vocab_size, layer.config.embed_dim)
            if self.targets.shape != expected:
                raise ValueError(f"target table shape {self.targets.shape} != {expected}")
        elif self.kind == "word_similarity":
            if not self.pairs:
                raise ValueError("word_similarity needs labelled pairs")
            if any(label not in (0, 1) for _, _, label in self.pairs):
                raise ValueError("labels must be 0 or 1")
        else:
            raise ValueError(f"unknown task kind {self.kind!r}")


@dataclass
class OptimizerState:
    """Plain SGD or bias-corrected adaptive moments, keyed by block name."""

    kind: str = "adam"  # "sgd" | "adam"
    lr: float = 1e-2
    betas: tuple[float, float] = (0.9, 0.98)
    eps: float = 1e-8
    step_count: int = 0
    moments_m: dict[str, np.ndarray] = field(default_factory=dict)
    moments_v: dict[str, np.ndarray] = field(default_factory=dict)

    def apply(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        if self.kind == "sgd":
            for name, g in grads.items():
                params[name] -= self.lr * g
            return
        if self.kind != "adam":
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        self.step_count += 1
        b1, b2 = self.betas
        for name, g in grads.items():
            if name not in self.moments_m:
                self.moments_m[name] = np.zeros_like(g)
                self.moments_v[name] = np.zeros_like(g)
            m = self.moments_m[name]
            v = self.moments_v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1**self.step_count)
            v_hat = v / (1 - b2**self.step_count)
            params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _zero_grads(layer: EmbeddingLayer) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(p) for name, p in layer.params.items()}


def _accumulate(total: dict[str, np.ndarray], slots) -> None:
    for slot in slots:
        total[slot.param_name] += slot.grad


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b) / (na * nb)


def _pair_loss_and_grads(layer, a_id, b_id, label):
    """Contrastive loss on the cosine and the upstreams for both words."""
    ya, yb = forward(layer, a_id), forward(layer, b_id)
    na, nb = np.linalg.norm(ya), np.linalg.norm(yb)
    if na == 0.0 or nb == 0.0:
        return (1.0 if label == 1 else 0.0), None, None
    cos = float(ya @ yb) / (na * nb)
    if label == 1:
        loss, dcos = 1.0 - cos, -1.0
    elif cos > 0.0:
        loss, dcos = cos, 1.0
    else:
        return 0.0, None, None
    grad_a = dcos * (yb / (na * nb) - cos * ya / (na * na))
    grad_b = dcos * (ya / (na * nb) - cos * yb / (nb * nb))
    return loss, grad_a, grad_b


def _example_loss_and_slots(layer, task, example):
    """Per-example loss plus (word_id, upstream) contributions."""
    if task.kind == "reconstruct_table":
        word_id = example
        y = forward(layer, word_id)
        diff = y - task.targets[word_id]
        d = y.size
        return float(diff @ diff) / d, [(word_id, (2.0 / d) * diff)]
    a_id, b_id, label = task.pairs[example]
    loss, grad_a, grad_b = _pair_loss_and_grads(layer, a_id, b_id, label)
    contribs = []
    if grad_a is not None:
        contribs = [(a_id, grad_a), (b_id, grad_b)]
    return loss, contribs


def train(
    layer: EmbeddingLayer,
    task: TrainTask,
    opt: OptimizerState,
    epochs: int,
    batch_size: int = 32,
    seed: int = 0,
) -> list[float]:
    """Optimise the layer in place; returns the per-epoch mean loss.

    Losses are recorded before each batch's update, so an already-perfect
    model reports zero from the first epoch.  A non-finite loss aborts.
    """
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    task.validate(layer)
    n_examples = (
        layer.config.vocab_size if task.kind == "reconstruct_table" else len(task.pairs)
    )
    rng = np.random.default_rng(seed)
    history: list[float] = []
    for epoch in range(epochs):
        order = rng.permutation(n_examples)
        epoch_loss = 0.0
        for start in range(0, n_examples, batch_size):
            batch = order[start : start + batch_size]
            grads = _zero_grads(layer)
            batch_loss = 0.0
            for ex in batch:
                loss, contribs = _example_loss_and_slots(layer, task, int(ex))
                batch_loss += loss
                for word_id, upstream in contribs:
                    _accumulate(grads, backward(layer, word_id, upstream))
            scale = 1.0 / len(batch)
            for name in grads:
                grads[name] *= scale
            epoch_loss += batch_loss
            opt.apply(layer.params, grads)
        epoch_loss /= n_examples
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(epoch, epoch_loss)
        history.append(epoch_loss)
    return history


def eval_similarity(layer: EmbeddingLayer, pairs: list[tuple[int, int, int]]) -> float:
    """Accuracy of thresholding the cosine at 0.5 against the pair labels."""
    if not pairs:
        raise ValueError("need at least one pair")
    correct = 0
    for a_id, b_id, label in pairs:
        cos = _cosine(forward(layer, a_id), forward(layer, b_id))
        predicted = 1 if cos > 0.5 else 0
        correct += predicted == label
    return correct / len(pairs)
