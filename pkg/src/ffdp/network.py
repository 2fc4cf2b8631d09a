"""Embedding tables, the one-hidden-layer MLP oracle, backprop and SGD.

The oracle scores a configuration as ``softmax(W2 @ relu(W1 @ v + b1) + b2)``
where ``v`` concatenates the embeddings of the configuration's features,
grouped by attribute (all FORM embeddings, then UPOS, FEATS, DEPREL).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from ffdp.features import ATTRIBUTES, FeatureBatch, FeatureVector, counts_by_attribute, stack_features

REDUCTIONS = (0, 10, 20, 30, 40, 50)
DEFAULT_HIDDEN = 200


@dataclass(frozen=True)
class SizeConfig:
    form_dim: int = 50
    upos_dim: int = 20
    feats_dim: int = 20
    deprel_dim: int = 20
    reduction_percent: int = 0

    def __post_init__(self):
        for name in ("form_dim", "upos_dim", "feats_dim", "deprel_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.reduction_percent not in REDUCTIONS:
            raise ValueError(f"reduction_percent must be one of {REDUCTIONS}")

    def dim(self, attribute: str) -> int:
        return {"FORM": self.form_dim, "UPOS": self.upos_dim,
                "FEATS": self.feats_dim, "DEPREL": self.deprel_dim}[attribute]


def _scale(base: int, percent: int) -> int:
    # round half up of base * (100 - percent) / 100
    return max(1, (2 * base * (100 - percent) + 100) // 200)


def reduced_sizes(base: SizeConfig, percent: int) -> SizeConfig:
    """Shrink every embedding size of ``base`` by ``percent`` (0..50, step 10)."""
    if percent not in REDUCTIONS:
        raise ValueError(f"unsupported reduction {percent!r}; expected one of {REDUCTIONS}")
    return SizeConfig(_scale(base.form_dim, percent), _scale(base.upos_dim, percent),
                      _scale(base.feats_dim, percent), _scale(base.deprel_dim, percent), percent)


def glorot_init(rows: int, cols: int, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols)).astype(dtype)


@dataclass
class ModelParams:
    embeddings: dict
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    feature_counts: dict = field(default_factory=dict)

    @classmethod
    def initialize(cls, vocab_sizes: dict, template, sizes: SizeConfig, n_transitions: int,
                   hidden_size: int = DEFAULT_HIDDEN, rng: Optional[np.random.Generator] = None,
                   dtype=np.float32) -> "ModelParams":
        """Glorot-uniform matrices and embedding tables, zero biases."""
        rng = rng if rng is not None else np.random.default_rng(0)
        counts = counts_by_attribute(template)
        embeddings = {a: glorot_init(vocab_sizes[a], sizes.dim(a), rng, dtype) for a in ATTRIBUTES}
        d_in = sum(counts[a] * sizes.dim(a) for a in ATTRIBUTES)
        return cls(
            embeddings=embeddings,
            W1=glorot_init(hidden_size, d_in, rng, dtype),
            b1=np.zeros(hidden_size, dtype=dtype),
            W2=glorot_init(n_transitions, hidden_size, rng, dtype),
            b2=np.zeros(n_transitions, dtype=dtype),
            feature_counts=counts,
        )

    @property
    def hidden_size(self) -> int:
        return self.W1.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def n_transitions(self) -> int:
        return self.W2.shape[0]

    def tensors(self) -> list:
        """``(name, array)`` pairs in serialization order."""
        named = [(f"E_{a}", self.embeddings[a]) for a in ATTRIBUTES]
        return named + [("W1", self.W1), ("b1", self.b1), ("W2", self.W2), ("b2", self.b2)]

    def astype(self, dtype) -> "ModelParams":
        return replace(self, embeddings={a: e.astype(dtype) for a, e in self.embeddings.items()},
                       W1=self.W1.astype(dtype), b1=self.b1.astype(dtype),
                       W2=self.W2.astype(dtype), b2=self.b2.astype(dtype),
                       feature_counts=dict(self.feature_counts))

    def copy(self) -> "ModelParams":
        return self.astype(self.W1.dtype)


@dataclass
class ForwardTrace:
    batch: FeatureBatch
    v: np.ndarray
    h_pre: np.ndarray
    h: np.ndarray
    mask: Optional[np.ndarray]
    probs: np.ndarray


@dataclass
class Gradients:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    embeddings: dict  # attribute -> (row ids, row gradients)

    def dense_embedding(self, attribute: str, shape) -> np.ndarray:
        rows, grads = self.embeddings[attribute]
        out = np.zeros(shape, dtype=grads.dtype)
        out[rows] = grads
        return out


def _as_batch(fv: Union[FeatureVector, FeatureBatch]) -> FeatureBatch:
    return stack_features([fv]) if isinstance(fv, FeatureVector) else fv


def _ids(batch: FeatureBatch, attribute: str) -> np.ndarray:
    return {"FORM": batch.form, "UPOS": batch.upos,
            "FEATS": batch.feats, "DEPREL": batch.deprel}[attribute]


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def embed(params: ModelParams, batch: FeatureBatch) -> np.ndarray:
    b = len(batch)
    parts = [params.embeddings[a][_ids(batch, a)].reshape(b, -1) for a in ATTRIBUTES]
    return np.concatenate(parts, axis=1)


def forward(params: ModelParams, fv, dropout_rate: float = 0.0,
            rng: Optional[np.random.Generator] = None) -> ForwardTrace:
    """Score one feature vector or a batch; inverted dropout on the hidden layer."""
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError("dropout_rate must be in [0, 1)")
    if dropout_rate > 0 and rng is None:
        raise ValueError("dropout requires an rng")
    batch = _as_batch(fv)
    v = embed(params, batch)
    if v.shape[1] != params.input_dim:
        raise ValueError(f"input has {v.shape[1]} dims, W1 expects {params.input_dim}")
    h_pre = v @ params.W1.T + params.b1
    h = np.maximum(h_pre, 0)
    mask = None
    if dropout_rate > 0:
        keep = 1.0 - dropout_rate
        mask = (rng.random(h.shape) < keep).astype(h.dtype) / h.dtype.type(keep)
        h = h * mask
    probs = softmax(h @ params.W2.T + params.b2)
    return ForwardTrace(batch, v, h_pre, h, mask, probs)


class Scorer:
    """Single-configuration scoring with preallocated buffers (decode path).

    Not thread-safe: use one Scorer per thread.
    """

    def __init__(self, params: ModelParams):
        self.params = params
        dtype = params.W1.dtype
        self.v = np.empty(params.input_dim, dtype=dtype)
        self.views = []
        offset = 0
        for a in ATTRIBUTES:
            table = params.embeddings[a]
            k = params.feature_counts[a]
            width = k * table.shape[1]
            self.views.append((table, self.v[offset:offset + width].reshape(k, table.shape[1])))
            offset += width
        if offset != params.input_dim:
            raise ValueError(f"feature counts give {offset} input dims, W1 expects {params.input_dim}")
        self.h = np.empty(params.hidden_size, dtype=dtype)
        self.out = np.empty(params.n_transitions, dtype=dtype)

    def __call__(self, fv: FeatureVector) -> np.ndarray:
        p = self.params
        for (table, view), ids in zip(self.views, (fv.form, fv.upos, fv.feats, fv.deprel)):
            if ids:
                np.take(table, ids, axis=0, out=view)
        h = np.dot(p.W1, self.v, out=self.h)
        h += p.b1
        np.maximum(h, 0, out=h)
        out = np.dot(p.W2, h, out=self.out)
        out += p.b2
        return out


def predict_scores(params: ModelParams, fv: FeatureVector) -> np.ndarray:
    """Logits for a single feature vector (no trace, no dropout)."""
    return Scorer(params)(fv).copy()


def cross_entropy(probs: np.ndarray, gold) -> float:
    gold = np.atleast_1d(np.asarray(gold))
    p = probs[np.arange(len(gold)), gold]
    return float(-np.mean(np.log(np.maximum(p, np.finfo(probs.dtype).tiny))))


def backward(params: ModelParams, trace: ForwardTrace, gold) -> Gradients:
    """Gradients of the batch-mean cross-entropy ``-log p(gold)``."""
    gold = np.atleast_1d(np.asarray(gold, dtype=np.int64))
    probs = trace.probs
    b, k = probs.shape
    if len(gold) != b:
        raise ValueError(f"{len(gold)} gold labels for a batch of {b}")
    if gold.min() < 0 or gold.max() >= k:
        raise ValueError(f"gold transition index out of range 0..{k - 1}")
    d_logits = probs.copy()
    d_logits[np.arange(b), gold] -= 1
    d_logits /= b
    g_W2 = d_logits.T @ trace.h
    g_b2 = d_logits.sum(axis=0)
    d_h = d_logits @ params.W2
    if trace.mask is not None:
        d_h *= trace.mask
    d_h *= trace.h_pre > 0
    g_W1 = d_h.T @ trace.v
    g_b1 = d_h.sum(axis=0)
    d_v = d_h @ params.W1

    embeddings = {}
    offset = 0
    for a in ATTRIBUTES:
        ids = _ids(trace.batch, a)
        dim = params.embeddings[a].shape[1]
        width = ids.shape[1] * dim
        block = d_v[:, offset:offset + width].reshape(-1, dim)
        offset += width
        rows, inverse = np.unique(ids.ravel(), return_inverse=True)
        grads = np.zeros((len(rows), dim), dtype=d_v.dtype)
        np.add.at(grads, inverse.ravel(), block)
        embeddings[a] = (rows, grads)
    return Gradients(g_W1, g_b1, g_W2, g_b2, embeddings)


def sgd_step(params: ModelParams, grads: Gradients, lr: float) -> ModelParams:
    """In-place ``theta -= lr * grad``; only embedding rows in the batch move."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    dense = (grads.W1, grads.b1, grads.W2, grads.b2)
    sparse = [g for _, g in grads.embeddings.values()]
    if not all(np.isfinite(g).all() for g in (*dense, *sparse)):
        raise FloatingPointError("non-finite gradient")
    dtype = params.W1.dtype
    step = dtype.type(lr)
    params.W1 -= step * grads.W1.astype(dtype, copy=False)
    params.b1 -= step * grads.b1.astype(dtype, copy=False)
    params.W2 -= step * grads.W2.astype(dtype, copy=False)
    params.b2 -= step * grads.b2.astype(dtype, copy=False)
    for a, (rows, g) in grads.embeddings.items():
        params.embeddings[a][rows] -= step * g.astype(dtype, copy=False)
    return params
