"""Multi-label typing model: hashed sparse features into per-category logits.

The label side is the interesting part and is kept exactly: one
independent binary decision per category, probabilities t = sigmoid(W v),
trained with a summed binary cross entropy over all categories and
examples.  The feature side is a plain hashing-trick encoder over
context words, position-tagged window words, mention words, and mention
character n-grams.

All per-category arithmetic in the SGD loop goes through row-local
matrix-vector products, never a joint matrix-matrix product, so the
trained weights of one category are bit-for-bit unaffected by which
other categories share the vocabulary.

Feature hash: blake2b keyed with the seed (8 bytes little-endian,
digest_size 8), applied to the UTF-8 namespace-prefixed string; the
little-endian digest integer is reduced mod the feature-space size.
"""

from __future__ import annotations

import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from hashlib import blake2b
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.special import expit

from .categories import CategoryVocab
from .ingest import MentionExample

DEFAULT_FEATURE_DIM = 1 << 20
DEFAULT_HASH_SEED = 0
MODEL_FORMAT_VERSION = 1
WINDOW_DISTANCE = 3


def hash_feature(text: str, hash_seed: int, feature_dim: int) -> int:
    """Map a namespace-prefixed feature string to an id in [0, feature_dim)."""
    digest = blake2b(text.encode("utf-8"), digest_size=8,
                     key=hash_seed.to_bytes(8, "little")).digest()
    return int.from_bytes(digest, "little") % feature_dim


def feature_strings(example: MentionExample) -> list[str]:
    """Enumerate the namespace strings hashed for one example.

    Namespaces: ``s|`` context unigrams outside the span, ``w|rel|``
    context unigrams within distance 3 of the span tagged with their
    signed offset, ``m|`` mention unigrams, ``c3|`` / ``c4|`` character
    n-grams of the boundary-padded mention.  Everything is lowercased.
    """
    start, end = example.span
    out: list[str] = []
    for j, tok in enumerate(example.tokens):
        if start <= j < end:
            continue
        low = tok.lower()
        out.append("s|" + low)
        rel = j - start if j < start else j - end + 1
        if -WINDOW_DISTANCE <= rel <= WINDOW_DISTANCE:
            out.append(f"w|{rel}|{low}")
    for tok in example.tokens[start:end]:
        out.append("m|" + tok.lower())
    padded = "^" + example.mention.lower() + "$"
    for n in (3, 4):
        for i in range(len(padded) - n + 1):
            out.append(f"c{n}|" + padded[i:i + n])
    return out


@dataclass
class FeatureVector:
    """Sparse feature activations: strictly increasing ids, summed counts."""

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.indices.shape != self.values.shape:
            raise ValueError("indices and values differ in length")
        if len(self.indices) and np.any(np.diff(self.indices) <= 0):
            raise ValueError("indices must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite feature value")


def featurize(example: MentionExample, feature_dim: int = DEFAULT_FEATURE_DIM,
              hash_seed: int = DEFAULT_HASH_SEED) -> FeatureVector:
    """Hash an example's feature strings; colliding ids accumulate counts."""
    counts: Counter = Counter()
    for text in feature_strings(example):
        counts[hash_feature(text, hash_seed, feature_dim)] += 1
    ids = sorted(counts)
    return FeatureVector(np.array(ids, dtype=np.int64),
                         np.array([float(counts[i]) for i in ids]))


@dataclass
class TypePosterior:
    """Per-category probability vector for one mention."""

    probs: np.ndarray

    def __len__(self) -> int:
        return len(self.probs)


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 5
    batch_size: int = 64
    l2_penalty: float = 0.0
    seed: int = 0
    feature_dim: int = DEFAULT_FEATURE_DIM
    hash_seed: int = DEFAULT_HASH_SEED
    workers: int = 1

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be non-negative")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be positive")
        if not 0 <= self.hash_seed < 2 ** 64:
            raise ValueError("hash_seed must fit in 64 bits")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass
class Gradients:
    weights: np.ndarray
    bias: np.ndarray


@dataclass
class TypingModel:
    """Weights (categories x feature_dim), bias, and the hashing contract."""

    weights: np.ndarray
    bias: np.ndarray
    vocab: CategoryVocab
    hash_seed: int = DEFAULT_HASH_SEED
    feature_dim: int = DEFAULT_FEATURE_DIM

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.shape != (len(self.vocab), self.feature_dim):
            raise ValueError(
                f"weights shape {self.weights.shape} does not match "
                f"{len(self.vocab)} categories x {self.feature_dim} features")
        if self.bias.shape != (len(self.vocab),):
            raise ValueError("bias length does not match vocabulary")

    @classmethod
    def zeros(cls, vocab: CategoryVocab, feature_dim: int = DEFAULT_FEATURE_DIM,
              hash_seed: int = DEFAULT_HASH_SEED) -> "TypingModel":
        return cls(np.zeros((len(vocab), feature_dim)), np.zeros(len(vocab)),
                   vocab, hash_seed, feature_dim)

    def save(self, path: str) -> None:
        """Single-document model file; field names are the wire contract."""
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "D": self.feature_dim,
            "hash_seed": self.hash_seed,
            "vocab": self.vocab.entries,
            "bias": self.bias.tolist(),
            "weights": [row.tolist() for row in self.weights],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, ensure_ascii=False, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "TypingModel":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        version = doc.get("format_version")
        if version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version: {version!r}")
        vocab = CategoryVocab(list(doc["vocab"]))
        return cls(np.array(doc["weights"], dtype=np.float64),
                   np.array(doc["bias"], dtype=np.float64),
                   vocab, int(doc["hash_seed"]), int(doc["D"]))


def predict(model: TypingModel, features: FeatureVector) -> TypePosterior:
    """t = sigmoid(W v + b) for one sparse input."""
    if len(features.indices) and int(features.indices[-1]) >= model.feature_dim:
        raise ValueError("feature id out of range for this model")
    logits = model.weights[:, features.indices] @ features.values + model.bias
    return TypePosterior(expit(logits))


def predict_example(model: TypingModel, example: MentionExample) -> TypePosterior:
    return predict(model, featurize(example, model.feature_dim, model.hash_seed))


def labels_to_vector(label_ids: Iterable[int], n_categories: int) -> np.ndarray:
    y = np.zeros(n_categories)
    for i in label_ids:
        if not 0 <= i < n_categories:
            raise ValueError(f"label id {i} outside vocabulary of {n_categories}")
        y[i] = 1.0
    return y


def _bce_sum(logits: np.ndarray, targets: np.ndarray) -> float:
    """Numerically stable sum of per-entry binary cross entropies."""
    return float(np.sum(np.maximum(logits, 0.0) - logits * targets
                        + np.log1p(np.exp(-np.abs(logits)))))


def loss_and_grad(model: TypingModel,
                  batch: Sequence[tuple[FeatureVector, np.ndarray]],
                  l2_penalty: float = 0.0) -> tuple[float, Gradients]:
    """Summed BCE loss (plus optional L2 on W) and its exact gradient.

    The gradient with respect to each logit is (t - y); it lands on the
    active features of the example, plus the dense L2 term.  Intended for
    small models and tests; the SGD loop keeps its own sparse path.
    """
    if not batch:
        raise ValueError("empty batch")
    n = len(batch)
    n_cats = len(model.vocab)
    dense = np.zeros((n, model.feature_dim))
    targets = np.zeros((n, n_cats))
    for row, (fv, y) in enumerate(batch):
        dense[row, fv.indices] = fv.values
        targets[row] = np.asarray(y, dtype=np.float64)
    logits = dense @ model.weights.T + model.bias
    loss = _bce_sum(logits, targets)
    if l2_penalty:
        loss += l2_penalty * float(np.sum(model.weights * model.weights)) / 2.0
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite loss; model or inputs have diverged")
    err = expit(logits) - targets
    grad_w = err.T @ dense
    if l2_penalty:
        grad_w += l2_penalty * model.weights
    return loss, Gradients(grad_w, err.sum(axis=0))


def _batch_arrays(feats: Sequence[FeatureVector], labels: Sequence[np.ndarray],
                  rows: np.ndarray, n_cats: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Densify one mini-batch onto its active feature columns."""
    if len(rows) == 0:
        raise ValueError("empty batch")
    chunks = [feats[i].indices for i in rows]
    active = np.unique(np.concatenate(chunks)) if chunks else np.empty(0, np.int64)
    local = np.zeros((len(rows), len(active)))
    targets = np.zeros((len(rows), n_cats))
    for r, i in enumerate(rows):
        fv = feats[i]
        local[r, np.searchsorted(active, fv.indices)] = fv.values
        targets[r, labels[i]] = 1.0
    return active, local, targets


def _forward_rowwise(local: np.ndarray, weights_active: np.ndarray,
                     bias: np.ndarray) -> np.ndarray:
    """Logits via one matrix-vector product per category row."""
    n, n_cats = local.shape[0], weights_active.shape[0]
    logits = np.empty((n, n_cats))
    for cat in range(n_cats):
        logits[:, cat] = local @ weights_active[cat] + bias[cat]
    return logits


def _grad_rowwise(err: np.ndarray, local: np.ndarray) -> np.ndarray:
    grad = np.empty((err.shape[1], local.shape[1]))
    for cat in range(err.shape[1]):
        grad[cat] = err[:, cat] @ local
    return grad


def train(pairs: Sequence[tuple[MentionExample, Sequence[int]]],
          vocab: CategoryVocab,
          config: TrainConfig,
          dev_pairs: Optional[Sequence[tuple[MentionExample, Sequence[int]]]] = None,
          on_epoch: Optional[Callable[[int, float, Optional[float]], None]] = None) -> TypingModel:
    """Mini-batch SGD on the summed BCE objective.

    `pairs` carries (example, vocab label ids).  Weights start at zero;
    each epoch visits a fresh seeded permutation of the data.  With
    workers > 1 every batch is split into contiguous shards whose
    gradients are computed concurrently and merged in shard order, so
    results are reproducible per worker count but bit-identical runs are
    only promised at workers=1.  Raises FloatingPointError when a batch
    loss goes non-finite.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no training examples")
    n_cats = len(vocab)
    feats = [featurize(ex, config.feature_dim, config.hash_seed) for ex, _ in pairs]
    labels = [np.asarray(sorted(set(ids)), dtype=np.int64) for _, ids in pairs]
    for arr in labels:
        if len(arr) and (arr[0] < 0 or arr[-1] >= n_cats):
            raise ValueError("label id outside vocabulary")
    dev_feats = dev_labels = None
    if dev_pairs is not None:
        dev_feats = [featurize(ex, config.feature_dim, config.hash_seed)
                     for ex, _ in dev_pairs]
        dev_labels = [np.asarray(sorted(set(ids)), dtype=np.int64) for _, ids in dev_pairs]

    model = TypingModel.zeros(vocab, config.feature_dim, config.hash_seed)
    weights, bias = model.weights, model.bias
    rng = np.random.default_rng(config.seed)
    decay = 1.0 - config.learning_rate * config.l2_penalty
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None

    def shard_grads(active, local, targets):
        weights_active = weights[:, active]

        def one_shard(bounds):
            lo, hi = bounds
            logits = _forward_rowwise(local[lo:hi], weights_active, bias)
            loss = _bce_sum(logits, targets[lo:hi])
            err = expit(logits) - targets[lo:hi]
            return loss, _grad_rowwise(err, local[lo:hi]), err.sum(axis=0)

        n = local.shape[0]
        if pool is None or n < 2 * config.workers:
            return one_shard((0, n))
        step = (n + config.workers - 1) // config.workers
        bounds = [(lo, min(lo + step, n)) for lo in range(0, n, step)]
        results = list(pool.map(one_shard, bounds))
        loss = 0.0
        grad = np.zeros_like(results[0][1])
        grad_b = np.zeros(n_cats)
        for part_loss, part_grad, part_b in results:
            loss += part_loss
            grad += part_grad
            grad_b += part_b
        return loss, grad, grad_b

    try:
        for epoch in range(config.epochs):
            order = rng.permutation(len(pairs))
            epoch_loss = 0.0
            for lo in range(0, len(order), config.batch_size):
                rows = order[lo:lo + config.batch_size]
                active, local, targets = _batch_arrays(feats, labels, rows, n_cats)
                loss, grad, grad_b = shard_grads(active, local, targets)
                if not np.isfinite(loss):
                    raise FloatingPointError(
                        f"training diverged: non-finite loss at epoch {epoch + 1}")
                epoch_loss += loss
                if config.l2_penalty:
                    weights *= decay
                weights[:, active] -= config.learning_rate * grad
                bias -= config.learning_rate * grad_b
            dev_loss = None
            if dev_feats is not None:
                dev_loss = _full_loss(weights, bias, dev_feats, dev_labels, n_cats)
            if on_epoch is not None:
                on_epoch(epoch + 1, epoch_loss, dev_loss)
    finally:
        if pool is not None:
            pool.shutdown()
    return model


def _full_loss(weights: np.ndarray, bias: np.ndarray, feats: Sequence[FeatureVector],
               labels: Sequence[np.ndarray], n_cats: int, chunk: int = 256) -> float:
    total = 0.0
    for lo in range(0, len(feats), chunk):
        rows = np.arange(lo, min(lo + chunk, len(feats)))
        active, local, targets = _batch_arrays(feats, labels, rows, n_cats)
        logits = _forward_rowwise(local, weights[:, active], bias)
        total += _bce_sum(logits, targets)
    return total
