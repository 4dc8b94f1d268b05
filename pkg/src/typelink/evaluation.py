"""Linking accuracy, bucketed typing metrics, and context assembly.

Typing quality is reported as macro-averaged precision/recall/F1 inside
category frequency-rank buckets (rank = vocabulary position + 1), since
head and tail categories behave very differently.  Categories that never
occur in gold and are never predicted are left out of the averages.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .ingest import CONTEXT_WINDOW, MentionExample

TYPING_THRESHOLD = 0.5
RANK_BUCKETS = ((1, 100), (101, 500), (501, 10000), (10001, None))


class ContextMode(str, Enum):
    SENTENCE_ONLY = "sentence_only"
    SENTENCE_PLUS_WINDOW50 = "sentence_plus_window50"
    SENTENCE_PLUS_FIRST_DOC_SENTENCE = "sentence_plus_first_doc_sentence"


@dataclass
class BucketMetrics:
    label: str
    precision: float
    recall: float
    f1: float
    n_categories: int


@dataclass
class EvalReport:
    linking_accuracy: Optional[float]
    gold_recall: Optional[float]
    typing_buckets: Optional[list[BucketMetrics]]
    per_category: Optional[dict[str, tuple[float, float, float, int]]] = None

    def to_dict(self) -> dict:
        buckets = None
        if self.typing_buckets is not None:
            buckets = [[b.label, b.precision, b.recall, b.f1, b.n_categories]
                       for b in self.typing_buckets]
        per_cat = None
        if self.per_category is not None:
            per_cat = {cat: list(vals) for cat, vals in sorted(self.per_category.items())}
        return {
            "linking_accuracy": self.linking_accuracy,
            "gold_recall": self.gold_recall,
            "typing_buckets": buckets,
            "per_category": per_cat,
        }


def linking_accuracy(pairs: Sequence[tuple[Optional[str], str]]) -> float:
    """Exact-match fraction over (chosen, gold) pairs."""
    if not pairs:
        raise ValueError("no predictions to score")
    return sum(1 for chosen, gold in pairs if chosen == gold) / len(pairs)


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _bucket_label(lo: int, hi: Optional[int]) -> str:
    return f"{lo}-{hi}" if hi is not None else f"{lo}+"


def typing_metrics(posteriors: Sequence, golds: Sequence[Iterable[int]],
                   vocab_entries: Sequence[str],
                   threshold: float = TYPING_THRESHOLD,
                   buckets: Sequence[tuple[int, Optional[int]]] = RANK_BUCKETS,
                   with_per_category: bool = False):
    """Per-bucket macro precision/recall/F1 at a probability threshold.

    `posteriors` holds per-example probability vectors (arrays or
    objects with a .probs attribute); `golds` holds per-example iterables
    of gold category ids.  A category counts as predicted when its
    probability is >= threshold.  Returns (bucket list, per-category map
    or None); the bucket list ends with a "total" row over every counted
    category.
    """
    if len(posteriors) != len(golds):
        raise ValueError(
            f"got {len(posteriors)} posteriors but {len(golds)} gold sets")
    n_cats = len(vocab_entries)
    tp = np.zeros(n_cats, dtype=np.int64)
    fp = np.zeros(n_cats, dtype=np.int64)
    fn = np.zeros(n_cats, dtype=np.int64)
    for posterior, gold_ids in zip(posteriors, golds):
        probs = getattr(posterior, "probs", posterior)
        probs = np.asarray(probs)
        if len(probs) != n_cats:
            raise ValueError("posterior length does not match vocabulary")
        predicted = probs >= threshold
        gold = np.zeros(n_cats, dtype=bool)
        gold_list = list(gold_ids)
        if gold_list:
            gold[np.asarray(gold_list, dtype=np.int64)] = True
        tp += predicted & gold
        fp += predicted & ~gold
        fn += ~predicted & gold

    counted = [i for i in range(n_cats) if tp[i] + fp[i] + fn[i] > 0]
    stats: dict[int, tuple[float, float, float]] = {}
    for i in counted:
        denom_p = int(tp[i] + fp[i])
        denom_r = int(tp[i] + fn[i])
        p = int(tp[i]) / denom_p if denom_p else 0.0
        r = int(tp[i]) / denom_r if denom_r else 0.0
        stats[i] = (p, r, f1_score(p, r))

    def macro(ids: list[int], label: str) -> BucketMetrics:
        if not ids:
            return BucketMetrics(label, 0.0, 0.0, 0.0, 0)
        p = sum(stats[i][0] for i in ids) / len(ids)
        r = sum(stats[i][1] for i in ids) / len(ids)
        f = sum(stats[i][2] for i in ids) / len(ids)
        return BucketMetrics(label, p, r, f, len(ids))

    rows = []
    for lo, hi in buckets:
        ids = [i for i in counted if lo <= i + 1 and (hi is None or i + 1 <= hi)]
        rows.append(macro(ids, _bucket_label(lo, hi)))
    rows.append(macro(counted, "total"))

    per_category = None
    if with_per_category:
        per_category = {
            vocab_entries[i]: (stats[i][0], stats[i][1], stats[i][2], int(tp[i] + fn[i]))
            for i in counted
        }
    return rows, per_category


def build_context(example: MentionExample, mode: ContextMode) -> MentionExample:
    """Extend an example's token window per the context mode.

    The returned copy has its span re-indexed and the consumed auxiliary
    field emptied, so applying the same mode again is a no-op.  The
    mention surface string is never altered.
    """
    mode = ContextMode(mode)
    out = example.copy()
    if mode is ContextMode.SENTENCE_ONLY:
        return out
    start, end = out.span
    if mode is ContextMode.SENTENCE_PLUS_WINDOW50:
        if example.left_extra is None:
            raise ValueError("context mode needs left_extra, which is missing")
        if example.right_extra is None:
            raise ValueError("context mode needs right_extra, which is missing")
        left = example.left_extra[-CONTEXT_WINDOW:]
        right = example.right_extra[:CONTEXT_WINDOW]
        out.tokens = list(left) + out.tokens + list(right)
        out.span = (start + len(left), end + len(left))
        out.left_extra = []
        out.right_extra = []
        return out
    if example.doc_first_sentence is None:
        raise ValueError("context mode needs doc_first_sentence, which is missing")
    prefix = list(example.doc_first_sentence)
    out.tokens = prefix + out.tokens
    out.span = (start + len(prefix), end + len(prefix))
    out.doc_first_sentence = []
    return out
