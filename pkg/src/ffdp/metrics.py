"""Attachment scores, single-thread parsing throughput and the randomized
stratified-shuffling comparator used to test LAS differences."""

from __future__ import annotations

import gc
import json
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from ffdp.conllu import DependencyTree, Sentence
from ffdp.features import SentenceIds
from ffdp.trainer import Decoder
from ffdp.transitions import apply, initial_config, is_terminal, valid_transitions

SIGNIFICANCE_LEVEL = 0.05


class _Report:
    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_text(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in self.to_dict().items()) + "\n"

    @classmethod
    def from_dict(cls, d: dict):
        return cls(**d)


@dataclass(frozen=True)
class ScoreReport(_Report):
    las: float
    uas: float
    token_count: int
    sentence_count: int


@dataclass(frozen=True)
class ThroughputReport(_Report):
    kt_per_sec: float
    per_run: list = field(default_factory=list)
    token_count: int = 0


@dataclass(frozen=True)
class SignificanceReport(_Report):
    observed_diff: float
    p_value: float
    iterations: int
    significant: bool


def _tree(x) -> DependencyTree:
    return x.gold_tree() if isinstance(x, Sentence) else x


def _correct_counts(gold: Sequence[Sentence], predicted) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-sentence (labeled correct, unlabeled correct, token count)."""
    if len(gold) != len(predicted):
        raise ValueError(f"{len(gold)} gold sentences but {len(predicted)} predictions")
    labeled = np.zeros(len(gold), dtype=np.int64)
    unlabeled = np.zeros(len(gold), dtype=np.int64)
    tokens = np.zeros(len(gold), dtype=np.int64)
    for i, (sentence, pred) in enumerate(zip(gold, predicted)):
        head_of = _tree(pred).head_of()
        n = len(sentence)
        if len(head_of) != n or any(not 1 <= d <= n for d in head_of):
            raise ValueError(f"prediction {i} does not cover the sentence's {n} tokens")
        for t in sentence.tokens:
            h, l = head_of[t.id]
            if h == t.head:
                unlabeled[i] += 1
                labeled[i] += l == t.deprel
        tokens[i] = n
    return labeled, unlabeled, tokens


def score(gold: Sequence[Sentence], predicted) -> ScoreReport:
    """LAS/UAS in percent over all tokens, punctuation included."""
    labeled, unlabeled, tokens = _correct_counts(gold, predicted)
    total = int(tokens.sum())
    if total == 0:
        return ScoreReport(0.0, 0.0, 0, len(gold))
    return ScoreReport(100.0 * labeled.sum() / total, 100.0 * unlabeled.sum() / total, total, len(gold))


def throughput(model, sentences: Sequence[Sentence], runs: int = 5, warmup: bool = True,
               clock=time.perf_counter) -> ThroughputReport:
    """Thousands of tokens parsed per second, averaged over ``runs`` timed passes.

    Each pass parses the whole set (feature extraction, scoring and
    transition application) on a single thread.
    """
    if not sentences:
        raise ValueError("empty test set")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    decoder = Decoder(model)
    tokens = sum(len(s) for s in sentences)
    per_run = []
    gc_was_enabled = gc.isenabled()
    with threadpool_limits(limits=1):
        if warmup:
            for s in sentences:
                decoder.parse(s)
        gc.disable()
        try:
            for _ in range(runs):
                start = clock()
                for s in sentences:
                    decoder.parse(s)
                elapsed = clock() - start
                per_run.append(tokens / elapsed / 1000.0)
        finally:
            if gc_was_enabled:
                gc.enable()
    return ThroughputReport(float(np.mean(per_run)), per_run, tokens)


def timing_breakdown(model, sentences: Sequence[Sentence]) -> dict:
    """Wall time of one parsing pass split into featurize / score / transition phases."""
    decoder = Decoder(model)
    inventory, transitions, system = model.inventory, decoder.transitions, model.system
    score, featurize = decoder.score, decoder.featurize
    phases = {"featurize": 0.0, "score": 0.0, "transition": 0.0}
    clock = time.perf_counter
    with threadpool_limits(limits=1):
        wall_start = clock()
        for sentence in sentences:
            t0 = clock()
            ids = SentenceIds(sentence, model.vocab)
            config = initial_config(len(sentence))
            t1 = clock()
            phases["featurize"] += t1 - t0
            while not is_terminal(config):
                t0 = clock()
                fv = featurize(config, ids)
                t1 = clock()
                scores = score(fv)
                t2 = clock()
                mask = inventory.valid_mask(valid_transitions(config, system))
                best = int(np.argmax(np.where(mask, scores, -np.inf)))
                config = apply(config, transitions[best])
                t3 = clock()
                phases["featurize"] += t1 - t0
                phases["score"] += t2 - t1
                phases["transition"] += t3 - t2
        phases["wall"] = clock() - wall_start
    return phases


def significance(gold: Sequence[Sentence], outputs_a, outputs_b, iterations: int = 10000,
                 rng: Optional[np.random.Generator] = None) -> SignificanceReport:
    """Randomized comparator on LAS: swap each sentence's two outputs with
    probability 1/2 and count shuffles whose |LAS difference| reaches the
    observed one."""
    if not len(gold) == len(outputs_a) == len(outputs_b):
        raise ValueError("gold and both outputs must be aligned")
    rng = rng if rng is not None else np.random.default_rng(0)
    a, _, tokens = _correct_counts(gold, outputs_a)
    b, _, _ = _correct_counts(gold, outputs_b)
    total = int(tokens.sum())
    observed = abs(int(a.sum()) - int(b.sum()))
    delta = a - b
    count = 0
    chunk = max(1, min(iterations, 2_000_000 // max(1, len(delta))))
    done = 0
    while done < iterations:
        k = min(chunk, iterations - done)
        flip = rng.random((k, len(delta))) < 0.5
        shuffled = np.abs(np.where(flip, -delta, delta).sum(axis=1))
        count += int((shuffled >= observed).sum())
        done += k
    p = (count + 1) / (iterations + 1)
    diff = 100.0 * observed / total if total else 0.0
    return SignificanceReport(diff, p, iterations, p < SIGNIFICANCE_LEVEL)


def exact_p_value(gold: Sequence[Sentence], outputs_a, outputs_b) -> float:
    """Exact shuffling p-value by enumerating all 2**N swap patterns (tiny N only)."""
    a, _, _ = _correct_counts(gold, outputs_a)
    b, _, _ = _correct_counts(gold, outputs_b)
    n = len(a)
    if n > 20:
        raise ValueError("exact enumeration is limited to 20 sentences")
    delta = a - b
    observed = abs(int(delta.sum()))
    hits = 0
    for pattern in range(2 ** n):
        total = sum(-d if pattern >> i & 1 else d for i, d in enumerate(delta))
        hits += abs(int(total)) >= observed
    return hits / 2 ** n


def significance_class(diff: float, p_value: float, alpha: float = SIGNIFICANCE_LEVEL) -> str:
    """Four-way table class for ``diff = LAS(model) - LAS(baseline)``.

    A tie counts as a non-significant gain.
    """
    if diff >= 0:
        return "gain++" if p_value < alpha and diff > 0 else "gain+"
    return "loss--" if p_value < alpha else "loss-"
