"""Feature templates over parser configurations and symbol vocabularies."""

from __future__ import annotations

import enum
import hashlib
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from ffdp.conllu import DUMMY, Sentence
from ffdp.transitions import Configuration

NULL, UNK, ROOT = "<NULL>", "<UNK>", "<ROOT>"
RESERVED = (NULL, UNK, ROOT, DUMMY)
NULL_ID, UNK_ID, ROOT_ID, DUMMY_ID = range(4)

ATTRIBUTES = ("FORM", "UPOS", "FEATS", "DEPREL")
VOCAB_VERSION = 1


class FeatureTemplate(str, enum.Enum):
    STANDARD = "standard"
    NO_GD = "no-gd"
    NO_GD_D = "no-gd-d"

    @classmethod
    def coerce(cls, value) -> "FeatureTemplate":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            pass
        try:
            return cls[str(value).upper().replace("-", "_").replace("/", "_")]
        except KeyError:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown {cls.__name__} {value!r}; expected one of {choices}") from None


class Address(NamedTuple):
    """``base`` is ``'s'`` or ``'b'``; ``path`` is a chain of (side, k) child steps."""

    base: str
    index: int
    path: tuple = ()

    @property
    def is_direct(self) -> bool:
        return not self.path

    def __str__(self):
        name = f"{self.base}{self.index}"
        for side, k in self.path:
            name = f"{side}c{k}({name})"
        return name


def _daughters(k: int) -> list:
    s = ("s", k)
    return [Address(*s, (("l", 1),)), Address(*s, (("l", 2),)),
            Address(*s, (("r", 1),)), Address(*s, (("r", 2),))]


def _grand_daughters(k: int) -> list:
    s = ("s", k)
    return [Address(*s, (("l", 1), ("l", 1))), Address(*s, (("r", 1), ("r", 1)))]


_DIRECT = [Address("b", 0), Address("b", 1), Address("b", 2),
           Address("s", 0), Address("s", 1), Address("s", 2)]
_STANDARD = _DIRECT + _daughters(0) + _daughters(1) + _grand_daughters(0) + _grand_daughters(1)

_ADDRESSES = {
    FeatureTemplate.STANDARD: tuple(_STANDARD),
    FeatureTemplate.NO_GD: tuple(_STANDARD[:14]),
    FeatureTemplate.NO_GD_D: tuple(_STANDARD[:6]),
}


def element_addresses(template) -> tuple:
    return _ADDRESSES[FeatureTemplate.coerce(template)]


def n_features(template) -> int:
    addrs = element_addresses(template)
    return sum(3 if a.is_direct else 4 for a in addrs)


def resolve(config: Configuration, address: Address) -> Optional[int]:
    """Node addressed in ``config``, or None when absent."""
    if address.base == "s":
        if address.index >= len(config.stack):
            return None
        node = config.stack[-1 - address.index]
    else:
        if address.index >= len(config.buffer):
            return None
        node = config.buffer[address.index]
    children = config.children
    for side, k in address.path:
        kids = children[node]
        if k > len(kids):
            return None
        node = kids[k - 1] if side == "l" else kids[-k]
    return node


class Vocabulary:
    """Per-attribute string -> id tables with reserved ids 0..3."""

    def __init__(self, tables: dict, counts: Optional[dict] = None):
        self.tables = {a: dict(tables[a]) for a in ATTRIBUTES}
        for a in ATTRIBUTES:
            for sym, idx in zip(RESERVED, range(4)):
                if self.tables[a].get(sym) != idx:
                    raise ValueError(f"{a} table must map {sym} to {idx}")
        self.form_counts = Counter(counts or {})

    @classmethod
    def build(cls, sentences: Iterable[Sentence]) -> "Vocabulary":
        counts = {a: Counter() for a in ATTRIBUTES}
        for sentence in sentences:
            for t in sentence.tokens:
                counts["FORM"][t.form] += 1
                counts["UPOS"][t.upostag] += 1
                counts["FEATS"][t.feats] += 1
                counts["DEPREL"][t.deprel] += 1
        tables = {}
        for a in ATTRIBUTES:
            table = {sym: i for i, sym in enumerate(RESERVED)}
            for sym in sorted(counts[a]):
                if sym not in table:
                    table[sym] = len(table)
            tables[a] = table
        return cls(tables, counts["FORM"])

    def size(self, attribute: str) -> int:
        return len(self.tables[attribute])

    @property
    def sizes(self) -> dict:
        return {a: len(self.tables[a]) for a in ATTRIBUTES}

    @property
    def deprels(self) -> list[str]:
        """Dependency labels in id order, reserved symbols excluded."""
        table = self.tables["DEPREL"]
        return [s for s, _ in sorted(table.items(), key=lambda kv: kv[1])][len(RESERVED):]

    def lookup(self, attribute: str, symbol: str) -> int:
        return self.tables[attribute].get(symbol, UNK_ID)

    def singleton_form_ids(self) -> list[int]:
        table = self.tables["FORM"]
        return sorted(table[f] for f, c in self.form_counts.items() if c == 1 and f in table)

    def dumps(self) -> str:
        lines = [f"#ffdp-vocab\t{VOCAB_VERSION}"]
        for a in ATTRIBUTES:
            for sym, idx in sorted(self.tables[a].items(), key=lambda kv: kv[1]):
                lines.append(f"{a}\t{sym}\t{idx}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Vocabulary":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#ffdp-vocab\t"):
            raise ValueError("not a vocabulary file")
        version = int(lines[0].split("\t")[1])
        if version != VOCAB_VERSION:
            raise ValueError(f"unsupported vocabulary version {version}")
        tables: dict = {a: {} for a in ATTRIBUTES}
        for line in lines[1:]:
            if not line:
                continue
            a, sym, idx = line.split("\t")
            tables[a][sym] = int(idx)
        return cls(tables)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.dumps())

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            return cls.loads(f.read())

    def hash(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()[:16]

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tables == other.tables


@dataclass(frozen=True)
class FeatureVector:
    form: tuple
    upos: tuple
    feats: tuple
    deprel: tuple


class SentenceIds:
    """Symbol ids of a sentence's nodes; index 0 is the root."""

    __slots__ = ("form", "upos", "feats")

    def __init__(self, sentence: Sentence, vocab: Vocabulary):
        ft, ut, xt = vocab.tables["FORM"], vocab.tables["UPOS"], vocab.tables["FEATS"]
        toks = sentence.tokens
        self.form = [ROOT_ID] + [ft.get(t.form, UNK_ID) for t in toks]
        self.upos = [ROOT_ID] + [ut.get(t.upostag, UNK_ID) for t in toks]
        self.feats = [ROOT_ID] + [xt.get(t.feats, UNK_ID) for t in toks]


class Featurizer:
    """Template-bound feature extraction; ``__call__`` is the hot path."""

    def __init__(self, template, vocab: Vocabulary):
        self.template = FeatureTemplate.coerce(template)
        self.vocab = vocab
        self.addresses = element_addresses(self.template)
        self.n_daughters = 0 if self.template is FeatureTemplate.NO_GD_D else 8
        self.grand = self.template is FeatureTemplate.STANDARD

    def nodes(self, config: Configuration) -> list:
        """Addressed nodes in template order (None when absent)."""
        stack, buffer, children = config.stack, config.buffer, config.children
        ns, nb = len(stack), len(buffer)
        s0 = stack[-1] if ns > 0 else None
        s1 = stack[-2] if ns > 1 else None
        nodes = [buffer[0] if nb > 0 else None,
                 buffer[1] if nb > 1 else None,
                 buffer[2] if nb > 2 else None,
                 s0, s1,
                 stack[-3] if ns > 2 else None]
        if not self.n_daughters:
            return nodes
        for s in (s0, s1):
            if s is None:
                nodes += (None, None, None, None)
                continue
            kids = children[s]
            k = len(kids)
            nodes += (kids[0] if k > 0 else None, kids[1] if k > 1 else None,
                      kids[-1] if k > 0 else None, kids[-2] if k > 1 else None)
        if self.grand:
            for s in (s0, s1):
                if s is None:
                    nodes += (None, None)
                    continue
                kids = children[s]
                if kids:
                    g = children[kids[0]]
                    nodes.append(g[0] if g else None)
                    g = children[kids[-1]]
                    nodes.append(g[-1] if g else None)
                else:
                    nodes += (None, None)
        return nodes

    def __call__(self, config: Configuration, ids: SentenceIds) -> FeatureVector:
        nodes = self.nodes(config)
        form, upos, feats = ids.form, ids.upos, ids.feats
        f = [NULL_ID if x is None else form[x] for x in nodes]
        u = [NULL_ID if x is None else upos[x] for x in nodes]
        m = [NULL_ID if x is None else feats[x] for x in nodes]
        deprel_table = self.vocab.tables["DEPREL"]
        labels = config.deprels
        d = [NULL_ID if x is None or labels[x] is None else deprel_table.get(labels[x], UNK_ID)
             for x in nodes[6:]]
        return FeatureVector(tuple(f), tuple(u), tuple(m), tuple(d))


def featurize(config: Configuration, sentence: Sentence, template, vocab: Vocabulary) -> FeatureVector:
    return Featurizer(template, vocab)(config, SentenceIds(sentence, vocab))


def input_dim(template, sizes) -> int:
    """Length of the concatenated embedding input for ``template``."""
    addrs = element_addresses(template)
    direct = sizes.form_dim + sizes.upos_dim + sizes.feats_dim
    return len(addrs) * direct + sum(not a.is_direct for a in addrs) * sizes.deprel_dim


def counts_by_attribute(template) -> dict:
    addrs = element_addresses(template)
    n = len(addrs)
    return {"FORM": n, "UPOS": n, "FEATS": n, "DEPREL": sum(not a.is_direct for a in addrs)}


def stack_features(vectors: Sequence[FeatureVector], template=None):
    """Stack feature vectors into per-attribute int arrays of shape (batch, k).

    ``template`` fixes the widths, which is needed when ``vectors`` is empty.
    """
    if template is not None:
        counts = counts_by_attribute(template)
        widths = [counts[a] for a in ATTRIBUTES]
    elif vectors:
        first = vectors[0]
        widths = [len(first.form), len(first.upos), len(first.feats), len(first.deprel)]
    else:
        raise ValueError("cannot infer feature widths from an empty list; pass a template")
    b = len(vectors)
    return FeatureBatch(
        np.array([v.form for v in vectors], dtype=np.int64).reshape(b, widths[0]),
        np.array([v.upos for v in vectors], dtype=np.int64).reshape(b, widths[1]),
        np.array([v.feats for v in vectors], dtype=np.int64).reshape(b, widths[2]),
        np.array([v.deprel for v in vectors], dtype=np.int64).reshape(b, widths[3]),
    )


@dataclass
class FeatureBatch:
    form: np.ndarray
    upos: np.ndarray
    feats: np.ndarray
    deprel: np.ndarray

    def __len__(self):
        return self.form.shape[0]

    def take(self, index) -> "FeatureBatch":
        return FeatureBatch(self.form[index], self.upos[index], self.feats[index], self.deprel[index])
