"""CoNLL-U reading/writing and tree-structural predicates.

Only syntactic words are kept: multiword-token ranges (``1-2``) and empty
nodes (``1.1``) are skipped on read. Node 0 is the implicit root and is
never written.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

DUMMY = "<DUMMY>"
"""FEATS symbol standing in for an absent ``_`` FEATS column."""

N_COLUMNS = 10


class ConlluFormatError(ValueError):
    """A token line could not be parsed."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class TreeStructureError(ValueError):
    """Gold heads of a sentence do not form a tree rooted at 0."""


@dataclass(frozen=True)
class Token:
    id: int
    form: str
    lemma: str = "_"
    upostag: str = "_"
    xpostag: str = "_"
    feats: str = DUMMY
    head: int = 0
    deprel: str = "_"
    deps: str = "_"
    misc: str = "_"

    def __post_init__(self):
        if self.id < 1:
            raise ValueError(f"token id must be >= 1, got {self.id}")
        if self.head < 0 or self.head == self.id:
            raise ValueError(f"invalid head {self.head} for token {self.id}")
        if not self.feats:
            raise ValueError("feats must not be empty; use DUMMY")


@dataclass(frozen=True)
class DependencyTree:
    """Set of ``(head, deprel, dependent)`` arcs over nodes ``0..n``."""

    arcs: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not isinstance(self.arcs, frozenset):
            object.__setattr__(self, "arcs", frozenset(self.arcs))

    @classmethod
    def from_heads(cls, heads: Sequence[int], deprels: Sequence[str]) -> "DependencyTree":
        """Build from 1-based parallel lists (``heads[i]`` is the head of ``i+1``)."""
        return cls(frozenset((h, l, d) for d, (h, l) in enumerate(zip(heads, deprels), 1)))

    def __len__(self):
        return len(self.arcs)

    def heads(self, n: int) -> list[int]:
        """Head of each node; index 0 and unattached nodes hold -1."""
        out = [-1] * (n + 1)
        for h, _, d in self.arcs:
            out[d] = h
        return out

    def deprels(self, n: int) -> list[Optional[str]]:
        out: list[Optional[str]] = [None] * (n + 1)
        for _, l, d in self.arcs:
            out[d] = l
        return out

    def head_of(self) -> dict[int, tuple[int, str]]:
        return {d: (h, l) for h, l, d in self.arcs}

    def validate(self, n: int) -> None:
        """Raise TreeStructureError unless this is a tree over 0..n rooted at 0."""
        seen = set()
        for h, _, d in self.arcs:
            if d in seen:
                raise TreeStructureError(f"node {d} has more than one head")
            if d < 1 or d > n or h < 0 or h > n:
                raise TreeStructureError(f"arc ({h}, {d}) out of range 0..{n}")
            seen.add(d)
        if len(seen) != n:
            missing = sorted(set(range(1, n + 1)) - seen)
            raise TreeStructureError(f"nodes without a head: {missing}")
        check_tree(self.heads(n))


def check_tree(heads: Sequence[int]) -> None:
    """Raise TreeStructureError unless every node 1..n reaches 0 without cycles.

    ``heads[0]`` is ignored.
    """
    n = len(heads) - 1
    children: list[list[int]] = [[] for _ in range(n + 1)]
    for d in range(1, n + 1):
        h = heads[d]
        if h < 0 or h > n:
            raise TreeStructureError(f"head {h} of node {d} out of range")
        children[h].append(d)
    reached = {0}
    frontier = [0]
    while frontier:
        node = frontier.pop()
        for c in children[node]:
            if c not in reached:
                reached.add(c)
                frontier.append(c)
    if len(reached) != n + 1:
        cyclic = sorted(set(range(1, n + 1)) - reached)
        raise TreeStructureError(f"nodes not reachable from root (cycle): {cyclic}")


@dataclass(frozen=True)
class Sentence:
    tokens: tuple
    metadata: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "metadata", tuple(self.metadata))
        for i, tok in enumerate(self.tokens, 1):
            if tok.id != i:
                raise ValueError(f"token ids must be 1..n without gaps; got {tok.id} at {i}")

    def __len__(self):
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    def gold_tree(self) -> DependencyTree:
        return DependencyTree(frozenset((t.head, t.deprel, t.id) for t in self.tokens))

    def with_tree(self, tree: DependencyTree) -> "Sentence":
        """Copy of this sentence whose HEAD/DEPREL columns carry ``tree``."""
        head_of = tree.head_of()
        tokens = []
        for t in self.tokens:
            h, l = head_of.get(t.id, (0, "_"))
            tokens.append(replace(t, head=h, deprel=l))
        return Sentence(tokens, self.metadata)


def _int_field(value: str, name: str, line_number: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConlluFormatError(f"non-integer {name} {value!r}", line_number) from None


def _sentence_from_block(rows, metadata, first_line) -> Sentence:
    tokens = []
    for line_number, cols in rows:
        feats = DUMMY if cols[5] == "_" else cols[5]
        token_id = _int_field(cols[0], "ID", line_number)
        head = _int_field(cols[6], "HEAD", line_number)
        try:
            tokens.append(Token(token_id, cols[1], cols[2], cols[3], cols[4], feats,
                                head, cols[7], cols[8], cols[9]))
        except ValueError as exc:
            raise ConlluFormatError(str(exc), line_number) from None
    try:
        sentence = Sentence(tokens, metadata)
    except ValueError as exc:
        raise TreeStructureError(f"sentence starting at line {first_line}: {exc}") from None
    try:
        check_tree([-1] + [t.head for t in tokens])
    except TreeStructureError as exc:
        raise TreeStructureError(f"sentence starting at line {first_line}: {exc}") from None
    return sentence


def parse_conllu(text: str) -> list[Sentence]:
    """Parse CoNLL-U text into sentences.

    Raises ConlluFormatError for malformed token lines and TreeStructureError
    when a sentence's heads are not a tree rooted at 0.
    """
    sentences = []
    rows: list = []
    metadata: list = []
    first_line = 1
    for line_number, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            if rows:
                sentences.append(_sentence_from_block(rows, metadata, first_line))
            elif metadata:
                raise ConlluFormatError("comment block without tokens", line_number)
            rows, metadata = [], []
            first_line = line_number + 1
            continue
        if line.startswith("#"):
            if rows:
                raise ConlluFormatError("comment line inside token block", line_number)
            metadata.append(line)
            continue
        cols = line.split("\t")
        if len(cols) != N_COLUMNS:
            raise ConlluFormatError(f"expected {N_COLUMNS} columns, got {len(cols)}", line_number)
        if "-" in cols[0] or "." in cols[0]:
            continue
        rows.append((line_number, cols))
    if rows:
        sentences.append(_sentence_from_block(rows, metadata, first_line))
    return sentences


def read_conllu(path) -> list[Sentence]:
    with open(path, encoding="utf-8") as f:
        return parse_conllu(f.read())


def _token_line(t: Token, head: int, deprel: str) -> str:
    feats = "_" if t.feats == DUMMY else t.feats
    return "\t".join([str(t.id), t.form, t.lemma, t.upostag, t.xpostag, feats,
                      str(head), deprel, "_", "_"])


def write_conllu(sentences: Sequence[Sentence],
                 predicted: Optional[Sequence[DependencyTree]] = None) -> str:
    """Serialize sentences; HEAD/DEPREL come from ``predicted`` when given."""
    if predicted is not None and len(predicted) != len(sentences):
        raise ValueError(f"{len(predicted)} predicted trees for {len(sentences)} sentences")
    out = []
    for i, sentence in enumerate(sentences):
        out.extend(sentence.metadata)
        if predicted is None:
            for t in sentence.tokens:
                out.append(_token_line(t, t.head, t.deprel))
        else:
            head_of = predicted[i].head_of()
            if len(head_of) != len(sentence) or any(d not in head_of for d in range(1, len(sentence) + 1)):
                raise ValueError(f"predicted tree {i} does not cover the sentence's {len(sentence)} tokens")
            for t in sentence.tokens:
                h, l = head_of[t.id]
                out.append(_token_line(t, h, l))
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


def save_conllu(path, sentences: Sequence[Sentence],
                predicted: Optional[Sequence[DependencyTree]] = None) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(write_conllu(sentences, predicted))


def _spans(heads: Sequence[int]) -> Iterable[tuple[int, int]]:
    for d in range(1, len(heads)):
        h = heads[d]
        yield (h, d) if h < d else (d, h)


def is_projective(tree, n: Optional[int] = None) -> bool:
    """True iff no two arcs cross when drawn above the sentence.

    ``tree`` is a DependencyTree (``n`` required) or a head list with a
    placeholder at index 0. Arcs from the root count like any other arc.
    """
    heads = tree.heads(n) if isinstance(tree, DependencyTree) else list(tree)
    # sweep: arcs sorted by left end; a crossing exists iff some arc starts
    # strictly inside an open arc and ends strictly outside it
    spans = sorted(_spans(heads), key=lambda s: (s[0], -s[1]))
    open_ends: list[int] = []
    for left, right in spans:
        while open_ends and open_ends[-1] <= left:
            open_ends.pop()
        if open_ends and right > open_ends[-1]:
            return False
        open_ends.append(right)
    return True
