"""Arc-standard and arc-standard+swap transition systems with static oracles."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

from ffdp.conllu import DependencyTree


class InvalidTransitionError(ValueError):
    pass


class OracleError(RuntimeError):
    """The gold tree cannot be produced by the transition system."""


class TransitionSystem(str, enum.Enum):
    ARC_STANDARD = "arc-standard"
    ARC_STANDARD_SWAP = "swap"

    @classmethod
    def coerce(cls, value) -> "TransitionSystem":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            pass
        try:
            return cls[str(value).upper().replace("-", "_")]
        except KeyError:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown {cls.__name__} {value!r}; expected one of {choices}") from None


class Kind(str, enum.Enum):
    SHIFT = "SHIFT"
    LEFT_ARC = "LEFT_ARC"
    RIGHT_ARC = "RIGHT_ARC"
    SWAP = "SWAP"


SHIFT, LEFT_ARC, RIGHT_ARC, SWAP = Kind.SHIFT, Kind.LEFT_ARC, Kind.RIGHT_ARC, Kind.SWAP


class Transition(NamedTuple):
    kind: Kind
    label: Optional[str] = None

    def __str__(self):
        return self.kind.value if self.label is None else f"{self.kind.value}({self.label})"


@dataclass(frozen=True)
class Configuration:
    """Parser state (stack, buffer, arcs).

    Arcs are held as per-node ``heads``/``deprels`` plus the surface-ordered
    ``children`` of every node, so that daughter lookups are cheap.
    """

    stack: tuple
    buffer: tuple
    heads: tuple
    deprels: tuple
    children: tuple

    @classmethod
    def from_arcs(cls, stack: Sequence[int], buffer: Sequence[int],
                  arcs: Iterable = (), n: Optional[int] = None) -> "Configuration":
        arcs = list(arcs)
        if n is None:
            nodes = list(stack) + list(buffer) + [x for h, _, d in arcs for x in (h, d)]
            n = max(nodes, default=0)
        heads = [-1] * (n + 1)
        deprels: list = [None] * (n + 1)
        children: list = [[] for _ in range(n + 1)]
        for h, l, d in arcs:
            if heads[d] != -1:
                raise ValueError(f"node {d} has two heads")
            heads[d], deprels[d] = h, l
            children[h].append(d)
        return cls(tuple(stack), tuple(buffer), tuple(heads), tuple(deprels),
                   tuple(tuple(sorted(c)) for c in children))

    @property
    def n(self) -> int:
        return len(self.heads) - 1

    @property
    def arcs(self) -> frozenset:
        return frozenset((h, self.deprels[d], d) for d, h in enumerate(self.heads) if h >= 0)

    def tree(self) -> DependencyTree:
        return DependencyTree(self.arcs)

    def _with_arc(self, head: int, label: str, dep: int, stack: tuple) -> "Configuration":
        heads = list(self.heads)
        deprels = list(self.deprels)
        children = list(self.children)
        heads[dep], deprels[dep] = head, label
        kids = children[head]
        pos = 0
        while pos < len(kids) and kids[pos] < dep:
            pos += 1
        children[head] = kids[:pos] + (dep,) + kids[pos:]
        return Configuration(stack, self.buffer, tuple(heads), tuple(deprels), tuple(children))


def initial_config(n: int) -> Configuration:
    if n < 0:
        raise ValueError("n must be >= 0")
    return Configuration((0,), tuple(range(1, n + 1)), (-1,) * (n + 1),
                         (None,) * (n + 1), ((),) * (n + 1))


def is_terminal(config: Configuration) -> bool:
    return config.stack == (0,) and not config.buffer


def valid_transitions(config: Configuration, system: TransitionSystem) -> set:
    """Transition kinds whose preconditions hold in ``config``."""
    if is_terminal(config):
        raise InvalidTransitionError("no transitions are defined on a terminal configuration")
    stack = config.stack
    kinds = set()
    if config.buffer:
        kinds.add(SHIFT)
    if len(stack) >= 2:
        kinds.add(RIGHT_ARC)
        if len(stack) >= 3:
            kinds.add(LEFT_ARC)
            if system is TransitionSystem.ARC_STANDARD_SWAP and 0 < stack[-2] < stack[-1]:
                kinds.add(SWAP)
    return kinds


def apply(config: Configuration, t: Transition) -> Configuration:
    """Return the configuration reached by applying ``t``; ``config`` is unchanged."""
    kind = t.kind
    stack = config.stack
    if kind is SHIFT:
        if not config.buffer:
            raise InvalidTransitionError("SHIFT requires a non-empty buffer")
        return Configuration(stack + config.buffer[:1], config.buffer[1:],
                             config.heads, config.deprels, config.children)
    if len(stack) < 2:
        raise InvalidTransitionError(f"{kind.value} requires two stack items")
    i, j = stack[-2], stack[-1]
    if kind is RIGHT_ARC:
        return config._with_arc(i, t.label, j, stack[:-1])
    if i == 0:
        raise InvalidTransitionError(f"{kind.value} requires the second stack item to be a word, not the root")
    if kind is LEFT_ARC:
        return config._with_arc(j, t.label, i, stack[:-2] + (j,))
    if kind is SWAP:
        if not i < j:
            raise InvalidTransitionError(f"SWAP requires 0 < i < j, got i={i}, j={j}")
        return Configuration(stack[:-2] + (j,), (i,) + config.buffer,
                             config.heads, config.deprels, config.children)
    raise InvalidTransitionError(f"unknown transition {t!r}")


def projective_order(gold: DependencyTree, n: int) -> list[int]:
    """In-order traversal rank of every node (``order[0] == 0``).

    Identity for projective trees; otherwise the reordering under which
    ``gold`` becomes projective.
    """
    children: list[list[int]] = [[] for _ in range(n + 1)]
    for h, _, d in sorted(gold.arcs, key=lambda a: a[2]):
        children[h].append(d)
    order = [0] * (n + 1)
    rank = 0
    # iterative in-order walk: (node, expanded)
    todo = [(0, False)]
    while todo:
        node, expanded = todo.pop()
        if expanded:
            if node:
                rank += 1
                order[node] = rank
            continue
        kids = children[node]
        right = [c for c in kids if c > node]
        left = [c for c in kids if c < node]
        for c in reversed(right):
            todo.append((c, False))
        todo.append((node, True))
        for c in reversed(left):
            todo.append((c, False))
    return order


class GoldIndex:
    """Per-sentence gold lookups shared by successive oracle calls."""

    __slots__ = ("head", "label", "n_children")

    def __init__(self, gold: DependencyTree, n: int):
        self.head = gold.heads(n)
        self.label = gold.deprels(n)
        self.n_children = [0] * (n + 1)
        for h, _, _ in gold.arcs:
            self.n_children[h] += 1


def static_oracle(config: Configuration, gold, order: Sequence[int],
                  system: TransitionSystem) -> Transition:
    """Gold transition at ``config`` (eager SWAP for the swap system).

    ``gold`` may be a DependencyTree or a prebuilt GoldIndex.
    """
    if not isinstance(gold, GoldIndex):
        gold = GoldIndex(gold, config.n)
    stack = config.stack
    if len(stack) >= 2:
        i, j = stack[-2], stack[-1]
        if system is TransitionSystem.ARC_STANDARD_SWAP and i > 0 and order[i] > order[j]:
            return Transition(SWAP)
        if i > 0 and gold.head[i] == j and len(config.children[i]) == gold.n_children[i]:
            return Transition(LEFT_ARC, gold.label[i])
        if gold.head[j] == i and len(config.children[j]) == gold.n_children[j]:
            return Transition(RIGHT_ARC, gold.label[j])
    if not config.buffer:
        raise OracleError(f"oracle demands SHIFT on an empty buffer (stack {list(stack)})")
    return Transition(SHIFT)


def oracle_sequence(gold: DependencyTree, n: int, system: TransitionSystem):
    """Yield ``(config, transition)`` pairs of the full oracle derivation."""
    system = TransitionSystem.coerce(system)
    index = GoldIndex(gold, n)
    order = projective_order(gold, n) if system is TransitionSystem.ARC_STANDARD_SWAP else list(range(n + 1))
    config = initial_config(n)
    limit = max_transitions(n)
    steps = 0
    while not is_terminal(config):
        t = static_oracle(config, index, order, system)
        if t.kind not in valid_transitions(config, system):
            raise OracleError(f"oracle produced invalid {t} at stack {list(config.stack)}")
        yield config, t
        config = apply(config, t)
        steps += 1
        if steps > limit:
            raise OracleError("oracle exceeded the transition bound")
    if config.arcs != gold.arcs:
        raise OracleError("oracle derivation does not reproduce the gold tree")


def max_transitions(n: int) -> int:
    """Upper bound on the length of any derivation over ``n`` words.

    At most n(n-1)/2 SWAPs can occur (one per word pair), each followed by
    one extra SHIFT of the swapped word.
    """
    return 2 * n + n * (n - 1)


def format_trace(steps: Iterable) -> str:
    """Render ``(config, transition)`` pairs as ``STEP k | stack | buffer | T`` lines."""
    lines = []
    for k, (config, t) in enumerate(steps):
        stack = " ".join(map(str, config.stack))
        buffer = " ".join(map(str, config.buffer))
        lines.append(f"STEP {k} | {stack} | {buffer} | {t}")
    return "\n".join(lines)
