import random

import pytest
from conftest import random_heads, random_projective_heads, tree_from_heads

from ffdp.conllu import DependencyTree, is_projective
from ffdp.transitions import (
    LEFT_ARC,
    RIGHT_ARC,
    SHIFT,
    SWAP,
    Configuration,
    InvalidTransitionError,
    OracleError,
    Transition,
    TransitionSystem,
    apply,
    format_trace,
    initial_config,
    is_terminal,
    max_transitions,
    oracle_sequence,
    projective_order,
    static_oracle,
    valid_transitions,
)

ARC_STD = TransitionSystem.ARC_STANDARD
SWAP_SYS = TransitionSystem.ARC_STANDARD_SWAP

NONPROJ = [-1, 3, 4, 0, 3]  # heads {1->3, 3->0, 2->4, 4->3}


def test_initial_config():
    c = initial_config(3)
    assert c.stack == (0,) and c.buffer == (1, 2, 3) and c.arcs == frozenset()
    assert initial_config(1).buffer == (1,)
    assert is_terminal(initial_config(0))


def test_is_terminal():
    assert is_terminal(Configuration.from_arcs([0], [], n=2))
    assert not is_terminal(Configuration.from_arcs([0, 2], [], n=2))
    assert not is_terminal(Configuration.from_arcs([0], [1], n=1))


def test_valid_transitions_examples():
    assert valid_transitions(initial_config(2), ARC_STD) == {SHIFT}
    assert valid_transitions(Configuration.from_arcs([0, 1, 2], [], n=2), ARC_STD) == {LEFT_ARC, RIGHT_ARC}
    assert valid_transitions(Configuration.from_arcs([0, 2, 1], [], n=2), SWAP_SYS) == {LEFT_ARC, RIGHT_ARC}
    assert SWAP in valid_transitions(Configuration.from_arcs([0, 1, 2], [], n=2), SWAP_SYS)
    assert valid_transitions(Configuration.from_arcs([0, 1], [2], n=2), SWAP_SYS) == {SHIFT, RIGHT_ARC}


def test_valid_transitions_terminal_raises():
    with pytest.raises(InvalidTransitionError):
        valid_transitions(initial_config(0), ARC_STD)


def test_apply_left_arc():
    c = Configuration.from_arcs([0, 1, 2], [], n=2)
    c2 = apply(c, Transition(LEFT_ARC, "nsubj"))
    assert c2.stack == (0, 2)
    assert c2.arcs == {(2, "nsubj", 1)}
    assert c.stack == (0, 1, 2) and c.arcs == frozenset()


def test_apply_shift_and_swap():
    c = apply(initial_config(1), Transition(SHIFT))
    assert c.stack == (0, 1) and c.buffer == ()
    c = Configuration.from_arcs([0, 1, 2], [3], n=3)
    c2 = apply(c, Transition(SWAP))
    assert c2.stack == (0, 2) and c2.buffer == (1, 3)


def test_apply_right_arc_from_root():
    c = apply(Configuration.from_arcs([0, 1], [], n=1), Transition(RIGHT_ARC, "root"))
    assert c.arcs == {(0, "root", 1)} and is_terminal(c)


@pytest.mark.parametrize("stack, buffer, t, msg", [
    ([0], [], Transition(SHIFT), "non-empty buffer"),
    ([0], [1], Transition(RIGHT_ARC, "x"), "two stack items"),
    ([0, 1], [], Transition(LEFT_ARC, "x"), "root"),
    ([0, 2, 1], [], Transition(SWAP), "0 < i < j"),
])
def test_apply_invalid(stack, buffer, t, msg):
    with pytest.raises(InvalidTransitionError, match=msg):
        apply(Configuration.from_arcs(stack, buffer, n=2), t)


def test_projective_order_identity_for_projective():
    rng = random.Random(0)
    for _ in range(100):
        heads = random_projective_heads(rng.randint(1, 12), rng)
        n = len(heads) - 1
        assert projective_order(tree_from_heads(heads), n) == list(range(n + 1))
    assert projective_order(tree_from_heads([-1, 0]), 1) == [0, 1]


def _reorder(heads, order):
    """Heads of the tree with node k moved to position order[k]."""
    n = len(heads) - 1
    out = [-1] * (n + 1)
    for d in range(1, n + 1):
        out[order[d]] = order[heads[d]]
    return out


def test_projective_order_nonprojective_example():
    order = projective_order(tree_from_heads(NONPROJ), 4)
    assert order[2] > order[3]
    assert is_projective(_reorder(NONPROJ, order))
    assert sorted(order[1:]) == [1, 2, 3, 4]


def test_projective_order_makes_any_tree_projective():
    rng = random.Random(1)
    for _ in range(300):
        heads = random_heads(rng.randint(1, 12), rng)
        order = projective_order(tree_from_heads(heads), len(heads) - 1)
        assert is_projective(_reorder(heads, order))


def test_static_oracle_left_arc():
    gold = DependencyTree({(2, "nsubj", 1), (0, "root", 2)})
    c = Configuration.from_arcs([0, 1, 2], [], n=2)
    assert static_oracle(c, gold, [0, 1, 2], ARC_STD) == Transition(LEFT_ARC, "nsubj")


def _replay(heads, system):
    gold = tree_from_heads(heads)
    n = len(heads) - 1
    steps = list(oracle_sequence(gold, n, system))
    c = initial_config(n)
    for config, t in steps:
        assert config == c
        assert t.kind in valid_transitions(c, system)
        c = apply(c, t)
    assert is_terminal(c)
    return steps, c.arcs == gold.arcs


def test_nonprojective_example_swap():
    steps, ok = _replay(NONPROJ, SWAP_SYS)
    assert ok
    k = sum(t.kind is SWAP for _, t in steps)
    assert k >= 1
    assert len(steps) == 2 * 4 + 2 * k


def test_nonprojective_example_arc_standard_fails():
    with pytest.raises(OracleError):
        list(oracle_sequence(tree_from_heads(NONPROJ), 4, ARC_STD))


def test_swap_oracle_equals_arc_standard_on_projective():
    rng = random.Random(3)
    for _ in range(200):
        heads = random_projective_heads(rng.randint(1, 15), rng)
        gold, n = tree_from_heads(heads), len(heads) - 1
        a = [t for _, t in oracle_sequence(gold, n, ARC_STD)]
        b = [t for _, t in oracle_sequence(gold, n, SWAP_SYS)]
        assert a == b


def test_oracle_round_trip_random_trees():
    rng = random.Random(4)
    for _ in range(300):
        heads = random_projective_heads(rng.randint(1, 15), rng)
        steps, ok = _replay(heads, ARC_STD)
        assert ok and len(steps) == 2 * (len(heads) - 1)
        heads = random_heads(rng.randint(1, 15), rng)
        steps, ok = _replay(heads, SWAP_SYS)
        n = len(heads) - 1
        k = sum(t.kind is SWAP for _, t in steps)
        assert ok and len(steps) == 2 * n + 2 * k
        assert k <= n * (n - 1) // 2


def test_random_valid_policy_terminates_with_tree():
    rng = random.Random(9)
    for system in (ARC_STD, SWAP_SYS):
        for _ in range(200):
            n = rng.randint(0, 12)
            c = initial_config(n)
            steps = swaps = 0
            while not is_terminal(c):
                kind = rng.choice(sorted(valid_transitions(c, system)))
                swaps += kind is SWAP
                c = apply(c, Transition(kind, "x" if kind in (LEFT_ARC, RIGHT_ARC) else None))
                assert 0 not in {d for _, _, d in c.arcs}
                assert c.stack[0] == 0 and not set(c.stack) & set(c.buffer)
                steps += 1
            assert swaps <= n * (n - 1) // 2
            assert steps == 2 * n + 2 * swaps <= max_transitions(n)
            c.tree().validate(n)


def test_format_trace():
    steps = list(oracle_sequence(tree_from_heads([-1, 2, 0]), 2, ARC_STD))
    lines = format_trace(steps).splitlines()
    assert lines[0] == "STEP 0 | 0 | 1 2 | SHIFT"
    assert lines[2] == "STEP 2 | 0 1 2 |  | LEFT_ARC(l1)"
