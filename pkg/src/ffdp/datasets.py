"""Seeded generator of UD-style treebanks for tests and desk-scale runs.

Sentences come from a small dependency grammar (subjects with agreement,
auxiliaries, objects, noun- and verb-attached prepositional phrases,
relative and complement clauses, coordination, punctuation) over a
pseudo-word lexicon with Zipfian word frequencies. A configurable share of
sentences gets a subject modifier extraposed past the verb, which yields
non-projective trees.
"""

from __future__ import annotations

import random
from typing import Optional

from ffdp.conllu import DUMMY, Sentence, Token, is_projective

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
           "br", "dr", "gl", "kr", "pl", "st", "tr", "sk", "sp", "ch", "sh", "th"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou", "ea"]
_CODAS = ["", "", "n", "m", "r", "l", "st", "nd", "k", "t"]

_PRON_NOM = {"Sing": ("he", "Case=Nom|Gender=Masc|Number=Sing|Person=3|PronType=Prs"),
             "Plur": ("they", "Case=Nom|Number=Plur|Person=3|PronType=Prs")}
_PRON_ACC = {"Sing": ("him", "Case=Acc|Gender=Masc|Number=Sing|Person=3|PronType=Prs"),
             "Plur": ("them", "Case=Acc|Number=Plur|Person=3|PronType=Prs")}
_DETS = {"Sing": [("the", "Definite=Def|PronType=Art"), ("a", "Definite=Ind|PronType=Art"),
                  ("this", "Number=Sing|PronType=Dem")],
         "Plur": [("the", "Definite=Def|PronType=Art"), ("these", "Number=Plur|PronType=Dem"),
                  ("some", "PronType=Ind")]}
_ADP_NOUN = ["of", "from"]
_ADP_VERB = ["in", "on", "at", "after", "during", "near"]
_AUX = [("will", "VerbForm=Fin"), ("can", "VerbForm=Fin"), ("must", "VerbForm=Fin")]
_NUMS = ["two", "three", "five", "ten"]


class _Lexicon:
    def __init__(self, rng: random.Random, n_nouns=400, n_verbs=160, n_adjs=120, n_advs=40, n_propn=60):
        seen: set = set()

        def words(k, syllables):
            out = []
            while len(out) < k:
                w = "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(rng.choice(syllables)))
                w += rng.choice(_CODAS)
                if w not in seen and len(w) > 2:
                    seen.add(w)
                    out.append(w)
            return out

        self.nouns = words(n_nouns, (1, 2, 2, 3))
        self.verbs = words(n_verbs, (1, 2))
        self.adjs = words(n_adjs, (2, 3))
        self.advs = [w + "ly" for w in words(n_advs, (1, 2))]
        self.propns = [w.capitalize() for w in words(n_propn, (2, 3))]
        # verb frames: 0 intransitive, 1 transitive, 2 clausal complement
        self.frames = {v: rng.choice((0, 1, 1, 1, 2)) for v in self.verbs}


def _zipf(rng: random.Random, items: list):
    # P(rank r) proportional to 1/r
    weights = getattr(_zipf, "_cache", {}).get(len(items))
    if weights is None:
        weights = [1.0 / r for r in range(1, len(items) + 1)]
        _zipf.__dict__.setdefault("_cache", {})[len(items)] = weights
    return rng.choices(items, weights=weights)[0]


class _Node:
    __slots__ = ("form", "lemma", "upos", "feats", "deprel", "left", "right")

    def __init__(self, form, lemma, upos, feats, deprel=None):
        self.form, self.lemma, self.upos, self.feats, self.deprel = form, lemma, upos, feats, deprel
        self.left: list = []
        self.right: list = []

    def add_left(self, deprel, node):
        node.deprel = deprel
        self.left.append(node)
        return node

    def add_right(self, deprel, node):
        node.deprel = deprel
        self.right.append(node)
        return node


class _Grammar:
    def __init__(self, lexicon: _Lexicon, rng: random.Random, max_depth=2):
        self.lex = lexicon
        self.rng = rng
        self.max_depth = max_depth

    def chance(self, p):
        return self.rng.random() < p

    def noun_phrase(self, number, case, depth):
        rng, lex = self.rng, self.lex
        if self.chance(0.08):
            form, feats = (_PRON_NOM if case == "Nom" else _PRON_ACC)[number]
            return _Node(form, "he" if number == "Sing" else "they", "PRON", feats)
        if number == "Sing" and self.chance(0.1):
            name = _zipf(rng, lex.propns)
            return _Node(name, name, "PROPN", "Number=Sing")
        lemma = _zipf(rng, lex.nouns)
        head = _Node(lemma + ("s" if number == "Plur" else ""), lemma, "NOUN", f"Number={number}")
        mods = []
        if number == "Plur" and self.chance(0.15):
            mods.append(("nummod", _Node(rng.choice(_NUMS), "num", "NUM", "NumType=Card")))
        for _ in range(rng.choice((0, 0, 0, 1, 1, 2))):
            adj = _zipf(rng, lex.adjs)
            mods.append(("amod", _Node(adj, adj, "ADJ", "Degree=Pos")))
        if self.chance(0.85):
            form, feats = rng.choice(_DETS[number])
            head.add_left("det", _Node(form, form, "DET", feats))
        for deprel, node in mods:
            head.add_left(deprel, node)
        if depth < self.max_depth and self.chance(0.25):
            head.add_right("nmod", self.prep_phrase(_ADP_NOUN, depth + 1))
        if depth < self.max_depth and self.chance(0.08):
            head.add_right("acl:relcl", self.relative_clause(number, depth + 1))
        if depth < self.max_depth and self.chance(0.06):
            conj = head.add_right("conj", self.noun_phrase(rng.choice(("Sing", "Plur")), case, depth + 1))
            conj.left.insert(0, _Node("and", "and", "CCONJ", DUMMY, "cc"))
        return head

    def prep_phrase(self, adps, depth):
        np_ = self.noun_phrase(self.rng.choice(("Sing", "Sing", "Plur")), "Acc", depth)
        adp = self.rng.choice(adps)
        np_.left.insert(0, _Node(adp, adp, "ADP", DUMMY, "case"))
        return np_

    def verb(self, number, finite=True):
        lemma = _zipf(self.rng, self.lex.verbs)
        if not finite:
            return _Node(lemma, lemma, "VERB", "VerbForm=Inf"), lemma
        tense = self.rng.choice(("Past", "Pres"))
        if tense == "Past":
            return _Node(lemma + "ed", lemma, "VERB", "Mood=Ind|Tense=Past|VerbForm=Fin"), lemma
        form = lemma + "s" if number == "Sing" else lemma
        return _Node(form, lemma, "VERB", f"Mood=Ind|Number={number}|Person=3|Tense=Pres|VerbForm=Fin"), lemma

    def relative_clause(self, number, depth):
        v, lemma = self.verb(number)
        v.add_left("nsubj", _Node("who", "who", "PRON", "PronType=Rel"))
        if self.lex.frames[lemma] == 1:
            v.add_right("obj", self.noun_phrase(self.rng.choice(("Sing", "Plur")), "Acc", depth + 1))
        return v

    def clause(self, depth):
        rng = self.rng
        number = rng.choice(("Sing", "Plur"))
        aux = self.chance(0.2)
        v, lemma = self.verb(number, finite=not aux)
        v.add_left("nsubj", self.noun_phrase(number, "Nom", depth))
        if aux:
            form, feats = rng.choice(_AUX)
            v.add_left("aux", _Node(form, form, "AUX", feats))
        if self.chance(0.12):
            adv = _zipf(rng, self.lex.advs)
            v.add_left("advmod", _Node(adv, adv, "ADV", DUMMY))
        frame = self.lex.frames[lemma]
        if frame == 1:
            v.add_right("obj", self.noun_phrase(rng.choice(("Sing", "Plur")), "Acc", depth))
        for _ in range(rng.choice((0, 0, 1, 1, 2))):
            v.add_right("obl", self.prep_phrase(_ADP_VERB, depth + 1))
        if self.chance(0.15):
            adv = _zipf(rng, self.lex.advs)
            v.add_right("advmod", _Node(adv, adv, "ADV", DUMMY))
        if frame == 2 and depth < self.max_depth:
            comp = v.add_right("ccomp", self.clause(depth + 1))
            comp.left.insert(0, _Node("that", "that", "SCONJ", DUMMY, "mark"))
        elif depth < self.max_depth and self.chance(0.12):
            sub = v.add_right("advcl", self.clause(depth + 1))
            sub.left.insert(0, _Node("because", "because", "SCONJ", DUMMY, "mark"))
            sub.left.insert(0, _Node(",", ",", "PUNCT", DUMMY, "punct"))
        return v


def _to_tokens(root: _Node) -> list:
    # flatten: every entry keeps a reference to its parent entry
    order: list = []

    def visit(node, parent):
        entry = {"node": node, "parent": parent}
        for child in node.left:
            visit(child, entry)
        order.append(entry)
        for child in node.right:
            visit(child, entry)

    visit(root, None)
    return order


def _extrapose(order: list, rng: random.Random) -> bool:
    """Move a post-nominal modifier of the root's subject after the verb's complements."""
    root = next(e for e in order if e["parent"] is None)
    subj = next((e for e in order if e["parent"] is root and e["node"].deprel == "nsubj"), None)
    if subj is None:
        return False
    mods = [e for e in order if e["parent"] is subj and e["node"].deprel in ("nmod", "acl:relcl")]
    if not mods:
        return False
    mod = rng.choice(mods)
    members = [e for e in order if _dominated(e, mod)]
    rest = [e for e in order if not _dominated(e, mod)]
    # insert before the final punctuation
    cut = len(rest) - 1 if rest[-1]["node"].upos == "PUNCT" else len(rest)
    root_pos = rest.index(root)
    if cut <= root_pos + 1:
        return False
    order[:] = rest[:cut] + members + rest[cut:]
    return True


def _dominated(entry, top) -> bool:
    while entry is not None:
        if entry is top:
            return True
        entry = entry["parent"]
    return False


def _sentence(order: list, sid: str) -> Sentence:
    pos = {id(e): i for i, e in enumerate(order, 1)}
    tokens = []
    for i, e in enumerate(order, 1):
        n = e["node"]
        head = 0 if e["parent"] is None else pos[id(e["parent"])]
        tokens.append(Token(i, n.form, n.lemma, n.upos, "_", n.feats, head,
                            "root" if e["parent"] is None else n.deprel))
    text = " ".join(t.form for t in tokens)
    return Sentence(tokens, (f"# sent_id = {sid}", f"# text = {text}"))


def make_treebank(n_sentences: int, *, nonprojective_rate: float = 0.25, max_depth: int = 2,
                  max_length: Optional[int] = 40, random_state: int = 0, lexicon_seed: int = 0,
                  prefix: str = "s") -> list[Sentence]:
    """Generate ``n_sentences`` UD-style sentences.

    The lexicon depends only on ``lexicon_seed`` so that independently drawn
    splits share vocabulary; sentences depend on ``random_state``.
    """
    lex = _Lexicon(random.Random(lexicon_seed))
    rng = random.Random(random_state * 7919 + 17)
    grammar = _Grammar(lex, rng, max_depth)
    out = []
    while len(out) < n_sentences:
        root = grammar.clause(0)
        root.add_right("punct", _Node(".", ".", "PUNCT", DUMMY))
        order = _to_tokens(root)
        if max_length and len(order) > max_length:
            continue
        if rng.random() < nonprojective_rate:
            _extrapose(order, rng)
        out.append(_sentence(order, f"{prefix}{len(out) + 1}"))
    return out


def make_splits(n_train: int, n_dev: int = 0, n_test: int = 0, *, random_state: int = 0,
                **kwargs) -> tuple[list, list, list]:
    """Train/dev/test treebanks over one shared lexicon."""
    train = make_treebank(n_train, random_state=random_state, prefix="train-", **kwargs)
    dev = make_treebank(n_dev, random_state=random_state + 1000, prefix="dev-", **kwargs)
    test = make_treebank(n_test, random_state=random_state + 2000, prefix="test-", **kwargs)
    return train, dev, test


def projective_only(sentences) -> list[Sentence]:
    return [s for s in sentences if is_projective(s.gold_tree(), len(s))]
