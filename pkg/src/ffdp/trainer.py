"""Oracle training data, the SGD training schedule and greedy decoding."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from ffdp.conllu import DependencyTree, Sentence, is_projective
from ffdp.features import (
    UNK_ID,
    FeatureBatch,
    FeatureTemplate,
    Featurizer,
    SentenceIds,
    Vocabulary,
    input_dim,
    stack_features,
)
from ffdp.network import (
    DEFAULT_HIDDEN,
    ModelParams,
    SizeConfig,
    backward,
    cross_entropy,
    forward,
    Scorer,
    reduced_sizes,
    sgd_step,
)
from ffdp.serialization import load_model, save_model
from ffdp.transitions import (
    LEFT_ARC,
    RIGHT_ARC,
    SHIFT,
    SWAP,
    Kind,
    OracleError,
    Transition,
    TransitionSystem,
    apply,
    initial_config,
    is_terminal,
    max_transitions,
    oracle_sequence,
    valid_transitions,
)

logger = logging.getLogger(__name__)

ORACLE_VARIANT = "static-eager-swap"


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    system: TransitionSystem = TransitionSystem.ARC_STANDARD
    template: FeatureTemplate = FeatureTemplate.STANDARD
    sizes: SizeConfig = SizeConfig()
    hidden_size: int = DEFAULT_HIDDEN
    batch_size: int = 10
    base_lr: float = 0.02
    decay_rate: float = 0.2
    dropout: float = 0.5
    epochs: int = 10
    seed: int = 0
    unk_replace: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "system", TransitionSystem.coerce(self.system))
        object.__setattr__(self, "template", FeatureTemplate.coerce(self.template))
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if self.base_lr <= 0:
            raise ValueError("base_lr must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["system"] = self.system.value
        d["template"] = self.template.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["sizes"] = SizeConfig(**d["sizes"])
        return cls(**d)


class TransitionInventory:
    """Output-layer indexing: SHIFT, [SWAP], LEFT_ARC(l)..., RIGHT_ARC(l)..."""

    def __init__(self, system: TransitionSystem, deprels: Sequence[str]):
        self.system = TransitionSystem.coerce(system)
        self.deprels = list(deprels)
        items = [Transition(SHIFT)]
        if self.system is TransitionSystem.ARC_STANDARD_SWAP:
            items.append(Transition(SWAP))
        items += [Transition(LEFT_ARC, l) for l in self.deprels]
        items += [Transition(RIGHT_ARC, l) for l in self.deprels]
        self.transitions = items
        self._index = {t: i for i, t in enumerate(items)}
        self.kind_masks = {k: np.array([t.kind is k for t in items]) for k in Kind}
        self._valid_cache: dict = {}

    def __len__(self):
        return len(self.transitions)

    def index(self, t: Transition) -> int:
        try:
            return self._index[t]
        except KeyError:
            raise OracleError(f"transition {t} is not in the inventory") from None

    def valid_mask(self, kinds) -> np.ndarray:
        key = frozenset(kinds)
        mask = self._valid_cache.get(key)
        if mask is None:
            mask = np.zeros(len(self.transitions), dtype=bool)
            for k in key:
                mask |= self.kind_masks[k]
            self._valid_cache[key] = mask
        return mask


@dataclass(frozen=True)
class TrainingInstance:
    features: object
    gold: int


@dataclass(frozen=True)
class SkipRecord:
    sentence_index: int
    reason: str


@dataclass
class InstanceSet:
    features: FeatureBatch
    gold: np.ndarray
    skipped: list = field(default_factory=list)
    n_sentences: int = 0

    def __len__(self):
        return len(self.gold)

    def __iter__(self) -> Iterator[TrainingInstance]:
        for i in range(len(self.gold)):
            yield TrainingInstance(self.features.take(i), int(self.gold[i]))


def generate_instances(treebank: Sequence[Sentence], system, template, vocab: Vocabulary,
                       inventory: Optional[TransitionInventory] = None) -> InstanceSet:
    """Featurize every pre-transition configuration of each oracle derivation.

    Non-projective sentences are skipped under arc-standard; oracle failures
    are skipped under either system. Every skip is recorded.
    """
    system = TransitionSystem.coerce(system)
    inventory = inventory or TransitionInventory(system, vocab.deprels)
    featurize = Featurizer(template, vocab)
    vectors, gold, skipped = [], [], []
    used = 0
    for si, sentence in enumerate(treebank):
        n = len(sentence)
        tree = sentence.gold_tree()
        if system is TransitionSystem.ARC_STANDARD and not is_projective(tree, n):
            skipped.append(SkipRecord(si, "non-projective"))
            continue
        ids = SentenceIds(sentence, vocab)
        try:
            steps = [(featurize(c, ids), inventory.index(t)) for c, t in oracle_sequence(tree, n, system)]
        except OracleError as exc:
            skipped.append(SkipRecord(si, f"oracle failure: {exc}"))
            continue
        used += 1
        for fv, g in steps:
            vectors.append(fv)
            gold.append(g)
    for rec in skipped:
        logger.info("skipped sentence %d: %s", rec.sentence_index, rec.reason)
    return InstanceSet(stack_features(vectors, template), np.array(gold, dtype=np.int64), skipped, used)


def learning_rate(config: TrainConfig, epoch: int) -> float:
    """Exponentially decayed rate; epoch 0 uses ``base_lr``."""
    return config.base_lr * math.exp(-config.decay_rate * epoch)


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    lr: float
    mean_loss: float
    train_acc: float

    def line(self) -> str:
        return f"{self.epoch}\t{self.lr:.8g}\t{self.mean_loss:.6f}\t{self.train_acc:.6f}"


@dataclass
class ParserModel:
    """Trained oracle plus everything needed to decode with it."""

    params: ModelParams
    vocab: Vocabulary
    config: TrainConfig
    inventory: TransitionInventory = None
    meta: dict = None

    def __post_init__(self):
        if self.inventory is None:
            self.inventory = TransitionInventory(self.config.system, self.vocab.deprels)
        if self.meta is None:
            self.meta = self.header()

    @property
    def system(self) -> TransitionSystem:
        return self.config.system

    @property
    def template(self) -> FeatureTemplate:
        return self.config.template

    def header(self) -> dict:
        return {
            "format": "ffdp-model",
            "system": self.config.system.value,
            "template": self.config.template.value,
            "sizes": asdict(self.config.sizes),
            "hidden_size": self.params.hidden_size,
            "input_dim": self.params.input_dim,
            "vocab_hash": self.vocab.hash(),
            "deprels": self.inventory.deprels,
            "oracle": ORACLE_VARIANT,
            "train_config": self.config.to_dict(),
        }

    def save(self, model_path, vocab_path=None) -> None:
        save_model(model_path, self.params, self.meta)
        if vocab_path is not None:
            self.vocab.save(vocab_path)

    @classmethod
    def load(cls, model_path, vocab_path) -> "ParserModel":
        params, meta = load_model(model_path)
        vocab = Vocabulary.load(vocab_path)
        if vocab.hash() != meta["vocab_hash"]:
            raise CompatibilityError(
                f"vocabulary {vocab_path} (hash {vocab.hash()}) does not match model "
                f"{model_path} (hash {meta['vocab_hash']})")
        config = TrainConfig.from_dict(meta["train_config"])
        return cls(params, vocab, config, TransitionInventory(config.system, meta["deprels"]), meta)


class CompatibilityError(ValueError):
    pass


def _unk_table(vocab: Vocabulary) -> np.ndarray:
    mask = np.zeros(vocab.size("FORM"), dtype=bool)
    mask[vocab.singleton_form_ids()] = True
    return mask


def train(treebank: Sequence[Sentence], config: TrainConfig = TrainConfig(),
          log_callback=None) -> tuple[ParserModel, list]:
    """Train an oracle; returns the model and the per-epoch log.

    Deterministic for a given ``config.seed``.
    """
    vocab = Vocabulary.build(treebank)
    inventory = TransitionInventory(config.system, vocab.deprels)
    data = generate_instances(treebank, config.system, config.template, vocab, inventory)
    if data.n_sentences == 0 or len(data) == 0:
        raise DataError("no usable training sentences")
    rng = np.random.default_rng(config.seed)
    params = ModelParams.initialize(vocab.sizes, config.template, config.sizes, len(inventory),
                                    config.hidden_size, rng)
    assert params.input_dim == input_dim(config.template, config.sizes)
    singleton = _unk_table(vocab)
    use_unk = config.unk_replace > 0 and singleton.any()
    n = len(data)
    log = []
    with threadpool_limits(limits=1):
        for epoch in range(config.epochs):
            lr = learning_rate(config, epoch)
            order = rng.permutation(n)
            total_loss = 0.0
            correct = 0
            for start in range(0, n, config.batch_size):
                idx = order[start:start + config.batch_size]
                batch = data.features.take(idx)
                if use_unk:
                    form = batch.form
                    drop = singleton[form] & (rng.random(form.shape) < config.unk_replace)
                    if drop.any():
                        form = form.copy()
                        form[drop] = UNK_ID
                        batch = FeatureBatch(form, batch.upos, batch.feats, batch.deprel)
                gold = data.gold[idx]
                trace = forward(params, batch, config.dropout, rng)
                total_loss += cross_entropy(trace.probs, gold) * len(idx)
                correct += int((trace.probs.argmax(axis=1) == gold).sum())
                sgd_step(params, backward(params, trace, gold), lr)
            entry = EpochLog(epoch, lr, total_loss / n, correct / n)
            log.append(entry)
            logger.info("epoch %d lr %.6f loss %.4f acc %.4f", epoch, lr, entry.mean_loss, entry.train_acc)
            if log_callback is not None:
                log_callback(entry)
    model = ParserModel(params, vocab, config, inventory)
    model.meta["skipped"] = len(data.skipped)
    model.meta["instances"] = n
    return model, log


class Decoder:
    """Greedy masked decoding with a frozen model."""

    def __init__(self, model: ParserModel):
        self.model = model
        self.featurize = Featurizer(model.template, model.vocab)
        self.score = Scorer(model.params)
        self.transitions = model.inventory.transitions
        self.system = model.system

    def parse(self, sentence: Sentence) -> DependencyTree:
        n = len(sentence)
        ids = SentenceIds(sentence, self.model.vocab)
        config = initial_config(n)
        score = self.score
        inventory = self.model.inventory
        limit = max_transitions(n)
        steps = 0
        while not is_terminal(config):
            fv = self.featurize(config, ids)
            scores = score(fv)
            mask = inventory.valid_mask(valid_transitions(config, self.system))
            best = int(np.argmax(np.where(mask, scores, -np.inf)))
            config = apply(config, self.transitions[best])
            steps += 1
            if steps > limit:
                raise RuntimeError("decoder exceeded the transition bound")
        return config.tree()


def parse(model: ParserModel, sentence: Sentence, vocab: Optional[Vocabulary] = None) -> DependencyTree:
    """Greedy parse of one sentence (``vocab`` defaults to the model's)."""
    if vocab is not None and vocab is not model.vocab and vocab.hash() != model.vocab.hash():
        raise CompatibilityError("vocabulary does not match the model")
    return Decoder(model).parse(sentence)


def parse_all(model: ParserModel, sentences: Sequence[Sentence]) -> list[DependencyTree]:
    decoder = Decoder(model)
    with threadpool_limits(limits=1):
        return [decoder.parse(s) for s in sentences]


def config_for(system="arc-standard", template="standard", reduction: int = 0, **overrides) -> TrainConfig:
    """TrainConfig with embedding sizes reduced by ``reduction`` percent."""
    return TrainConfig(system=system, template=template,
                       sizes=reduced_sizes(SizeConfig(), reduction), **overrides)
