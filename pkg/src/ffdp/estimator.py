"""scikit-learn style estimator around the trainer and decoder."""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ffdp.conllu import Sentence
from ffdp.features import FeatureTemplate
from ffdp.metrics import score as attachment_score
from ffdp.network import DEFAULT_HIDDEN, REDUCTIONS
from ffdp.trainer import ParserModel, config_for, parse_all, train
from ffdp.transitions import TransitionSystem


def check_sentences(X, name="X") -> list:
    """Validate a treebank argument: a non-empty sequence of Sentence."""
    if isinstance(X, (str, bytes)) or not hasattr(X, "__len__"):
        raise TypeError(f"{name} must be a sequence of Sentence, got {type(X).__name__}")
    X = list(X)
    if not X:
        raise ValueError(f"{name} is empty")
    for i, s in enumerate(X):
        if not isinstance(s, Sentence):
            raise TypeError(f"{name}[{i}] is {type(s).__name__}, expected Sentence")
    return X


class FeedForwardParser(BaseEstimator):
    """Greedy transition-based dependency parser with a feed-forward oracle.

    Parameters
    ----------
    system : {"arc-standard", "swap"}
    template : {"standard", "no-gd", "no-gd-d"}
        Feature template; ``no-gd`` drops grand-daughter elements and
        ``no-gd-d`` drops all daughter elements.
    reduction : int
        Percent by which every embedding size is shrunk (0..50, step 10).
    hidden_size, batch_size, learning_rate, decay_rate, dropout, epochs
        Training hyperparameters; the learning rate at epoch ``e`` is
        ``learning_rate * exp(-decay_rate * e)``.
    random_state : int
        Seed for initialization, shuffling, dropout and UNK replacement.

    Attributes
    ----------
    model_ : ParserModel
    train_log_ : list of EpochLog
    """

    def __init__(self, system="arc-standard", template="standard", reduction=0,
                 hidden_size=DEFAULT_HIDDEN, batch_size=10, learning_rate=0.02, decay_rate=0.2,
                 dropout=0.5, epochs=10, random_state=0):
        self.system = system
        self.template = template
        self.reduction = reduction
        self.hidden_size = hidden_size
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.decay_rate = decay_rate
        self.dropout = dropout
        self.epochs = epochs
        self.random_state = random_state

    def _config(self):
        TransitionSystem.coerce(self.system)
        FeatureTemplate.coerce(self.template)
        if self.reduction not in REDUCTIONS:
            raise ValueError(f"reduction must be one of {REDUCTIONS}, got {self.reduction!r}")
        return config_for(self.system, self.template, self.reduction,
                          hidden_size=self.hidden_size, batch_size=self.batch_size,
                          base_lr=self.learning_rate, decay_rate=self.decay_rate,
                          dropout=self.dropout, epochs=self.epochs, seed=self.random_state)

    def fit(self, X, y=None):
        """Train on gold treebank ``X``; ``y`` is ignored (trees come with X)."""
        X = check_sentences(X)
        self.model_, self.train_log_ = train(X, self._config())
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit first")

    def predict(self, X) -> list:
        """Predicted DependencyTree for every sentence."""
        self._check_fitted()
        return parse_all(self.model_, check_sentences(X))

    def transform(self, X) -> list:
        """Sentences with HEAD/DEPREL replaced by the predicted trees."""
        X = check_sentences(X)
        return [s.with_tree(t) for s, t in zip(X, self.predict(X))]

    def score(self, X, y=None) -> float:
        """LAS (percent) of the predictions against the gold trees in ``X``."""
        X = check_sentences(X)
        return attachment_score(X, self.predict(X)).las

    @classmethod
    def from_model(cls, model: ParserModel) -> "FeedForwardParser":
        c = model.config
        est = cls(system=c.system.value, template=c.template.value,
                  reduction=c.sizes.reduction_percent, hidden_size=c.hidden_size,
                  batch_size=c.batch_size, learning_rate=c.base_lr, decay_rate=c.decay_rate,
                  dropout=c.dropout, epochs=c.epochs, random_state=c.seed)
        est.model_ = model
        est.train_log_ = []
        return est
