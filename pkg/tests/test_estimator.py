import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ffdp import FeedForwardParser
from ffdp.datasets import make_splits
from ffdp.estimator import check_sentences


@pytest.fixture(scope="module")
def splits():
    train, _, test = make_splits(60, 0, 15, random_state=51)
    return train, test


def test_get_params_and_clone():
    est = FeedForwardParser(template="no-gd", reduction=20, epochs=3)
    params = est.get_params()
    assert params["template"] == "no-gd" and params["reduction"] == 20 and params["hidden_size"] == 200
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(epochs=4)
    assert est.epochs == 4


def test_fit_predict_transform_score(splits):
    train, test = splits
    est = FeedForwardParser(epochs=1, random_state=2).fit(train)
    assert len(est.train_log_) == 1 and est.model_.params.input_dim == 1860
    trees = est.predict(test)
    assert len(trees) == len(test)
    for s, t in zip(test, trees):
        t.validate(len(s))
    out = est.transform(test)
    assert [tok.form for tok in out[0].tokens] == [tok.form for tok in test[0].tokens]
    assert out[0].gold_tree() == trees[0]
    assert 0 <= est.score(test) <= 100
    again = FeedForwardParser.from_model(est.model_)
    assert again.get_params() == est.get_params()
    assert again.predict(test[:3]) == trees[:3]


def test_unfitted_and_validation(splits):
    with pytest.raises(NotFittedError):
        FeedForwardParser().predict(splits[1])
    with pytest.raises(ValueError):
        FeedForwardParser(reduction=15).fit(splits[0])
    with pytest.raises(ValueError):
        FeedForwardParser(system="eager").fit(splits[0])
    with pytest.raises(TypeError):
        check_sentences("not a treebank")
    with pytest.raises(ValueError):
        check_sentences([])
    with pytest.raises(TypeError):
        check_sentences([1, 2])
