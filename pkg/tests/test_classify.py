import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pfm.classify import (OvaModel, Prediction, decision_values, hinge_objective, majority_vote,
                          predict, train_binary, train_ova)


def subgradient_oracle(X, y, C, iters=200_000):
    """Plain subgradient descent on the primal, best iterate kept."""
    n, d = X.shape
    w, b = np.zeros(d), 0.0
    best = hinge_objective(w, b, X, y, C)
    for t in range(1, iters + 1):
        viol = y * (X @ w + b) < 1
        gw = w - C * (y[viol, None] * X[viol]).sum(axis=0)
        gb = -C * y[viol].sum()
        step = 0.5 / np.sqrt(t)
        w, b = w - step * gw, b - step * gb
        best = min(best, hinge_objective(w, b, X, y, C))
    return best


def test_separable_pair():
    m = train_ova([(np.array([1.0, 0.0]), "A"), (np.array([-1.0, 0.0]), "B")], C=10)
    for x, lbl in (([1.0, 0.0], "A"), ([-1.0, 0.0], "B")):
        p = predict(m, np.array(x))
        assert p.label == lbl
        assert p.score_of(lbl) >= 1 - 1e-3


def test_separable_three_classes():
    rng = np.random.default_rng(0)
    centers = {"a": (5, 0, 0), "b": (0, 5, 0), "c": (0, 0, 5)}
    feats = [(np.array(c) + rng.normal(0, 0.5, 3), k) for k, c in centers.items() for _ in range(15)]
    m = train_ova(feats, C=1.0)
    assert all(predict(m, x).label == k for x, k in feats)
    assert m.labels == ("a", "b", "c")


@pytest.mark.parametrize("seed", range(3))
def test_objective_matches_slow_solver(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(20, 5))
    y = np.where(X[:, 0] + 0.8 * rng.normal(size=20) > 0, 1.0, -1.0)
    w, b = train_binary(X, y, C=1.0)
    ours = hinge_objective(w, b, X, y, 1.0)
    ref = subgradient_oracle(X, y, 1.0)
    assert ours <= ref + 1e-3
    assert abs(ours - ref) < 1e-3


def test_training_deterministic():
    rng = np.random.default_rng(4)
    feats = [(rng.normal(size=6), str(i % 3)) for i in range(30)]
    a, b = train_ova(feats, seed=1), train_ova(feats, seed=1)
    np.testing.assert_array_equal(a.weight_vectors, b.weight_vectors)
    np.testing.assert_array_equal(a.biases, b.biases)


def test_train_errors():
    with pytest.raises(ValueError, match="two classes"):
        train_ova([(np.zeros(2), "A"), (np.ones(2), "A")])
    with pytest.raises(ValueError):
        train_ova([(np.zeros(2), "A"), (np.ones(3), "B")])


def hand_model():
    return OvaModel(("1", "2"), np.array([[1.0, 0, 0], [-1.0, 0, 0]]), np.zeros(2))


def test_predict_hand_computed():
    p = predict(hand_model(), np.array([3.0, 0, 0]))
    assert p.label == "1" and p.scores == (3.0, -3.0)


def test_predict_tie_goes_to_smallest_label():
    m = OvaModel(("a", "b"), np.zeros((2, 2)), np.zeros(2))
    assert predict(m, np.ones(2)).label == "a"


def test_predict_training_sample():
    rng = np.random.default_rng(7)
    feats = [(np.eye(4)[i % 4] * 3 + rng.normal(0, 0.1, 4), f"s{i % 4}") for i in range(16)]
    m = train_ova(feats)
    x, lbl = feats[5]
    assert predict(m, x).label == lbl


def test_scores_match_inner_products():
    rng = np.random.default_rng(8)
    W, bias = rng.normal(size=(4, 7)), rng.normal(size=4)
    m = OvaModel(("a", "b", "c", "d"), W, bias)
    x = rng.normal(size=7)
    expected = [sum(W[p, i] * x[i] for i in range(7)) + bias[p] for p in range(4)]
    p = predict(m, x)
    np.testing.assert_allclose(p.scores, expected, rtol=1e-12)
    assert p.label == m.labels[int(np.argmax(expected))]
    with pytest.raises(ValueError, match="dim"):
        decision_values(m, np.zeros(3))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 100), st.integers(0, 1000))
def test_positive_scaling_zero_bias(c, seed):
    rng = np.random.default_rng(seed)
    m = OvaModel(("a", "b", "c"), rng.normal(size=(3, 5)), np.zeros(3))
    x = rng.normal(size=5)
    p, q = predict(m, x), predict(m, c * x)
    np.testing.assert_allclose(q.scores, c * np.array(p.scores), rtol=1e-12, atol=1e-300)
    assert p.label == q.label


def pred(label, score, labels=("A", "B", "C")):
    scores = [0.0] * len(labels)
    scores[labels.index(label)] = score
    return Prediction(label, tuple(scores), labels)


def test_vote_majority():
    assert majority_vote([pred("A", 1), pred("A", 1), pred("B", 5), pred("A", 1)]) == "A"


def test_vote_tie_by_score_sum():
    assert majority_vote([pred("A", 1.7), pred("B", 0.4)]) == "A"
    assert majority_vote([pred("A", 0.2), pred("B", 0.4)]) == "B"
    assert majority_vote([pred("B", 0.5), pred("A", 0.5)]) == "A"
    with pytest.raises(ValueError):
        majority_vote([])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("ABC"), st.floats(-5, 5)), min_size=1, max_size=8),
       st.randoms(use_true_random=False))
def test_vote_permutation_and_duplication(items, rnd):
    preds = [pred(l, s) for l, s in items]
    shuffled = preds[:]
    rnd.shuffle(shuffled)
    v = majority_vote(preds)
    assert majority_vote(shuffled) == v
    assert majority_vote(preds + preds) == v
