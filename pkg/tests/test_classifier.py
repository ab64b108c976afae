import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mixboost.classifier import (
    MLP,
    AdamState,
    KnnModel,
    MlpConfig,
    TrainingError,
    cross_entropy,
    gradient_check,
    knn_predict_proba,
    mlp_fit,
    softmax,
)
from mixboost.dataset import Dataset


def soft_batch(n=8, width=4, seed=0):
    rng = np.random.default_rng(seed)
    lam = rng.random(n)
    return Dataset(rng.random((n, width)), np.stack([lam, 1 - lam], axis=1), True)


def blobs(n=60, seed=0):
    rng = np.random.default_rng(seed)
    y = (np.arange(n) % 3 == 0).astype(int)
    x = rng.normal(size=(n, 2)) * 0.3 + y[:, None] * 2.0
    return Dataset.from_hard_labels(x, y)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (5, 2), elements=st.floats(-700, 700)))
def test_softmax_rows_are_distributions(z):
    p = softmax(z)
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, rtol=0, atol=1e-12)


def test_cross_entropy_uses_floor_and_mean():
    p = np.array([[1.0, 0.0], [0.5, 0.5]])
    y = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert cross_entropy(p, y) == pytest.approx((-np.log(1e-12) + np.log(2)) / 2)


def test_glorot_init_bounds_and_zero_bias():
    m = MLP((10, 30, 2), seed=4)
    assert np.abs(m.params[0]).max() <= np.sqrt(6 / 40)
    assert np.all(m.params[1] == 0) and np.all(m.params[3] == 0)
    assert [p.shape for p in m.params] == [(10, 30), (30,), (30, 2), (2,)]
    np.testing.assert_array_equal(MLP((10, 30, 2), seed=4).get_flat(), m.get_flat())


def test_predict_proba_single_row_and_width_check():
    m = MLP((3, 4, 2))
    assert m.predict_proba(np.zeros(3)).shape == (2,)
    with pytest.raises(ValueError, match="expected 3 features"):
        m.predict_proba(np.zeros((2, 4)))


@pytest.mark.parametrize("layers", [(4, 2), (4, 7, 2), (4, 5, 6, 2)])
def test_gradients_match_finite_differences(layers):
    for seed in range(3):
        assert gradient_check(MLP(layers, seed=seed), soft_batch(seed=seed), n_checks=None) < 1e-4


def test_gradient_check_detects_a_wrong_gradient(monkeypatch):
    m = MLP((4, 6, 2), seed=1)
    real = MLP.loss_and_grads

    def broken(self, x, y):
        loss, g = real(self, x, y)
        g[0] = g[0] * 1.1
        return loss, g

    monkeypatch.setattr(MLP, "loss_and_grads", broken)
    assert gradient_check(m, soft_batch(), n_checks=None, param_index=0) > 1e-2


def test_adam_first_step_moves_by_learning_rate():
    p = [np.array([1.0, -2.0])]
    AdamState.for_params(p).update(p, [np.array([0.3, -5.0])], lr=0.1)
    np.testing.assert_allclose(p[0], [0.9, -1.9], atol=1e-6)


def test_fit_reduces_loss_and_separates_blobs():
    data = blobs()
    cfg = MlpConfig(hidden_layers=(16,), learning_rate=1e-2, batch_size=16, epochs=60, seed=0)
    m = mlp_fit(cfg, data)
    assert len(m.loss_history) == 60
    assert m.loss_history[-1] < 0.5 * m.loss_history[0]
    pred = (m.predict_proba(data.features)[:, 1] > 0.5).astype(int)
    assert np.mean(pred == data.hard_labels) > 0.95


def test_fit_is_deterministic_and_seed_sensitive():
    data = blobs()
    cfg = MlpConfig(hidden_layers=(8,), learning_rate=1e-2, batch_size=7, epochs=5, seed=3)
    a, b = mlp_fit(cfg, data), mlp_fit(cfg, data)
    np.testing.assert_array_equal(a.get_flat(), b.get_flat())
    c = mlp_fit(MlpConfig(hidden_layers=(8,), learning_rate=1e-2, batch_size=7, epochs=5, seed=4), data)
    assert not np.array_equal(a.get_flat(), c.get_flat())


def test_soft_labels_pull_predictions_towards_target():
    x = np.zeros((10, 2))
    data = Dataset(x, np.tile([0.3, 0.7], (10, 1)), True)
    m = mlp_fit(MlpConfig(hidden_layers=(4,), learning_rate=5e-2, batch_size=10, epochs=300), data)
    np.testing.assert_allclose(m.predict_proba(np.zeros(2)), [0.3, 0.7], atol=0.02)


def test_warm_start_copies_and_does_not_mutate_init():
    data = blobs()
    cfg = MlpConfig(hidden_layers=(8,), learning_rate=1e-2, batch_size=16, epochs=3)
    base = mlp_fit(cfg, data)
    snapshot = base.get_flat().copy()
    tuned = mlp_fit(cfg, data, init=base)
    np.testing.assert_array_equal(base.get_flat(), snapshot)
    assert tuned.loss_history[0] < base.loss_history[0]
    with pytest.raises(ValueError, match="expects 2 features"):
        mlp_fit(cfg, Dataset.from_hard_labels(np.zeros((2, 3)), [0, 1]), init=base)


def test_non_finite_loss_reports_epoch_and_batch(monkeypatch):
    real = MLP.loss_and_grads
    calls = []

    def poisoned(self, x, y):
        calls.append(1)
        loss, g = real(self, x, y)
        return (float("nan") if len(calls) == 5 else loss), g

    monkeypatch.setattr(MLP, "loss_and_grads", poisoned)
    data = blobs(n=40)
    with pytest.raises(TrainingError, match=r"epoch 1, batch 1"):
        mlp_fit(MlpConfig(hidden_layers=(4,), batch_size=15, epochs=3), data)


@pytest.mark.parametrize("kw", [dict(learning_rate=0), dict(epochs=0), dict(batch_size=0), dict(hidden_layers=(0,))])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        MlpConfig(**kw)


class TestKnn:
    def test_k1_recovers_training_labels(self):
        data = blobs()
        probs = knn_predict_proba(data, 1, data.features)
        np.testing.assert_array_equal(probs, data.labels)

    def test_vote_fractions_and_tie_order(self):
        data = Dataset.from_hard_labels(np.array([[0.0], [2.0], [-2.0], [5.0]]), [1, 0, 1, 0])
        # rows 1 and 2 are equidistant from the query; the lower index wins
        np.testing.assert_allclose(knn_predict_proba(data, 2, np.array([0.0])), [0.5, 0.5])
        np.testing.assert_allclose(knn_predict_proba(data, 3, np.array([[0.0]])), [[1 / 3, 2 / 3]])

    def test_model_clamps_k_and_rejects_soft_labels(self):
        data = Dataset.from_hard_labels(np.array([[0.0], [1.0]]), [0, 1])
        assert KnnModel(data, k=5).predict_proba(np.array([[0.0]])).shape == (1, 2)
        soft = data.append(np.zeros((1, 1)), np.array([[0.5, 0.5]]))
        with pytest.raises(ValueError, match="one-hot"):
            knn_predict_proba(soft, 1, np.zeros((1, 1)))
