import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exagree.models import (
    LinearModel,
    Mask,
    MaskedModel,
    ModelError,
    init_mlp,
    load_model,
    log_loss,
    predict_proba,
    save_model,
    sigmoid,
    train_logistic,
    train_mlp,
    validation_loss,
)


def _central_fd(f, x, eps=1e-6):
    g = np.zeros_like(x)
    for i in range(len(x)):
        xp, xm = x.copy(), x.copy()
        xp[i] += eps
        xm[i] -= eps
        g[i] = (f(xp) - f(xm)) / (2 * eps)
    return g


def test_sigmoid_stable_extremes():
    z = np.array([-1e4, -50.0, 0.0, 50.0, 1e4])
    s = sigmoid(z)
    assert np.all(np.isfinite(s))
    assert s[0] == 0.0 or s[0] < 1e-300
    assert s[-1] == 1.0 or s[-1] > 1 - 1e-16
    assert s[2] == 0.5


def test_linear_logit_and_gradient():
    model = LinearModel(weights=np.array([1.0, -2.0, 0.5]), bias=0.3)
    X = np.random.default_rng(0).standard_normal((7, 3))
    assert np.allclose(model.logit(X), X @ model.weights + model.bias)
    grad = model.logit_gradient(X)
    assert grad.shape == (7, 3)
    assert np.allclose(grad, np.tile(model.weights, (7, 1)))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 500))
def test_mlp_gradient_matches_fd(seed):
    rng = np.random.default_rng(seed)
    model = init_mlp([3, 8, 1], seed=seed)
    x = rng.standard_normal(3)
    analytic = model.logit_gradient(x[None, :])[0]
    fd = _central_fd(lambda v: model.logit(v[None, :])[0], x)
    assert np.max(np.abs(analytic - fd)) < 1e-6


def test_masked_identity_equals_base(small_task, small_lr):
    ds, sp = small_task
    masked = MaskedModel(base=small_lr, mask=Mask(values=np.ones(ds.p)))
    X = ds.features[:20]
    assert np.allclose(masked.logit(X), small_lr.logit(X))
    assert np.allclose(masked.logit_gradient(X), small_lr.logit_gradient(X))


def test_masked_gradient_chain(small_lr):
    mask = Mask(values=np.array([0.5, 1.5, 1.0, 0.2, 2.0]))
    masked = MaskedModel(base=small_lr, mask=mask)
    x = np.random.default_rng(1).standard_normal(5)
    fd = _central_fd(lambda v: masked.logit(v[None, :])[0], x)
    assert np.allclose(masked.logit_gradient(x[None, :])[0], fd, atol=1e-6)


def test_mask_validation():
    with pytest.raises(ModelError):
        Mask(values=np.array([-0.1, 1.0]))
    with pytest.raises(ModelError):
        Mask(values=np.array([2.5, 1.0]))
    m = Mask(values=np.array([0.0, 2.0]))
    assert m.state == "active"


def test_log_loss_matches_manual():
    probs = np.array([0.9, 0.2, 0.5])
    y = np.array([1, 0, 1])
    manual = -np.mean(np.log([0.9, 0.8, 0.5]))
    assert np.isclose(log_loss(probs, y), manual)
    # Clipping keeps hard 0/1 probabilities finite.
    assert np.isfinite(log_loss(np.array([0.0, 1.0]), np.array([1, 0])))


def test_train_logistic_learns(small_task):
    ds, sp = small_task
    model = train_logistic(ds, sp, lr=0.5, epochs=400, seed=0)
    loss = validation_loss(model, ds, sp)
    chance = log_loss(np.full(len(sp.valid_idx), ds.labels.mean()),
                      ds.labels[sp.valid_idx])
    assert loss < 0.8 * chance
    again = train_logistic(ds, sp, lr=0.5, epochs=400, seed=0)
    assert np.array_equal(model.weights, again.weights)


def test_training_divergence_error(small_task):
    ds, sp = small_task
    with pytest.raises(ModelError, match="epoch"):
        train_mlp(ds, sp, layer_sizes=[ds.p, 8, 1], lr=1e6, epochs=200, seed=0)
    with pytest.raises(ModelError):
        train_logistic(ds, sp, lr=-1.0, epochs=10, seed=0)


def test_train_mlp_learns(small_task):
    ds, sp = small_task
    model = train_mlp(ds, sp, layer_sizes=[ds.p, 8, 1], lr=0.2,
                      epochs=1500, seed=0)
    loss = validation_loss(model, ds, sp)
    chance = log_loss(np.full(len(sp.valid_idx), ds.labels.mean()),
                      ds.labels[sp.valid_idx])
    assert loss < 0.8 * chance


def test_model_roundtrip_exact(tmp_path, small_lr):
    save_model(small_lr, tmp_path, "m")
    loaded = load_model(tmp_path, "m")
    assert np.array_equal(loaded.weights, small_lr.weights)
    assert loaded.bias == small_lr.bias


def test_mlp_roundtrip_exact(tmp_path):
    model = init_mlp([4, 6, 1], seed=2)
    save_model(model, tmp_path, "net")
    loaded = load_model(tmp_path, "net")
    X = np.random.default_rng(0).standard_normal((5, 4))
    assert np.array_equal(loaded.logit(X), model.logit(X))


def test_predict_proba_range(small_task, small_lr):
    ds, _ = small_task
    probs = predict_proba(small_lr, ds.features)
    assert np.all((probs >= 0) & (probs <= 1))
