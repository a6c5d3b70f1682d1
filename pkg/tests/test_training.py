import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vanetfl.core import Rng
from vanetfl.training import (
    Dataset,
    DivergenceError,
    LocalModel,
    VehicleProfile,
    generate_dataset,
    generate_ground_truth,
    least_squares,
    local_loss,
    mse_gradient,
    train_local,
)


def _data(n=200, d=2, noise=0.0, seed=0, shift=0.0):
    w = generate_ground_truth(d, Rng(seed, "w"))
    ds = generate_dataset(VehicleProfile("v", n, noise, shift), w, Rng(seed, "d"))
    return w, ds


def test_ground_truth_range_and_determinism():
    w = generate_ground_truth(1, Rng(0))
    assert w.shape == (1,) and -1 <= w[0] <= 1
    assert np.array_equal(generate_ground_truth(3, Rng(4)), generate_ground_truth(3, Rng(4)))
    assert not np.array_equal(generate_ground_truth(3, Rng(4)), generate_ground_truth(3, Rng(5)))


def test_ground_truth_needs_positive_dim():
    with pytest.raises(ValueError):
        generate_ground_truth(0, Rng(0))


def test_noiseless_targets_are_linear():
    w, ds = _data(noise=0.0)
    assert np.allclose(ds.features @ w, ds.targets, atol=1e-12)


def test_residual_std_under_noise():
    w, ds = _data(n=100, noise=0.1)
    assert 0.07 <= np.std(ds.targets - ds.features @ w) <= 0.13


def test_feature_shift_moves_means():
    w = generate_ground_truth(3, Rng(0))
    a = generate_dataset(VehicleProfile("a", 2000, 0.0, 0.0), w, Rng(1))
    b = generate_dataset(VehicleProfile("b", 2000, 0.0, 5.0), w, Rng(2))
    gap = b.features.mean(axis=0) - a.features.mean(axis=0)
    assert np.all(np.abs(gap - 5.0) < 0.15)


def test_profile_rejects_empty():
    with pytest.raises(ValueError):
        VehicleProfile("x", 0)


def test_zero_targets_stationary():
    ds = Dataset(Rng(0).normal(size=(20, 3)), np.zeros(20))
    out = train_local(LocalModel.zeros(3), ds, epochs=5, lr=0.1)
    assert np.array_equal(out.weights, np.zeros(4))
    assert out.train_loss == 0.0


def test_training_reaches_ground_truth():
    w, ds = _data(n=200, d=2)
    out = train_local(LocalModel.zeros(2), ds, epochs=500, lr=0.05)
    assert np.max(np.abs(out.weights - np.append(w, 0.0))) < 1e-3
    assert np.max(np.abs(out.weights - least_squares([ds]))) < 1e-3


def test_divergence_detected():
    _, ds = _data(n=50, d=3, noise=0.1)
    with pytest.raises(DivergenceError):
        train_local(LocalModel.zeros(3), ds, epochs=50, lr=1e6)


def test_training_argument_checks():
    _, ds = _data()
    with pytest.raises(ValueError):
        train_local(LocalModel.zeros(2), ds, epochs=1, lr=0.0)
    with pytest.raises(ValueError):
        train_local(LocalModel.zeros(2), ds, epochs=0, lr=0.1)


def test_loss_non_increasing_for_small_lr():
    _, ds = _data(n=100, d=3, noise=0.2, shift=0.5)
    m = LocalModel.zeros(3)
    losses = []
    for _ in range(30):
        m = train_local(m, ds, epochs=1, lr=0.05)
        losses.append(m.train_loss)
    assert all(b <= a + 1e-15 for a, b in zip(losses, losses[1:]))


def test_loss_examples():
    w, ds = _data(noise=0.0)
    assert local_loss(np.append(w, 0.0), ds) == pytest.approx(0.0, abs=1e-20)
    w, ds = _data(n=5000, noise=0.3)
    assert local_loss(np.append(w, 0.0), ds) == pytest.approx(0.09, rel=0.1)
    assert local_loss(np.zeros(3), ds) > 0


def test_loss_dimension_check():
    _, ds = _data(d=2)
    with pytest.raises(ValueError):
        local_loss(np.zeros(2), ds)


@given(st.integers(min_value=1, max_value=5), st.integers(min_value=0, max_value=10**6))
def test_gradient_matches_finite_differences(d, seed):
    rng = Rng(seed)
    ds = Dataset(rng.normal(size=(12, d)), rng.normal(size=12))
    w = rng.normal(size=d + 1)
    g = mse_gradient(w, ds)
    eps = 1e-6
    fd = np.array([(local_loss(w + eps * e, ds) - local_loss(w - eps * e, ds)) / (2 * eps) for e in np.eye(d + 1)])
    assert np.allclose(g, fd, rtol=1e-6, atol=1e-8)
