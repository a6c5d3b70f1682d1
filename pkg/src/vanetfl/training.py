"""Synthetic vehicle data and local linear-regression training.

Each vehicle observes ``d`` real-valued channels (speed, position, density,
time of day ...) and regresses a congestion score.  All vehicles share one
ground-truth model; heterogeneity comes from a per-vehicle shift of the
feature means.  Datasets stay inside the vehicle: only ``LocalModel``
weights ever leave this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Rng


class DivergenceError(ArithmeticError):
    """Gradient descent produced a non-finite loss."""


@dataclass
class VehicleProfile:
    node_id: str
    n_samples: int
    noise_std: float = 0.0
    feature_shift: np.ndarray | float = 0.0
    is_malicious: bool = False

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


@dataclass
class Dataset:
    features: np.ndarray  # (n_samples, d)
    targets: np.ndarray  # (n_samples,)

    def __post_init__(self) -> None:
        if self.features.ndim != 2 or self.features.shape[0] != self.targets.shape[0]:
            raise ValueError("features/targets shape mismatch")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def design(self) -> np.ndarray:
        """Feature matrix with a trailing column of ones for the bias."""
        return np.hstack([self.features, np.ones((self.n_samples, 1))])


@dataclass
class LocalModel:
    weights: np.ndarray  # length d + 1, bias last
    train_loss: float = field(default=float("nan"))

    @classmethod
    def zeros(cls, d: int) -> LocalModel:
        return cls(np.zeros(d + 1))


def generate_ground_truth(d: int, rng: Rng) -> np.ndarray:
    if d < 1:
        raise ValueError("d must be >= 1")
    return rng.uniform(-1.0, 1.0, size=d)


def generate_dataset(profile: VehicleProfile, w_star: np.ndarray, rng: Rng, bias: float = 0.0) -> Dataset:
    """Draw ``n_samples`` rows of ``N(shift, 1)`` features and noisy linear targets."""
    w_star = np.asarray(w_star, dtype=float)
    d = w_star.shape[0]
    shift = np.broadcast_to(np.asarray(profile.feature_shift, dtype=float), (d,))
    x = rng.normal(0.0, 1.0, size=(profile.n_samples, d)) + shift
    y = x @ w_star + bias
    if profile.noise_std > 0:
        y = y + rng.normal(0.0, profile.noise_std, size=profile.n_samples)
    return Dataset(x, y)


def local_loss(weights: np.ndarray, data: Dataset) -> float:
    """Mean squared error of ``[w, bias]`` on ``data``."""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (data.dim + 1,):
        raise ValueError(f"expected {data.dim + 1} weights, got {weights.shape}")
    r = data.design() @ weights - data.targets
    return float(np.mean(r * r))


def mse_gradient(weights: np.ndarray, data: Dataset) -> np.ndarray:
    a = data.design()
    return 2.0 / data.n_samples * (a.T @ (a @ weights - data.targets))


def train_local(init: LocalModel, data: Dataset, epochs: int, lr: float) -> LocalModel:
    """Full-batch gradient descent on MSE starting from ``init``."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    w = np.array(init.weights, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(epochs):
            w = w - lr * mse_gradient(w, data)
            if not np.all(np.isfinite(w)):
                raise DivergenceError(f"weights diverged (lr={lr})")
        loss = local_loss(w, data)
    if not np.isfinite(loss):
        raise DivergenceError(f"loss diverged (lr={lr})")
    return LocalModel(w, loss)


def least_squares(datasets: list[Dataset]) -> np.ndarray:
    """Closed-form pooled least-squares solution via the normal equations."""
    a = np.vstack([ds.design() for ds in datasets])
    y = np.concatenate([ds.targets for ds in datasets])
    return np.linalg.solve(a.T @ a, a.T @ y)
