"""Maximum-likelihood estimation of priority weights from choice records.

Each record expands into (chosen, other) pairs against every other candidate;
the loss is the summed negative log of the shifted-sigmoid choice probability.
Optimization is full-batch Adam (datasets are tens-to-hundreds of pairs) with
projection of the class weights onto [0, 1] and the coverage weight onto
[0, inf) after every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .semantics import PriorityModel


class DegenerateDataset(Exception):
    pass


@dataclass
class TrainConfig:
    epochs: int = 2000
    learning_rate: float = 0.01
    train_beta: float = 10.0
    train_rho: float = 0.1
    seeds: tuple = tuple(range(10))
    clamp: bool = True

    def validate(self) -> None:
        if self.epochs <= 0:
            raise ValueError("epochs must be > 0")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0.0 <= self.train_rho < 0.5:
            raise ValueError("train_rho must be in [0, 0.5)")


def expand_pairs(records: list) -> np.ndarray:
    """Matrix of phi_aug(chosen) - phi_aug(other), one row per pair."""
    rows = []
    for r in records:
        feats = {i: phi for (i, phi, _pos) in r.candidates}
        chosen = feats[r.chosen_frontier_id]
        for i, phi in feats.items():
            if i != r.chosen_frontier_id:
                rows.append(chosen - phi)
    if not rows:
        raise DegenerateDataset("no record with at least 2 candidates")
    return np.asarray(rows, dtype=np.float64)


def dataset_nll(records: list, w_aug: np.ndarray, beta: float, rho: float) -> float:
    """nll over a record list; an empty dataset has zero loss."""
    if not records:
        return 0.0
    return nll(expand_pairs(records), w_aug, beta, rho)


def dataset_grad_nll(records: list, w_aug: np.ndarray, beta: float,
                     rho: float) -> np.ndarray:
    if not records:
        return np.zeros_like(np.asarray(w_aug, dtype=np.float64))
    return grad_nll(expand_pairs(records), w_aug, beta, rho)


def _sigma(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, -700, 700)
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-x)), np.exp(x) / (1.0 + np.exp(x)))


def nll(deltas: np.ndarray, w_aug: np.ndarray, beta: float, rho: float) -> float:
    """Sum over pairs of -log((1 - 2 rho) sigma(beta z) + rho), z = delta . w."""
    if len(deltas) == 0:
        return 0.0
    z = beta * (deltas @ w_aug)
    p = (1.0 - 2.0 * rho) * _sigma(z) + rho
    return float(-np.log(p).sum())


def grad_nll(deltas: np.ndarray, w_aug: np.ndarray, beta: float, rho: float) -> np.ndarray:
    """Analytic gradient of nll with respect to w_aug."""
    if len(deltas) == 0:
        return np.zeros_like(w_aug)
    z = beta * (deltas @ w_aug)
    s = _sigma(z)
    p = (1.0 - 2.0 * rho) * s + rho
    coef = -(1.0 - 2.0 * rho) * s * (1.0 - s) * beta / p
    return coef @ deltas


@dataclass
class TrainResult:
    model: PriorityModel
    seed: int
    loss_curve: list = field(default_factory=list)

    @property
    def final_nll(self) -> float:
        return self.loss_curve[-1]


def adam_minimize(grad_fn, x0: np.ndarray, lr: float, steps: int,
                  project=None, loss_fn=None,
                  beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """Plain full-batch Adam; optionally projects after each step and records
    the loss curve."""
    x = x0.copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    curve = []
    for t in range(1, steps + 1):
        g = grad_fn(x)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mh = m / (1 - beta1 ** t)
        vh = v / (1 - beta2 ** t)
        x = x - lr * mh / (np.sqrt(vh) + eps)
        if project is not None:
            x = project(x)
        if loss_fn is not None:
            curve.append(loss_fn(x))
    return x, curve


def train(records: list, config: TrainConfig, seed: int,
          feature_names: list | None = None) -> TrainResult:
    """Fit one model from a seed-dependent uniform [0, 1] initialization."""
    config.validate()
    deltas = expand_pairs(records)
    dim = deltas.shape[1]
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(0.0, 1.0, size=dim)

    def project(x):
        if not config.clamp:
            return x
        out = x.copy()
        out[:-1] = np.clip(out[:-1], 0.0, 1.0)
        out[-1] = max(0.0, out[-1])
        return out

    def loss(x):
        return nll(deltas, x, config.train_beta, config.train_rho)

    def grad(x):
        return grad_nll(deltas, x, config.train_beta, config.train_rho)

    x0 = project(x0)
    curve = [loss(x0)]
    x, tail = adam_minimize(grad, x0, config.learning_rate, config.epochs,
                            project=project, loss_fn=loss)
    curve.extend(tail)
    model = PriorityModel(w=x[:-1], w_I=float(x[-1]),
                          feature_names=list(feature_names or []))
    return TrainResult(model=model, seed=seed, loss_curve=curve)


def train_seeds(records: list, config: TrainConfig,
                feature_names: list | None = None) -> list:
    return [train(records, config, s, feature_names) for s in config.seeds]
