"""Critic fusion across agents.

The divergence of an agent is the absolute gap between its mean reward over
the current round and the global mean; fusion weights are inverse-square in
that divergence, normalized onto the simplex. Uniform weights recover plain
parameter averaging; a no-op strategy is available as the unfederated
baseline. Networks of different shapes are fused class-by-class, never mixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mlp import Mlp

STRATEGIES = ("fedwgt", "fedavg", "none")

# Divergences are floored before the inverse square; an agent that exactly
# matches the global mean would otherwise produce an infinite weight.
PSI_FLOOR = 1e-8


class BoundUndefinedError(ValueError):
    """Raised when the accuracy-loss bound's geometric factor does not exist."""


class RewardStats:
    """Per-agent reward sums accumulated over one federation round."""

    def __init__(self, n_agents: int):
        if n_agents < 1:
            raise ValueError("need at least one agent")
        self.n_agents = n_agents
        self.sums = np.zeros(n_agents)
        self.counts = np.zeros(n_agents, dtype=int)

    def add(self, rewards):
        rewards = np.asarray(rewards, dtype=float)
        if rewards.shape != (self.n_agents,):
            raise ValueError("reward vector must have one entry per agent")
        self.sums += rewards
        self.counts += 1

    def reset(self):
        self.sums[:] = 0.0
        self.counts[:] = 0

    def per_agent_mean(self) -> np.ndarray:
        if (self.counts == 0).any():
            raise ValueError("every agent needs at least one sample")
        return self.sums / self.counts

    def global_mean(self) -> float:
        if (self.counts == 0).any():
            raise ValueError("every agent needs at least one sample")
        return float(self.sums.sum() / self.counts.sum())


@dataclass(frozen=True)
class FedWeights:
    psi: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if (self.weights < 0).any():
            raise ValueError("weights must be >= 0")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")


@dataclass(frozen=True)
class DivergenceBoundParams:
    """Constants of the accuracy-loss bound: learning rate, Lipschitz and
    smoothness coefficients, and the round-count exponent."""

    learning_rate: float
    lipschitz: float
    smoothness: float
    rounds: int

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.rounds < 1:
            raise ValueError("round count must be >= 1")


def estimate_divergence(stats: RewardStats) -> np.ndarray:
    """Per-agent divergence: |mean local reward - global mean reward|."""
    return np.abs(stats.per_agent_mean() - stats.global_mean())


def fed_weights(psi) -> FedWeights:
    """Inverse-square-divergence weights on the simplex.

    w_k = (1/psi_k^2) / sum_n (1/psi_n^2), with psi floored at PSI_FLOOR.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.size == 0:
        raise ValueError("need at least one divergence value")
    if (psi < 0).any():
        raise ValueError("divergences must be >= 0")
    floored = np.maximum(psi, PSI_FLOOR)
    if np.all(floored == floored[0]):
        # exact uniformity under symmetry, so equal divergences reproduce
        # plain averaging bit-for-bit
        return FedWeights(psi.copy(), np.full(psi.size, 1.0 / psi.size))
    inv_sq = 1.0 / floored ** 2
    return FedWeights(psi.copy(), inv_sq / inv_sq.sum())


def loss_bound(params: DivergenceBoundParams, weights, psi) -> float:
    """Diagnostic upper bound on the accuracy loss caused by state divergence.

    factor = eta * (1 - r^rounds) / (1 - r) with r = sqrt(1 + eta^2*beta^2
    - 2*eta*lambda); the bound is factor * sum_k w_k * psi_k. Undefined when
    the radicand is non-positive or r == 1.
    """
    eta = params.learning_rate
    radicand = 1.0 + (eta * params.lipschitz) ** 2 - 2.0 * eta * params.smoothness
    if radicand <= 0:
        raise BoundUndefinedError(f"radicand {radicand} is not positive")
    root = math.sqrt(radicand)
    if abs(1.0 - root) < 1e-15:
        raise BoundUndefinedError("geometric factor undefined at root == 1")
    factor = eta * (1.0 - root ** params.rounds) / (1.0 - root)
    return factor * float(np.dot(np.asarray(weights), np.asarray(psi)))


def aggregate(models, weights, strategy: str) -> dict:
    """Fuse parameter vectors within each shape class and write them back.

    Models are grouped by (layer sizes, output activation); weights are
    renormalized to sum to 1 inside each class. Every member of a class is
    overwritten with the fused vector. Returns {class key: fused vector}.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    models = list(models)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(models),):
        raise ValueError("one weight per model required")
    if strategy == "none" or not models:
        return {}

    classes: dict[tuple, list[int]] = {}
    for i, m in enumerate(models):
        if not isinstance(m, Mlp):
            raise TypeError("aggregate operates on Mlp models")
        key = (tuple(m.layer_sizes), m.output_activation)
        classes.setdefault(key, []).append(i)

    fused = {}
    for key, idx in classes.items():
        if strategy == "fedavg":
            w = np.full(len(idx), 1.0 / len(idx))
        else:
            w = weights[idx]
            total = w.sum()
            if total <= 0:
                raise ValueError("class weights sum to zero")
            w = w / total
        theta = np.zeros(models[idx[0]].parameter_count())
        for wi, i in zip(w, idx):
            theta += wi * models[i].get_flat()
        for i in idx:
            models[i].set_flat(theta)
        fused[key] = theta
    return fused
