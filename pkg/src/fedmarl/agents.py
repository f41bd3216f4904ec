"""Two actor-critic training regimes plus replay, federation hooks, and instrumentation.

Privacy-sensitive agents keep everything local: their value network sees only
their own observation and action. Privacy-insensitive agents train under
centralized-training/decentralized-execution: each owns a value network over
the joint observations and actions of the whole insensitive group, while its
policy acts on local observations only. Value networks are fused across
agents once per training round; policies are never shared.

Updates are deterministic-policy-gradient style with target networks and soft
blending. Targets always bootstrap: the task is continuing, episodes are time
limits only.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import federation
from .mlp import Mlp, sgd_step, soft_update
from .noise import sample_noise

TRAIN_PHASES = ("sensitive", "insensitive", "federation", "targets")


@dataclass(frozen=True)
class Hyperparams:
    discount: float = 0.1
    soft_update_coef: float = 0.1
    batch_size: int = 8
    buffer_capacity: int = 100
    lr_actor: float = 0.002
    lr_critic: float = 0.02
    grad_clip: float = 1.0
    hidden_sizes: tuple = (8, 8, 8)

    def __post_init__(self):
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if not 0.0 < self.soft_update_coef <= 1.0:
            raise ValueError("soft update coefficient must lie in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.buffer_capacity < self.batch_size:
            raise ValueError("buffer must hold at least one batch")


class ReplayBuffer:
    """Bounded FIFO transition store with uniform without-replacement sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items = deque(maxlen=capacity)

    def push(self, transition):
        self._items.append(transition)

    def __len__(self):
        return len(self._items)

    def sample(self, batch_size: int, rng: np.random.Generator):
        if batch_size > len(self._items):
            raise ValueError("not enough stored transitions")
        idx = rng.choice(len(self._items), size=batch_size, replace=False)
        return [self._items[int(i)] for i in idx]


def _stack_batch(transitions):
    obs = np.stack([t[0] for t in transitions])
    act = np.stack([t[1] for t in transitions])
    rew = np.asarray([t[2] for t in transitions], dtype=float)
    obs2 = np.stack([t[3] for t in transitions])
    return obs, act, rew, obs2


class _ActorCriticAgent:
    """Shared plumbing: local policy, value network, targets, obs scaling."""

    def __init__(self, obs_dim: int, act_dim: int, critic_in_dim: int,
                 hp: Hyperparams, rng: np.random.Generator, obs_scale=None):
        hidden = list(hp.hidden_sizes)
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.obs_scale = (np.ones(obs_dim) if obs_scale is None
                          else np.asarray(obs_scale, dtype=float))
        self.actor = Mlp([obs_dim] + hidden + [act_dim], "tanh", rng)
        self.critic = Mlp([critic_in_dim] + hidden + [1], "identity", rng)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()

    def scaled(self, obs):
        return np.asarray(obs, dtype=float) * self.obs_scale

    def act(self, obs, noise_scale: float, rng: np.random.Generator) -> np.ndarray:
        raw = self.actor.forward(self.scaled(obs))
        raw = raw + sample_noise(noise_scale, self.act_dim, rng)
        return np.clip(raw, -1.0, 1.0)

    def nets(self):
        return [self.actor, self.critic, self.target_actor, self.target_critic]


class SensitiveAgent(_ActorCriticAgent):
    """Fully local learner: the value network sees only this agent's state."""

    def __init__(self, obs_dim: int, act_dim: int, hp: Hyperparams,
                 rng: np.random.Generator, obs_scale=None):
        super().__init__(obs_dim, act_dim, obs_dim + act_dim, hp, rng, obs_scale)
        self.buffer = ReplayBuffer(hp.buffer_capacity)


class InsensitiveAgent(_ActorCriticAgent):
    """CTDE learner: local policy, value network over the joint group state."""

    def __init__(self, obs_dim: int, act_dim: int, group_size: int,
                 hp: Hyperparams, rng: np.random.Generator, obs_scale=None):
        super().__init__(obs_dim, act_dim, group_size * (obs_dim + act_dim),
                         hp, rng, obs_scale)
        self.group_size = group_size


def select_action(agent, obs, noise_scale: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Policy output plus Gaussian exploration, clamped to [-1, 1]."""
    return agent.act(obs, noise_scale, rng)


# ---------- update rules ----------

def _critic_input(obs, act):
    return np.concatenate([np.atleast_2d(obs), np.atleast_2d(act)], axis=1)


def update_sensitive_critic(agent: SensitiveAgent, batch, hp: Hyperparams) -> float:
    """One MSE step on the local value network against bootstrapped targets.

    y = r + discount * Q_target(o', actor_target(o')); returns the pre-step loss.
    """
    obs, act, rew, obs2 = batch
    s = len(rew)
    act2 = agent.target_actor.forward(agent.scaled(obs2))
    q2 = agent.target_critic.forward(_critic_input(agent.scaled(obs2), act2))[:, 0]
    y = rew + hp.discount * q2
    q, cache = agent.critic.forward_cached(_critic_input(agent.scaled(obs), act))
    q = q[:, 0]
    loss = float(np.mean((y - q) ** 2))
    upstream = (2.0 * (q - y) / s)[:, None]
    grads, _ = agent.critic.backward(cache, upstream)
    sgd_step(agent.critic, grads.clipped(hp.grad_clip), hp.lr_critic)
    return loss


def update_sensitive_actor(agent: SensitiveAgent, batch, hp: Hyperparams) -> float:
    """Deterministic policy-gradient ascent through the local value network.

    Run the critic updates for the round before this (target/critic staleness
    otherwise inverts the intended ordering). Returns batch-mean Q before the step.
    """
    obs, _, _, _ = batch
    s = obs.shape[0]
    sobs = agent.scaled(obs)
    a, actor_cache = agent.actor.forward_cached(sobs)
    q, critic_cache = agent.critic.forward_cached(_critic_input(sobs, a))
    mean_q = float(np.mean(q))
    _, d_input = agent.critic.backward(critic_cache,
                                       np.full((s, 1), 1.0 / s))
    d_action = d_input[:, agent.obs_dim:]
    grads, _ = agent.actor.backward(actor_cache, d_action)
    sgd_step(agent.actor, grads.scaled(-1.0).clipped(hp.grad_clip), hp.lr_actor)
    return mean_q


def _joint_flat(agents, obs_joint, act_joint):
    s = obs_joint.shape[0]
    scaled = np.concatenate(
        [agents[j].scaled(obs_joint[:, j]) for j in range(len(agents))], axis=1)
    return np.concatenate([scaled, act_joint.reshape(s, -1)], axis=1)


def _check_joint_batch(agents, batch):
    obs, act, rew, obs2 = batch
    n = len(agents)
    if obs.ndim != 3 or obs.shape[1] != n or act.shape[:2] != obs.shape[:2] \
            or rew.shape != obs.shape[:2] or obs2.shape != obs.shape:
        raise ValueError("misaligned joint batch")


def update_insensitive_critic(agents, batch, hp: Hyperparams) -> list[float]:
    """MSE step on every group member's joint value network.

    Target actions come from all members' target policies applied to their own
    next observations; each agent bootstraps through its own target network.
    """
    _check_joint_batch(agents, batch)
    obs, act, rew, obs2 = batch
    s, n = rew.shape
    act2 = np.stack([agents[j].target_actor.forward(agents[j].scaled(obs2[:, j]))
                     for j in range(n)], axis=1)
    joint2 = _joint_flat(agents, obs2, act2)
    joint = _joint_flat(agents, obs, act)
    losses = []
    for k, agent in enumerate(agents):
        q2 = agent.target_critic.forward(joint2)[:, 0]
        y = rew[:, k] + hp.discount * q2
        q, cache = agent.critic.forward_cached(joint)
        q = q[:, 0]
        losses.append(float(np.mean((y - q) ** 2)))
        upstream = (2.0 * (q - y) / s)[:, None]
        grads, _ = agent.critic.backward(cache, upstream)
        sgd_step(agent.critic, grads.clipped(hp.grad_clip), hp.lr_critic)
    return losses


def update_insensitive_actor(agents, batch, k: int, hp: Hyperparams) -> float:
    """Policy ascent for group member k through its joint value network.

    Member k's batch actions are replaced by its current policy output; the
    gradient flows only through that action slot, other members' actions stay
    as recorded.
    """
    _check_joint_batch(agents, batch)
    obs, act, _, _ = batch
    s, n = obs.shape[:2]
    agent = agents[k]
    sobs_k = agent.scaled(obs[:, k])
    a_k, actor_cache = agent.actor.forward_cached(sobs_k)
    act_sub = act.copy()
    act_sub[:, k] = a_k
    joint = _joint_flat(agents, obs, act_sub)
    q, critic_cache = agent.critic.forward_cached(joint)
    mean_q = float(np.mean(q))
    _, d_input = agent.critic.backward(critic_cache, np.full((s, 1), 1.0 / s))
    base = n * agent.obs_dim + k * agent.act_dim
    d_action = d_input[:, base:base + agent.act_dim]
    grads, _ = agent.actor.backward(actor_cache, d_action)
    sgd_step(agent.actor, grads.scaled(-1.0).clipped(hp.grad_clip), hp.lr_actor)
    return mean_q


# ---------- instrumentation ----------

@dataclass
class TrainingOpCounter:
    """Network parameter passes per class: one count per online-net gradient
    update and per target sync. Grows affinely in the class sizes."""

    sensitive_passes: int = 0
    insensitive_passes: int = 0
    federation_rounds: int = 0
    iterations: int = 0

    PASSES_PER_SENSITIVE_AGENT = 4    # actor + critic updates, two target syncs
    PASSES_PER_INSENSITIVE_AGENT = 4

    def counts(self) -> dict:
        return {"sensitive_passes": self.sensitive_passes,
                "insensitive_passes": self.insensitive_passes,
                "federation_rounds": self.federation_rounds,
                "iterations": self.iterations}


class MarlTrainer:
    """Owns all agents and runs one training round per environment step.

    Phase order within a round is fixed and instrumented: sensitive updates,
    then insensitive updates, then value-network fusion, then target blends.
    """

    def __init__(self, n_sensitive: int, n_insensitive: int, hp: Hyperparams,
                 seed, obs_dim: int = 3, act_dim: int = 4, obs_scale=None):
        if n_sensitive + n_insensitive < 1:
            raise ValueError("need at least one agent")
        self.hp = hp
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        root = (seed if isinstance(seed, np.random.SeedSequence)
                else np.random.SeedSequence(seed))
        streams = root.spawn(n_sensitive + n_insensitive + 2)
        self.rng = np.random.default_rng(streams[0])        # action noise
        self.sample_rng = np.random.default_rng(streams[1])  # replay draws
        self.sensitive = [
            SensitiveAgent(obs_dim, act_dim, hp,
                           np.random.default_rng(streams[2 + i]), obs_scale)
            for i in range(n_sensitive)]
        self.insensitive = [
            InsensitiveAgent(obs_dim, act_dim, n_insensitive, hp,
                             np.random.default_rng(streams[2 + n_sensitive + i]),
                             obs_scale)
            for i in range(n_insensitive)]
        self.joint_buffer = ReplayBuffer(hp.buffer_capacity)
        self.op_counter = TrainingOpCounter()
        self.last_phases: list[str] = []

    # agent order everywhere: sensitive block first, then insensitive block
    @property
    def n_agents(self) -> int:
        return len(self.sensitive) + len(self.insensitive)

    def all_agents(self):
        return list(self.sensitive) + list(self.insensitive)

    def act(self, observations, noise_scale: float) -> np.ndarray:
        observations = np.asarray(observations, dtype=float)
        return np.stack([agent.act(observations[i], noise_scale, self.rng)
                         for i, agent in enumerate(self.all_agents())])

    def record(self, obs, actions, rewards, obs2):
        """Store the step: per-agent tuples for sensitive, one joint tuple."""
        obs = np.asarray(obs, dtype=float)
        actions = np.asarray(actions, dtype=float)
        rewards = np.asarray(rewards, dtype=float)
        obs2 = np.asarray(obs2, dtype=float)
        ns = len(self.sensitive)
        for i, agent in enumerate(self.sensitive):
            agent.buffer.push((obs[i].copy(), actions[i].copy(),
                               float(rewards[i]), obs2[i].copy()))
        if self.insensitive:
            self.joint_buffer.push((obs[ns:].copy(), actions[ns:].copy(),
                                    rewards[ns:].copy(), obs2[ns:].copy()))

    def _sample_sensitive(self, agent):
        if len(agent.buffer) < self.hp.batch_size:
            return None
        return _stack_batch(agent.buffer.sample(self.hp.batch_size, self.sample_rng))

    def _sample_joint(self):
        if len(self.joint_buffer) < self.hp.batch_size:
            return None
        items = self.joint_buffer.sample(self.hp.batch_size, self.sample_rng)
        return (np.stack([t[0] for t in items]), np.stack([t[1] for t in items]),
                np.stack([t[2] for t in items]), np.stack([t[3] for t in items]))

    def train_round(self, round_rewards, strategy: str = "fedwgt") -> dict:
        """One full training round; returns losses, divergences, and weights."""
        phases = []
        hp = self.hp
        critic_losses = np.full(self.n_agents, np.nan)
        actor_q = np.full(self.n_agents, np.nan)

        for i, agent in enumerate(self.sensitive):
            batch = self._sample_sensitive(agent)
            if batch is not None:
                critic_losses[i] = update_sensitive_critic(agent, batch, hp)
                actor_q[i] = update_sensitive_actor(agent, batch, hp)
                self.op_counter.sensitive_passes += 2
        phases.append("sensitive")

        joint = self._sample_joint() if self.insensitive else None
        ns = len(self.sensitive)
        if joint is not None:
            losses = update_insensitive_critic(self.insensitive, joint, hp)
            critic_losses[ns:] = losses
            for k in range(len(self.insensitive)):
                actor_q[ns + k] = update_insensitive_actor(
                    self.insensitive, joint, k, hp)
            self.op_counter.insensitive_passes += 2 * len(self.insensitive)
        phases.append("insensitive")

        psi, weights, bound = self._federate(round_rewards, strategy)
        phases.append("federation")

        for agent in self.sensitive:
            soft_update(agent.target_actor, agent.actor, hp.soft_update_coef)
            soft_update(agent.target_critic, agent.critic, hp.soft_update_coef)
            self.op_counter.sensitive_passes += 2
        for agent in self.insensitive:
            soft_update(agent.target_actor, agent.actor, hp.soft_update_coef)
            soft_update(agent.target_critic, agent.critic, hp.soft_update_coef)
            self.op_counter.insensitive_passes += 2
        phases.append("targets")

        self.op_counter.iterations += 1
        assert tuple(phases) == TRAIN_PHASES, "training phase order violated"
        self.last_phases = phases
        return {"critic_loss": critic_losses, "actor_q": actor_q,
                "psi": psi, "weights": weights, "loss_bound": bound}

    def _federate(self, round_rewards, strategy):
        stats = federation.RewardStats(self.n_agents)
        stats.add(round_rewards)
        psi = federation.estimate_divergence(stats)
        fw = federation.fed_weights(psi)
        bound_params = federation.DivergenceBoundParams(
            learning_rate=self.hp.lr_critic, lipschitz=1.0, smoothness=1.0,
            rounds=self.op_counter.iterations + 1)
        try:
            bound = federation.loss_bound(bound_params, fw.weights, psi)
        except federation.BoundUndefinedError:
            bound = float("nan")
        critics = [a.critic for a in self.all_agents()]
        federation.aggregate(critics, fw.weights, strategy)
        if strategy != "none":
            self.op_counter.federation_rounds += 1
        return psi, fw.weights, bound

    def training_op_counter(self) -> dict:
        return self.op_counter.counts()

    def all_finite(self) -> bool:
        return all(net.all_finite()
                   for agent in self.all_agents() for net in agent.nets())
