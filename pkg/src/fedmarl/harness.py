"""End-to-end experiment runner and comparison-matrix sweeps.

One experiment: seed everything, loop episodes of fixed length over the
environment, run one training round per step (local updates, critic fusion,
target blends), and stream per-step metrics to CSV alongside a JSON summary
and parameter checkpoints. Reruns with the same config and seed reproduce
metrics.csv byte-for-byte.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .agents import Hyperparams, MarlTrainer
from .config import ExperimentConfig
from .env import LATENCY_CAP_S, WirelessEnv
from .noise import NoiseSchedule, value as noise_value

# Observation scaling fed to the networks; tames the dB-valued SNR feature.
OBS_SCALE = (0.01, 1.0, 1.0)

# Episode window used for head/tail summary statistics.
WINDOW_EPISODES = 20
CONVERGENCE_MA_STEPS = 20
CONVERGENCE_RTOL = 0.05

METRICS_COLUMNS = [
    "iteration", "episode", "step", "scope", "agent", "reward",
    "throughput_mbps", "latency_s", "energy_j", "snr_db", "loss_rate",
    "idle", "psi", "weight", "critic_loss", "actor_q", "noise_scale",
    "loss_bound",
]

MATRIX_AXES = ("noise.kind", "noise.rate", "noise.initial_scale",
               "federation.strategy", "reward.scheme")


class TrainingDivergedError(RuntimeError):
    """Raised when network parameters go non-finite; a checkpoint is written."""


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and math.isnan(x):
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def build_trainer(config: ExperimentConfig, seed) -> MarlTrainer:
    t = config.training
    hp = Hyperparams(discount=t.discount, soft_update_coef=t.soft_update_coef,
                     batch_size=t.batch_size, buffer_capacity=t.buffer_capacity,
                     lr_actor=t.lr_actor, lr_critic=t.lr_critic,
                     grad_clip=t.grad_clip, hidden_sizes=tuple(t.hidden_sizes))
    return MarlTrainer(config.scenario.n_sensitive,
                       config.scenario.n_insensitive, hp, seed,
                       obs_scale=OBS_SCALE)


def run_experiment(config: ExperimentConfig, out_dir: str | os.PathLike) -> dict:
    """Run one full experiment and write metrics.csv, summary.json, weights/."""
    config.validate()
    os.makedirs(out_dir, exist_ok=True)

    root = np.random.SeedSequence(config.run.seed)
    env_seed, trainer_seed = root.spawn(2)
    env = WirelessEnv(config)
    trainer = build_trainer(config, trainer_seed)
    schedule = NoiseSchedule(config.noise.kind, config.noise.rate,
                             config.noise.initial_scale, config.noise.floor)
    strategy = config.federation.strategy

    episodes = config.run.episodes
    steps = config.run.steps_per_episode
    n = env.n_agents

    rows = []
    step_reward = np.zeros(episodes * steps)
    step_throughput = np.zeros(episodes * steps)
    step_latency = np.zeros(episodes * steps)
    step_energy = np.zeros(episodes * steps)
    step_violations = np.zeros(episodes * steps)
    feasible_latency_sum = 0.0
    feasible_latency_count = 0

    obs = env.reset(env_seed)
    iteration = 0
    for episode in range(episodes):
        if episode > 0:
            obs = env.reset()
        scale = float(noise_value(schedule, episode))
        for step in range(steps):
            actions = trainer.act(obs, scale)
            result = env.step(actions)
            trainer.record(obs, actions, result.rewards, result.observations)
            metrics = trainer.train_round(result.rewards, strategy)
            info = result.info

            step_reward[iteration] = float(result.rewards.mean())
            step_throughput[iteration] = info["system_throughput_mbps"]
            step_latency[iteration] = info["mean_latency_s"]
            step_energy[iteration] = info["system_energy_j"]
            step_violations[iteration] = float(info["violations"].mean())
            finite = info["latency_s"] < LATENCY_CAP_S
            feasible_latency_sum += float(info["latency_s"][finite].sum())
            feasible_latency_count += int(finite.sum())

            rows.append([iteration, episode, step, "system", "",
                         _fmt(step_reward[iteration]),
                         _fmt(step_throughput[iteration]),
                         _fmt(step_latency[iteration]),
                         _fmt(step_energy[iteration]),
                         "", "", "", "", "", "", "", _fmt(scale),
                         _fmt(float(metrics["loss_bound"]))])
            for i in range(n):
                rows.append([
                    iteration, episode, step, "agent", i,
                    _fmt(float(result.rewards[i])),
                    _fmt(float(info["throughput_mbps"][i])),
                    _fmt(float(min(info["latency_s"][i], LATENCY_CAP_S))),
                    _fmt(float(info["energy_j"][i])),
                    _fmt(float(info["snr_db"][i])),
                    _fmt(float(result.observations[i, 1])),
                    _fmt(float(result.observations[i, 2])),
                    _fmt(float(metrics["psi"][i])),
                    _fmt(float(metrics["weights"][i])),
                    _fmt(float(metrics["critic_loss"][i])),
                    _fmt(float(metrics["actor_q"][i])),
                    "", "",
                ])
            obs = result.observations
            iteration += 1
        if not trainer.all_finite():
            _write_metrics(out_dir, rows)
            save_checkpoint(trainer, os.path.join(out_dir, "weights"),
                            iteration)
            raise TrainingDivergedError(
                f"non-finite parameters after episode {episode}; "
                f"checkpoint written to {out_dir}")

    _write_metrics(out_dir, rows)
    save_checkpoint(trainer, os.path.join(out_dir, "weights"), iteration)

    summary = _summarize(config, step_reward, step_throughput, step_latency,
                         step_energy, step_violations, episodes, steps)
    summary["mean_feasible_latency_s"] = (
        feasible_latency_sum / feasible_latency_count
        if feasible_latency_count else None)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _write_metrics(out_dir, rows):
    with open(os.path.join(out_dir, "metrics.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        writer.writerows(rows)


def _moving_average(x: np.ndarray, window: int) -> np.ndarray:
    if len(x) < window:
        return np.array([x.mean()]) if len(x) else np.zeros(0)
    kernel = np.ones(window) / window
    return np.convolve(x, kernel, mode="valid")


def convergence_iteration(step_rewards: np.ndarray,
                          window: int = CONVERGENCE_MA_STEPS,
                          rtol: float = CONVERGENCE_RTOL) -> int:
    """First step whose trailing moving-average reward is within rtol of the
    final moving-average value; falls back to the last step index."""
    total = len(step_rewards)
    ma = _moving_average(step_rewards, window)
    if ma.size == 0:
        return 0
    final = float(ma[-1])
    tol = rtol * abs(final)
    hits = np.flatnonzero(np.abs(ma - final) <= tol)
    if hits.size == 0:
        return total
    return int(hits[0]) + min(window, total) - 1


def _summarize(config, step_reward, step_throughput, step_latency,
               step_energy, step_violations, episodes, steps) -> dict:
    ep_reward = step_reward.reshape(episodes, steps).mean(axis=1)
    window = min(WINDOW_EPISODES, episodes)
    tail = slice((episodes - window) * steps, episodes * steps)
    return {
        "episodes": episodes,
        "steps_per_episode": steps,
        "seed": config.run.seed,
        "n_sensitive": config.scenario.n_sensitive,
        "n_insensitive": config.scenario.n_insensitive,
        "reward_scheme": config.reward.scheme,
        "federation_strategy": config.federation.strategy,
        "noise_kind": config.noise.kind,
        "noise_rate": config.noise.rate,
        "noise_initial_scale": config.noise.initial_scale,
        "final_mean_reward": float(ep_reward[-window:].mean()),
        "head_mean_reward": float(ep_reward[:window].mean()),
        "mean_reward": float(step_reward.mean()),
        "mean_throughput_mbps": float(step_throughput.mean()),
        "mean_latency_s": float(step_latency.mean()),
        "total_energy_j": float(step_energy.sum()),
        "tail_violation_fraction": float(step_violations[tail].mean()),
        "convergence_iteration": convergence_iteration(step_reward),
        "episode_rewards": [float(r) for r in ep_reward],
    }


def save_checkpoint(trainer: MarlTrainer, weights_dir, iterations: int):
    """One file per network per agent, plus a manifest with RNG states."""
    os.makedirs(weights_dir, exist_ok=True)
    roles = ("actor", "critic", "target_actor", "target_critic")
    for i, agent in enumerate(trainer.all_agents()):
        for role in roles:
            getattr(agent, role).save(
                os.path.join(weights_dir, f"{role}_{i:02d}.npz"))
    manifest = {
        "iterations": iterations,
        "n_sensitive": len(trainer.sensitive),
        "n_insensitive": len(trainer.insensitive),
        "roles": list(roles),
        "rng_state": trainer.rng.bit_generator.state,
        "sample_rng_state": trainer.sample_rng.bit_generator.state,
        "op_counter": trainer.training_op_counter(),
    }
    with open(os.path.join(weights_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------- comparison matrix ----------

def _matrix_job(args):
    config_dict, out_dir = args
    config = ExperimentConfig.from_dict(config_dict)
    return run_experiment(config, out_dir)


def _cell_tag(assignment) -> str:
    parts = [f"{key.split('.', 1)[1]}={val}" for key, val in assignment]
    return "_".join(p.replace("/", "-") for p in parts)


def run_matrix(base_config: ExperimentConfig, axes: dict, seeds,
               out_dir: str | os.PathLike, workers: int | None = None) -> list[dict]:
    """Cartesian sweep over config axes x seeds; writes a long-format matrix.csv.

    Axis keys are dotted config paths restricted to the comparison dimensions
    (noise kind/rate/scale, federation strategy, reward scheme). Each cell runs
    in its own subdirectory; cells are independent and run process-parallel.
    """
    if not axes:
        raise ValueError("need at least one sweep axis")
    for key in axes:
        if key not in MATRIX_AXES:
            raise ValueError(f"unsupported axis {key!r}; pick from {MATRIX_AXES}")
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    os.makedirs(out_dir, exist_ok=True)

    keys = sorted(axes)
    jobs = []
    labels = []
    for values in itertools.product(*(axes[k] for k in keys)):
        assignment = list(zip(keys, values))
        cfg = base_config
        for key, val in assignment:
            cfg = cfg.replace_value(key, val)
        for seed in seeds:
            cell_cfg = cfg.replace_value("run.seed", seed)
            cell_cfg.validate()
            cell_dir = os.path.join(out_dir, "cells",
                                    _cell_tag(assignment), f"seed{seed}")
            jobs.append((cell_cfg.to_dict(), cell_dir))
            labels.append((assignment, seed))

    if workers is None:
        workers = min(len(jobs), os.cpu_count() or 1)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_matrix_job, jobs))
    else:
        summaries = [_matrix_job(j) for j in jobs]

    scalar_fields = [
        "final_mean_reward", "head_mean_reward", "mean_reward",
        "mean_throughput_mbps", "mean_latency_s", "total_energy_j",
        "tail_violation_fraction", "convergence_iteration",
    ]
    table = []
    with open(os.path.join(out_dir, "matrix.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(keys + ["seed"] + scalar_fields)
        for (assignment, seed), summary in zip(labels, summaries):
            row = [val for _, val in assignment] + [seed]
            row += [_fmt(summary[f]) for f in scalar_fields]
            writer.writerow(row)
            record = {k: v for k, v in assignment}
            record["seed"] = seed
            record.update({f: summary[f] for f in scalar_fields})
            table.append(record)
    return table
