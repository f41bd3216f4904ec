"""Multi-agent wireless world behind a reset/step interface.

Each step: agents move inside their roaming discs, links are re-sampled
(shadowing, fading, SNR, Shannon rate), one contention slot runs on the MAC,
compute/energy costs are charged per privacy class, and rewards are emitted.

Observations are three local features per agent: link SNR in dB, packet loss
rate, and idle fraction. Actions are raw 4-vectors in [-1, 1] decoded onto
(contention window, frame length, server CPU frequency, client CPU frequency)
bounds. Rewards squash a throughput ratio through arctan into (-1, 1), with a
hard penalty branch when a latency cap is exceeded under scheme 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import channel, energy, mac
from .config import ExperimentConfig

# Infeasible work (zero CPU frequency) yields unbounded latency; it is
# recorded and penalized at this finite cap so rewards stay inside (-1, 1).
LATENCY_CAP_S = 1e12

OBS_DIM = 3
ACT_DIM = 4


@dataclass(frozen=True)
class AgentSpec:
    """Static per-agent description: privacy class, radio, MAC bounds, compute."""

    privacy_sensitive: bool
    antennas: int
    compute: energy.ComputeProfile
    cw_min: int
    cw_max: int
    frame_max_bits: float
    t_max_s: float

    def __post_init__(self):
        if self.antennas < 1:
            raise ValueError("need at least one antenna")
        if not 1 <= self.cw_min <= self.cw_max:
            raise ValueError("need 1 <= cw_min <= cw_max")
        if self.frame_max_bits < 0:
            raise ValueError("frame bound must be >= 0")
        if self.t_max_s <= 0:
            raise ValueError("latency cap must be positive")


@dataclass(frozen=True)
class Observation:
    """Local state features for one agent and slot."""

    snr_db: float
    loss_rate: float
    idle: float

    def __post_init__(self):
        if not 0.0 <= self.loss_rate <= 1.0:
            raise ValueError("loss rate must lie in [0, 1]")
        if not 0.0 <= self.idle <= 1.0:
            raise ValueError("idle fraction must lie in [0, 1]")

    def to_array(self) -> np.ndarray:
        return np.array([self.snr_db, self.loss_rate, self.idle])

    @classmethod
    def from_array(cls, arr) -> "Observation":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))


@dataclass(frozen=True)
class DecodedAction:
    cw: int
    frame_bits: float
    server_freq_hz: float
    client_freq_hz: float


def decode_action(raw, spec: AgentSpec, server_f_max_hz: float) -> DecodedAction:
    """Affine map from a clamped [-1, 1] 4-vector onto the action bounds.

    Slots: contention window (rounded onto [cw_min, cw_max]), frame length on
    [0, frame_max], server frequency on [0, server_f_max], client frequency on
    [0, client f_max].
    """
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (ACT_DIM,):
        raise ValueError(f"raw action must have {ACT_DIM} entries")
    if not np.isfinite(raw).all():
        raise ValueError("raw action contains non-finite values")
    u = (np.clip(raw, -1.0, 1.0) + 1.0) / 2.0
    return DecodedAction(
        cw=int(round(spec.cw_min + u[0] * (spec.cw_max - spec.cw_min))),
        frame_bits=float(u[1] * spec.frame_max_bits),
        server_freq_hz=float(u[2] * server_f_max_hz),
        client_freq_hz=float(u[3] * spec.compute.f_max_hz),
    )


def z_normalize(x: float) -> float:
    """Arctan squash onto (-1, 1): z(x) = (2/pi) * arctan(x)."""
    return (2.0 / math.pi) * math.atan(x)


def reward(throughput_bps: float, energy_j: float, latency_s: float,
           privacy_sensitive: bool, scheme: int, t_max_s: float,
           ratio_scale: float = 1.0) -> float:
    """Per-agent reward for one slot.

    Scheme 1: z(throughput/latency). Scheme 2: z(throughput/energy) while the
    agent's class latency cap holds, else the penalty z(-latency). Ratios with
    a zero denominator are treated as 0; ratios and penalty latencies are
    capped at a magnitude where the squash still rounds strictly inside
    (-1, 1) in float64.
    """
    if min(throughput_bps, energy_j, latency_s) < 0:
        raise ValueError("reward inputs must be >= 0")
    if scheme == 1:
        ratio = throughput_bps / latency_s if 0 < latency_s < LATENCY_CAP_S else 0.0
        return z_normalize(min(ratio * ratio_scale, LATENCY_CAP_S))
    if scheme == 2:
        if latency_s > t_max_s:
            return z_normalize(-min(latency_s, LATENCY_CAP_S))
        ratio = throughput_bps / energy_j if energy_j > 0 else 0.0
        return z_normalize(min(ratio * ratio_scale, LATENCY_CAP_S))
    raise ValueError("scheme must be 1 or 2")


@dataclass
class StepResult:
    observations: np.ndarray  # (n_agents, 3): snr_db, loss_rate, idle
    rewards: np.ndarray       # (n_agents,)
    info: dict


class WirelessEnv:
    """Shared-channel world for a mixed fleet of privacy classes.

    Agent order: the sensitive block first, then the insensitive block. One
    instance is single-threaded; run separate instances for seed sweeps.
    """

    def __init__(self, config: ExperimentConfig):
        config.validate()
        self.config = config
        s, ch, m, comp = (config.scenario, config.channel, config.mac,
                          config.compute)
        self.n_sensitive = s.n_sensitive
        self.n_insensitive = s.n_insensitive
        self.n_agents = s.n_sensitive + s.n_insensitive
        self.slot_s = s.slot_duration_s

        self.pl_params = channel.PathLossParams(
            carrier_frequency_hz=ch.carrier_frequency_hz,
            reference_distance_m=ch.reference_distance_m,
            path_loss_exponent=ch.path_loss_exponent,
            shadowing_sigma_db=ch.shadowing_sigma_db,
            tx_gain_dbi=ch.tx_gain_dbi, rx_gain_dbi=ch.rx_gain_dbi)
        self.radio = channel.RadioParams(
            tx_power_dbm=ch.tx_power_dbm, bandwidth_hz=ch.bandwidth_hz,
            noise_psd_dbm_hz=ch.noise_psd_dbm_hz)

        sta_profile = energy.ComputeProfile(
            kappa=comp.kappa, freq_hz=comp.sta_f_max_hz,
            f_max_hz=comp.sta_f_max_hz, cycles_per_bit=comp.cycles_per_bit,
            flops_per_cycle=comp.flops_per_cycle, grad_bits=comp.grad_bits,
            state_bits=comp.state_bits, task_bits=comp.task_bits)
        self.server_profile = energy.ComputeProfile(
            kappa=comp.kappa, freq_hz=comp.ap_f_max_hz,
            f_max_hz=comp.ap_f_max_hz, cycles_per_bit=comp.cycles_per_bit,
            flops_per_cycle=comp.flops_per_cycle,
            task_bits=comp.server_task_bits)
        self.specs = [
            AgentSpec(privacy_sensitive=i < s.n_sensitive,
                      antennas=ch.ue_antennas, compute=sta_profile,
                      cw_min=m.cw_min, cw_max=m.cw_max,
                      frame_max_bits=m.frame_max_bits,
                      t_max_s=(config.reward.t_max_sensitive_s
                               if i < s.n_sensitive
                               else config.reward.t_max_insensitive_s))
            for i in range(self.n_agents)]

        # Training workloads charged each slot, from the actual net shapes.
        hidden = list(config.training.hidden_sizes)
        batch = config.training.batch_size
        actor_flops = energy.mlp_flops([OBS_DIM] + hidden + [ACT_DIM]) * batch
        local_critic_flops = energy.mlp_flops(
            [OBS_DIM + ACT_DIM] + hidden + [1]) * batch
        joint_in = max(1, s.n_insensitive) * (OBS_DIM + ACT_DIM)
        central_critic_flops = energy.mlp_flops([joint_in] + hidden + [1]) * batch
        self.sensitive_load = energy.TrainingLoad(
            batch, actor_flops, local_critic_flops)
        self.insensitive_load = energy.TrainingLoad(
            batch, actor_flops, central_critic_flops)

        self._rng: np.random.Generator | None = None
        self._links: list[channel.LinkState] = []
        self._queues: list[mac.TxQueue] = []
        self.mac_stats = mac.ContentionStats()

    # ---------- lifecycle ----------
    def reset(self, seed=None) -> np.ndarray:
        """Place agents, then run one warm-up slot with midpoint actions.

        Passing a seed reseeds the environment stream; omitting it continues
        the current stream (fresh placement, same run).
        """
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        if self._rng is None:
            raise RuntimeError("first reset needs a seed")
        s = self.config.scenario
        positions = []
        for i in range(self.n_agents):
            if s.placement == "radial_spread" and self.n_agents > 1:
                r = s.spread_min_radius_m + (
                    s.placement_radius_m - s.spread_min_radius_m) * i / (self.n_agents - 1)
            elif s.placement == "radial_spread":
                r = s.placement_radius_m
            else:
                r = s.placement_radius_m * math.sqrt(self._rng.uniform())
            theta = self._rng.uniform(0.0, 2.0 * math.pi)
            x, y = r * math.cos(theta), r * math.sin(theta)
            positions.append(channel.Position(
                x, y, anchor=(x, y), max_radius_m=s.max_roam_radius_m))
        self._queues = [
            mac.TxQueue(0.0, self.config.mac.queue_capacity_bits)
            for _ in range(self.n_agents)]
        self._sample_links(positions)
        default = np.zeros((self.n_agents, ACT_DIM))
        decoded = [decode_action(default[i], self.specs[i],
                                 self.server_profile.f_max_hz)
                   for i in range(self.n_agents)]
        outcomes = self._run_mac(decoded)
        return self._observations(outcomes)

    def step(self, raw_actions) -> StepResult:
        """Advance one slot under the given per-agent raw actions."""
        raw = np.asarray(raw_actions, dtype=float)
        if raw.shape != (self.n_agents, ACT_DIM):
            raise ValueError(
                f"expected actions of shape {(self.n_agents, ACT_DIM)}")
        if not np.isfinite(raw).all():
            raise ValueError("non-finite action received (poisoned policy?)")
        if self._rng is None or not self._links:
            raise RuntimeError("call reset before step")

        cfg = self.config
        decoded = [decode_action(raw[i], self.specs[i],
                                 self.server_profile.f_max_hz)
                   for i in range(self.n_agents)]

        s = cfg.scenario
        positions = [channel.mobility_step(l.position, s.speed_mps,
                                           s.slot_duration_s, self._rng)
                     for l in self._links]
        self._sample_links(positions)
        outcomes = self._run_mac(decoded)

        throughput = np.array([mac.throughput(o.delivered_bits, o.slot_len_s)
                               for o in outcomes])
        costs = [self._compute_cost(spec, act)
                 for spec, act in zip(self.specs, decoded)]
        energies = np.array([c.energy_j for c in costs])
        latencies = np.array([c.latency_s for c in costs])

        rewards = np.zeros(self.n_agents)
        for i, spec in enumerate(self.specs):
            scale = (cfg.reward.scheme1_ratio_scale if cfg.reward.scheme == 1
                     else cfg.reward.scheme2_ratio_scale)
            rewards[i] = reward(throughput[i], energies[i], latencies[i],
                                spec.privacy_sensitive, cfg.reward.scheme,
                                spec.t_max_s, scale)
            if cfg.reward.scheme == 2 and latencies[i] > spec.t_max_s:
                assert rewards[i] < 0, "latency-cap penalty must be negative"
        assert np.all(np.abs(rewards) < 1.0), "rewards must stay inside (-1, 1)"

        obs = self._observations(outcomes)
        info = {
            "throughput_mbps": throughput / 1e6,
            "latency_s": latencies,
            "energy_j": energies,
            "delivered_bits": np.array([o.delivered_bits for o in outcomes]),
            "snr_db": np.array([10.0 * math.log10(l.snr_linear)
                                for l in self._links]),
            "rate_bps": np.array([l.rate_bps for l in self._links]),
            "violations": np.array([latencies[i] > self.specs[i].t_max_s
                                    for i in range(self.n_agents)]),
            "system_throughput_mbps": float(throughput.sum() / 1e6),
            "system_energy_j": energy.system_energy(
                costs, [s.privacy_sensitive for s in self.specs]),
            "mean_latency_s": float(np.mean(np.minimum(latencies, LATENCY_CAP_S))),
        }
        return StepResult(obs, rewards, info)

    # ---------- internals ----------
    def _sample_links(self, positions):
        ch = self.config.channel
        links = []
        for i, pos in enumerate(positions):
            shadowing = (self._rng.normal(0.0, self.pl_params.shadowing_sigma_db)
                         if self.pl_params.shadowing_sigma_db > 0 else 0.0)
            dist = max(pos.distance_to(0.0, 0.0),
                       self.pl_params.reference_distance_m)
            pl_db = channel.path_loss(self.pl_params, dist, shadowing)
            snr_lin = channel.snr(self.radio, pl_db)
            rate = channel.shannon_rate(self.radio.bandwidth_hz, snr_lin)
            fading = channel.sample_channel_matrix(
                ch.bs_antennas, self.specs[i].antennas, self._rng)
            links.append(channel.LinkState(pos, shadowing, fading, snr_lin, rate))
        self._links = links

    def _run_mac(self, decoded):
        for q in self._queues:
            q.refill()
        actions = [mac.MacAction(d.cw, min(d.frame_bits, self.specs[i].frame_max_bits))
                   for i, d in enumerate(decoded)]
        rates = [l.rate_bps for l in self._links]
        outcomes = mac.simulate_slot(actions, rates, self._queues, self.slot_s,
                                     self._rng,
                                     mini_slot_s=self.config.mac.mini_slot_s,
                                     stats=self.mac_stats)
        for o, r in zip(outcomes, rates):
            assert o.delivered_bits <= r * o.slot_len_s * (1 + 1e-9), \
                "delivered bits exceed the Shannon limit for the slot"
        return outcomes

    @staticmethod
    def _capped(fn, *args) -> energy.EnergyLatency:
        # zero-frequency work never finishes: charge no energy, cap the latency
        try:
            return fn(*args)
        except energy.InfeasibleFrequencyError:
            return energy.EnergyLatency(0.0, LATENCY_CAP_S)

    def _compute_cost(self, spec: AgentSpec, act: DecodedAction) -> energy.EnergyLatency:
        """Per-slot energy/latency; server terms belong to the owning agent."""
        if spec.privacy_sensitive:
            total = self._capped(energy.sensitive_local,
                                 spec.compute.at_frequency(act.client_freq_hz),
                                 self.sensitive_load)
        else:
            local_profile = spec.compute.at_frequency(act.client_freq_hz)
            server_profile = self.server_profile.at_frequency(act.server_freq_hz)
            total = self._capped(energy.actor_local, local_profile,
                                 self.insensitive_load)
            total = total + self._capped(energy.nn_training_cost, local_profile,
                                         self.insensitive_load.flops_actor)
            total = total + self._capped(energy.critic_server_cost,
                                         server_profile, spec.compute.state_bits,
                                         self.insensitive_load.batch_size,
                                         server_profile.task_bits)
            total = total + self._capped(energy.nn_training_cost, server_profile,
                                         self.insensitive_load.flops_critic)
        if total.latency_s > LATENCY_CAP_S:
            total = energy.EnergyLatency(total.energy_j, LATENCY_CAP_S)
        return total

    def _observations(self, outcomes) -> np.ndarray:
        obs = np.zeros((self.n_agents, OBS_DIM))
        for i, (link, out) in enumerate(zip(self._links, outcomes)):
            o = Observation(10.0 * math.log10(link.snr_linear),
                            mac.packet_loss_rate(out),
                            mac.idle_fraction(out))
            obs[i] = o.to_array()
        return obs
