"""Experiment configuration: typed sections, defaults, YAML round-trip, validation.

Defaults describe the reference scenario: one access point serving eight
privacy-sensitive and eight privacy-insensitive stations scattered in a 7.5 m
disc, 5 GHz / 80 MHz radio, 200 ms interaction slots, and the training
hyperparameters listed in the README.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml


class ConfigError(ValueError):
    """Invalid experiment configuration; the message lists every violation."""


@dataclass
class ScenarioConfig:
    n_sensitive: int = 8
    n_insensitive: int = 8
    placement: str = "uniform_disc"  # or "radial_spread"
    placement_radius_m: float = 7.5
    spread_min_radius_m: float = 1.0  # inner radius for radial_spread
    max_roam_radius_m: float = 20.0
    speed_mps: float = 1.0
    slot_duration_s: float = 0.2


@dataclass
class ChannelParamsConfig:
    carrier_frequency_hz: float = 5.0e9
    reference_distance_m: float = 1.0
    path_loss_exponent: float = 3.0
    shadowing_sigma_db: float = 0.0
    tx_gain_dbi: float = 3.0
    rx_gain_dbi: float = 3.0
    tx_power_dbm: float = 20.0
    noise_psd_dbm_hz: float = -174.0
    bandwidth_hz: float = 80.0e6
    bs_antennas: int = 4
    ue_antennas: int = 2


@dataclass
class MacConfig:
    cw_min: int = 15
    cw_max: int = 1023
    frame_max_bits: float = 1_048_576.0
    queue_capacity_bits: float = 2.5e8
    mini_slot_s: float = 9e-6


@dataclass
class ComputeConfig:
    kappa: float = 1e-26
    cycles_per_bit: float = 330.0
    flops_per_cycle: float = 8.0
    sta_f_max_hz: float = 5.0e8
    ap_f_max_hz: float = 2.0e9
    grad_bits: float = 1.0e3
    state_bits: float = 1.0e3
    task_bits: float = 3.2e5
    server_task_bits: float = 3.2e5


@dataclass
class RewardConfig:
    scheme: int = 2
    t_max_sensitive_s: float = 0.5
    t_max_insensitive_s: float = 0.5
    # Ratio prefactors applied before arctan squashing. Scheme 2's ratio is
    # bits-per-joule (~1e7 here), rescaled so the squash stays informative;
    # scheme 1's throughput-over-latency ratio is left in raw SI units.
    scheme1_ratio_scale: float = 1.0
    scheme2_ratio_scale: float = 1.0e-7


@dataclass
class TrainingConfig:
    discount: float = 0.1
    soft_update_coef: float = 0.1
    batch_size: int = 8
    buffer_capacity: int = 100
    lr_actor: float = 0.002
    lr_critic: float = 0.02
    grad_clip: float = 1.0
    hidden_sizes: list = field(default_factory=lambda: [8, 8, 8])


@dataclass
class NoiseConfig:
    kind: str = "cubic"
    rate: float = 0.02
    initial_scale: float = 1.0
    floor: float = 0.0


@dataclass
class FederationConfig:
    strategy: str = "fedwgt"  # fedwgt | fedavg | none


@dataclass
class RunConfig:
    episodes: int = 120
    steps_per_episode: int = 50
    seed: int = 0


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    channel: ChannelParamsConfig = field(default_factory=ChannelParamsConfig)
    mac: MacConfig = field(default_factory=MacConfig)
    compute: ComputeConfig = field(default_factory=ComputeConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    federation: FederationConfig = field(default_factory=FederationConfig)
    run: RunConfig = field(default_factory=RunConfig)

    # ---------- validation ----------
    def violations(self) -> list[str]:
        v = []
        s, ch, mac, comp = self.scenario, self.channel, self.mac, self.compute
        if s.n_sensitive < 0 or s.n_insensitive < 0:
            v.append("scenario: agent counts must be >= 0")
        if s.n_sensitive + s.n_insensitive < 1:
            v.append("scenario: need at least one agent")
        if s.placement not in ("uniform_disc", "radial_spread"):
            v.append(f"scenario: unknown placement {s.placement!r}")
        if s.placement_radius_m <= 0 or s.max_roam_radius_m <= 0:
            v.append("scenario: radii must be positive")
        if s.speed_mps < 0:
            v.append("scenario: speed must be >= 0")
        if s.slot_duration_s <= 0:
            v.append("scenario: slot duration must be positive")
        if ch.carrier_frequency_hz <= 0 or ch.bandwidth_hz <= 0:
            v.append("channel: frequency and bandwidth must be positive")
        if ch.path_loss_exponent < 1:
            v.append("channel: path loss exponent must be >= 1")
        if ch.shadowing_sigma_db < 0:
            v.append("channel: shadowing sigma must be >= 0")
        if not 1 <= ch.ue_antennas <= ch.bs_antennas:
            v.append("channel: need 1 <= device antennas <= base-station antennas")
        if not 1 <= mac.cw_min <= mac.cw_max:
            v.append("mac: need 1 <= cw_min <= cw_max")
        if mac.frame_max_bits <= 0 or mac.queue_capacity_bits <= 0:
            v.append("mac: frame and queue limits must be positive")
        if mac.mini_slot_s <= 0:
            v.append("mac: mini-slot must be positive")
        if min(comp.kappa, comp.cycles_per_bit, comp.flops_per_cycle,
               comp.sta_f_max_hz, comp.ap_f_max_hz) <= 0:
            v.append("compute: CPU constants must be positive")
        if min(comp.grad_bits, comp.state_bits, comp.task_bits,
               comp.server_task_bits) < 0:
            v.append("compute: workload sizes must be >= 0")
        if self.reward.scheme not in (1, 2):
            v.append("reward: scheme must be 1 or 2")
        if min(self.reward.t_max_sensitive_s, self.reward.t_max_insensitive_s) <= 0:
            v.append("reward: latency caps must be positive")
        t = self.training
        if not 0 <= t.discount < 1:
            v.append("training: discount must lie in [0, 1)")
        if not 0 < t.soft_update_coef <= 1:
            v.append("training: soft update coefficient must lie in (0, 1]")
        if t.batch_size < 1 or t.buffer_capacity < t.batch_size:
            v.append("training: buffer must hold at least one batch")
        if min(t.lr_actor, t.lr_critic) <= 0:
            v.append("training: learning rates must be positive")
        if self.noise.kind not in ("linear", "cubic"):
            v.append("noise: kind must be linear or cubic")
        if self.noise.rate <= 0 or self.noise.initial_scale <= 0:
            v.append("noise: rate and initial scale must be positive")
        if self.noise.floor < 0:
            v.append("noise: floor must be >= 0")
        if self.federation.strategy not in ("fedwgt", "fedavg", "none"):
            v.append("federation: strategy must be fedwgt, fedavg, or none")
        if self.run.episodes < 1 or self.run.steps_per_episode < 1:
            v.append("run: episodes and steps must be >= 1")
        return v

    def validate(self) -> "ExperimentConfig":
        problems = self.violations()
        if problems:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))
        return self

    # ---------- (de)serialization ----------
    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        cfg = cls()
        for section_name, section in data.items():
            if not hasattr(cfg, section_name):
                raise ConfigError(f"unknown config section {section_name!r}")
            target = getattr(cfg, section_name)
            for key, val in (section or {}).items():
                if not hasattr(target, key):
                    raise ConfigError(
                        f"unknown key {key!r} in section {section_name!r}")
                setattr(target, key, val)
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        return cls.from_dict(data)

    def save(self, path):
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=True)

    def replace_value(self, dotted_key: str, value) -> "ExperimentConfig":
        """Return a deep copy with one 'section.key' overridden."""
        data = self.to_dict()
        section, key = dotted_key.split(".", 1)
        if section not in data or key not in data[section]:
            raise ConfigError(f"unknown config key {dotted_key!r}")
        data[section][key] = value
        return ExperimentConfig.from_dict(data)
