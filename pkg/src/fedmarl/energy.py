"""CPU energy and latency accounting for local and server-side workloads.

Dynamic CPU power is kappa*f^3; bit workloads cost cycles_per_bit cycles per
bit and training workloads cost flops/(flops_per_cycle) cycles, so every cost
here satisfies energy == kappa * f^3 * latency exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


class InfeasibleFrequencyError(ValueError):
    """Raised when a nonzero workload meets a zero CPU frequency."""


@dataclass(frozen=True)
class ComputeProfile:
    """Per-node CPU constants and per-slot workload sizes.

    kappa is the effective switched capacitance; freq_hz the operating
    frequency for the slot; cycles_per_bit the cost of bit workloads;
    flops_per_cycle the throughput for training workloads. grad_bits is the
    size of one returned gradient vector, state_bits one channel-state sample,
    task_bits the computing task assigned for the slot.
    """

    kappa: float
    freq_hz: float
    f_max_hz: float
    cycles_per_bit: float
    flops_per_cycle: float
    grad_bits: float = 0.0
    state_bits: float = 0.0
    task_bits: float = 0.0

    def __post_init__(self):
        if min(self.kappa, self.cycles_per_bit, self.flops_per_cycle,
               self.f_max_hz) <= 0:
            raise ValueError("CPU constants must be positive")
        if not 0 <= self.freq_hz <= self.f_max_hz * (1 + 1e-12):
            raise ValueError("frequency must lie in [0, f_max]")
        if min(self.grad_bits, self.state_bits, self.task_bits) < 0:
            raise ValueError("workload sizes must be >= 0")

    def at_frequency(self, freq_hz: float) -> "ComputeProfile":
        return replace(self, freq_hz=freq_hz)


@dataclass(frozen=True)
class TrainingLoad:
    """Mini-batch size and per-round training flops for actor and critic."""

    batch_size: int
    flops_actor: float
    flops_critic: float

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if min(self.flops_actor, self.flops_critic) < 0:
            raise ValueError("flops must be >= 0")


@dataclass(frozen=True)
class EnergyLatency:
    energy_j: float
    latency_s: float

    def __post_init__(self):
        if self.energy_j < 0 or self.latency_s < 0:
            raise ValueError("energy and latency must be >= 0")

    def __add__(self, other: "EnergyLatency") -> "EnergyLatency":
        return EnergyLatency(self.energy_j + other.energy_j,
                             self.latency_s + other.latency_s)


ZERO_COST = EnergyLatency(0.0, 0.0)


def _bit_workload_cost(profile: ComputeProfile, work_bits: float) -> EnergyLatency:
    if work_bits == 0:
        return ZERO_COST
    if profile.freq_hz <= 0:
        raise InfeasibleFrequencyError(
            "nonzero bit workload at zero CPU frequency")
    cycles = work_bits * profile.cycles_per_bit
    return EnergyLatency(profile.kappa * cycles * profile.freq_hz ** 2,
                         cycles / profile.freq_hz)


def actor_local(profile: ComputeProfile, load: TrainingLoad) -> EnergyLatency:
    """Local observation/task processing: work = grad_bits*batch + task_bits.

    latency = work * cycles_per_bit / f; energy = kappa * work * cycles_per_bit * f^2.
    """
    work = profile.grad_bits * load.batch_size + profile.task_bits
    return _bit_workload_cost(profile, work)


def nn_training_cost(profile: ComputeProfile, flops: float) -> EnergyLatency:
    """Gradient-descent training cost: latency = flops/(f*c), energy = kappa*flops*f^2/c."""
    if flops < 0:
        raise ValueError("flops must be >= 0")
    if flops == 0:
        return ZERO_COST
    if profile.freq_hz <= 0:
        raise InfeasibleFrequencyError("nonzero training load at zero CPU frequency")
    c = profile.flops_per_cycle
    return EnergyLatency(profile.kappa * flops * profile.freq_hz ** 2 / c,
                         flops / (profile.freq_hz * c))


def critic_server_cost(server: ComputeProfile, state_bits: float,
                       batch_size: int, server_task_bits: float) -> EnergyLatency:
    """Server-side value-network data handling for one offloading client."""
    if batch_size < 0:
        raise ValueError("batch size must be >= 0")
    work = state_bits * batch_size + server_task_bits
    return _bit_workload_cost(server, work)


def sensitive_local(profile: ComputeProfile, load: TrainingLoad) -> EnergyLatency:
    """All-local cost for a privacy-sensitive node: both networks stay on-device.

    Bit workload grows to (grad_bits + state_bits)*batch + task_bits and the
    training term covers actor and critic flops together.
    """
    work = (profile.grad_bits + profile.state_bits) * load.batch_size + profile.task_bits
    compute = _bit_workload_cost(profile, work)
    training = nn_training_cost(profile, load.flops_actor + load.flops_critic)
    return compute + training


def system_energy(costs, privacy_flags=None) -> float:
    """Total energy of one slot across every agent's cost terms."""
    costs = list(costs)
    if privacy_flags is not None and len(privacy_flags) != len(costs):
        raise ValueError("privacy flags must align with costs")
    return float(sum(c.energy_j for c in costs))


def mlp_flops(layer_sizes) -> int:
    """Forward-plus-backward flops per sample for a dense net.

    2 flops per multiply-accumulate on the forward pass, backward counted as
    twice the forward: 6 * sum of consecutive layer-size products.
    """
    if len(layer_sizes) < 2:
        raise ValueError("need at least input and output layers")
    return 6 * sum(a * b for a, b in zip(layer_sizes[:-1], layer_sizes[1:]))
