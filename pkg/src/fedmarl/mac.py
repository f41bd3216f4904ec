"""Slotted random-access MAC with per-agent contention windows and frame aggregation.

Each interaction slot is divided into access rounds. In a round, every
backlogged agent transmits with probability 2/(cw+1) (single-stage backoff
approximation). Exactly one transmitter delivers min(frame, backlog) bits at
its PHY rate; two or more collide and the channel stays busy for the longest
colliding frame; zero transmitters idle for one mini-slot. Rounds repeat until
the slot is exhausted. A round never takes less than one mini-slot, which
bounds the round count and stands in for preamble/ACK overhead.

Rounds are simulated in vectorized blocks for speed; per-agent accounting is
exact, including the truncated frame at the end of the slot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MINI_SLOT_S = 9e-6  # standard slot time, used for idle rounds and airtime floors


@dataclass(frozen=True)
class MacAction:
    """Contention window (slots) and aggregated frame length (bits)."""

    cw: int
    frame_bits: float

    def __post_init__(self):
        if self.cw < 1:
            raise ValueError("contention window must be >= 1")
        if self.frame_bits < 0:
            raise ValueError("frame length must be >= 0")


@dataclass
class TxQueue:
    """Bounded transmit backlog in bits."""

    backlog_bits: float
    capacity_bits: float

    def __post_init__(self):
        if not 0 <= self.backlog_bits <= self.capacity_bits:
            raise ValueError("backlog must lie in [0, capacity]")

    def refill(self):
        """Full-buffer traffic: top the queue back up to capacity."""
        self.backlog_bits = self.capacity_bits


@dataclass(frozen=True)
class SlotOutcome:
    """Per-agent accounting for one slot."""

    delivered_bits: float
    frames_sent: int
    frames_acked: int
    busy_time_s: float
    slot_len_s: float

    def __post_init__(self):
        if self.frames_acked > self.frames_sent:
            raise ValueError("acked frames cannot exceed sent frames")
        if not 0 <= self.busy_time_s <= self.slot_len_s * (1 + 1e-9):
            raise ValueError("busy time must lie in [0, slot length]")


@dataclass
class ContentionStats:
    """Aggregate round counters, accumulated across simulate_slot calls."""

    rounds: int = 0
    idle_rounds: int = 0
    successes: int = 0
    collisions: int = 0
    collision_tx: int = 0
    per_agent_collisions: np.ndarray = field(default=None)  # type: ignore[arg-type]


def access_probability(cw: int | np.ndarray) -> float | np.ndarray:
    """Per-round transmission probability 2/(cw+1)."""
    return 2.0 / (np.asarray(cw, dtype=float) + 1.0)


def simulate_slot(actions, rates_bps, queues, slot_len_s, rng,
                  mini_slot_s: float = MINI_SLOT_S,
                  stats: ContentionStats | None = None,
                  block_rounds: int = 512) -> list[SlotOutcome]:
    """Run one contention slot and return per-agent outcomes.

    Queues are drained in place by delivered bits only (collided frames return
    to the queue). Per agent, delivered bits never exceed rate * slot length:
    every delivered bit is covered by that agent's own airtime.
    """
    n = len(actions)
    if n == 0:
        raise ValueError("need at least one agent")
    if not (len(rates_bps) == len(queues) == n):
        raise ValueError("actions, rates and queues must align")
    if slot_len_s <= 0:
        raise ValueError("slot length must be positive")

    rate = np.asarray(rates_bps, dtype=float)
    frame = np.array([a.frame_bits for a in actions], dtype=float)
    p = access_probability(np.array([a.cw for a in actions]))
    backlog = np.array([q.backlog_bits for q in queues], dtype=float)
    start_backlog = backlog.copy()

    delivered = np.zeros(n)
    sent = np.zeros(n, dtype=int)
    acked = np.zeros(n, dtype=int)
    busy = np.zeros(n)
    coll_per_agent = np.zeros(n, dtype=int)
    n_rounds = n_idle = n_succ = n_coll = n_coll_tx = 0

    t = 0.0
    eps = slot_len_s * 1e-12
    while t < slot_len_s - eps:
        live = (backlog > 0) & (frame > 0) & (rate > 0)
        if not live.any():
            break  # nothing to send; the channel stays idle to the slot end
        # Own airtime per agent, assuming a full frame is available; agents
        # whose backlog runs below a frame are settled at the block boundary.
        airtime = np.where(live, np.maximum(
            np.divide(frame, rate, out=np.full(n, np.inf), where=rate > 0),
            mini_slot_s), 0.0)
        p_live = np.where(live, p, 0.0)

        tx = rng.random((block_rounds, n)) < p_live
        counts = tx.sum(axis=1)
        is_succ = counts == 1
        is_coll = counts >= 2
        # Channel occupancy per round: longest transmitted frame, or a
        # mini-slot when idle.
        round_dt = np.where(counts == 0, mini_slot_s,
                            (tx * airtime).max(axis=1))
        cum_t = np.cumsum(round_dt)
        # Bits each agent would have delivered after each round.
        succ_tx = tx & is_succ[:, None]
        cum_bits = np.cumsum(succ_tx * frame, axis=0)

        over_time = cum_t > (slot_len_s - t)
        over_bits = (cum_bits > backlog[None, :]).any(axis=1)
        stop_idx = block_rounds
        cuts = np.flatnonzero(over_time | over_bits)
        if cuts.size:
            stop_idx = int(cuts[0])

        if stop_idx > 0:
            sl = slice(0, stop_idx)
            t += float(cum_t[stop_idx - 1])
            n_rounds += stop_idx
            n_idle += int((counts[sl] == 0).sum())
            n_succ += int(is_succ[sl].sum())
            n_coll += int(is_coll[sl].sum())
            coll_tx = tx[sl] & is_coll[sl, None]
            n_coll_tx += int(coll_tx.sum())
            coll_per_agent += coll_tx.sum(axis=0)
            succ_counts = succ_tx[sl].sum(axis=0)
            sent += succ_counts + coll_tx.sum(axis=0)
            acked += succ_counts
            delivered += succ_counts * frame
            backlog -= succ_counts * frame
            busy += (tx[sl] * airtime).sum(axis=0)

        if stop_idx == block_rounds:
            continue

        # Settle the boundary round in scalar form.
        row = tx[stop_idx]
        remaining = slot_len_s - t
        if remaining <= eps:
            break
        n_rounds += 1
        c = int(row.sum())
        if c == 0:
            n_idle += 1
            t += min(mini_slot_s, remaining)
        elif c == 1:
            i = int(np.flatnonzero(row)[0])
            tx_bits = min(frame[i], backlog[i])
            own = max(tx_bits / rate[i], mini_slot_s)
            used = min(own, remaining)
            bits = min(tx_bits, rate[i] * used)
            n_succ += 1
            sent[i] += 1
            acked[i] += 1
            delivered[i] += bits
            backlog[i] -= bits
            busy[i] += used
            t += used
        else:
            idx = np.flatnonzero(row)
            n_coll += 1
            n_coll_tx += c
            used_max = 0.0
            for i in idx:
                own = max(min(frame[i], backlog[i]) / rate[i], mini_slot_s)
                used = min(own, remaining)
                sent[i] += 1
                coll_per_agent[i] += 1
                busy[i] += used
                used_max = max(used_max, used)
            t += used_max

    for i, q in enumerate(queues):
        q.backlog_bits = float(start_backlog[i] - delivered[i])

    if stats is not None:
        stats.rounds += n_rounds
        stats.idle_rounds += n_idle
        stats.successes += n_succ
        stats.collisions += n_coll
        stats.collision_tx += n_coll_tx
        if stats.per_agent_collisions is None:
            stats.per_agent_collisions = np.zeros(n, dtype=int)
        stats.per_agent_collisions += coll_per_agent

    return [SlotOutcome(float(delivered[i]), int(sent[i]), int(acked[i]),
                        float(min(busy[i], slot_len_s)), float(slot_len_s))
            for i in range(n)]


def throughput(delivered_bits: float, slot_len_s: float) -> float:
    """Delivered bits over the slot duration, in bits/s."""
    if slot_len_s <= 0:
        raise ValueError("slot length must be positive")
    return delivered_bits / slot_len_s


def packet_loss_rate(outcome: SlotOutcome) -> float:
    """(sent - acked) / sent, or 0 when nothing was sent."""
    if outcome.frames_sent == 0:
        return 0.0
    return (outcome.frames_sent - outcome.frames_acked) / outcome.frames_sent


def idle_fraction(outcome: SlotOutcome) -> float:
    """Share of the slot this agent spent not transmitting."""
    if outcome.slot_len_s <= 0:
        raise ValueError("slot length must be positive")
    return (outcome.slot_len_s - outcome.busy_time_s) / outcome.slot_len_s
