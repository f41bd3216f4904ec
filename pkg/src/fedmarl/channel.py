"""Log-distance propagation, Shannon rates, MIMO fading draws, and disc-bounded mobility.

All randomness flows through an explicit numpy Generator, so two calls with the
same inputs and the same generator state are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT_MPS = 299_792_458.0


@dataclass(frozen=True)
class PathLossParams:
    """Large-scale propagation constants (distances in meters, gains in dBi)."""

    carrier_frequency_hz: float
    reference_distance_m: float = 1.0
    path_loss_exponent: float = 3.0
    shadowing_sigma_db: float = 0.0
    tx_gain_dbi: float = 0.0
    rx_gain_dbi: float = 0.0

    def __post_init__(self):
        if self.carrier_frequency_hz <= 0:
            raise ValueError("carrier frequency must be positive")
        if self.reference_distance_m <= 0:
            raise ValueError("reference distance must be positive")
        if self.path_loss_exponent < 1:
            raise ValueError("path loss exponent must be >= 1")
        if self.shadowing_sigma_db < 0:
            raise ValueError("shadowing sigma must be >= 0")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT_MPS / self.carrier_frequency_hz


@dataclass(frozen=True)
class RadioParams:
    """Transmit power and noise description of one link."""

    tx_power_dbm: float
    bandwidth_hz: float
    noise_psd_dbm_hz: float = -174.0  # thermal floor at 290 K

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")


@dataclass(frozen=True)
class Position:
    """A point tethered to its initial anchor by a maximum roaming radius."""

    x: float
    y: float
    anchor: tuple[float, float]
    max_radius_m: float = 20.0

    def __post_init__(self):
        if self.max_radius_m <= 0:
            raise ValueError("max radius must be positive")
        if self.anchor_distance() > self.max_radius_m * (1 + 1e-12):
            raise ValueError("position outside its roaming disc")

    def anchor_distance(self) -> float:
        return math.hypot(self.x - self.anchor[0], self.y - self.anchor[1])

    def distance_to(self, x: float, y: float) -> float:
        return math.hypot(self.x - x, self.y - y)


@dataclass(frozen=True)
class LinkState:
    """Everything sampled for one agent's link in one slot."""

    position: Position
    shadowing_db: float
    channel: np.ndarray
    snr_linear: float
    rate_bps: float


def free_space_ref_loss(params: PathLossParams) -> float:
    """Friis loss at the reference distance: 20*log10(4*pi*d0/lambda), in dB."""
    return 20.0 * math.log10(4.0 * math.pi * params.reference_distance_m
                             / params.wavelength_m)


def path_loss(params: PathLossParams, distance_m: float,
              shadowing_db: float = 0.0) -> float:
    """Log-distance path loss with additive shadowing, net of antenna gains.

    PL(d) = PL(d0) + 10*gamma*log10(d/d0) + chi - G_tx - G_rx, all in dB.
    The shadowing term chi is supplied by the caller (one draw per link per
    slot); the model is undefined below the reference distance.
    """
    if distance_m < params.reference_distance_m:
        raise ValueError(
            f"distance {distance_m} m below reference distance "
            f"{params.reference_distance_m} m")
    return (free_space_ref_loss(params)
            + 10.0 * params.path_loss_exponent
            * math.log10(distance_m / params.reference_distance_m)
            + shadowing_db - params.tx_gain_dbi - params.rx_gain_dbi)


def snr(radio: RadioParams, path_loss_db: float) -> float:
    """Linear SNR: received power over noise power, both converted to watts.

    Received power is tx_power_dbm - path_loss_db (dBm -> W); noise power is
    the spectral density integrated over the bandwidth.
    """
    received_w = 10.0 ** ((radio.tx_power_dbm - path_loss_db - 30.0) / 10.0)
    noise_w = 10.0 ** ((radio.noise_psd_dbm_hz - 30.0) / 10.0) * radio.bandwidth_hz
    return received_w / noise_w


def shannon_rate(bandwidth_hz: float, snr_linear: float) -> float:
    """Achievable rate b*log2(1+snr) in bits/s."""
    if snr_linear < 0:
        raise ValueError("snr must be >= 0")
    return bandwidth_hz * math.log2(1.0 + snr_linear)


def sample_channel_matrix(bs_antennas: int, ue_antennas: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian fading.

    Returns a (ue_antennas, bs_antennas) matrix: rows are the device's spatial
    streams, columns the base-station antennas. E|h|^2 = 1 per entry.
    """
    if ue_antennas < 1:
        raise ValueError("device needs at least one antenna")
    if ue_antennas > bs_antennas:
        raise ValueError("device antennas cannot exceed base-station antennas")
    shape = (ue_antennas, bs_antennas)
    return (rng.standard_normal(shape)
            + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def mobility_step(pos: Position, speed_mps: float, dt_s: float,
                  rng: np.random.Generator, max_tries: int = 16) -> Position:
    """One constant-speed step in a uniformly random heading.

    Headings that would leave the roaming disc are resampled up to max_tries,
    after which the radial overshoot is reflected back inside. Speed 0 returns
    the position unchanged (no rng draw).
    """
    if speed_mps < 0:
        raise ValueError("speed must be >= 0")
    step = speed_mps * dt_s
    if step == 0:
        return pos
    ax, ay = pos.anchor
    for _ in range(max_tries):
        heading = rng.uniform(0.0, 2.0 * math.pi)
        nx = pos.x + step * math.cos(heading)
        ny = pos.y + step * math.sin(heading)
        if math.hypot(nx - ax, ny - ay) <= pos.max_radius_m:
            return Position(nx, ny, pos.anchor, pos.max_radius_m)
    # Fold the overshoot back across the boundary along the anchor ray.
    r = math.hypot(nx - ax, ny - ay)
    folded = max(0.0, 2.0 * pos.max_radius_m - r)
    scale = folded / r if r > 0 else 0.0
    return Position(ax + (nx - ax) * scale, ay + (ny - ay) * scale,
                    pos.anchor, pos.max_radius_m)
