"""Link budget and transmission timing for the single-cell uplink/downlink."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from dgan.rng import generator

MIN_DISTANCE_KM = 0.001


@dataclass(frozen=True)
class NetworkConfig:
    cell_radius_km: float = 0.3
    pathloss_a: float = 128.1
    pathloss_b: float = 37.6
    noise_psd_dbm_hz: float = -174.0
    device_tx_dbm: float = 24.0
    server_tx_dbm: float = 46.0
    bandwidth_hz: float = 1e7
    bits_per_param: int = 16
    shadowing_std_db: float = 0.0
    # on-air model sizes; None means the size of the simulated networks
    phi_payload_params: Optional[int] = None
    theta_payload_params: Optional[int] = None

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth_hz must be > 0")
        if self.bits_per_param < 1:
            raise ValueError("bits_per_param must be >= 1")
        if not self.cell_radius_km > 0:
            raise ValueError("cell_radius_km must be > 0")
        if self.shadowing_std_db < 0:
            raise ValueError("shadowing_std_db must be >= 0")
        for name in ("phi_payload_params", "theta_payload_params"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class DevicePlacement:
    device_id: int
    distance_km: float


@dataclass(frozen=True)
class LinkState:
    device_id: int
    uplink_rate_bps: float
    downlink_rate_bps: float


def path_loss_db(d_km: float, a: float = 128.1, b: float = 37.6) -> float:
    if not d_km > 0:
        raise ValueError(f"distance must be positive, got {d_km}")
    return a + b * math.log10(d_km)


def link_rate_bps(tx_dbm: float, pl_db: float, bandwidth_hz: float, noise_psd_dbm_hz: float) -> float:
    """Shannon rate over the full band at the received SNR."""
    if not bandwidth_hz > 0:
        raise ValueError("bandwidth must be > 0")
    noise_dbm = noise_psd_dbm_hz + 10.0 * math.log10(bandwidth_hz)
    snr = 10.0 ** ((tx_dbm - pl_db - noise_dbm) / 10.0)
    return bandwidth_hz * math.log2(1.0 + snr)


def transmit_time_s(param_count: int, bits_per_param: int, rate_bps: float, share: float = 1.0) -> float:
    if not rate_bps > 0:
        raise ValueError("rate must be > 0")
    if not 0 < share <= 1:
        raise ValueError(f"share must be in (0, 1], got {share}")
    return (param_count * bits_per_param) / (rate_bps * share)


def place_devices(K: int, radius_km: float, seed: int) -> list[DevicePlacement]:
    """Uniform positions over the disk; only the distance to the server is kept."""
    if K < 1:
        raise ValueError("K must be >= 1")
    u = generator(seed, 0).random(K)
    r = radius_km * np.sqrt(u)
    return [DevicePlacement(k, max(float(r[k]), MIN_DISTANCE_KM)) for k in range(K)]


def link_states(
    placements: list[DevicePlacement],
    net: NetworkConfig,
    shadowing_seed: int | None = None,
    round_index: int = 0,
) -> list[LinkState]:
    """Per-device rates for one round; shadowing (if enabled) is redrawn every round."""
    K = len(placements)
    shadow = np.zeros(K)
    if net.shadowing_std_db > 0 and shadowing_seed is not None:
        shadow = net.shadowing_std_db * generator(shadowing_seed, round_index).standard_normal(K)
    out = []
    for p, s in zip(placements, shadow):
        pl = path_loss_db(p.distance_km, net.pathloss_a, net.pathloss_b) + float(s)
        out.append(
            LinkState(
                p.device_id,
                link_rate_bps(net.device_tx_dbm, pl, net.bandwidth_hz, net.noise_psd_dbm_hz),
                link_rate_bps(net.server_tx_dbm, pl, net.bandwidth_hz, net.noise_psd_dbm_hz),
            )
        )
    return out


def broadcast_time_s(param_count: int, bits_per_param: int, links: list[LinkState]) -> float:
    """Full-band broadcast, finished when the slowest receiver has the payload."""
    if param_count == 0:
        return 0.0
    worst = min(l.downlink_rate_bps for l in links)
    return transmit_time_s(param_count, bits_per_param, worst, 1.0)
