"""Synthetic 2-D Gaussian mixtures and IID equal-size device partitions."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dgan.rng import generator

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MixtureSpec:
    means: tuple[tuple[float, float], ...]
    stds: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.means) == 0:
            raise ValueError("mixture needs at least one mode")
        if not (len(self.means) == len(self.stds) == len(self.weights)):
            raise ValueError("means, stds and weights must have equal length")
        if any(s <= 0 for s in self.stds):
            raise ValueError("mode std must be positive")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"weights must be a probability vector, got {self.weights}")

    @property
    def mode_array(self) -> np.ndarray:
        return np.array(self.means, dtype=np.float64)


def ring_mixture(n_modes: int = 8, radius: float = 2.0, std: float = 0.05) -> MixtureSpec:
    """``n_modes`` equally weighted Gaussians with means evenly spaced on a circle."""
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    angles = 2 * np.pi * np.arange(n_modes) / n_modes
    means = tuple((float(radius * np.cos(a)), float(radius * np.sin(a))) for a in angles)
    return MixtureSpec(means, (float(std),) * n_modes, (1.0 / n_modes,) * n_modes)


def sample_mixture(spec: MixtureSpec, n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. draws as an ``(n, 2)`` array."""
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = generator(seed, 0)
    if n == 0:
        return np.zeros((0, 2))
    comp = rng.choice(len(spec.weights), size=n, p=np.asarray(spec.weights))
    means = spec.mode_array[comp]
    stds = np.asarray(spec.stds)[comp][:, None]
    return means + stds * rng.standard_normal((n, 2))


@dataclass(frozen=True)
class DeviceShard:
    device_id: int
    points: np.ndarray
    indices: np.ndarray  # rows of the source array, the disjointness record

    @property
    def size(self) -> int:
        return len(self.points)


def partition_equal(points, K: int, seed: int) -> list[DeviceShard]:
    """Shuffle and split into ``K`` equal shards, dropping any remainder."""
    if K <= 0:
        raise ValueError(f"K must be >= 1, got {K}")
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    per = n // K
    if per * K != n:
        log.warning("dropping %d points so %d devices get equal shards", n - per * K, K)
    perm = generator(seed, 0).permutation(n)[: per * K]
    shards = []
    for k in range(K):
        idx = perm[k * per : (k + 1) * per]
        pts = points[idx]
        pts.flags.writeable = False
        shards.append(DeviceShard(k, pts, idx))
    return shards


def export_csv(shards: list[DeviceShard], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "device_id"])
        for shard in shards:
            for x, y in shard.points:
                w.writerow([repr(float(x)), repr(float(y)), shard.device_id])
