"""GAN gradients and the three update rules of the distributed framework.

* ``grad_theta`` / ``grad_phi``: batch-mean gradients of the minimax value.
* ``device_update``: local discriminator ascent on one device's shard.
* ``average_discriminators``: sample-size weighted mean at the server.
* ``server_generator_update``: generator descent against a fixed discriminator.

The generator loss is the original saturating ``log(1 - D(G(z)))`` form.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from dgan import nn
from dgan.rng import generator


@dataclass(frozen=True)
class GanShape:
    generator: nn.MlpSpec
    discriminator: nn.MlpSpec
    noise_dim: int

    def __post_init__(self):
        g, d = self.generator, self.discriminator
        if g.input_dim != self.noise_dim:
            raise ValueError(f"generator input dim {g.input_dim} != noise_dim {self.noise_dim}")
        if g.output_dim != d.input_dim:
            raise ValueError("generator output dim must equal discriminator input dim")
        if d.output_dim != 1 or d.output_activation != "sigmoid":
            raise ValueError("discriminator must have a single sigmoid output")

    @property
    def data_dim(self) -> int:
        return self.generator.output_dim

    @property
    def theta_size(self) -> int:
        return nn.parameter_count(self.generator)

    @property
    def phi_size(self) -> int:
        return nn.parameter_count(self.discriminator)


@dataclass(frozen=True)
class GanModel:
    generator: nn.Mlp
    discriminator: nn.Mlp
    noise_dim: int

    @property
    def shape(self) -> GanShape:
        return GanShape(self.generator.spec, self.discriminator.spec, self.noise_dim)

    @property
    def theta(self) -> np.ndarray:
        return self.generator.params

    @property
    def phi(self) -> np.ndarray:
        return self.discriminator.params


def init_gan(shape: GanShape, seed: int) -> GanModel:
    g = nn.init_mlp(shape.generator, seed)
    d = nn.init_mlp(shape.discriminator, seed ^ 0x5DEECE66D)
    return GanModel(g, d, shape.noise_dim)


@dataclass(frozen=True)
class NoiseBatch:
    samples: np.ndarray
    source_seed: int
    stream_offset: int


@dataclass(frozen=True)
class DataBatch:
    samples: np.ndarray


def make_noise(seed: int, offset: int, count: int, dim: int) -> NoiseBatch:
    """Standard-normal noise; identical for identical ``(seed, offset, count, dim)``."""
    z = generator(seed, offset).standard_normal((count, dim))
    return NoiseBatch(z, seed, offset)


def concat_noise(batches: Sequence[NoiseBatch]) -> NoiseBatch:
    z = np.concatenate([b.samples for b in batches], axis=0)
    first = batches[0]
    return NoiseBatch(z, first.source_seed, first.stream_offset)


def sample_batch(points: np.ndarray, seed: int, offset: int, m: int) -> DataBatch:
    """Draw ``m`` rows of ``points`` uniformly with replacement."""
    n = len(points)
    if n == 0:
        raise ValueError("empty local dataset")
    idx = generator(seed, offset).integers(0, n, size=m)
    return DataBatch(points[idx])


def _z(z) -> np.ndarray:
    return z.samples if isinstance(z, NoiseBatch) else np.asarray(z, dtype=np.float64)


def _x(x) -> np.ndarray:
    return x.samples if isinstance(x, DataBatch) else np.asarray(x, dtype=np.float64)


def _check_finite(g: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(g)):
        raise nn.NonFiniteError(f"non-finite {what} gradient")
    return g


def generator_loss(theta, phi, z, shape: GanShape) -> float:
    """Mean of ``log(1 - D(phi, G(theta, z)))`` over the batch."""
    fake = nn.forward(nn.Mlp(shape.generator, theta), _z(z))
    p = nn.forward(nn.Mlp(shape.discriminator, phi), fake)
    return float(np.mean(np.log1p(-p)))


def real_score(phi, x, shape: GanShape) -> float:
    """Mean ``D(phi, x)`` over real points; 1/2 at the ideal equilibrium. Diagnostic only."""
    return float(np.mean(nn.forward(nn.Mlp(shape.discriminator, phi), _x(x))))


def discriminator_objective(theta, phi, z, x, shape: GanShape) -> float:
    """Mean of ``log D(x) + log(1 - D(G(z)))`` over the batch."""
    d = nn.Mlp(shape.discriminator, phi)
    fake = nn.forward(nn.Mlp(shape.generator, theta), _z(z))
    p_real = nn.forward(d, _x(x))
    p_fake = nn.forward(d, fake)
    return float(np.mean(np.log(p_real)) + np.mean(np.log1p(-p_fake)))


def grad_theta(theta, phi, z, shape: GanShape) -> np.ndarray:
    zs = _z(z)
    if zs.ndim != 2 or zs.shape[0] == 0:
        raise ValueError("noise batch must be a non-empty 2-D array")
    gen = nn.Mlp(shape.generator, theta)
    disc = nn.Mlp(shape.discriminator, phi)
    g_cache = nn._forward_cache(gen, zs)
    fake = g_cache[3][-1]
    d_cache = nn._forward_cache(disc, fake)
    p = d_cache[3][-1]
    # d/dp log(1 - p), averaged over the batch
    up = -1.0 / (1.0 - p) / zs.shape[0]
    _, dx = nn._backward_from_cache(disc, d_cache, up, need_params=False)
    g, _ = nn._backward_from_cache(gen, g_cache, dx, need_input=False)
    return _check_finite(g, "generator")


def grad_phi(theta, phi, z, x, shape: GanShape) -> np.ndarray:
    zs, xs = _z(z), _x(x)
    m = zs.shape[0]
    if m == 0 or xs.shape[0] != m:
        raise ValueError(f"noise and data batches must be equal and non-empty ({m} vs {xs.shape[0]})")
    fake = nn.forward(nn.Mlp(shape.generator, theta), zs)
    disc = nn.Mlp(shape.discriminator, phi)
    both = np.concatenate([xs, fake], axis=0)
    cache = nn._forward_cache(disc, both)
    p = cache[3][-1]
    up = np.empty_like(p)
    up[:m] = 1.0 / p[:m] / m
    up[m:] = -1.0 / (1.0 - p[m:]) / m
    g, _ = nn._backward_from_cache(disc, cache, up, need_input=False)
    return _check_finite(g, "discriminator")


def device_update(theta, phi_in, device, n_d: int, eta_d: float, shape: GanShape) -> np.ndarray:
    """Run ``n_d`` ascent steps on the device's shard with theta held fixed.

    ``device`` supplies ``shard.points``, ``noise_seed``, ``data_seed``,
    ``stream_offset`` and ``batch_size``; step ``j`` reads noise and data at
    stream position ``stream_offset + j``.
    """
    if n_d < 1:
        raise ValueError("n_d must be >= 1")
    points = device.shard.points
    if len(points) == 0:
        raise ValueError(f"device {device.device_id} has an empty local dataset")
    phi = np.asarray(phi_in, dtype=np.float64)
    m = device.batch_size
    for j in range(n_d):
        off = device.stream_offset + j
        z = make_noise(device.noise_seed, off, m, shape.noise_dim)
        x = sample_batch(points, device.data_seed, off, m)
        phi = nn.axpy_update(phi, grad_phi(theta, phi, z, x, shape), eta_d)
    return phi


def average_discriminators(contributions: Sequence[tuple[np.ndarray, int]]) -> np.ndarray:
    """Weighted mean ``sum(m_k * phi_k) / sum(m_k)`` in list order."""
    if not contributions:
        raise ValueError("no discriminator contributions (all devices excluded)")
    total = 0
    for phi_k, m_k in contributions:
        if int(m_k) < 1:
            raise ValueError(f"sample size must be positive, got {m_k}")
        total += int(m_k)
    size = np.shape(contributions[0][0])
    out = np.zeros(size)
    for phi_k, m_k in contributions:
        if np.shape(phi_k) != size:
            raise ValueError("contributions have unequal lengths")
        out += (int(m_k) / total) * np.asarray(phi_k, dtype=np.float64)
    return out


def server_generator_update(
    theta_in,
    phi,
    n_g: int,
    eta_g: float,
    M: int,
    noise_source: Callable[[int], NoiseBatch],
    shape: GanShape,
) -> np.ndarray:
    """Run ``n_g`` descent steps; ``noise_source(j)`` yields the step-j batch of ``M`` vectors."""
    if n_g < 1 or M < 1:
        raise ValueError("n_g and M must be >= 1")
    theta = np.asarray(theta_in, dtype=np.float64)
    for j in range(n_g):
        z = noise_source(j)
        if _z(z).shape[0] != M:
            raise ValueError(f"noise batch size {_z(z).shape[0]} != M={M}")
        theta = nn.axpy_update(theta, grad_theta(theta, phi, z, shape), -eta_g)
    return theta
