"""Independent reference implementations shared by several test modules."""
import numpy as np

from dgan import datasets, gan
from dgan import orchestrator as O
from dgan.rng import generator, stream_seed


def standalone_alternating_sgd(cfg, rounds):
    """Plain alternating GAN SGD on one data shard, written against the raw seed streams.

    Returns the (theta, phi) pair after every round.
    """
    seed = cfg.run.master_seed
    shape = O.gan_shape(cfg)
    model = gan.init_gan(shape, stream_seed(seed, "init"))
    theta, phi = model.theta, model.phi
    mix = datasets.ring_mixture(cfg.data.n_modes, cfg.data.ring_radius, cfg.data.mode_std)
    pts = datasets.sample_mixture(mix, cfg.data.points_per_device, stream_seed(seed, "data"))
    (shard,) = datasets.partition_equal(pts, 1, stream_seed(seed, "partition"))
    zs, xs = stream_seed(seed, "noise", 0), stream_seed(seed, "sample", 0)
    gs = stream_seed(seed, "server_noise")
    t = cfg.train
    trajectory = []
    for r in range(rounds):
        for j in range(t.n_d):
            z = generator(zs, r * t.n_d + j).standard_normal((t.m_k, shape.noise_dim))
            idx = generator(xs, r * t.n_d + j).integers(0, len(shard.points), t.m_k)
            phi = phi + t.eta_d * gan.grad_phi(theta, phi, z, shard.points[idx], shape)
        for j in range(t.n_g):
            z = generator(gs, r * t.n_g + j).standard_normal((t.M, shape.noise_dim))
            theta = theta - t.eta_g * gan.grad_theta(theta, phi, z, shape)
        trajectory.append((theta, phi))
    return trajectory


def weighted_average(pairs):
    """Sample-count weighted mean, accumulated in extended precision."""
    total = sum(m for _, m in pairs)
    acc = np.zeros(len(pairs[0][0]), dtype=np.longdouble)
    for v, m in pairs:
        acc += np.asarray(v, dtype=np.longdouble) * m
    return np.asarray(acc / total, dtype=float)
