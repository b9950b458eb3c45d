"""Built-in numerical and protocol self-checks used by ``dgan gradcheck`` and ``dgan selftest``."""
from __future__ import annotations

import dataclasses

import numpy as np

from dgan import config as config_mod
from dgan import gan, nn, orchestrator
from dgan.rng import generator


def relative_error(a, b) -> float:
    """``max|a - b| / max(max|a|, max|b|)`` (0 when both vanish)."""
    a, b = np.asarray(a), np.asarray(b)
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(a - b)) / scale)


def random_shape(rng: np.random.Generator) -> gan.GanShape:
    nz = int(rng.integers(1, 4))
    data = int(rng.integers(1, 4))
    act = str(rng.choice(["tanh", "leaky_relu"]))
    hg = tuple(int(h) for h in rng.integers(2, 6, size=int(rng.integers(1, 3))))
    hd = tuple(int(h) for h in rng.integers(2, 6, size=int(rng.integers(1, 3))))
    g = nn.MlpSpec((nz, *hg, data), act, "identity")
    d = nn.MlpSpec((data, *hd, 1), act, "sigmoid")
    return gan.GanShape(g, d, nz)


def gradcheck(n_cases: int = 100, seed: int = 0, eps: float = 1e-5) -> dict[str, float]:
    """Max relative error of both GAN gradients against central differences."""
    worst = {"grad_theta": 0.0, "grad_phi": 0.0}
    for case in range(n_cases):
        rng = generator(seed, case)
        shape = random_shape(rng)
        theta = rng.normal(0, 0.8, shape.theta_size)
        phi = rng.normal(0, 0.8, shape.phi_size)
        m = int(rng.integers(1, 6))
        z = rng.standard_normal((m, shape.noise_dim))
        x = rng.standard_normal((m, shape.data_dim))
        g = gan.grad_theta(theta, phi, z, shape)
        fd = nn.finite_diff_grad(lambda p: gan.generator_loss(p, phi, z, shape), theta, eps)
        worst["grad_theta"] = max(worst["grad_theta"], relative_error(g, fd))
        g = gan.grad_phi(theta, phi, z, x, shape)
        fd = nn.finite_diff_grad(lambda p: gan.discriminator_objective(theta, p, z, x, shape), phi, eps)
        worst["grad_phi"] = max(worst["grad_phi"], relative_error(g, fd))
    return worst


def _tiny_config(**run) -> config_mod.ExperimentConfig:
    cfg = config_mod.ExperimentConfig()
    return dataclasses.replace(
        cfg,
        num_devices=3,
        model=dataclasses.replace(cfg.model, gen_hidden=(8,), disc_hidden=(8,)),
        train=dataclasses.replace(cfg.train, m_k=16, M=16, n_d=2, n_g=2),
        data=dataclasses.replace(cfg.data, points_per_device=50, heldout_points=100),
        run=dataclasses.replace(cfg.run, max_rounds=4, eval_every=2, eval_samples=100, **run),
    )


def selftest() -> list[tuple[str, bool, str]]:
    results = []

    errs = gradcheck(20)
    ok = max(errs.values()) < 1e-4
    results.append(("gradients match finite differences", ok, f"{errs}"))

    rng = generator(1, 0)
    phis = [rng.standard_normal(7) for _ in range(4)]
    ms = [int(m) for m in rng.integers(1, 50, 4)]
    avg = gan.average_discriminators(list(zip(phis, ms)))
    oracle = sum(m * p for m, p in zip(ms, phis)) / sum(ms)
    results.append(("weighted averaging", relative_error(avg, oracle) < 1e-12, ""))

    for fw in config_mod.FRAMEWORKS:
        cfg = dataclasses.replace(_tiny_config(trace_messages=True), framework=fw)
        a = orchestrator.run_experiment(cfg)
        b = orchestrator.run_experiment(cfg)
        same = all(
            np.array_equal(x.cumulative_sim_time_s, y.cumulative_sim_time_s) and x.metric_value == y.metric_value
            for x, y in zip(a.logs, b.logs)
        ) and np.array_equal(a.model.theta, b.model.theta)
        results.append((f"{fw}: deterministic", same, ""))
        raw = [m for _, _, m in a.messages if isinstance(m, gan.DataBatch)]
        results.append((f"{fw}: no raw data in messages", not raw, f"{len(a.messages)} messages"))
    return results
