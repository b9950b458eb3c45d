"""Round-based protocols for distributed GAN training on a simulated clock.

Four frameworks share one environment (dataset, placements, links, seeds):

``proposed_parallel``
    Devices update local discriminators from ``(theta_t, phi_t)`` while the
    server concurrently updates the generator against ``phi_t`` using the
    noise the devices announced. Then upload, average, broadcast both.
``proposed_serial``
    Devices update and upload, the server averages into ``phi_{t+1}``, then
    trains the generator against ``phi_{t+1}``. ``phi_{t+1}`` is broadcast
    while the generator trains; ``theta_{t+1}`` follows.
``fedgan``
    Each device trains both networks locally; the server averages both.
``centralized``
    One node holds all data and alternates discriminator and generator steps.

Devices and server exchange only the message types defined below; raw data
never leaves a :class:`DeviceState`.
"""
from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from dgan import datasets, gan, metrics, net, nn, scheduler
from dgan.config import ExperimentConfig, validate
from dgan.rng import generator, stream_seed

log = logging.getLogger(__name__)

PHASES = ("device_compute", "uplink", "averaging", "server_compute", "broadcast_phi", "broadcast_theta")


class TrainingDiverged(RuntimeError):
    def __init__(self, round_index: int, cause: Exception):
        super().__init__(f"non-finite parameters in round {round_index}: {cause}")
        self.round_index = round_index


# -- messages -------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleSignal:
    round_index: int
    device_id: int
    share: float


@dataclass(frozen=True)
class SeedAnnouncement:
    device_id: int
    seed: int
    stream_offset: int
    batch_size: int


@dataclass(frozen=True)
class DiscriminatorUpload:
    device_id: int
    phi: np.ndarray
    m_k: int


@dataclass(frozen=True)
class ModelUpload:
    """FedGAN upload: both local networks."""

    device_id: int
    theta: np.ndarray
    phi: np.ndarray
    m_k: int


@dataclass(frozen=True)
class GlobalBroadcast:
    phi: Optional[np.ndarray] = None
    theta: Optional[np.ndarray] = None


Message = Union[ScheduleSignal, SeedAnnouncement, DiscriminatorUpload, ModelUpload, GlobalBroadcast]
MESSAGE_TYPES = (ScheduleSignal, SeedAnnouncement, DiscriminatorUpload, ModelUpload, GlobalBroadcast)


def payload_params(msg: Message, phi_params: Optional[int] = None, theta_params: Optional[int] = None) -> int:
    """Number of model parameters carried (control messages carry none).

    ``phi_params``/``theta_params`` replace the true vector lengths when the
    on-air sizes are emulated.
    """
    def n(vec, override):
        if vec is None:
            return 0
        return vec.size if override is None else override

    if isinstance(msg, DiscriminatorUpload):
        return n(msg.phi, phi_params)
    if isinstance(msg, ModelUpload):
        return n(msg.theta, theta_params) + n(msg.phi, phi_params)
    if isinstance(msg, GlobalBroadcast):
        return n(msg.phi, phi_params) + n(msg.theta, theta_params)
    return 0


class MessageLog:
    """Counts uplink/downlink bits; keeps the messages themselves when tracing."""

    def __init__(self, bits_per_param: int, keep: bool = False,
                 phi_params: Optional[int] = None, theta_params: Optional[int] = None):
        self.bits_per_param = bits_per_param
        self.keep = keep
        self.phi_params = phi_params
        self.theta_params = theta_params
        self.messages: list[tuple[int, str, Message]] = []
        self.uplink_bits = 0
        self.downlink_bits = 0

    def send(self, round_index: int, direction: str, msg: Message) -> Message:
        if not isinstance(msg, MESSAGE_TYPES):
            raise TypeError(f"{type(msg).__name__} is not a protocol message")
        bits = payload_params(msg, self.phi_params, self.theta_params) * self.bits_per_param
        if direction == "up":
            self.uplink_bits += bits
        else:
            self.downlink_bits += bits
        if self.keep:
            self.messages.append((round_index, direction, msg))
        return msg

    def take_bits(self) -> tuple[int, int]:
        up, down = self.uplink_bits, self.downlink_bits
        self.uplink_bits = self.downlink_bits = 0
        return up, down


# -- state ----------------------------------------------------------------


@dataclass(frozen=True)
class DeviceState:
    device_id: int
    shard: datasets.DeviceShard
    phi_local: np.ndarray
    theta_view: np.ndarray
    noise_seed: int
    data_seed: int
    stream_offset: int
    batch_size: int
    compute_s_per_step: float
    failed_this_round: bool = False


@dataclass(frozen=True)
class ServerState:
    theta: np.ndarray
    phi_global: np.ndarray
    generator_batch_M: int
    n_g: int
    n_d: int
    eta_g: float
    eta_d: float
    round_index: int = 0
    noise_seed: int = 0
    noise_offset: int = 0
    compute_s_per_step: float = 0.005


@dataclass
class RoundLog:
    round_index: int
    scheduled: tuple[int, ...]
    excluded: tuple[int, ...]
    phase_durations_s: dict[str, float]
    round_duration_s: float
    cumulative_sim_time_s: float = 0.0
    uplink_bits: int = 0
    downlink_bits: int = 0
    aborted: bool = False
    metric_value: Optional[float] = None
    mode_coverage: Optional[int] = None
    high_quality_fraction: Optional[float] = None
    disc_real_mean: Optional[float] = None


@dataclass
class Environment:
    """Everything a round needs besides the evolving server/device states."""

    shape: gan.GanShape
    net: net.NetworkConfig
    placements: list[net.DevicePlacement]
    policy: str
    ratio: float
    shadowing_seed: int
    failure_seed: int
    p_fail: float = 0.0
    bus: MessageLog = None
    pf: Optional[scheduler.ProportionalFair] = None
    workers: int = 1
    # centralized framework only
    pooled_points: Optional[np.ndarray] = None
    central_seed: int = 0
    _pool: Optional[ThreadPoolExecutor] = field(default=None, repr=False)

    def __post_init__(self):
        if self.bus is None:
            self.bus = MessageLog(self.net.bits_per_param, False, self.net.phi_payload_params,
                                  self.net.theta_payload_params)

    @property
    def K(self) -> int:
        return len(self.placements)

    @property
    def phi_wire(self) -> int:
        return self.net.phi_payload_params or self.shape.phi_size

    @property
    def theta_wire(self) -> int:
        return self.net.theta_payload_params or self.shape.theta_size

    def map(self, fn, items):
        items = list(items)
        if self.workers <= 1 or len(items) <= 1:
            return [fn(x) for x in items]
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.workers)
        # results come back in submission order, so reductions stay ordered by device id
        return list(self._pool.map(fn, items))

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


def round_duration(kind: str, device_phase: float, server_compute: float, bcast_phi: float, bcast_theta: float,
                   averaging: float = 0.0) -> float:
    """Composition rule for one round.

    ``device_phase`` is the slowest device's compute + upload time.
    """
    if kind == "proposed_parallel":
        return max(device_phase, server_compute) + averaging + bcast_phi + bcast_theta
    if kind == "proposed_serial":
        return device_phase + averaging + max(server_compute, bcast_phi) + bcast_theta
    if kind in ("fedgan", "centralized"):
        return device_phase + averaging + server_compute + bcast_phi + bcast_theta
    raise ValueError(f"unknown framework {kind!r}")


# -- shared round steps ---------------------------------------------------


def _schedule(server: ServerState, env: Environment):
    t = server.round_index
    links = net.link_states(env.placements, env.net, env.shadowing_seed, t)
    if env.policy == "all":
        decision = scheduler.schedule_all(env.K, t)
    elif env.policy == "round_robin":
        decision = scheduler.round_robin(env.K, t, scheduler.n_scheduled(env.K, env.ratio))
    elif env.policy == "best_channel":
        decision = scheduler.best_channel(links, env.ratio, t)
    elif env.policy == "proportional_fair":
        decision = scheduler.proportional_fair(links, env.pf, env.ratio, t)
    else:
        raise ValueError(f"unknown scheduler policy {env.policy!r}")
    share = 1.0 / len(decision.scheduled)
    for k in decision.scheduled:
        env.bus.send(t, "down", ScheduleSignal(t, k, share))
    u = generator(env.failure_seed, t).random(env.K) if env.p_fail > 0 else np.ones(env.K)
    failed = tuple(sorted(k for k in decision.scheduled if u[k] < env.p_fail))
    active = tuple(sorted(k for k in decision.scheduled if k not in failed))
    return links, decision, share, failed, active


def _device_phase(active, links, share, n_params, steps, devices, env) -> tuple[float, float, float]:
    """Return (slowest compute + upload, its compute part, its upload part)."""
    best = (0.0, 0.0, 0.0)
    for k in active:
        comp = steps * devices[k].compute_s_per_step
        up = net.transmit_time_s(n_params, env.net.bits_per_param, links[k].uplink_rate_bps, share)
        if comp + up > best[0]:
            best = (comp + up, comp, up)
    return best


def _aborted(server, devices, env, decision, failed) -> tuple[ServerState, list[DeviceState], RoundLog]:
    # every scheduled device dropped out; the server waits out the compute deadline
    t = server.round_index
    wait = max(server.n_d * devices[k].compute_s_per_step for k in decision.scheduled)
    phases = dict.fromkeys(PHASES, 0.0)
    phases["device_compute"] = wait
    log.info("round %d aborted: all scheduled devices failed", t)
    up, down = env.bus.take_bits()
    entry = RoundLog(t, decision.scheduled, failed, phases, wait, uplink_bits=up, downlink_bits=down, aborted=True)
    return dataclasses.replace(server, round_index=t + 1), devices, entry


def _local_discriminators(server, devices, active, env, theta_key="theta_view"):
    shape = env.shape

    def work(k):
        d = devices[k]
        return gan.device_update(getattr(d, theta_key), d.phi_local, d, server.n_d, server.eta_d, shape)

    return env.map(work, active)


def _broadcast_all(devices, phi=None, theta=None) -> list[DeviceState]:
    out = []
    for d in devices:
        changes = {}
        if phi is not None:
            changes["phi_local"] = phi
        if theta is not None:
            changes["theta_view"] = theta
        out.append(dataclasses.replace(d, **changes))
    return out


def _advance(devices, active, steps) -> list[DeviceState]:
    active = set(active)
    return [
        dataclasses.replace(d, stream_offset=d.stream_offset + steps) if d.device_id in active else d
        for d in devices
    ]


def _mark_failed(devices, failed) -> list[DeviceState]:
    failed = set(failed)
    return [dataclasses.replace(d, failed_this_round=d.device_id in failed) for d in devices]


# -- rounds ---------------------------------------------------------------


def run_parallel_round(server: ServerState, devices: list[DeviceState], env: Environment):
    t = server.round_index
    links, decision, share, failed, active = _schedule(server, env)
    devices = _mark_failed(devices, failed)
    if not active:
        return _aborted(server, devices, env, decision, failed)
    shape = env.shape
    announcements = [
        env.bus.send(t, "up", SeedAnnouncement(k, devices[k].noise_seed, devices[k].stream_offset, devices[k].batch_size))
        for k in active
    ]
    M = sum(a.batch_size for a in announcements)

    def server_noise(j):
        return gan.concat_noise(
            [gan.make_noise(a.seed, a.stream_offset + j, a.batch_size, shape.noise_dim) for a in announcements]
        )

    # step 2: both sides start from (theta_t, phi_t)
    phis = _local_discriminators(server, devices, active, env)
    theta_next = gan.server_generator_update(
        server.theta, server.phi_global, server.n_g, server.eta_g, M, server_noise, shape
    )
    uploads = [env.bus.send(t, "up", DiscriminatorUpload(k, phi, devices[k].batch_size)) for k, phi in zip(active, phis)]
    phi_next = gan.average_discriminators([(u.phi, u.m_k) for u in uploads])
    env.bus.send(t, "down", GlobalBroadcast(phi=phi_next, theta=theta_next))

    dev_phase, dev_comp, dev_up = _device_phase(active, links, share, env.phi_wire, server.n_d, devices, env)
    server_comp = server.n_g * server.compute_s_per_step
    bcast = net.broadcast_time_s(env.phi_wire + env.theta_wire, env.net.bits_per_param, links)
    phases = {
        "device_compute": dev_comp,
        "uplink": dev_up,
        "averaging": 0.0,
        "server_compute": server_comp,
        # one combined broadcast; split proportionally for reporting
        "broadcast_phi": bcast * env.phi_wire / (env.phi_wire + env.theta_wire),
        "broadcast_theta": bcast * env.theta_wire / (env.phi_wire + env.theta_wire),
    }
    duration = round_duration("proposed_parallel", dev_phase, server_comp, phases["broadcast_phi"],
                              phases["broadcast_theta"])
    devices = _advance(devices, active, max(server.n_d, server.n_g))
    devices = _broadcast_all(devices, phi=phi_next, theta=theta_next)
    up, down = env.bus.take_bits()
    server = dataclasses.replace(server, theta=theta_next, phi_global=phi_next, round_index=t + 1)
    return server, devices, RoundLog(t, decision.scheduled, failed, phases, duration, uplink_bits=up, downlink_bits=down)


def run_serial_round(server: ServerState, devices: list[DeviceState], env: Environment):
    t = server.round_index
    links, decision, share, failed, active = _schedule(server, env)
    devices = _mark_failed(devices, failed)
    if not active:
        return _aborted(server, devices, env, decision, failed)
    shape = env.shape
    phis = _local_discriminators(server, devices, active, env)
    uploads = [env.bus.send(t, "up", DiscriminatorUpload(k, phi, devices[k].batch_size)) for k, phi in zip(active, phis)]
    phi_next = gan.average_discriminators([(u.phi, u.m_k) for u in uploads])
    env.bus.send(t, "down", GlobalBroadcast(phi=phi_next))

    def server_noise(j):
        return gan.make_noise(server.noise_seed, server.noise_offset + j, server.generator_batch_M, shape.noise_dim)

    theta_next = gan.server_generator_update(
        server.theta, phi_next, server.n_g, server.eta_g, server.generator_batch_M, server_noise, shape
    )
    env.bus.send(t, "down", GlobalBroadcast(theta=theta_next))

    dev_phase, dev_comp, dev_up = _device_phase(active, links, share, env.phi_wire, server.n_d, devices, env)
    server_comp = server.n_g * server.compute_s_per_step
    bits = env.net.bits_per_param
    phases = {
        "device_compute": dev_comp,
        "uplink": dev_up,
        "averaging": 0.0,
        "server_compute": server_comp,
        "broadcast_phi": net.broadcast_time_s(env.phi_wire, bits, links),
        "broadcast_theta": net.broadcast_time_s(env.theta_wire, bits, links),
    }
    duration = round_duration("proposed_serial", dev_phase, server_comp, phases["broadcast_phi"],
                              phases["broadcast_theta"])
    devices = _advance(devices, active, server.n_d)
    devices = _broadcast_all(devices, phi=phi_next, theta=theta_next)
    up, down = env.bus.take_bits()
    server = dataclasses.replace(
        server, theta=theta_next, phi_global=phi_next, round_index=t + 1, noise_offset=server.noise_offset + server.n_g
    )
    return server, devices, RoundLog(t, decision.scheduled, failed, phases, duration, uplink_bits=up, downlink_bits=down)


def run_fedgan_round(server: ServerState, devices: list[DeviceState], env: Environment):
    t = server.round_index
    links, decision, share, failed, active = _schedule(server, env)
    devices = _mark_failed(devices, failed)
    if not active:
        return _aborted(server, devices, env, decision, failed)
    shape = env.shape

    def work(k):
        d = devices[k]
        phi_k = gan.device_update(d.theta_view, d.phi_local, d, server.n_d, server.eta_d, shape)

        def local_noise(j):
            return gan.make_noise(d.noise_seed, d.stream_offset + server.n_d + j, d.batch_size, shape.noise_dim)

        theta_k = gan.server_generator_update(
            d.theta_view, phi_k, server.n_g, server.eta_g, d.batch_size, local_noise, shape
        )
        return theta_k, phi_k

    results = env.map(work, active)
    uploads = [
        env.bus.send(t, "up", ModelUpload(k, th, ph, devices[k].batch_size)) for k, (th, ph) in zip(active, results)
    ]
    theta_next = gan.average_discriminators([(u.theta, u.m_k) for u in uploads])
    phi_next = gan.average_discriminators([(u.phi, u.m_k) for u in uploads])
    env.bus.send(t, "down", GlobalBroadcast(phi=phi_next, theta=theta_next))

    n_params = env.phi_wire + env.theta_wire
    dev_phase, dev_comp, dev_up = _device_phase(
        active, links, share, n_params, server.n_d + server.n_g, devices, env
    )
    bcast = net.broadcast_time_s(n_params, env.net.bits_per_param, links)
    phases = {
        "device_compute": dev_comp,
        "uplink": dev_up,
        "averaging": 0.0,
        "server_compute": 0.0,
        "broadcast_phi": bcast * env.phi_wire / n_params,
        "broadcast_theta": bcast * env.theta_wire / n_params,
    }
    duration = round_duration("fedgan", dev_phase, 0.0, phases["broadcast_phi"], phases["broadcast_theta"])
    devices = _advance(devices, active, server.n_d + server.n_g)
    devices = _broadcast_all(devices, phi=phi_next, theta=theta_next)
    up, down = env.bus.take_bits()
    server = dataclasses.replace(server, theta=theta_next, phi_global=phi_next, round_index=t + 1)
    return server, devices, RoundLog(t, decision.scheduled, failed, phases, duration, uplink_bits=up, downlink_bits=down)


def run_centralized_round(server: ServerState, devices: list[DeviceState], env: Environment):
    """Alternating SGD on pooled data: ``n_d`` ascent steps, then ``n_g`` descent steps.

    The discriminator batch is ``K * m_k`` so each iteration sees as much data
    as a fully scheduled distributed round. No communication is simulated.
    """
    t = server.round_index
    shape = env.shape
    points = env.pooled_points
    batch = sum(d.batch_size for d in devices)
    phi = server.phi_global
    for j in range(server.n_d):
        off = server.noise_offset + j
        z = gan.make_noise(env.central_seed, off, batch, shape.noise_dim)
        x = gan.sample_batch(points, env.central_seed ^ 1, off, batch)
        phi = nn.axpy_update(phi, gan.grad_phi(server.theta, phi, z, x, shape), server.eta_d)

    def server_noise(j):
        return gan.make_noise(server.noise_seed, server.noise_offset + j, server.generator_batch_M, shape.noise_dim)

    theta = gan.server_generator_update(
        server.theta, phi, server.n_g, server.eta_g, server.generator_batch_M, server_noise, shape
    )
    phases = dict.fromkeys(PHASES, 0.0)
    phases["device_compute"] = server.n_d * server.compute_s_per_step
    phases["server_compute"] = server.n_g * server.compute_s_per_step
    duration = phases["device_compute"] + phases["server_compute"]
    server = dataclasses.replace(
        server, theta=theta, phi_global=phi, round_index=t + 1,
        noise_offset=server.noise_offset + max(server.n_d, server.n_g),
    )
    return server, devices, RoundLog(t, (), (), phases, duration)


ROUND_FUNCTIONS = {
    "proposed_parallel": run_parallel_round,
    "proposed_serial": run_serial_round,
    "fedgan": run_fedgan_round,
    "centralized": run_centralized_round,
}


# -- experiment -----------------------------------------------------------


def gan_shape(cfg: ExperimentConfig) -> gan.GanShape:
    m = cfg.model
    data_dim = 2
    g = nn.MlpSpec((m.noise_dim, *m.gen_hidden, data_dim), m.hidden_activation, "identity", m.leaky_slope)
    d = nn.MlpSpec((data_dim, *m.disc_hidden, 1), m.hidden_activation, "sigmoid", m.leaky_slope)
    return gan.GanShape(g, d, m.noise_dim)


@dataclass
class Simulation:
    """All state of one experiment, built deterministically from the config."""

    config: ExperimentConfig
    env: Environment
    server: ServerState
    devices: list[DeviceState]
    mixture: datasets.MixtureSpec
    heldout: np.ndarray
    eval_seed: int
    initial_model: gan.GanModel
    cumulative_time_s: float = 0.0

    @classmethod
    def build(cls, cfg: ExperimentConfig) -> "Simulation":
        validate(cfg)
        seed = cfg.run.master_seed
        K = cfg.num_devices
        shape = gan_shape(cfg)
        mixture = datasets.ring_mixture(cfg.data.n_modes, cfg.data.ring_radius, cfg.data.mode_std)
        points = datasets.sample_mixture(mixture, K * cfg.data.points_per_device, stream_seed(seed, "data"))
        shards = datasets.partition_equal(points, K, stream_seed(seed, "partition"))
        heldout = datasets.sample_mixture(mixture, cfg.data.heldout_points, stream_seed(seed, "heldout"))
        placements = net.place_devices(K, cfg.net.cell_radius_km, stream_seed(seed, "placement"))
        model = gan.init_gan(shape, stream_seed(seed, "init"))
        env = Environment(
            shape=shape,
            net=cfg.net,
            placements=placements,
            policy=cfg.scheduler.policy,
            ratio=cfg.scheduler.ratio,
            shadowing_seed=stream_seed(seed, "shadowing"),
            failure_seed=stream_seed(seed, "failures"),
            p_fail=cfg.run.p_fail,
            bus=MessageLog(cfg.net.bits_per_param, cfg.run.trace_messages, cfg.net.phi_payload_params,
                       cfg.net.theta_payload_params),
            pf=scheduler.ProportionalFair(K, cfg.scheduler.pf_beta) if cfg.scheduler.policy == "proportional_fair" else None,
            workers=cfg.run.workers,
            pooled_points=np.concatenate([s.points for s in shards]),
            central_seed=stream_seed(seed, "central"),
        )
        devices = [
            DeviceState(
                device_id=s.device_id,
                shard=s,
                phi_local=model.phi,
                theta_view=model.theta,
                noise_seed=stream_seed(seed, "noise", s.device_id),
                data_seed=stream_seed(seed, "sample", s.device_id),
                stream_offset=0,
                batch_size=cfg.train.m_k,
                compute_s_per_step=cfg.timing.device_step_s,
            )
            for s in shards
        ]
        t = cfg.train
        server = ServerState(
            theta=model.theta,
            phi_global=model.phi,
            generator_batch_M=t.M,
            n_g=t.n_g,
            n_d=t.n_d,
            eta_g=t.eta_g,
            eta_d=t.eta_d,
            noise_seed=stream_seed(seed, "server_noise"),
            compute_s_per_step=cfg.timing.server_step_s,
        )
        return cls(cfg, env, server, devices, mixture, heldout, stream_seed(seed, "eval"), model)

    @property
    def model(self) -> gan.GanModel:
        s = self.env.shape
        return gan.GanModel(nn.Mlp(s.generator, self.server.theta), nn.Mlp(s.discriminator, self.server.phi_global),
                            s.noise_dim)

    def generate(self, n: int, offset: int) -> np.ndarray:
        z = gan.make_noise(self.eval_seed, offset, n, self.env.shape.noise_dim)
        return nn.forward(nn.Mlp(self.env.shape.generator, self.server.theta), z.samples)

    def evaluate(self, offset: int) -> metrics.MetricReport:
        samples = self.generate(self.config.run.eval_samples, offset)
        return metrics.evaluate(samples, self.heldout, self.mixture.mode_array, self.config.coverage_radius)

    def step(self) -> RoundLog:
        fn = ROUND_FUNCTIONS[self.config.framework]
        t = self.server.round_index
        try:
            self.server, self.devices, entry = fn(self.server, self.devices, self.env)
        except nn.NonFiniteError as exc:
            raise TrainingDiverged(t, exc) from exc
        self.cumulative_time_s += entry.round_duration_s
        entry.cumulative_sim_time_s = self.cumulative_time_s
        return entry


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    logs: list[RoundLog]
    model: gan.GanModel
    initial_report: metrics.MetricReport
    final_report: metrics.MetricReport
    samples: np.ndarray
    messages: list = field(default_factory=list)
    rounds_to_target: Optional[int] = None

    @property
    def total_bits(self) -> int:
        return sum(l.uplink_bits + l.downlink_bits for l in self.logs)

    @property
    def total_time_s(self) -> float:
        return self.logs[-1].cumulative_sim_time_s if self.logs else 0.0


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run rounds until ``max_rounds`` or until the metric reaches ``target_metric``.

    The metric is evaluated every ``eval_every`` rounds (and after the last
    one) outside the simulated clock. Evaluation ``i`` uses generator noise
    at offset ``round_index + 1``; the initial model uses offset 0.
    """
    sim = Simulation.build(cfg)
    run = cfg.run
    initial = sim.evaluate(0)
    logs: list[RoundLog] = []
    rounds_to_target = None
    last = initial
    try:
        for t in range(run.max_rounds):
            entry = sim.step()
            if (t + 1) % run.eval_every == 0 or t + 1 == run.max_rounds:
                last = sim.evaluate(t + 1)
                entry.metric_value = last.frechet_gaussian
                entry.mode_coverage = last.mode_coverage
                entry.high_quality_fraction = last.high_quality_fraction
                entry.disc_real_mean = gan.real_score(sim.server.phi_global, sim.heldout, sim.env.shape)
            logs.append(entry)
            if (
                run.target_metric is not None
                and entry.metric_value is not None
                and entry.metric_value <= run.target_metric
            ):
                rounds_to_target = t + 1
                break
    finally:
        sim.env.close()
    samples = sim.generate(run.eval_samples, len(logs))
    return ExperimentResult(
        cfg, logs, sim.model, initial, last, samples,
        messages=list(sim.env.bus.messages), rounds_to_target=rounds_to_target,
    )


def time_to_threshold(logs: list[RoundLog], threshold: float) -> Optional[float]:
    """Simulated time of the first evaluated round with metric <= threshold."""
    for l in logs:
        if l.metric_value is not None and l.metric_value <= threshold:
            return l.cumulative_sim_time_s
    return None


def metric_at_time(logs: list[RoundLog], time_s: float) -> Optional[float]:
    """Last evaluated metric at or before simulated time ``time_s``."""
    value = None
    for l in logs:
        if l.cumulative_sim_time_s > time_s:
            break
        if l.metric_value is not None:
            value = l.metric_value
    return value
