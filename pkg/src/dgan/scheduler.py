"""Per-round device selection policies."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dgan.net import LinkState

POLICIES = ("round_robin", "best_channel", "proportional_fair", "all")


@dataclass(frozen=True)
class ScheduleDecision:
    round_index: int
    scheduled: tuple[int, ...]
    ratio: float


def n_scheduled(K: int, ratio: float) -> int:
    """``max(1, round(ratio * K))`` with halves rounded up."""
    if not 0 < ratio <= 1:
        raise ValueError(f"scheduler.ratio must be in (0, 1], got {ratio}")
    return min(K, max(1, math.floor(ratio * K + 0.5)))


def round_robin(K: int, round_index: int, n_sched: int) -> ScheduleDecision:
    if not 1 <= n_sched <= K:
        raise ValueError(f"n_sched must be in [1, {K}], got {n_sched}")
    ids = tuple((round_index * n_sched + j) % K for j in range(n_sched))
    return ScheduleDecision(round_index, ids, n_sched / K)


def _top(metric: list[float], ids: list[int], n: int) -> tuple[int, ...]:
    # highest metric first, lower id wins ties
    order = sorted(range(len(ids)), key=lambda i: (-metric[i], ids[i]))
    return tuple(ids[i] for i in order[:n])


def best_channel(links: list[LinkState], ratio: float, round_index: int = 0) -> ScheduleDecision:
    if not links:
        raise ValueError("empty link list")
    n = n_scheduled(len(links), ratio)
    ids = [l.device_id for l in links]
    chosen = _top([l.uplink_rate_bps for l in links], ids, n)
    return ScheduleDecision(round_index, chosen, ratio)


class ProportionalFair:
    """Proportional-fair selection with an exponential moving average of served rate.

    After each decision every average is updated as
    ``avg <- (1 - beta) * avg + beta * rate * [scheduled]``.
    """

    def __init__(self, K: int, beta: float = 0.1, initial_rate: float = 1.0):
        if not 0 < beta <= 1:
            raise ValueError("beta must be in (0, 1]")
        self.beta = beta
        self.avg = np.full(K, float(initial_rate))

    def metric(self, links: list[LinkState]) -> np.ndarray:
        rates = np.array([l.uplink_rate_bps for l in links])
        return rates / self.avg

    def decide(self, links: list[LinkState], ratio: float, round_index: int = 0) -> ScheduleDecision:
        return proportional_fair(links, self, ratio, round_index)


def proportional_fair(
    links: list[LinkState], state: ProportionalFair, ratio: float, round_index: int = 0
) -> ScheduleDecision:
    if not links:
        raise ValueError("empty link list")
    if np.any(state.avg <= 0):
        raise ValueError("average rates must be positive")
    n = n_scheduled(len(links), ratio)
    ids = [l.device_id for l in links]
    chosen = _top(list(state.metric(links)), ids, n)
    served = np.zeros(len(links))
    for i, dev in enumerate(ids):
        if dev in chosen:
            served[i] = links[i].uplink_rate_bps
    state.avg = (1 - state.beta) * state.avg + state.beta * served
    # a device never served decays toward zero; keep the ratio defined
    state.avg = np.maximum(state.avg, np.finfo(float).tiny)
    return ScheduleDecision(round_index, chosen, ratio)


def schedule_all(K: int, round_index: int = 0) -> ScheduleDecision:
    return ScheduleDecision(round_index, tuple(range(K)), 1.0)
