import numpy as np
import pytest

from dgan import scheduler
from dgan.net import LinkState


def links(rates):
    return [LinkState(i, float(r), float(r) * 10) for i, r in enumerate(rates)]


def test_round_robin_examples():
    assert scheduler.round_robin(10, 0, 2).scheduled == (0, 1)
    assert scheduler.round_robin(10, 1, 2).scheduled == (2, 3)
    assert scheduler.round_robin(4, 7, 4).scheduled == (0, 1, 2, 3)


def test_round_robin_covers_each_device_once():
    seen = [scheduler.round_robin(7, t, 1).scheduled[0] for t in range(7)]
    assert sorted(seen) == list(range(7))


@pytest.mark.parametrize("n", [0, 11])
def test_round_robin_range(n):
    with pytest.raises(ValueError):
        scheduler.round_robin(10, 0, n)


def test_best_channel_examples():
    assert scheduler.best_channel(links([5, 1, 3]), 2 / 3).scheduled == (0, 2)
    assert set(scheduler.best_channel(links([5, 1, 3]), 1.0).scheduled) == {0, 1, 2}
    assert scheduler.best_channel(links([2, 2, 2, 2]), 0.5).scheduled == (0, 1)


def test_best_channel_errors():
    with pytest.raises(ValueError):
        scheduler.best_channel([], 0.5)
    with pytest.raises(ValueError):
        scheduler.best_channel(links([1, 2]), 0.0)


@pytest.mark.parametrize("K,ratio,expected", [(10, 0.2, 2), (10, 0.5, 5), (10, 1.0, 10), (10, 0.01, 1), (4, 0.125, 1)])
def test_cardinality(K, ratio, expected):
    assert scheduler.n_scheduled(K, ratio) == expected
    assert len(scheduler.best_channel(links(range(K)), ratio).scheduled) == expected


def test_pf_equal_histories_matches_best_channel():
    ls = links([3, 3, 3, 3, 3])
    pf = scheduler.ProportionalFair(5)
    assert pf.decide(ls, 0.4).scheduled == scheduler.best_channel(ls, 0.4).scheduled


def test_pf_full_ratio_schedules_everyone():
    pf = scheduler.ProportionalFair(4)
    for t in range(5):
        assert set(pf.decide(links([9, 1, 5, 2]), 1.0, t).scheduled) == {0, 1, 2, 3}


def test_pf_starved_device_metric_increases():
    # device 0 has a weak but nonzero channel; replay the EMA recursion by hand
    ls = links([1.0, 50.0, 40.0])
    pf = scheduler.ProportionalFair(3, beta=0.1)
    avg = np.ones(3)
    prev = None
    for t in range(40):
        metric = np.array([l.uplink_rate_bps for l in ls]) / avg
        decision = pf.decide(ls, 1 / 3, t)
        served = np.array([l.uplink_rate_bps if l.device_id in decision.scheduled else 0.0 for l in ls])
        avg = 0.9 * avg + 0.1 * served
        assert np.allclose(pf.avg, avg)
        if 0 in decision.scheduled:
            break
        if prev is not None:
            assert metric[0] > prev
        prev = metric[0]
    else:
        pytest.fail("device 0 never scheduled")
    assert t > 2


def test_schedule_all():
    assert scheduler.schedule_all(3, 5).scheduled == (0, 1, 2)
