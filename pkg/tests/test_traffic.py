import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from d2dmac.traffic import (Ipp, Poisson, TrafficSpec, arrival_times, generate_arrivals, ipp_mean_interval,
                            ipp_scale_for_load, poisson_rate_for_load, traffic_for_load)


def test_poisson_rate_from_load():
    lam = poisson_rate_for_load(1, 8000, 30, 2e9)
    assert lam == pytest.approx(8333.333333333, rel=1e-12)
    assert lam * 8000 * 30 / 2e9 == pytest.approx(1.0)
    assert poisson_rate_for_load(0, 8000, 30, 2e9) == 0
    assert poisson_rate_for_load(2, 8000, 30, 2e9) == pytest.approx(2 * lam)


def test_ipp_mean_interval():
    assert ipp_mean_interval(2, 4, 0.5, 0.5) == pytest.approx(0.375)
    assert ipp_mean_interval(5, 5, 0.2, 0.8) == pytest.approx(0.2)
    assert ipp_mean_interval(4, 1, 1.0, 0.0) == pytest.approx(0.25)


@pytest.mark.parametrize("load,ratio,p1", [(2, 10, 0.3), (0.5, 10, 0.5), (5, 3, 0.9)])
def test_ipp_scaling_round_trip(load, ratio, p1):
    r1, r2 = ipp_scale_for_load(load, ratio, p1, 1 - p1, 8000, 30, 2e9)
    assert r1 / r2 == pytest.approx(ratio, rel=1e-12)
    mean = ipp_mean_interval(r1, r2, p1, 1 - p1)
    assert 8000 * 30 / (mean * 2e9) == pytest.approx(load, rel=1e-12)
    h1, h2 = ipp_scale_for_load(load / 2, ratio, p1, 1 - p1, 8000, 30, 2e9)
    assert (h1, h2) == pytest.approx((r1 / 2, r2 / 2), rel=1e-12)


def test_ipp_validation():
    with pytest.raises(ValueError):
        Ipp(1, 2, 0.5, 0.6)
    with pytest.raises(ValueError):
        Ipp(0, 2)
    with pytest.raises(ValueError):
        traffic_for_load("bursty", 1, 3)


def test_zero_rate_and_no_burst_gives_nothing():
    spec = TrafficSpec(Poisson(0.0), flows=3, burst_max=0)
    assert all(len(a) == 0 for a in generate_arrivals(spec, 1000, 5e-6, seed=1))


def test_burst_is_uniform_at_slot_zero():
    spec = TrafficSpec(Poisson(0.0), flows=6000, burst_max=5)
    counts = np.array([len(a) for a in generate_arrivals(spec, 10, 5e-6, seed=3)])
    freq = np.bincount(counts, minlength=6) / len(counts)
    assert counts.max() <= 5 and np.allclose(freq, 1 / 6, atol=0.02)


def test_poisson_rate_and_dispersion():
    rng = np.random.default_rng(0)
    t = arrival_times(Poisson(1000.0), 200.0, rng)
    gaps = np.diff(t)
    assert len(t) / 200.0 == pytest.approx(1000, rel=0.01)
    assert gaps.std() / gaps.mean() == pytest.approx(1.0, abs=0.02)


def test_ipp_mean_and_burstiness():
    proc = Ipp(10_000.0, 1000.0, 0.5, 0.5)
    t = arrival_times(proc, 100.0, np.random.default_rng(1))
    gaps = np.diff(t)
    assert gaps.mean() == pytest.approx(ipp_mean_interval(10_000, 1000, 0.5, 0.5), rel=0.02)
    assert gaps.std() / gaps.mean() > 1.2


def test_seed_determinism_and_order():
    spec = traffic_for_load("ipp", 3, 10)
    a = generate_arrivals(spec, 20_000, 5e-6, seed=42)
    b = generate_arrivals(spec, 20_000, 5e-6, seed=42)
    c = generate_arrivals(spec, 20_000, 5e-6, seed=43)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not all(np.array_equal(x, y) for x, y in zip(a, c))
    assert all(np.all(np.diff(x) >= 0) and (len(x) == 0 or x[-1] < 20_000) for x in a)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lo=st.floats(0.1, 4.0), step=st.floats(0.0, 3.0),
       mode=st.sampled_from(["poisson", "ipp"]))
def test_more_load_never_means_fewer_arrivals(seed, lo, step, mode):
    small = generate_arrivals(traffic_for_load(mode, lo, 5), 4000, 5e-6, seed)
    big = generate_arrivals(traffic_for_load(mode, lo + step, 5), 4000, 5e-6, seed)
    assert all(len(b) >= len(s) for s, b in zip(small, big))
