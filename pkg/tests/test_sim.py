import numpy as np
import pytest

from conftest import two_state
from rosslab import sim
from rosslab.ctmc import Ctmc
from rosslab.errors import UnstableWithoutOverride
from rosslab.queue import Deterministic, Erlang, Exponential, HyperExponential, QueueSpec, pk_wait
from rosslab.sim import KERNELS, simulate_mean_workload

needs_compiled = pytest.mark.skipif("compiled" not in KERNELS, reason="extension not built")
CONSTANT = Ctmc([[-1, 1], [1, -1]], [1.0, 1.0])


def lindley_mean_wait(lam, service, n, rng):
    """Customer-average FCFS wait via the running-minimum form of Lindley's recursion."""
    x = np.cumsum(service.sample(rng, n) - rng.exponential(1 / lam, n))
    w = x - np.minimum(np.minimum.accumulate(x), 0.0)
    # w[k] is the wait of customer k + 1; customer 0 waits nothing
    return float(np.concatenate([[0.0], w[:-1]])[n // 10:].mean())


@needs_compiled
@pytest.mark.parametrize("svc", [Exponential(2), Deterministic(0.5), Erlang(3, 6.0),
                                 HyperExponential((0.3, 0.7), (1.0, 5.0))])
def test_kernels_bit_identical(svc):
    spec = QueueSpec(two_state(1, 1), 0.7, svc)
    a = simulate_mean_workload(spec, arrivals=60_000, batches=8, seed=11, kernel="python")
    b = simulate_mean_workload(spec, arrivals=60_000, batches=8, seed=11, kernel="compiled")
    assert a.value == b.value and a.half_width == b.half_width
    assert a.diagnostics["waiting_time"] == b.diagnostics["waiting_time"]
    assert a.diagnostics["simulated_time"] == b.diagnostics["simulated_time"]


def test_seed_determinism():
    spec = QueueSpec(two_state(1, 1), 1, Exponential(2))
    a = simulate_mean_workload(spec, arrivals=50_000, batches=8, seed=3)
    b = simulate_mean_workload(spec, arrivals=50_000, batches=8, seed=3)
    c = simulate_mean_workload(spec, arrivals=50_000, batches=8, seed=4)
    assert a == b and a.value != c.value


def test_buffer_size_does_not_matter(monkeypatch):
    spec = QueueSpec(two_state(1, 1), 1, Deterministic(0.5))
    a = simulate_mean_workload(spec, arrivals=20_000, batches=4, seed=9)
    monkeypatch.setattr(sim, "CHUNK", 7)
    b = simulate_mean_workload(spec, arrivals=20_000, batches=4, seed=9)
    assert a == b


def test_mm1_coverage():
    spec = QueueSpec(CONSTANT, 1, Exponential(2))
    hits = 0
    for seed in range(20):
        est = simulate_mean_workload(spec, arrivals=200_000, batches=20, seed=seed)
        hits += abs(est.value - 0.5) <= est.half_width
    assert hits >= 15  # nominal 95%, binomial 1st percentile is 16


@pytest.mark.parametrize("svc", [Deterministic(0.5), Erlang(2, 4.0), HyperExponential((0.5, 0.5), (1.5, 6.0))])
def test_mg1_against_formula_and_lindley(rng, svc):
    est = simulate_mean_workload(QueueSpec(CONSTANT, 1, svc), arrivals=10 ** 6, seed=1)
    target = pk_wait(1.0, svc)
    assert abs(est.value - target) <= max(2.5 * est.half_width, 0.01 * target)
    oracle = lindley_mean_wait(1.0, svc, 2 * 10 ** 6, rng)
    assert oracle == pytest.approx(target, rel=0.03)
    wait = est.diagnostics["waiting_time"]
    assert abs(wait - oracle) <= 3 * est.diagnostics["waiting_half_width"] + 0.02 * target


def test_md1_value():
    est = simulate_mean_workload(QueueSpec(CONSTANT, 1, Deterministic(0.5)), arrivals=10 ** 6, seed=0)
    assert est.value == pytest.approx(0.25, rel=0.02)


def test_unstable():
    spec = QueueSpec(Ctmc([[-1, 1], [1, -1]], [0, 4]), 1, Exponential(1))
    with pytest.raises(UnstableWithoutOverride):
        simulate_mean_workload(spec, arrivals=1000)
    est = simulate_mean_workload(spec, arrivals=40_000, batches=4, allow_unstable=True)
    assert est.diagnostics["unstable"] and est.diagnostics["divergence"] > 2


def test_argument_checks():
    spec = QueueSpec(CONSTANT, 1, Exponential(2))
    with pytest.raises(ValueError):
        simulate_mean_workload(spec, arrivals=100, batches=1)
    with pytest.raises(ValueError):
        simulate_mean_workload(spec, arrivals=10, batches=32)
