import math

import numpy as np
import pytest
from scipy import sparse
from scipy.sparse.linalg import spsolve

from conftest import birth_death, random_generator, two_state
from rosslab.ctmc import Ctmc
from rosslab.errors import NotExponentialService, Unstable
from rosslab.queue import (
    DECREASING,
    QBD_EXACT,
    VIOLATION_SUSPECTED,
    Deterministic,
    Erlang,
    Exponential,
    HyperExponential,
    QueueSpec,
    WorkloadEstimate,
    curve_verdict,
    pk_wait,
    qbd_mean_workload,
    rolski_bounds,
    service_from_dict,
    solve_r,
    stability_check,
    w_curve,
)
from rosslab.sim import simulate_mean_workload

V_STAR = 0.5451625398929028  # two-state, lam (0.5, 1.5), unit rates, mu = 2, c = 1


def truncated_workload(spec, levels=600):
    """Mean workload from the level-truncated (queue length, phase) chain."""
    Q = spec.environment.Q
    lam, mu, m = spec.chain.lam, spec.service.mu, spec.chain.m
    n = levels * m
    idx = lambda lvl, i: lvl * m + i  # noqa: E731
    G = sparse.lil_matrix((n, n))
    for lvl in range(levels):
        for i in range(m):
            for j in range(m):
                if i != j and Q[i, j] > 0:
                    G[idx(lvl, i), idx(lvl, j)] = Q[i, j]
            if lvl + 1 < levels and lam[i] > 0:
                G[idx(lvl, i), idx(lvl + 1, i)] = lam[i]
            if lvl > 0:
                G[idx(lvl, i), idx(lvl - 1, i)] = mu
    G = G.tocsr()
    G = G - sparse.diags(np.asarray(G.sum(axis=1)).ravel())
    A = G.T.tolil()
    A[0, :] = 1.0
    b = np.zeros(n)
    b[0] = 1.0
    p = spsolve(A.tocsr(), b)
    return float(p.reshape(levels, m).sum(axis=1) @ np.arange(levels)) / mu


class TestServiceLaws:
    @pytest.mark.parametrize("svc, mean, m2", [
        (Exponential(2.0), 0.5, 0.5),
        (Deterministic(0.5), 0.5, 0.25),
        (Erlang(2, 4.0), 0.5, 0.375),
        (HyperExponential((0.5, 0.5), (1.0, 4.0)), 0.625, 1.0625),
    ])
    def test_moments(self, rng, svc, mean, m2):
        assert svc.mean == pytest.approx(mean)
        assert svc.second_moment == pytest.approx(m2)
        x = svc.sample(rng, 400_000)
        assert x.mean() == pytest.approx(mean, rel=0.01)
        assert (x ** 2).mean() == pytest.approx(m2, rel=0.02)

    def test_round_trip(self):
        for svc in (Exponential(2.0), Deterministic(0.5), Erlang(3, 1.5),
                    HyperExponential((0.2, 0.8), (1.0, 3.0))):
            assert service_from_dict(svc.to_dict()) == svc

    @pytest.mark.parametrize("bad", [{"type": "exponential", "mu": -1}, {"type": "weibull"},
                                     {"type": "hyperexponential", "probs": [0.5], "rates": [1, 2]}])
    def test_rejects(self, bad):
        with pytest.raises((KeyError, TypeError, ValueError)):
            service_from_dict(bad)


class TestStability:
    def test_examples(self):
        ch = two_state(1, 1)
        assert stability_check(QueueSpec(ch, 1, Exponential(2))).rho == pytest.approx(0.5)
        assert not stability_check(QueueSpec(Ctmc([[-1, 1], [1, -1]], [2, 2]), 1, Exponential(2))).stable

    def test_c_does_not_matter(self, rng):
        ch = two_state(0.3, 2.0)
        rhos = {stability_check(QueueSpec(ch, c, Exponential(1.7))).rho for c in (0.01, 1, 100)}
        assert len(rhos) == 1

    def test_unstable_raises(self):
        spec = QueueSpec(Ctmc([[-1, 1], [1, -1]], [0, 4]), 1, Exponential(1))
        with pytest.raises(Unstable):
            qbd_mean_workload(spec)


class TestQbd:
    @pytest.mark.parametrize("c", [0.01, 1.0, 100.0])
    def test_mm1(self, c):
        ch = Ctmc([[-1, 1], [1, -1]], [1, 1])
        est = qbd_mean_workload(QueueSpec(ch, c, Exponential(2)))
        assert abs(est.value - 0.5) <= 1e-10
        assert est.method == QBD_EXACT and est.half_width == 0

    def test_regression_value(self):
        est = qbd_mean_workload(QueueSpec(two_state(1, 1), 1, Exponential(2)))
        assert est.value == pytest.approx(V_STAR, rel=1e-12)

    def test_regression_against_truncated_chain(self):
        spec = QueueSpec(two_state(1, 1), 1, Exponential(2))
        assert truncated_workload(spec) == pytest.approx(V_STAR, abs=1e-9)

    def test_regression_against_long_simulation(self):
        spec = QueueSpec(two_state(1, 1), 1, Exponential(2))
        sim = simulate_mean_workload(spec, arrivals=10 ** 7, batches=40, seed=2024)
        assert abs(sim.value - V_STAR) <= max(2 * sim.half_width, 0.01 * V_STAR)

    def test_random_against_truncated_chain(self, rng):
        for _ in range(5):
            m = int(rng.integers(2, 4))
            mu = float(rng.uniform(1, 3))
            ch = Ctmc(random_generator(rng, m), np.sort(rng.uniform(0, 0.7 * mu, m)))
            spec = QueueSpec(ch, float(rng.choice([0.1, 1, 10])), Exponential(mu))
            assert qbd_mean_workload(spec).value == pytest.approx(truncated_workload(spec, 400), abs=1e-8)

    def test_solvers_agree(self, rng):
        for _ in range(20):
            m = int(rng.integers(2, 5))
            mu = float(rng.uniform(1, 3))
            ch = Ctmc(random_generator(rng, m), np.sort(rng.uniform(0, 0.9 * mu, m)))
            spec = QueueSpec(ch, float(rng.uniform(0.1, 10)), Exponential(mu))
            a = qbd_mean_workload(spec, "logreduction")
            b = qbd_mean_workload(spec, "functional")
            assert abs(a.value - b.value) <= 1e-10
            assert a.diagnostics["spectral_radius"] < 1

    def test_r_equation(self):
        from rosslab.queue import qbd_blocks
        spec = QueueSpec(birth_death([1, 2], [0.5, 1], [0.2, 0.6, 1.4]), 2, Exponential(1.5))
        R, _ = solve_r(spec)
        A0, A1, A2, _ = qbd_blocks(spec)
        np.testing.assert_allclose(A0 + R @ A1 + R @ R @ A2, 0, atol=1e-12)

    def test_needs_exponential(self):
        with pytest.raises(NotExponentialService):
            qbd_mean_workload(QueueSpec(two_state(1, 1), 1, Deterministic(0.5)))


class TestBounds:
    def test_examples(self):
        b = rolski_bounds(QueueSpec(two_state(1, 1), 1, Exponential(2)))
        assert b.lower == pytest.approx(0.5)
        assert b.upper == pytest.approx(5 / 6)
        assert b.lambda_bar == pytest.approx(1.0)

    def test_frozen_overload_gives_infinite_upper(self):
        b = rolski_bounds(QueueSpec(Ctmc([[-1, 1], [1, -1]], [0.2, 1.5]), 1, Exponential(1)))
        assert math.isinf(b.upper) and math.isfinite(b.lower)

    def test_pk_formula(self):
        assert pk_wait(1.0, Exponential(2)) == pytest.approx(0.5)
        assert pk_wait(1.0, Deterministic(0.5)) == pytest.approx(0.25)
        assert math.isinf(pk_wait(2.0, Exponential(2)))

    def test_sandwich(self, rng):
        for _ in range(30):
            m = int(rng.integers(2, 5))
            mu = float(rng.uniform(1, 3))
            ch = Ctmc(random_generator(rng, m), np.sort(rng.uniform(0, 0.9 * mu, m)))
            b = rolski_bounds(QueueSpec(ch, 1, Exponential(mu)))
            for c in (0.05, 1, 20):
                w = qbd_mean_workload(QueueSpec(ch, c, Exponential(mu))).value
                assert b.lower - 1e-10 <= w <= b.upper + 1e-10

    def test_limits(self):
        ch = two_state(1, 1)
        b = rolski_bounds(QueueSpec(ch, 1, Exponential(2)))
        assert qbd_mean_workload(QueueSpec(ch, 1e4, Exponential(2))).value == pytest.approx(b.lower, rel=1e-3)
        assert qbd_mean_workload(QueueSpec(ch, 1e-4, Exponential(2))).value == pytest.approx(b.upper, rel=1e-2)


class TestCurve:
    def test_exact_curve_decreasing(self):
        curve = w_curve(two_state(1, 1), Exponential(2), [0.01, 0.1, 1, 10, 100])
        assert curve.verdict == DECREASING and curve.offending_pairs == ()
        assert all(a >= b for a, b in zip(curve.values, curve.values[1:]))
        assert curve.values[2] == pytest.approx(V_STAR, rel=1e-12)

    def test_verdict_rule(self):
        e = lambda v, hw=0.0, m=QBD_EXACT: WorkloadEstimate(v, hw, m)  # noqa: E731
        assert curve_verdict([e(1.0), e(1.0 + 1e-9)])[0] == DECREASING
        assert curve_verdict([e(1.0), e(1.1)]) == (VIOLATION_SUSPECTED, (0,))
        sim = lambda v: e(v, 0.05, "Simulation")  # noqa: E731
        assert curve_verdict([sim(1.0), sim(1.09)])[0] == DECREASING
        assert curve_verdict([sim(1.0), sim(1.11)])[0] == VIOLATION_SUSPECTED

    def test_csv(self):
        curve = w_curve(two_state(1, 1), Exponential(2), [1, 2])
        lines = curve.to_csv().splitlines()
        assert lines[0] == "c,value,half_width,method,verdict_pair_flag"
        assert len(lines) == 3 and lines[1].startswith("1.0,")

    def test_unstable(self):
        ch = Ctmc([[-1, 1], [1, -1]], [0, 4])
        with pytest.raises(Unstable):
            w_curve(ch, Exponential(1), [1, 2])
        curve = w_curve(ch, Exponential(1), [1, 2],
                        sim_params={"allow_unstable": True, "arrivals": 20_000, "batches": 4})
        assert all(e.diagnostics.get("unstable") for e in curve.estimates)

    def test_ascending_required(self):
        with pytest.raises(ValueError):
            w_curve(two_state(1, 1), Exponential(2), [2, 1])

    def test_sim_threads_independent(self):
        params = {"arrivals": 50_000, "batches": 8}
        a = w_curve(two_state(1, 1), Deterministic(0.5), [0.5, 1, 2], sim_params=params, seed=5)
        b = w_curve(two_state(1, 1), Deterministic(0.5), [0.5, 1, 2], sim_params=params, seed=5,
                    threads=3)
        assert a.to_csv() == b.to_csv()

    def test_spec_hash_ignores_c(self):
        s = QueueSpec(two_state(1, 1), 1, Exponential(2))
        assert s.spec_hash() == s.with_c(5).spec_hash()
        assert s.spec_hash() != QueueSpec(two_state(1, 2), 1, Exponential(2)).spec_hash()
