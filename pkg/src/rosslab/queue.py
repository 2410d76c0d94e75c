"""Single-server queue fed by a CTMC-modulated Poisson (Cox) arrival stream.

The headline quantity is the mean stationary workload ``w(c)`` at modulation
rate ``c``. Exponential service is solved exactly as a quasi-birth-death
process; other service laws go through the simulator in :mod:`rosslab.sim`.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .ctmc import Ctmc, modulate
from .errors import NoConvergence, NotExponentialService, Unstable
from .policy import DEFAULT_POLICY

# --------------------------------------------------------------------------
# service-time laws


@dataclass(frozen=True)
class Exponential:
    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("exponential service rate must be positive")

    @property
    def mean(self):
        return 1.0 / self.mu

    @property
    def second_moment(self):
        return 2.0 / self.mu ** 2

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.mu, size)

    def to_dict(self):
        return {"type": "exponential", "mu": self.mu}


@dataclass(frozen=True)
class Deterministic:
    d: float

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("deterministic service time must be positive")

    @property
    def mean(self):
        return self.d

    @property
    def second_moment(self):
        return self.d ** 2

    def sample(self, rng, size):
        return np.full(size, self.d)

    def to_dict(self):
        return {"type": "deterministic", "d": self.d}


@dataclass(frozen=True)
class Erlang:
    k: int
    rate: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1 or not self.rate > 0:
            raise ValueError("Erlang needs integer k >= 1 and positive rate")

    @property
    def mean(self):
        return self.k / self.rate

    @property
    def second_moment(self):
        return self.k * (self.k + 1) / self.rate ** 2

    def sample(self, rng, size):
        return rng.gamma(self.k, 1.0 / self.rate, size)

    def to_dict(self):
        return {"type": "erlang", "k": self.k, "rate": self.rate}


@dataclass(frozen=True)
class HyperExponential:
    probs: tuple
    rates: tuple

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        rates = tuple(float(r) for r in self.rates)
        if len(probs) != len(rates) or not probs:
            raise ValueError("hyperexponential needs matching probs and rates")
        if any(p <= 0 for p in probs) or any(r <= 0 for r in rates):
            raise ValueError("hyperexponential parameters must be positive")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError("hyperexponential branch probabilities must sum to 1")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "rates", rates)

    @property
    def mean(self):
        return sum(p / r for p, r in zip(self.probs, self.rates))

    @property
    def second_moment(self):
        return sum(2 * p / r ** 2 for p, r in zip(self.probs, self.rates))

    def sample(self, rng, size):
        branch = rng.choice(len(self.probs), size=size, p=self.probs)
        return rng.exponential(1.0, size) / np.asarray(self.rates)[branch]

    def to_dict(self):
        return {"type": "hyperexponential", "probs": list(self.probs), "rates": list(self.rates)}


SERVICE_TYPES = {
    "exponential": lambda d: Exponential(float(d["mu"])),
    "deterministic": lambda d: Deterministic(float(d["d"])),
    "erlang": lambda d: Erlang(int(d["k"]), float(d["rate"])),
    "hyperexponential": lambda d: HyperExponential(tuple(d["probs"]), tuple(d["rates"])),
}


def service_from_dict(d: dict):
    try:
        make = SERVICE_TYPES[d["type"]]
    except KeyError:
        raise ValueError(f"unknown service type {d.get('type')!r}") from None
    return make(d)


# --------------------------------------------------------------------------
# queue instance


@dataclass(frozen=True)
class QueueSpec:
    """Baseline intensity chain, modulation rate ``c`` and service law."""

    chain: Ctmc
    c: float
    service: object

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("modulation rate must be positive")

    @property
    def environment(self) -> Ctmc:
        return modulate(self.chain, self.c)

    def with_c(self, c) -> QueueSpec:
        return QueueSpec(self.chain, c, self.service)

    def spec_hash(self) -> str:
        """Digest of chain and service; ``c`` is deliberately excluded."""
        blob = json.dumps({"chain": self.chain.to_dict(), "service": self.service.to_dict()},
                          sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    rho: float
    lambda_bar: float


def stability_check(spec: QueueSpec) -> StabilityReport:
    lam_bar = spec.chain.mean_intensity
    rho = lam_bar * spec.service.mean
    return StabilityReport(rho < 1.0, rho, lam_bar)


@dataclass(frozen=True)
class WorkloadEstimate:
    value: float
    half_width: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {"value": self.value, "half_width": self.half_width, "method": self.method,
                "diagnostics": self.diagnostics}


QBD_EXACT = "QbdExact"
SIMULATION = "Simulation"

# --------------------------------------------------------------------------
# matrix-geometric solution


def _r_functional(A0, A1, A2, tol, max_iter):
    A1inv = np.linalg.inv(A1)
    R = np.zeros_like(A0)
    for it in range(1, max_iter + 1):
        Rn = -(A0 + R @ R @ A2) @ A1inv
        if np.max(np.abs(Rn - R)) < tol:
            return Rn, it
        R = Rn
    raise NoConvergence(f"R iteration did not settle in {max_iter} steps")


def _r_logreduction(A0, A1, A2, tol, max_iter):
    """Logarithmic reduction for ``G``, then ``R = A0 (-A1 - A0 G)^-1``."""
    m = A0.shape[0]
    eye = np.eye(m)
    inv = np.linalg.inv(-A1)
    B0 = inv @ A0
    B2 = inv @ A2
    G = B2.copy()
    T = B0.copy()
    for it in range(1, max_iter + 1):
        U = B0 @ B2 + B2 @ B0
        W = np.linalg.inv(eye - U)
        B0, B2 = W @ (B0 @ B0), W @ (B2 @ B2)
        G = G + T @ B2
        T = T @ B0
        # what is still missing from G is bounded by T; the row-sum residual
        # can stall just above tol on stiff blocks
        if np.max(np.abs(1.0 - G.sum(axis=1))) < tol or np.max(np.abs(T)) < tol:
            break
    else:
        raise NoConvergence(f"logarithmic reduction did not settle in {max_iter} steps")
    R = A0 @ np.linalg.inv(-A1 - A0 @ G)
    return R, it


def qbd_blocks(spec: QueueSpec):
    """Level-independent blocks (up, local, down) and the level-0 local block."""
    mu = spec.service.mu
    Qc = spec.environment.Q
    A0 = np.diag(spec.chain.lam)
    A2 = mu * np.eye(spec.chain.m)
    A1 = Qc - A0 - A2
    B1 = Qc - A0
    return A0, A1, A2, B1


def solve_r(spec: QueueSpec, method="logreduction", policy=DEFAULT_POLICY):
    A0, A1, A2, _ = qbd_blocks(spec)
    solver = {"logreduction": _r_logreduction, "functional": _r_functional}[method]
    return solver(A0, A1, A2, policy.qbd_tol, policy.qbd_max_iter)


def qbd_mean_workload(spec: QueueSpec, method="logreduction", policy=DEFAULT_POLICY) -> WorkloadEstimate:
    """Exact mean stationary workload for exponential service.

    The queue length and environment phase form a QBD. Workload is the mean
    queue length divided by ``mu``: by memorylessness every job present has an
    exponential remaining amount of work.
    """
    if not isinstance(spec.service, Exponential):
        raise NotExponentialService("the QBD solution needs exponential service")
    st = stability_check(spec)
    if not st.stable:
        raise Unstable(f"traffic intensity {st.rho:.4g} >= 1")
    R, iters = solve_r(spec, method, policy)
    _, _, A2, B1 = qbd_blocks(spec)
    m = spec.chain.m
    eye = np.eye(m)
    # boundary: x0 (B1 + R A2) = 0 with x0 (I - R)^-1 1 = 1
    M = (B1 + R @ A2).T.copy()
    M[-1, :] = np.linalg.solve(eye - R, np.ones(m))
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    x0 = np.linalg.solve(M, rhs)
    inv = np.linalg.inv(eye - R)
    mean_n = float(x0 @ R @ inv @ inv @ np.ones(m))
    sr = float(max(abs(np.linalg.eigvals(R))))
    if sr >= 1.0:
        raise NoConvergence(f"R has spectral radius {sr} >= 1")
    value = mean_n / spec.service.mu
    return WorkloadEstimate(max(value, 0.0), 0.0, QBD_EXACT, {
        "iterations": iters,
        "spectral_radius": sr,
        "mean_queue_length": mean_n,
        "solver": method,
    })


# --------------------------------------------------------------------------
# averaged and frozen environment bounds


def pk_wait(lam: float, service) -> float:
    """Mean M/G/1 waiting time; equals the time-average workload by PASTA."""
    rho = lam * service.mean
    if rho >= 1.0:
        return math.inf
    return lam * service.second_moment / (2.0 * (1.0 - rho))


@dataclass(frozen=True)
class RolskiBounds:
    lower: float
    upper: float
    waiting_lower: float
    waiting_upper: float
    lambda_bar: float
    rho: float

    def to_dict(self):
        return {k: getattr(self, k) for k in
                ("lower", "upper", "waiting_lower", "waiting_upper", "lambda_bar", "rho")}


def rolski_bounds(spec: QueueSpec) -> RolskiBounds:
    """Averaged-environment lower and frozen-environment upper bounds.

    ``lower`` / ``upper`` bound the mean workload: Poisson arrivals at the mean
    intensity, versus the ``pi``-mixture of Poisson queues frozen in each
    state. The waiting-time pair uses the arrival-weighted mixture on top.
    Any frozen state with load >= 1 makes the upper bounds infinite.
    """
    chain, svc = spec.chain, spec.service
    lam_bar = chain.mean_intensity
    lower = pk_wait(lam_bar, svc)
    frozen = [pk_wait(float(l), svc) for l in chain.lam]
    live = [(p, l, w) for p, l, w in zip(chain.pi, chain.lam, frozen) if p > 0]
    if any(math.isinf(w) for _, _, w in live):
        upper = wupper = math.inf
    else:
        upper = float(sum(p * w for p, _, w in live))
        wupper = float(sum(p * l * w for p, l, w in live) / lam_bar) if lam_bar > 0 else 0.0
    return RolskiBounds(lower, upper, lower, wupper, lam_bar, lam_bar * svc.mean)


# --------------------------------------------------------------------------
# w(c) sweep

DECREASING = "Decreasing"
VIOLATION_SUSPECTED = "ViolationSuspected"


@dataclass(frozen=True)
class WCurve:
    c_list: tuple
    estimates: tuple
    verdict: str
    offending_pairs: tuple
    bounds: RolskiBounds

    @property
    def values(self):
        return [e.value for e in self.estimates]

    def pair_flags(self):
        flags = [0] * len(self.c_list)
        for k in self.offending_pairs:
            flags[k] = flags[k + 1] = 1
        return flags

    def to_csv(self) -> str:
        lines = ["c,value,half_width,method,verdict_pair_flag"]
        for c, e, f in zip(self.c_list, self.estimates, self.pair_flags()):
            lines.append(f"{c!r},{e.value!r},{e.half_width!r},{e.method},{f}")
        return "\n".join(lines) + "\n"


def curve_verdict(estimates, slack_exact=DEFAULT_POLICY.curve_slack):
    """Adjacent pairs ``k`` where ``w(c_k) < w(c_{k+1}) - slack``."""
    bad = []
    for k, (a, b) in enumerate(zip(estimates, estimates[1:])):
        if a.method == QBD_EXACT and b.method == QBD_EXACT:
            slack = slack_exact
        else:
            slack = a.half_width + b.half_width
        if a.value < b.value - slack:
            bad.append(k)
    return (DECREASING if not bad else VIOLATION_SUSPECTED), tuple(bad)


def point_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(index,))


def w_curve(chain: Ctmc, service, c_list, method="auto", sim_params=None, seed=0,
            threads=1, policy=DEFAULT_POLICY) -> WCurve:
    """Evaluate ``w(c)`` along ascending ``c_list`` and judge monotonicity.

    ``method="auto"`` uses the QBD solution for exponential service and
    simulation otherwise. Simulation point ``k`` draws from a seed derived from
    ``(seed, k)``, so results do not depend on ``threads``.
    """
    from .order import _map
    from .sim import simulate_mean_workload

    c_list = tuple(float(c) for c in c_list)
    if any(b <= a for a, b in zip(c_list, c_list[1:])):
        raise ValueError("c_list must be strictly ascending")
    if method == "auto":
        method = "qbd" if isinstance(service, Exponential) else "sim"
    base = QueueSpec(chain, 1.0, service)
    sim_params = dict(sim_params or {})
    st = stability_check(base)
    if not st.stable:
        if not sim_params.get("allow_unstable"):
            raise Unstable(f"traffic intensity {st.rho:.4g} >= 1")
        method = "sim"

    def point(k):
        spec = base.with_c(c_list[k])
        if method == "qbd":
            return qbd_mean_workload(spec, policy=policy)
        return simulate_mean_workload(spec, seed=point_seed(seed, k), **sim_params)

    estimates = tuple(_map(point, list(range(len(c_list))), threads))
    verdict, bad = curve_verdict(estimates, policy.curve_slack)
    return WCurve(c_list, estimates, verdict, bad, rolski_bounds(base))
