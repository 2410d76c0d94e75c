"""Structural and stochastic-order checks on modulated intensity chains.

Covers strong-order monotonicity of transition kernels, double monotonicity
(the chain and its reversal), the constant-row-rate structure, an LP decision
procedure for the supermodular order between lattice distributions, a scan of
that order along a list of modulation rates, and a seeded random search for
chains where structure and order disagree.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ctmc import (
    Ctmc,
    GridDistribution,
    TimeGrid,
    TransitionMatrix,
    finite_dimensional_law,
    reverse_chain,
    uniformize,
)
from .errors import LatticeCapExceeded, LpFailure, NotIrreducible
from .policy import DEFAULT_POLICY, NumericPolicy
from .simplex import maximize_leq

ORDERED = "Ordered"
VIOLATED = "Violated"
INCOMPARABLE = "IncomparableMarginals"


# --------------------------------------------------------------------------
# strong-order monotonicity


@dataclass(frozen=True)
class Violation:
    row: int
    next_row: int
    threshold: int
    gap: float


@dataclass(frozen=True)
class MonotonicityReport:
    monotone: bool
    violations: tuple = ()

    def to_dict(self):
        return {
            "monotone": self.monotone,
            "violations": [
                {"rows": [v.row, v.next_row], "threshold": v.threshold, "gap": v.gap}
                for v in self.violations
            ],
        }


def check_stochastic_monotonicity(tm: TransitionMatrix, tol=DEFAULT_POLICY.monotone_tol):
    """Check that consecutive rows increase in the strong stochastic order.

    Row ``i + 1`` must put at least as much mass as row ``i`` on every upper
    set ``{k, ..., m-1}``. Comparing neighbours is enough since the order is
    transitive.
    """
    P = tm.P if isinstance(tm, TransitionMatrix) else np.asarray(tm, dtype=float)
    tails = np.cumsum(P[:, ::-1], axis=1)[:, ::-1]
    violations = []
    for i in range(P.shape[0] - 1):
        for k in range(1, P.shape[1]):
            gap = float(tails[i + 1, k] - tails[i, k])
            if gap < -tol:
                violations.append(Violation(i, i + 1, k, gap))
    return MonotonicityReport(not violations, tuple(violations))


def check_generator_monotonicity(chain: Ctmc, eta: float | None = None) -> MonotonicityReport:
    """Strong-order monotonicity of a CTMC via its uniformised kernel.

    Only the threshold ``k = i + 1`` of ``I + Q/eta`` depends on ``eta``, and
    it is met once ``eta >= |Q[i,i]| + |Q[i+1,i+1]|``. The default
    ``eta = 2 * max|Q[i,i]|`` therefore reproduces the verdict of every larger
    ``eta``, i.e. of the generator itself. At ``eta = max|Q[i,i]|`` the kernel
    can fail even for two-state chains.
    """
    if eta is None:
        eta = 2.0 * chain.max_exit_rate
    return check_stochastic_monotonicity(uniformize(chain, eta), chain.policy.monotone_tol)


def check_doubly_monotone(chain: Ctmc):
    """Monotonicity reports for the chain and for its time reversal."""
    return check_generator_monotonicity(chain), check_generator_monotonicity(reverse_chain(chain))


@dataclass(frozen=True)
class CcpReport:
    holds: bool
    alpha: tuple | None
    rows: tuple

    def to_dict(self):
        return {"holds": self.holds, "alpha": None if self.alpha is None else list(self.alpha),
                "rows": list(self.rows)}


def check_ccp_structure(chain: Ctmc, tol: float = 1e-12) -> CcpReport:
    """Does every state leave at one common rate to each other state?

    That is ``Q[i, j] = alpha[i] > 0`` for all ``j != i``.
    """
    rows = []
    alpha = []
    for i in range(chain.m):
        off = np.delete(chain.Q[i], i)
        lo, hi = float(off.min()), float(off.max())
        equal = hi - lo <= tol * max(1.0, hi)
        rows.append({"state": i, "min_rate": lo, "max_rate": hi, "equal": bool(equal),
                     "positive": lo > 0})
        alpha.append(float(off.mean()))
    holds = all(r["equal"] and r["positive"] for r in rows)
    return CcpReport(holds, tuple(alpha) if holds else None, tuple(rows))


# --------------------------------------------------------------------------
# supermodular order


@dataclass(frozen=True)
class SupermodularWitness:
    phi: np.ndarray
    objective: float

    def to_dict(self):
        return {"phi": self.phi.tolist(), "objective": self.objective}


@dataclass(frozen=True)
class OrderVerdict:
    status: str
    lp_optimum: float
    witness: SupermodularWitness | None = None
    pivots: int = 0

    @property
    def ordered(self) -> bool:
        return self.status == ORDERED

    def to_dict(self):
        return {
            "verdict": self.status,
            "lp_optimum": None if math.isnan(self.lp_optimum) else self.lp_optimum,
            "witness": None if self.witness is None else self.witness.to_dict(),
        }


def elementary_constraints(L: int, n: int) -> np.ndarray:
    """Rows of the elementary cross-difference operator on ``{0..L-1}**n``.

    Row order is lexicographic in ``(z, i, j)`` with ``i < j``; each row reads
    ``phi(z+e_i+e_j) + phi(z) - phi(z+e_i) - phi(z+e_j)``.
    """
    shape = (L,) * n
    rows = []
    for z in itertools.product(range(L), repeat=n):
        for i, j in itertools.combinations(range(n), 2):
            if z[i] == L - 1 or z[j] == L - 1:
                continue
            zi = list(z)
            zi[i] += 1
            zj = list(z)
            zj[j] += 1
            zij = list(zi)
            zij[j] += 1
            row = np.zeros(L ** n)
            row[np.ravel_multi_index(zij, shape)] += 1
            row[np.ravel_multi_index(z, shape)] += 1
            row[np.ravel_multi_index(zi, shape)] -= 1
            row[np.ravel_multi_index(zj, shape)] -= 1
            rows.append(row)
    return np.array(rows).reshape(len(rows), L ** n)


def supermodularity_residual(phi: np.ndarray) -> float:
    """Most negative elementary cross-difference of ``phi`` (0 if none)."""
    phi = np.asarray(phi, dtype=float)
    worst = 0.0
    for i, j in itertools.combinations(range(phi.ndim), 2):
        d = np.diff(np.diff(phi, axis=i), axis=j)
        if d.size:
            worst = min(worst, float(d.min()))
    return worst


def sm_check(X: GridDistribution, Y: GridDistribution, epsilon: float | None = None,
             policy: NumericPolicy = DEFAULT_POLICY) -> OrderVerdict:
    """Decide ``X <=_sm Y`` for two laws on the same finite product lattice.

    Equal one-dimensional marginals are necessary and are checked first.
    Then the LP ``min sum((pY - pX) * phi)`` over supermodular ``phi`` in the
    box ``[-1, 1]`` is solved; a negative optimum yields a witness.
    """
    eps = policy.epsilon if epsilon is None else float(epsilon)
    if X.levels != Y.levels or X.n != Y.n:
        raise ValueError("distributions must share levels and dimension")
    L, n = len(X.levels), X.n
    if L ** n > policy.lattice_cap:
        raise LatticeCapExceeded(f"lattice of size {L}**{n} exceeds cap {policy.lattice_cap}")
    for k in range(n):
        if np.max(np.abs(X.marginal(k) - Y.marginal(k))) > eps:
            return OrderVerdict(INCOMPARABLE, math.nan)

    d = (Y.pmf - X.pmf).ravel()
    N = d.size
    D = elementary_constraints(L, n)
    # substitute phi = x - 1 so that x >= 0 and the all-zero start is feasible
    A = np.vstack([-D, np.eye(N)])
    b = np.concatenate([np.zeros(D.shape[0]), np.full(N, 2.0)])
    res = maximize_leq(-d, A, b)
    phi = res.x - 1.0
    resid = max(float(np.max(-(D @ phi), initial=0.0)), float(np.max(np.abs(phi)) - 1.0), 0.0)
    if resid > policy.lp_feasibility_tol:
        raise LpFailure(f"LP solution infeasible by {resid:.3g}")
    opt = float(d @ phi)
    if opt < -eps:
        phi = phi.reshape((L,) * n)
        if supermodularity_residual(phi) < -policy.witness_tol:
            raise LpFailure("witness failed supermodularity re-verification")
        return OrderVerdict(VIOLATED, opt, SupermodularWitness(phi, opt), res.pivots)
    return OrderVerdict(ORDERED, opt, None, res.pivots)


@dataclass(frozen=True)
class ScanCell:
    c_pair: tuple
    grid: tuple
    verdict: OrderVerdict

    def to_dict(self):
        out = {"c_pair": list(self.c_pair), "grid": list(self.grid)}
        out.update(self.verdict.to_dict())
        return out


@dataclass(frozen=True)
class ScanReport:
    cells: tuple

    @property
    def all_ordered(self) -> bool:
        return all(cell.verdict.status == ORDERED for cell in self.cells)

    @property
    def violations(self) -> list:
        return [cell for cell in self.cells if cell.verdict.status == VIOLATED]

    def to_dict(self):
        return {"all_ordered": self.all_ordered, "cells": [c.to_dict() for c in self.cells]}


def _map(fn, items, threads):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def sm_decrease_scan(chain: Ctmc, c_list, grids, epsilon: float | None = None,
                     threads: int = 1) -> ScanReport:
    """For each adjacent ``c1 < c2`` and grid, test ``lam_{c2} <=_sm lam_{c1}``.

    A Violated cell disproves decrease along the tested rates; an all-Ordered
    report only says no violation was seen on these grids.
    """
    c_list = [float(c) for c in c_list]
    if any(b <= a for a, b in zip(c_list, c_list[1:])):
        raise ValueError("c_list must be strictly ascending")
    grids = [g if isinstance(g, TimeGrid) else TimeGrid(tuple(g), cap=chain.policy.dim_cap)
             for g in grids]
    laws = {}
    for c in c_list:
        for g in grids:
            laws[c, g.t] = finite_dimensional_law(chain, c, g)
    jobs = [(c1, c2, g) for c1, c2 in zip(c_list, c_list[1:]) for g in grids]

    def run(job):
        c1, c2, g = job
        v = sm_check(laws[c2, g.t], laws[c1, g.t], epsilon, chain.policy)
        return ScanCell((c1, c2), g.t, v)

    return ScanReport(tuple(_map(run, jobs, threads)))


# --------------------------------------------------------------------------
# random search


@dataclass(frozen=True)
class SearchConfig:
    """Settings of :func:`counterexample_search`.

    Off-diagonal rates are drawn i.i.d. from ``rate_family``: ``"exponential"``
    with mean ``rate_scale``, or ``"two-point"`` taking ``rate_values[1]`` with
    probability ``p_high`` and ``rate_values[0]`` otherwise. Intensities are
    sorted draws from ``uniform(0, lambda_max)``. ``plant`` maps sample
    indices to chains that replace the random draw (debug injection).
    """

    m: int = 3
    c_list: tuple = (0.5, 1.0, 2.0, 4.0)
    grids: tuple = ((0.0, 1.0), (0.0, 1.0, 2.0))
    rate_family: str = "exponential"
    rate_scale: float = 1.0
    rate_values: tuple = (0.0, 1.0)
    p_high: float = 0.5
    lambda_max: float = 1.0
    budget: int = 100
    seed: int = 0
    epsilon: float | None = None
    plant: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "m": self.m, "c_list": list(self.c_list), "grids": [list(g) for g in self.grids],
            "rate_family": self.rate_family, "rate_scale": self.rate_scale,
            "rate_values": list(self.rate_values), "p_high": self.p_high,
            "lambda_max": self.lambda_max, "budget": self.budget, "seed": self.seed,
            "epsilon": self.epsilon, "planted": sorted(self.plant),
        }


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent Philox stream for one search sample."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def sample_chain(config: SearchConfig, index: int, policy: NumericPolicy = DEFAULT_POLICY) -> Ctmc:
    rng = sample_rng(config.seed, index)
    m = config.m
    if config.rate_family == "exponential":
        R = rng.exponential(config.rate_scale, size=(m, m))
    elif config.rate_family == "two-point":
        lo, hi = config.rate_values
        R = np.where(rng.random((m, m)) < config.p_high, hi, lo)
    else:
        raise ValueError(f"unknown rate family {config.rate_family!r}")
    np.fill_diagonal(R, 0.0)
    np.fill_diagonal(R, -R.sum(axis=1))
    lam = np.sort(rng.uniform(0.0, config.lambda_max, size=m))
    return Ctmc(R, lam, policy=policy)


@dataclass(frozen=True)
class Candidate:
    sample_index: int
    kind: str
    chain: Ctmc
    monotonicity: MonotonicityReport
    doubly: tuple
    ccp: CcpReport
    scan: ScanReport

    def to_dict(self, seed):
        return {
            "seed": seed,
            "sample_index": self.sample_index,
            "kind": self.kind,
            "chain": self.chain.to_dict(),
            "monotonicity": self.monotonicity.to_dict(),
            "doubly_monotone": {"Q": self.doubly[0].to_dict(), "Q_reversed": self.doubly[1].to_dict()},
            "ccp": self.ccp.to_dict(),
            "scan": self.scan.to_dict(),
        }


@dataclass(frozen=True)
class SearchResult:
    """``candidates`` are non-monotone chains with clean scans; ``flagged``
    are chains with at least one Violated scan cell."""

    config: SearchConfig
    candidates: tuple
    flagged: tuple
    samples_tried: int
    skipped_reducible: int

    def summary(self):
        return {
            "samples_tried": self.samples_tried,
            "candidates_found": len(self.candidates),
            "violations_found": len(self.flagged),
            "skipped_reducible": self.skipped_reducible,
        }

    def to_dict(self):
        seed = self.config.seed
        return {
            "config": self.config.to_dict(),
            "summary": self.summary(),
            "candidates": [c.to_dict(seed) for c in self.candidates],
            "violations": [c.to_dict(seed) for c in self.flagged],
        }


def _examine(chain, index, config, threads=1):
    mono = check_generator_monotonicity(chain)
    scan = sm_decrease_scan(chain, config.c_list, config.grids, config.epsilon, threads)
    if scan.violations:
        kind = "sm_violation"
    elif not mono.monotone:
        kind = "not_monotone_sm_ordered"
    else:
        return None
    return Candidate(index, kind, chain, mono, check_doubly_monotone(chain),
                     check_ccp_structure(chain), scan)


def counterexample_search(config: SearchConfig, threads: int = 1,
                          policy: NumericPolicy = DEFAULT_POLICY) -> SearchResult:
    """Sample random chains and keep the ones that bear on the open problems.

    Two kinds are kept: chains that are not stochastically monotone yet pass
    every supermodular scan cell, and chains with any Violated cell. The
    outcome depends only on ``config`` (each sample has its own stream).
    """
    if config.budget < 1:
        raise ValueError("budget must be at least 1")

    def one(index):
        chain = config.plant.get(index)
        if chain is None:
            try:
                chain = sample_chain(config, index, policy)
            except NotIrreducible:
                return "reducible"
        return _examine(chain, index, config)

    results = _map(one, list(range(config.budget)), threads)
    skipped = sum(1 for r in results if r == "reducible")
    kept = [r for r in results if isinstance(r, Candidate)]
    return SearchResult(
        config,
        tuple(r for r in kept if r.kind == "not_monotone_sm_ordered"),
        tuple(r for r in kept if r.kind == "sm_violation"),
        config.budget,
        skipped,
    )
