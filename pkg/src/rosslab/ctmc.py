"""Finite-state CTMC algebra for the baseline intensity process.

A :class:`Ctmc` pairs a generator matrix with a state -> intensity map.
States are kept sorted by ascending intensity so that order-based checks
(stochastic monotonicity, supermodularity) see the real-line order of the
intensity values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    DimensionCapExceeded,
    EtaTooSmall,
    InvalidDampening,
    InvalidModulation,
    NotAGenerator,
    NotIrreducible,
)
from .policy import DEFAULT_POLICY, NumericPolicy


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_generator(Q, policy=DEFAULT_POLICY):
    """Validate ``Q`` and return a copy whose diagonal closes each row exactly."""
    Q = np.array(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise NotAGenerator(f"generator must be square, got shape {Q.shape}")
    m = Q.shape[0]
    if m < 2:
        raise NotAGenerator("generator needs at least two states")
    if m > policy.state_cap:
        raise NotAGenerator(f"{m} states exceeds the state cap {policy.state_cap}")
    if not np.all(np.isfinite(Q)):
        raise NotAGenerator("generator has non-finite entries")
    off = Q - np.diag(np.diag(Q))
    for i in range(m):
        if np.any(off[i] < 0):
            j = int(np.argmax(off[i] < 0))
            raise NotAGenerator(f"row {i}: negative off-diagonal rate Q[{i}][{j}]={Q[i, j]}", row=i)
        scale = max(1.0, float(np.max(np.abs(Q[i]))))
        if abs(Q[i].sum()) > policy.input_row_sum_tol * scale:
            raise NotAGenerator(f"row {i} sums to {Q[i].sum():.3g}, not 0", row=i)
    np.fill_diagonal(off, -off.sum(axis=1))
    return off


def _check_irreducible(Q):
    adj = (Q > 0) & ~np.eye(Q.shape[0], dtype=bool)
    ncomp, labels = connected_components(adj.astype(np.int8), directed=True, connection="strong")
    if ncomp > 1:
        raise NotIrreducible(f"rate graph has {ncomp} communicating classes: {labels.tolist()}")


def stationary_distribution(Q, policy: NumericPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Solve ``pi Q = 0``, ``sum(pi) = 1`` for an irreducible generator.

    The last balance equation is replaced by the normalisation row and the
    resulting dense system is solved directly.
    """
    Q = _check_generator(Q, policy)
    _check_irreducible(Q)
    m = Q.shape[0]
    A = Q.T.copy()
    A[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    # one round of iterative refinement keeps the residual at roundoff level
    pi = pi + np.linalg.solve(A, b - A @ pi)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    scale = max(1.0, float(np.max(np.abs(np.diag(Q)))))
    resid = float(np.max(np.abs(pi @ Q)))
    if resid > policy.stationary_tol * scale:
        raise NotIrreducible(f"stationary solve residual {resid:.3g} too large")
    return pi


class Ctmc:
    """Irreducible finite CTMC with an intensity value attached to each state.

    Args:
        Q: generator matrix, rows in the same order as ``lam``.
        lam: intensity (arrival rate) of each state, nonnegative.
        labels: optional state names.

    The constructor re-sorts states by ascending ``lam`` (stable, so ties keep
    input order); ``order[k]`` is the input index of sorted state ``k``.
    Instances are immutable.
    """

    __slots__ = ("_base", "_rate", "_Q", "_lam", "_pi", "_labels", "_order", "policy")

    def __init__(self, Q, lam, labels=None, policy: NumericPolicy = DEFAULT_POLICY):
        lam = np.array(lam, dtype=float)
        Q = _check_generator(Q, policy)
        m = Q.shape[0]
        if lam.shape != (m,):
            raise NotAGenerator(f"expected {m} intensity values, got shape {lam.shape}")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise NotAGenerator("intensity values must be finite and nonnegative")
        labels = [str(i) for i in range(m)] if labels is None else [str(s) for s in labels]
        if len(labels) != m:
            raise NotAGenerator("label count does not match state count")
        order = np.argsort(lam, kind="stable")
        Qs = Q[np.ix_(order, order)]
        pi = stationary_distribution(Qs, policy)
        self._init(Qs, 1.0, lam[order], pi, [labels[k] for k in order], order, policy)

    def _init(self, base, rate, lam, pi, labels, order, policy):
        self._base = _frozen(base)
        self._rate = float(rate)
        self._Q = _frozen(self._rate * self._base)
        self._lam = _frozen(lam)
        self._pi = _frozen(pi)
        self._labels = tuple(labels)
        self._order = tuple(int(k) for k in order)
        self.policy = policy

    @classmethod
    def _derived(cls, src: Ctmc, base=None, rate=None):
        obj = cls.__new__(cls)
        obj._init(
            src._base if base is None else base,
            src._rate if rate is None else rate,
            src._lam,
            src._pi,
            src._labels,
            src._order,
            src.policy,
        )
        return obj

    @property
    def m(self) -> int:
        return self._Q.shape[0]

    @property
    def Q(self) -> np.ndarray:
        return self._Q

    @property
    def lam(self) -> np.ndarray:
        return self._lam

    @property
    def pi(self) -> np.ndarray:
        return self._pi

    @property
    def labels(self) -> tuple:
        return self._labels

    @property
    def order(self) -> tuple:
        return self._order

    @property
    def rate(self) -> float:
        """Accumulated modulation factor relative to the constructed generator."""
        return self._rate

    @property
    def mean_intensity(self) -> float:
        return float(self._pi @ self._lam)

    @property
    def max_exit_rate(self) -> float:
        return float(np.max(-np.diag(self._Q)))

    def is_reversible(self, tol=1e-10) -> bool:
        flux = self._pi[:, None] * self._Q
        return bool(np.max(np.abs(flux - flux.T)) <= tol * max(1.0, self.max_exit_rate))

    def to_dict(self) -> dict:
        return {
            "states": [{"label": s, "lambda": float(v)} for s, v in zip(self._labels, self._lam)],
            "Q": self._Q.tolist(),
        }

    def __repr__(self):
        return f"Ctmc(m={self.m}, lam={self._lam.tolist()}, rate={self._rate})"


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic matrix of a discrete-time chain."""

    P: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError(f"transition matrix must be square, got {P.shape}")
        if np.any(P < -1e-15) or np.any(P > 1 + 1e-15):
            raise ValueError("transition probabilities must lie in [0, 1]")
        if np.max(np.abs(P.sum(axis=1) - 1.0)) > DEFAULT_POLICY.row_sum_tol:
            raise ValueError("rows of a transition matrix must sum to 1")
        P = np.clip(P, 0.0, 1.0)
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    @property
    def m(self) -> int:
        return self.P.shape[0]


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing observation times ``t_1 < ... < t_n``."""

    t: tuple
    cap: int = DEFAULT_POLICY.dim_cap

    def __post_init__(self):
        t = tuple(float(x) for x in self.t)
        if not t:
            raise ValueError("time grid needs at least one point")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError(f"time grid must be strictly increasing: {t}")
        if len(t) > self.cap:
            raise DimensionCapExceeded(f"grid of {len(t)} points exceeds dimension cap {self.cap}")
        object.__setattr__(self, "t", t)

    @property
    def n(self) -> int:
        return len(self.t)

    @classmethod
    def equally_spaced(cls, n, step=1.0, cap=DEFAULT_POLICY.dim_cap):
        return cls(tuple(k * step for k in range(n)), cap=cap)


@dataclass(frozen=True)
class GridDistribution:
    """Probability mass function on the product lattice ``levels ** n``."""

    levels: tuple
    pmf: np.ndarray

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("levels must be strictly increasing")
        pmf = np.array(self.pmf, dtype=float)
        if pmf.ndim < 1 or any(s != len(levels) for s in pmf.shape):
            raise ValueError(f"pmf shape {pmf.shape} does not match {len(levels)} levels")
        if np.any(pmf < -1e-15):
            raise ValueError("pmf has negative entries")
        if abs(pmf.sum() - 1.0) > 1e-10:
            raise ValueError(f"pmf sums to {pmf.sum()!r}, not 1")
        pmf = np.clip(pmf, 0.0, None)
        pmf.setflags(write=False)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "pmf", pmf)

    @property
    def n(self) -> int:
        return self.pmf.ndim

    def marginal(self, k: int) -> np.ndarray:
        axes = tuple(a for a in range(self.n) if a != k)
        return self.pmf.sum(axis=axes) if axes else self.pmf.copy()

    def relabel(self, fn):
        """Apply a strictly increasing map to the levels; masses are unchanged."""
        return GridDistribution(tuple(fn(v) for v in self.levels), self.pmf)


def time_reverse(chain: Ctmc) -> np.ndarray:
    """Generator of the time-reversed chain, ``Q*[i, j] = pi[j] Q[j, i] / pi[i]``."""
    pi = chain.pi
    if np.any(pi <= 0):
        raise NotIrreducible("time reversal needs a strictly positive stationary law")
    Qr = chain.Q.T * pi[None, :] / pi[:, None]
    np.fill_diagonal(Qr, 0.0)
    np.fill_diagonal(Qr, -Qr.sum(axis=1))
    return Qr


def reverse_chain(chain: Ctmc) -> Ctmc:
    """The reversed process as a :class:`Ctmc` sharing ``lam`` and ``pi``."""
    return Ctmc._derived(chain, base=time_reverse(chain) / chain.rate)


def modulate(chain: Ctmc, c: float) -> Ctmc:
    """Speed the environment up by ``c``: the result has generator ``c * Q``."""
    c = float(c)
    if not (c > 0) or not math.isfinite(c):
        raise InvalidModulation(f"modulation rate must be positive and finite, got {c}")
    return Ctmc._derived(chain, rate=chain.rate * c)


def uniformize(chain: Ctmc, eta: float | None = None) -> TransitionMatrix:
    """``P = I + Q / eta``; ``eta`` defaults to the largest exit rate."""
    qmax = chain.max_exit_rate
    eta = qmax if eta is None else float(eta)
    if eta < qmax:
        raise EtaTooSmall(f"eta={eta} below the largest exit rate {qmax}")
    P = np.eye(chain.m) + chain.Q / eta
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    return TransitionMatrix(P)


def dampen(tm: TransitionMatrix, c: float) -> TransitionMatrix:
    """Lazy version ``(1 - c) I + c P`` of a transition matrix, ``0 < c <= 1``."""
    c = float(c)
    if not 0 < c <= 1:
        raise InvalidDampening(f"dampening factor must lie in (0, 1], got {c}")
    P = c * tm.P
    P[np.diag_indices_from(P)] += 1.0 - c
    return TransitionMatrix(P)


def _expm_generator(Q, t, tail):
    """``exp(Q t)`` for a generator by uniformisation plus repeated squaring.

    The Poisson series is only summed over a step with ``eta * h <= 1``; the
    truncated kernel is renormalised so squaring keeps rows stochastic.
    """
    m = Q.shape[0]
    eta = float(np.max(-np.diag(Q)))
    a = eta * t
    if t == 0 or eta == 0:
        return np.eye(m)
    k = max(0, math.ceil(math.log2(a))) if a > 1 else 0
    h = t / 2.0 ** k
    ah = eta * h
    P = np.eye(m) + Q / eta
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    w = math.exp(-ah)
    cum = w
    term = np.eye(m)
    out = w * term
    j = 0
    while 1.0 - cum >= tail and j < 200:
        j += 1
        term = term @ P
        w *= ah / j
        cum += w
        out += w * term
    out /= out.sum(axis=1, keepdims=True)
    for _ in range(k):
        out = out @ out
        # rounding in the row sums would otherwise double with every squaring
        out /= out.sum(axis=1, keepdims=True)
    return out


def transition_probabilities(chain: Ctmc, t: float) -> TransitionMatrix:
    """Transition matrix ``exp(Q t)`` of the chain over a time span ``t >= 0``."""
    t = float(t)
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    return TransitionMatrix(_expm_generator(chain.Q, t, chain.policy.poisson_tail))


def finite_dimensional_law(chain: Ctmc, c: float, grid: TimeGrid) -> GridDistribution:
    """Stationary joint law of ``(lam_c(t_1), ..., lam_c(t_n))``.

    States with equal intensity are lumped onto one level. The recursion keeps
    the previous coordinates as levels and only the current coordinate as a
    hidden state, so memory is ``|levels|**(n-1) * m``.
    """
    if grid.n > chain.policy.dim_cap:
        raise DimensionCapExceeded(f"grid of {grid.n} points exceeds cap {chain.policy.dim_cap}")
    mc = modulate(chain, c)
    levels, level_of = np.unique(chain.lam, return_inverse=True)
    L = len(levels)
    groups = [np.flatnonzero(level_of == ell) for ell in range(L)]
    F = chain.pi.copy()
    for dt in np.diff(grid.t):
        P = transition_probabilities(mc, dt).P
        G = np.zeros(F.shape[:-1] + (L, chain.m))
        for ell, idx in enumerate(groups):
            G[..., ell, :] = F[..., idx] @ P[idx, :]
        F = G
    pmf = np.zeros(F.shape[:-1] + (L,))
    for ell, idx in enumerate(groups):
        pmf[..., ell] = F[..., idx].sum(axis=-1)
    pmf /= pmf.sum()
    return GridDistribution(tuple(levels), pmf)
