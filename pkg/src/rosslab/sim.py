"""Discrete-event simulation of the Cox/G/1 workload process.

The environment path, arrival epochs and service times come from three
independent Philox substreams of one seed. Arrivals use a time change: the
gaps of a unit-rate Poisson stream are consumed at the instantaneous rate
``lam[state]``. The virtual workload decreases at slope one between events
and its time integral is accumulated exactly.

The event loop itself lives in a kernel (compiled if available, otherwise
pure Python). The kernel works through pre-drawn buffers and returns
whenever one runs dry; this module refills it and resumes. Results depend
only on the seed, never on the kernel or the buffer size.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from . import _simkernel_py
from .errors import UnstableWithoutOverride
from .queue import SIMULATION, QueueSpec, WorkloadEstimate, stability_check

try:
    from . import _simkernel as _compiled
except ImportError:  # no C toolchain at install time
    _compiled = None

KERNELS = {"python": _simkernel_py}
if _compiled is not None:
    KERNELS["compiled"] = _compiled
DEFAULT_KERNEL = "compiled" if _compiled is not None else "python"

CHUNK = 1 << 15


def _streams(seed):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.Philox(s)) for s in ss.spawn(4)]


def _jump_table(Q):
    m = Q.shape[0]
    out = np.empty((m, m))
    for i in range(m):
        p = np.where(np.arange(m) == i, 0.0, Q[i]) / -Q[i, i]
        cum = np.cumsum(p)
        last = np.flatnonzero(p > 0)[-1]
        cum[last:] = 1.0
        out[i] = cum
    return out


def _batch_ci(values, batches):
    mean = float(np.mean(values))
    if batches < 2:
        return mean, math.inf
    sd = float(np.std(values, ddof=1))
    return mean, float(stats.t.ppf(0.975, batches - 1) * sd / math.sqrt(batches))


def simulate_mean_workload(spec: QueueSpec, arrivals: int = 10 ** 6, batches: int = 32,
                           warmup: float = 0.1, seed=0, allow_unstable: bool = False,
                           kernel: str | None = None) -> WorkloadEstimate:
    """Estimate the time-average workload by batch means.

    Args:
        spec: queue instance; any of the supported service laws.
        arrivals: total simulated arrivals, warm-up included.
        batches: number of equal-count batches after warm-up.
        warmup: fraction of arrivals discarded at the start.
        seed: integer or ``SeedSequence``.
        allow_unstable: simulate even when the load is at least one.
        kernel: ``"compiled"`` or ``"python"``; defaults to the fastest present.

    Returns:
        Estimate with a Student-t 95% half-width over the batch means. The
        customer-average waiting time (workload found by arrivals, i.e. the
        Lindley sequence) is reported in ``diagnostics``.
    """
    st = stability_check(spec)
    if not st.stable and not allow_unstable:
        raise UnstableWithoutOverride(f"traffic intensity {st.rho:.4g} >= 1")
    if batches < 2 or not 0 <= warmup < 1:
        raise ValueError("need at least 2 batches and a warm-up fraction in [0, 1)")
    warm = int(warmup * arrivals)
    blen = (arrivals - warm) // batches
    if blen < 1:
        raise ValueError("too few arrivals for the requested batch count")
    impl = KERNELS[kernel or DEFAULT_KERNEL]

    env = spec.environment
    Q = env.Q
    lam = np.ascontiguousarray(env.lam, dtype=float)
    hold_rate = np.ascontiguousarray(-np.diag(Q))
    jump_cum = np.ascontiguousarray(_jump_table(Q))
    hold_rng, jump_rng, arr_rng, svc_rng = _streams(seed)

    cum_pi = np.cumsum(env.pi)
    cum_pi[-1] = 1.0
    state = int(np.searchsorted(cum_pi, jump_rng.random(), side="right"))
    fstate = np.array([0.0, 0.0, hold_rng.standard_exponential() / hold_rate[state],
                       arr_rng.standard_exponential()])
    istate = np.array([state, 0, 0, 0, 0, 0, warm, blen, batches, -1], dtype=np.int64)
    buf = {
        1: lambda: hold_rng.standard_exponential(CHUNK),
        2: lambda: jump_rng.random(CHUNK),
        3: lambda: arr_rng.standard_exponential(CHUNK),
        4: lambda: np.ascontiguousarray(spec.service.sample(svc_rng, CHUNK), dtype=float),
    }
    bufs = {code: make() for code, make in buf.items()}
    slot = {1: 2, 2: 3, 3: 4, 4: 5}
    area, span = np.zeros(batches), np.zeros(batches)
    wsum, wcnt = np.zeros(batches), np.zeros(batches)

    while True:
        status = impl.run(fstate, istate, lam, hold_rate, jump_cum, bufs[1], bufs[2],
                          bufs[3], bufs[4], area, span, wsum, wcnt)
        if status == 0:
            break
        bufs[status] = buf[status]()
        istate[slot[status]] = 0

    value, hw = _batch_ci(area / span, batches)
    wait, whw = _batch_ci(wsum / wcnt, batches)
    diag = {
        "batches": batches,
        "arrivals": arrivals,
        "warmup_arrivals": warm,
        "simulated_time": float(fstate[0]),
        "waiting_time": wait,
        "waiting_half_width": whw,
        "kernel": impl.NAME,
    }
    if not st.stable:
        diag["unstable"] = True
        # ratio of last to first batch mean; grows without bound when diverging
        diag["divergence"] = float((area[-1] / span[-1]) / max(area[0] / span[0], 1e-300))
    return WorkloadEstimate(value, hw, SIMULATION, diag)
