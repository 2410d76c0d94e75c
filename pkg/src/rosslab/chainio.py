"""Reading chain specification files.

Format (JSON)::

    {"states": [{"label": "low", "lambda": 0.5}, ...],
     "Q": [[-1.0, 1.0], [1.0, -1.0]],
     "service": {"type": "exponential", "mu": 2.0}}

``service`` is optional and only used by the queue commands.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ctmc import Ctmc
from .errors import ChainSpecError, NotAGenerator
from .policy import DEFAULT_POLICY
from .queue import service_from_dict


@dataclass
class LoadedChain:
    chain: Ctmc
    service: object | None
    permutation: list
    notes: list = field(default_factory=list)


def _number(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ChainSpecError(f"expected a number, got {x!r}", where)
    return float(x)


def parse_chain(doc, policy=DEFAULT_POLICY) -> LoadedChain:
    if not isinstance(doc, dict):
        raise ChainSpecError("top level must be an object")
    states = doc.get("states")
    if not isinstance(states, list) or not states:
        raise ChainSpecError("missing or empty list", "states")
    labels, lam = [], []
    for i, s in enumerate(states):
        if not isinstance(s, dict) or "lambda" not in s:
            raise ChainSpecError("each state needs a 'lambda'", f"states[{i}]")
        lam.append(_number(s["lambda"], f"states[{i}].lambda"))
        labels.append(str(s.get("label", i)))
    Q = doc.get("Q")
    if not isinstance(Q, list) or len(Q) != len(states):
        raise ChainSpecError(f"need {len(states)} rows", "Q")
    rows = []
    for i, row in enumerate(Q):
        if not isinstance(row, list) or len(row) != len(states):
            raise ChainSpecError(f"need {len(states)} entries", f"Q[{i}]")
        rows.append([_number(x, f"Q[{i}][{j}]") for j, x in enumerate(row)])
    try:
        chain = Ctmc(np.array(rows), lam, labels, policy=policy)
    except NotAGenerator as exc:
        raise ChainSpecError(str(exc), f"Q[{exc.row}]" if exc.row is not None else "Q") from exc

    service = None
    if "service" in doc:
        try:
            service = service_from_dict(doc["service"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ChainSpecError(str(exc), "service") from exc

    perm = list(chain.order)
    notes = []
    if perm != sorted(perm):
        notes.append(f"states re-sorted by lambda; input rows in new order: {perm}")
    values, counts = np.unique(chain.lam, return_counts=True)
    for v, n in zip(values, counts):
        if n > 1:
            tied = [s for s, x in zip(chain.labels, chain.lam) if x == v]
            notes.append(f"states {tied} share lambda={v}; lumped in finite-dimensional laws")
    return LoadedChain(chain, service, perm, notes)


def load_chain_file(path, policy=DEFAULT_POLICY) -> LoadedChain:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChainSpecError(f"invalid JSON: {exc.msg}", f"line {exc.lineno}") from exc
    return parse_chain(doc, policy)
