"""Numeric tolerances used across the package, gathered in one record."""

from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class NumericPolicy:
    row_sum_tol: float = 1e-12
    # input generators whose rows miss zero by more than this are rejected
    input_row_sum_tol: float = 1e-9
    stationary_tol: float = 1e-10
    poisson_tail: float = 1e-13
    dim_cap: int = 4
    lattice_cap: int = 5 ** 4
    state_cap: int = 64
    epsilon: float = 1e-9
    lp_feasibility_tol: float = 1e-10
    witness_tol: float = 1e-9
    monotone_tol: float = 1e-12
    qbd_tol: float = 1e-13
    qbd_max_iter: int = 10 ** 6
    curve_slack: float = 1e-8

    def with_overrides(self, **kwargs):
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

    def as_dict(self):
        return asdict(self)


DEFAULT_POLICY = NumericPolicy()
