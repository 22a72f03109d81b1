"""Per-column sample-count bounds for uniform random observation.

Three regimes share the shape "smallest integer l beating a max of branches":

  noiseless:   l > max{12*log(d/eps) + 12, 2r}
  global s:    l - 12(r+s+1)*log(l/(r+s+1)) > max{12(log(d/eps)+r+s+1), 2r, 2r+s+1}
  per-column g: l - 12(g+1)*log(l/(g+1))    > max{12(log(d/eps)+g+1),   2r, r+g+1}

The noisy left-hand sides are strictly increasing for l above 12*(r+s+1)
(resp. 12*(g+1)), so an upward integer scan starting there is exact.  All
bounds carry the premise r <= d/6; violations are flagged, never hidden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .pattern import GLOBAL, PER_COLUMN, NoiseBudget

# Logarithm convention for every formula in this module.  The source
# inequalities are union-bound derivations, where the natural log is standard;
# switch here to probe sensitivity to the convention.
LOG_BASE = math.e

_SCAN_CAP = 10_000_000


def _log(x: float) -> float:
    if LOG_BASE == math.e:
        return math.log(x)
    return math.log(x, LOG_BASE)


@dataclass(frozen=True)
class BoundQuery:
    """Parameters of a sample-count bound evaluation."""

    d: int
    r: int
    epsilon: float
    N: int | None = None
    budget: NoiseBudget | None = None

    def __post_init__(self):
        if self.d < 1 or self.r < 1:
            raise ValueError("d and r must be positive")
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError("epsilon must lie strictly between 0 and 1")
        if self.N is not None and self.N < 1:
            raise ValueError("N must be positive when given")

    @property
    def premise_ok(self) -> bool:
        return 6 * self.r <= self.d


@dataclass(frozen=True)
class BoundResult:
    """Minimal per-column count satisfying a bound, with the binding branch."""

    l_min: int
    binding: str
    feasible: bool
    premise_ok: bool
    finite_N_ok: bool | None = None
    unique_N_ok: bool | None = None

    def to_dict(self) -> dict:
        return {
            "l_min": self.l_min,
            "binding": self.binding,
            "feasible": self.feasible,
            "premise_ok": self.premise_ok,
            "finite_N_ok": self.finite_N_ok,
            "unique_N_ok": self.unique_N_ok,
        }


def _n_checks(q: BoundQuery) -> tuple[bool | None, bool | None]:
    if q.N is None:
        return None, None
    return q.N >= q.r * (q.d - q.r), q.N >= (q.r + 1) * (q.d - q.r)


def _binding(branches: list[tuple[str, float]]) -> str:
    best = max(value for _, value in branches)
    for label, value in branches:
        if value == best:
            return label
    raise AssertionError("unreachable")


def noiseless_bound(q: BoundQuery) -> BoundResult:
    """Smallest integer strictly above max{12*log(d/eps) + 12, 2r}."""
    if q.budget is not None:
        raise ValueError("noiseless bound takes no noise budget")
    branches = [
        ("12log(d/eps)+12", 12.0 * _log(q.d / q.epsilon) + 12.0),
        ("2r", float(2 * q.r)),
    ]
    threshold = max(value for _, value in branches)
    l_min = math.floor(threshold) + 1
    finite_ok, unique_ok = _n_checks(q)
    return BoundResult(l_min, _binding(branches), l_min <= q.d, q.premise_ok, finite_ok, unique_ok)


def global_condition(l: int, d: int, epsilon: float, r: int, s: int) -> bool:
    """Whether l satisfies the global-noise sample inequality."""
    m = r + s + 1
    lhs = l - 12.0 * m * _log(l / m)
    rhs = max(12.0 * (_log(d / epsilon) + m), 2.0 * r, float(2 * r + s + 1))
    return lhs > rhs


def columnwise_condition(l: int, d: int, epsilon: float, r: int, g: int) -> bool:
    """Whether l satisfies the column-wise-noise sample inequality."""
    m = g + 1
    lhs = l - 12.0 * m * _log(l / m)
    rhs = max(12.0 * (_log(d / epsilon) + m), 2.0 * r, float(r + g + 1))
    return lhs > rhs


def _scan(q: BoundQuery, m: int, condition, binding_branches) -> BoundResult:
    l = math.floor(12 * m) + 1
    while l <= _SCAN_CAP:
        if condition(l):
            break
        l += 1
    else:
        raise RuntimeError("sample-count scan exceeded its safety cap")
    finite_ok, unique_ok = _n_checks(q)
    return BoundResult(
        l, _binding(binding_branches), l <= q.d, q.premise_ok, finite_ok, unique_ok
    )


def global_noise_bound(q: BoundQuery) -> BoundResult:
    """Upward scan for the global-noise inequality, from its monotone region."""
    if q.budget is None or q.budget.kind != GLOBAL:
        raise ValueError("query needs a global noise budget")
    s = q.budget.amount
    m = q.r + s + 1
    branches = [
        ("12(log(d/eps)+r+s+1)", 12.0 * (_log(q.d / q.epsilon) + m)),
        ("2r", float(2 * q.r)),
        ("2r+s+1", float(2 * q.r + s + 1)),
    ]
    return _scan(q, m, lambda l: global_condition(l, q.d, q.epsilon, q.r, s), branches)


def columnwise_noise_bound(q: BoundQuery) -> BoundResult:
    """Upward scan for the column-wise-noise inequality, from its monotone region."""
    if q.budget is None or q.budget.kind != PER_COLUMN:
        raise ValueError("query needs a per-column noise budget")
    g = q.budget.amount
    m = g + 1
    branches = [
        ("12(log(d/eps)+g+1)", 12.0 * (_log(q.d / q.epsilon) + m)),
        ("2r", float(2 * q.r)),
        ("r+g+1", float(q.r + g + 1)),
    ]
    return _scan(q, m, lambda l: columnwise_condition(l, q.d, q.epsilon, q.r, g), branches)


def bound_for_budget(
    d: int, r: int, epsilon: float, budget: NoiseBudget | None, N: int | None = None
) -> BoundResult:
    """Dispatch to the bound matching a verification budget.

    A Global(0) budget is equivalent to the noiseless verification, so it maps
    to the noiseless bound; PerColumn(0) still removes one cell per column and
    keeps the column-wise bound.
    """
    if budget is None or (budget.kind == GLOBAL and budget.amount == 0):
        return noiseless_bound(BoundQuery(d, r, epsilon, N))
    q = BoundQuery(d, r, epsilon, N, budget)
    if budget.kind == GLOBAL:
        return global_noise_bound(q)
    return columnwise_noise_bound(q)


@dataclass(frozen=True)
class CoupledBoundResult:
    """Column-wise bound with the noise budget tied to the per-column sample count.

    The column-wise guarantee is asked to tolerate a 1/r fraction of noisy
    observations per column: g = ceil(l0 / r) where l0 is the noiseless
    minimal count.  (Substituting the solved l itself for l0 has no finite
    solution for r below ~64, because 12*(g+1)*log(l/(g+1)) ~ 12*l*log(r)/r
    then outgrows l; the one-shot coupling is the meaningful finite-size
    reading.)
    """

    d: int
    r: int
    g: int
    noiseless_l_min: int
    result: BoundResult
    ratio: float  # l_min / max(r, log d)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "r": self.r,
            "g": self.g,
            "noiseless_l_min": self.noiseless_l_min,
            "l_min": self.result.l_min,
            "ratio": self.ratio,
        }


def coupled_columnwise_bound(d: int, epsilon: float, r: int | None = None) -> CoupledBoundResult:
    """Column-wise bound at g = ceil(l0/r), r defaulting to ceil(log d)."""
    if r is None:
        r = math.ceil(_log(d))
    l0 = noiseless_bound(BoundQuery(d, r, epsilon)).l_min
    g = math.ceil(l0 / r)
    result = columnwise_noise_bound(BoundQuery(d, r, epsilon, budget=NoiseBudget.per_column(g)))
    ratio = result.l_min / max(r, _log(d))
    return CoupledBoundResult(d, r, g, l0, result, ratio)


NOISELESS_SENTINEL = -1


@dataclass(frozen=True)
class SweepRow:
    r: int
    g: int  # NOISELESS_SENTINEL for the noiseless curve
    l_min: int
    portion: float
    binding: str
    feasible: bool
    premise_ok: bool


def sweep(
    d: int, N: int, epsilon: float, r_values, g_values
) -> list[SweepRow]:
    """One bound evaluation per (g, r) pair, noiseless rows under g = -1.

    Rows with a violated r <= d/6 premise are emitted flagged, not dropped.
    """
    rows = []
    for g in sorted(g_values):
        for r in sorted(r_values):
            q = BoundQuery(
                d,
                r,
                epsilon,
                N,
                None if g == NOISELESS_SENTINEL else NoiseBudget.per_column(g),
            )
            res = noiseless_bound(q) if g == NOISELESS_SENTINEL else columnwise_noise_bound(q)
            rows.append(
                SweepRow(
                    r,
                    g,
                    res.l_min,
                    res.l_min / d,
                    res.binding,
                    res.feasible,
                    res.premise_ok,
                )
            )
    return rows


SWEEP_HEADER = "r,g,l_min,portion,binding,feasible,premise_ok"


def sweep_to_csv(rows: list[SweepRow]) -> str:
    lines = [SWEEP_HEADER]
    for row in rows:
        lines.append(
            f"{row.r},{row.g},{row.l_min},{row.portion:.6f},{row.binding},"
            f"{str(row.feasible).lower()},{str(row.premise_ok).lower()}"
        )
    return "\n".join(lines) + "\n"


def parse_sweep_csv(text: str) -> list[SweepRow]:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0] != SWEEP_HEADER:
        raise ValueError("missing or malformed sweep header")
    rows = []
    for line in lines[1:]:
        r, g, l_min, portion, binding, feasible, premise_ok = line.split(",")
        rows.append(
            SweepRow(
                int(r),
                int(g),
                int(l_min),
                float(portion),
                binding,
                feasible == "true",
                premise_ok == "true",
            )
        )
    return rows
