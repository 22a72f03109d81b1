"""Sparse-noise verification: quantify certificates over removal patterns.

The finite (resp. unique) verdict holds when every admissible removal of the
budgeted noise support leaves a pattern whose constraint matrix carries a
finite (resp. unique plus disjoint) certificate.  Global budgets remove
exactly s cells for the finite check and s+1 for the unique check; per-column
budgets remove exactly g+1 cells per column for both.  Enumeration is exact
with early exit on the first failure; a configurable cap turns oversized
enumerations into an honest Indeterminate.

Note that the per-column quantifier admits coordinated removals that empty an
entire row whenever every column observing that row removes it, and a pattern
with an empty row is never finitely completable; the per-column checks are
therefore refuted on virtually every pattern, with the row-erasing removal
reported as the witness.  The corresponding probabilistic bounds remain
useful as formulas; the deterministic quantifier is implemented exactly as
stated.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import combinations

import numpy as np

from . import certify, numeric
from .pattern import (
    GLOBAL,
    Cell,
    NoiseBudget,
    PatternFormatError,
    RemovalSet,
    SamplingPattern,
    build_constraint_matrix,
    count_removals,
    enumerate_removals,
    remove_entries,
)

DEFAULT_ENUMERATION_CAP = 10_000_000


class RobustOutcome(Enum):
    FINITE = "FinitelyCompletable"
    UNIQUE = "UniquelyCompletable"
    REFUTED = "Refuted"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class RobustVerdict:
    verdict: RobustOutcome
    checked: int = 0
    failing_removal: RemovalSet | None = None
    reason: str = ""
    premise_violation: bool = False
    indeterminate_removals: int = 0

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "checked": self.checked,
            "failing_removal": (
                [list(c) for c in self.failing_removal.sorted_cells()]
                if self.failing_removal is not None
                else None
            ),
            "reason": self.reason,
            "premise_violation": self.premise_violation,
            "indeterminate_removals": self.indeterminate_removals,
        }


class NoSupportFoundError(RuntimeError):
    """No removal of the allowed size admits a rank-r fit at the tolerance."""

    def __init__(self, message: str, best_residual: float | None = None):
        super().__init__(message)
        self.best_residual = best_residual


def _premise_failure(pattern: SamplingPattern, r: int, budget: NoiseBudget, unique: bool) -> str | None:
    if budget.kind == GLOBAL:
        floor = r + budget.amount + (1 if unique else 0)
    else:
        floor = r + budget.amount + 1
    counts = pattern.column_counts()
    for j, l in enumerate(counts):
        if l < floor:
            return f"column {j} has {l} observed entries; the premise needs at least {floor}"
    return None


def _removal_extra(budget: NoiseBudget, unique: bool) -> int:
    if budget.kind == GLOBAL:
        return 1 if unique else 0
    return 1


def _random_removal(pattern: SamplingPattern, budget: NoiseBudget, extra: int, rng) -> RemovalSet:
    need = budget.amount + extra
    if budget.kind == GLOBAL:
        cells = pattern.cells()
        picks = rng.choice(len(cells), size=need, replace=False)
        return RemovalSet(frozenset(cells[i] for i in picks))
    chosen: list[Cell] = []
    for j in range(pattern.N):
        col = pattern.column_rows(j)
        picks = rng.choice(len(col), size=need, replace=False)
        chosen.extend((col[i], j) for i in picks)
    return RemovalSet(frozenset(chosen))


def _verify(
    pattern: SamplingPattern,
    r: int,
    budget: NoiseBudget,
    unique: bool,
    search_budget: int | None,
    enumeration_cap: int,
    prescreen: int,
    seed: int,
) -> RobustVerdict:
    positive = RobustOutcome.UNIQUE if unique else RobustOutcome.FINITE
    failure = _premise_failure(pattern, r, budget, unique)
    if failure is not None:
        return RobustVerdict(RobustOutcome.REFUTED, reason=failure, premise_violation=True)
    extra = _removal_extra(budget, unique)
    total = count_removals(pattern, budget, extra)
    if total > enumeration_cap:
        return RobustVerdict(
            RobustOutcome.INDETERMINATE,
            reason=f"{total} removal patterns exceed the enumeration cap of {enumeration_cap}",
        )

    def check(removal: RemovalSet) -> certify.Certificate:
        cm = build_constraint_matrix(remove_entries(pattern, removal), r)
        if unique:
            return certify.find_unique_certificate(cm, r, search_budget)
        return certify.find_finite_certificate(cm, r, search_budget)

    checked = 0
    if prescreen > 0:
        # cheap randomized counterexample hunt; can only refute, never accept
        rng = np.random.default_rng([seed, 0x5EED])
        for _ in range(prescreen):
            removal = _random_removal(pattern, budget, extra, rng)
            checked += 1
            if check(removal).verdict == certify.Verdict.REFUTED:
                return RobustVerdict(
                    RobustOutcome.REFUTED,
                    checked=checked,
                    failing_removal=removal,
                    reason="randomized prescreen found a failing removal",
                )

    indeterminate = 0
    for removal in enumerate_removals(pattern, budget, extra):
        checked += 1
        cert = check(removal)
        if cert.verdict == certify.Verdict.REFUTED:
            return RobustVerdict(
                RobustOutcome.REFUTED,
                checked=checked,
                failing_removal=removal,
                reason=cert.note,
            )
        if cert.verdict == certify.Verdict.INDETERMINATE:
            indeterminate += 1
    if indeterminate:
        return RobustVerdict(
            RobustOutcome.INDETERMINATE,
            checked=checked,
            reason=f"{indeterminate} removal patterns hit the certificate search budget",
            indeterminate_removals=indeterminate,
        )
    return RobustVerdict(positive, checked=checked)


def verify_finite(
    pattern: SamplingPattern,
    r: int,
    budget: NoiseBudget,
    search_budget: int | None = certify.DEFAULT_SEARCH_BUDGET,
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP,
    prescreen: int = 0,
    seed: int = 0,
) -> RobustVerdict:
    """Finite completability under the budget: every removal keeps a finite certificate."""
    return _verify(pattern, r, budget, False, search_budget, enumeration_cap, prescreen, seed)


def verify_unique(
    pattern: SamplingPattern,
    r: int,
    budget: NoiseBudget,
    search_budget: int | None = certify.DEFAULT_SEARCH_BUDGET,
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP,
    prescreen: int = 0,
    seed: int = 0,
) -> RobustVerdict:
    """Unique completability under the budget: every removal keeps a disjoint witness pair."""
    return _verify(pattern, r, budget, True, search_budget, enumeration_cap, prescreen, seed)


def identify_noise_support(
    noisy_observations: dict[Cell, float],
    pattern: SamplingPattern,
    r: int,
    s: int,
    fit_tolerance: float = 1e-6,
    max_iterations: int = 500,
    restarts: int = 5,
    screen: bool | None = None,
) -> frozenset[Cell]:
    """Smallest observed-cell set whose removal admits a rank-r fit.

    Candidates are tried by cardinality 0, 1, ..., s and lexicographically
    within a cardinality; the first set whose remaining observations fit rank
    r at `fit_tolerance` relative misfit is returned.  Dense patterns are
    prefiltered by the batched imputation screen before the full alternating
    fit confirms a candidate; the screen threshold is generous, so only
    clearly hopeless candidates are skipped.
    """
    if s < 0:
        raise ValueError("noise budget must be non-negative")
    cells = pattern.cells()
    if not cells:
        raise ValueError("pattern has no observed cells")
    for cell in cells:
        if cell not in noisy_observations:
            raise ValueError(f"missing value for observed cell {cell}")

    density = len(cells) / (pattern.d * pattern.N)
    use_screen = density >= 0.7 if screen is None else screen
    screen_threshold = max(1e-3, 50.0 * fit_tolerance)

    values = np.zeros((pattern.d, pattern.N))
    base_mask = np.zeros((pattern.d, pattern.N), dtype=bool)
    for cell in cells:
        values[cell] = noisy_observations[cell]
        base_mask[cell] = True

    def confirm(candidate: tuple[Cell, ...]) -> bool:
        dropped = set(candidate)
        remaining = {c: v for c, v in noisy_observations.items() if c in pattern.observed and c not in dropped}
        sub = SamplingPattern(pattern.d, pattern.N, pattern.observed - dropped)
        fit = numeric.rank_r_fit(
            remaining, sub, r, fit_tolerance, max_iterations=max_iterations, restarts=restarts
        )
        return fit.admits

    best_residual = np.inf
    flat_cells = np.array([i * pattern.N + j for i, j in cells])
    for size in range(s + 1):
        candidates = list(combinations(range(len(cells)), size))
        if not use_screen:
            for cand in candidates:
                chosen = tuple(cells[i] for i in cand)
                if confirm(chosen):
                    return frozenset(chosen)
            continue
        batch_size = 512
        for start in range(0, len(candidates), batch_size):
            chunk = candidates[start : start + batch_size]
            masks = np.broadcast_to(base_mask, (len(chunk),) + base_mask.shape).copy()
            flat = masks.reshape(len(chunk), -1)
            for b, cand in enumerate(chunk):
                if cand:
                    flat[b, flat_cells[list(cand)]] = False
            residuals = numeric.batched_masked_rank_residuals(
                values, masks, r, stop_below=screen_threshold
            )
            best_residual = min(best_residual, float(residuals.min(initial=np.inf)))
            for b in np.flatnonzero(residuals <= screen_threshold):
                chosen = tuple(cells[i] for i in chunk[b])
                if confirm(chosen):
                    return frozenset(chosen)
    raise NoSupportFoundError(
        f"no support of size <= {s} admits a rank-{r} fit at tolerance {fit_tolerance} "
        f"(best screening residual {best_residual:.3e}); the rank may be wrong, the noise "
        "heavier than budgeted, or the tolerance too tight",
        best_residual=None if np.isinf(best_residual) else best_residual,
    )


def serialize_observations(pattern: SamplingPattern, values: dict[Cell, float]) -> str:
    """Text form: `d N` header then one `row col value` line per cell, ascending."""
    lines = [f"{pattern.d} {pattern.N}"]
    for cell in pattern.cells():
        if cell not in values:
            raise ValueError(f"missing value for observed cell {cell}")
        lines.append(f"{cell[0]} {cell[1]} {values[cell]!r}")
    return "\n".join(lines) + "\n"


def parse_observations(text: str) -> tuple[SamplingPattern, dict[Cell, float]]:
    header: tuple[int, int] | None = None
    values: dict[Cell, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if header is None:
            if len(fields) != 2:
                raise PatternFormatError(f"line {lineno}: expected `d N` header")
            try:
                header = (int(fields[0]), int(fields[1]))
            except ValueError as exc:
                raise PatternFormatError(f"line {lineno}: bad header {line!r}") from exc
            continue
        if len(fields) != 3:
            raise PatternFormatError(f"line {lineno}: expected `row col value`")
        try:
            cell = (int(fields[0]), int(fields[1]))
            value = float(fields[2])
        except ValueError as exc:
            raise PatternFormatError(f"line {lineno}: bad entry {line!r}") from exc
        if cell in values:
            raise PatternFormatError(f"line {lineno}: duplicate cell {cell}")
        values[cell] = value
    if header is None:
        raise PatternFormatError("missing `d N` header line")
    pattern = SamplingPattern.from_cells(header[0], header[1], values.keys())
    return pattern, values


def load_observations(path) -> tuple[SamplingPattern, dict[Cell, float]]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_observations(fh.read())


def save_observations(pattern: SamplingPattern, values: dict[Cell, float], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_observations(pattern, values))
