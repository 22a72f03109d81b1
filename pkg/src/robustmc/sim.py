"""Monte Carlo harness tying the probabilistic bounds to the deterministic verifier.

Each trial draws exactly l distinct observed rows per column (the bounds'
premise met with equality), runs the robust verifier, and counts a pass only
on a positive verdict; Indeterminate is a failure, so every reported rate is
conservative.  Per-trial RNG streams derive from (seed, trial index), making
results independent of any execution schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bounds, robust
from .pattern import GLOBAL, NoiseBudget, SamplingPattern

WILSON_Z = 1.959963984540054  # two-sided 95%

DEFAULT_TRIAL_SEARCH_BUDGET = 3000
DEFAULT_TRIAL_ENUMERATION_CAP = 200_000


@dataclass(frozen=True)
class TrialConfig:
    d: int
    N: int
    r: int
    l: int
    budget: NoiseBudget
    trials: int
    seed: int
    target: str = "finite"  # or "unique"

    def __post_init__(self):
        if not (0 < self.l <= self.d):
            raise ValueError("need 0 < l <= d")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.target not in ("finite", "unique"):
            raise ValueError("target must be 'finite' or 'unique'")


@dataclass(frozen=True)
class TrialOutcome:
    pass_count: int
    trial_count: int
    point_estimate: float
    ci_lo: float
    ci_hi: float
    premise_failures: int = 0
    indeterminate_count: int = 0

    def to_dict(self) -> dict:
        return {
            "pass_count": self.pass_count,
            "trial_count": self.trial_count,
            "point_estimate": self.point_estimate,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "premise_failures": self.premise_failures,
            "indeterminate_count": self.indeterminate_count,
        }


def wilson_interval(passes: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    if trials <= 0:
        return (0.0, 1.0)
    phat = passes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def sample_pattern(d: int, N: int, l: int, rng) -> SamplingPattern:
    """Exactly l distinct observed rows per column, uniform."""
    cells = []
    for j in range(N):
        rows = rng.choice(d, size=l, replace=False)
        cells.extend((int(i), j) for i in rows)
    return SamplingPattern(d, N, frozenset(cells))


def estimate_pass_probability(
    cfg: TrialConfig,
    search_budget: int | None = DEFAULT_TRIAL_SEARCH_BUDGET,
    enumeration_cap: int = DEFAULT_TRIAL_ENUMERATION_CAP,
) -> TrialOutcome:
    """Fraction of sampled patterns passing the robust verifier, with Wilson 95% CI."""
    verifier = robust.verify_unique if cfg.target == "unique" else robust.verify_finite
    passes = 0
    premise_failures = 0
    indeterminate = 0
    for trial in range(cfg.trials):
        rng = np.random.default_rng([cfg.seed, trial])
        pattern = sample_pattern(cfg.d, cfg.N, cfg.l, rng)
        verdict = verifier(
            pattern,
            cfg.r,
            cfg.budget,
            search_budget=search_budget,
            enumeration_cap=enumeration_cap,
        )
        if verdict.verdict in (robust.RobustOutcome.FINITE, robust.RobustOutcome.UNIQUE):
            passes += 1
        elif verdict.premise_violation:
            premise_failures += 1
        elif verdict.verdict == robust.RobustOutcome.INDETERMINATE:
            indeterminate += 1
    lo, hi = wilson_interval(passes, cfg.trials)
    return TrialOutcome(
        passes, cfg.trials, passes / cfg.trials, lo, hi, premise_failures, indeterminate
    )


def _premise_floor(r: int, budget: NoiseBudget, target: str) -> int:
    if budget.kind == GLOBAL:
        return r + budget.amount + (1 if target == "unique" else 0)
    return r + budget.amount + 1


@dataclass(frozen=True)
class ThresholdResult:
    threshold: int | None  # smallest l reaching the target rate, None if none <= d
    theory_l_min: int      # uncapped bound value
    theory_l_min_capped: int
    rows: list[tuple[int, TrialOutcome]]

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "theory_l_min": self.theory_l_min,
            "theory_l_min_capped": self.theory_l_min_capped,
            "rows": [{"l": l, **o.to_dict()} for l, o in self.rows],
        }


def empirical_threshold(
    d: int,
    N: int,
    r: int,
    budget: NoiseBudget,
    epsilon: float,
    trials: int,
    seed: int,
    target: str = "finite",
    search_budget: int | None = DEFAULT_TRIAL_SEARCH_BUDGET,
    enumeration_cap: int = DEFAULT_TRIAL_ENUMERATION_CAP,
) -> ThresholdResult:
    """Smallest l whose estimated pass rate reaches 1 - epsilon, scanning up to d.

    Also reports the theoretical minimal l for the matching bound, capped at d
    for comparison.  Per-l seeds derive from (seed, l) so the scan is
    reproducible and each l is independent.
    """
    theory = bounds.bound_for_budget(d, r, epsilon, budget, N).l_min
    rows: list[tuple[int, TrialOutcome]] = []
    threshold = None
    for l in range(_premise_floor(r, budget, target), d + 1):
        cfg = TrialConfig(d, N, r, l, budget, trials, seed=seed * 1_000_003 + l, target=target)
        outcome = estimate_pass_probability(cfg, search_budget, enumeration_cap)
        rows.append((l, outcome))
        if outcome.point_estimate >= 1.0 - epsilon:
            threshold = l
            break
    return ThresholdResult(threshold, theory, min(theory, d), rows)


SIM_CSV_HEADER = "l,pass,trials,estimate,ci_lo,ci_hi,theory_lmin"


def outcomes_to_csv(rows: list[tuple[int, TrialOutcome]], theory_l_min: int) -> str:
    lines = [SIM_CSV_HEADER]
    for l, o in rows:
        lines.append(
            f"{l},{o.pass_count},{o.trial_count},{o.point_estimate:.6f},"
            f"{o.ci_lo:.6f},{o.ci_hi:.6f},{theory_l_min}"
        )
    return "\n".join(lines) + "\n"
