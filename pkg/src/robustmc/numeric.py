"""Desk-scale numerical oracle: synthetic generic instances and rank-r fit tests.

The fit oracle is alternating least squares over a factor pair, with a
spectral initialization from the zero-filled observation matrix on the first
restart and random initializations afterwards.  A fit "admits rank r" when
the relative Frobenius misfit on the observed cells drops to the tolerance.
This is a numerical surrogate for an algebraic statement, so callers treat a
failed fit as "does not admit" only once restarts are exhausted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pattern import GLOBAL, Cell, NoiseBudget, SamplingPattern

_CONVERGENCE_DELTA = 1e-10
_RANK_TOL = 1e-9


@dataclass(frozen=True)
class Instance:
    """A generic low-rank matrix plus sparse noise restricted to a pattern."""

    X: np.ndarray
    noise: dict[Cell, float]
    pattern: SamplingPattern
    r: int
    budget: NoiseBudget | None
    planted: bool
    seed: int

    def observations(self) -> dict[Cell, float]:
        obs = {}
        for cell in self.pattern.cells():
            obs[cell] = float(self.X[cell]) + self.noise.get(cell, 0.0)
        return obs

    def noise_support(self) -> frozenset[Cell]:
        return frozenset(self.noise)

    def metadata(self) -> dict:
        return {
            "d": self.pattern.d,
            "N": self.pattern.N,
            "r": self.r,
            "budget": self.budget.describe() if self.budget else None,
            "planted": self.planted,
            "seed": self.seed,
            "noise_support": sorted(self.noise),
        }


@dataclass(frozen=True)
class FitResult:
    residual: float
    iterations: int
    converged: bool
    admits: bool
    underdetermined_columns: tuple[int, ...] = ()


def generate_instance(
    d: int,
    N: int,
    r: int,
    budget: NoiseBudget | None = None,
    planted: bool = True,
    seed: int = 0,
    pattern: SamplingPattern | None = None,
) -> Instance:
    """Draw factors and noise values from a standard normal, deterministically per seed.

    Planted mode spends the budget exactly (s cells globally, or g per
    column); otherwise the support size is drawn uniformly up to the budget.
    Noise lands only on observed cells.
    """
    if r > min(d, N):
        raise ValueError("rank exceeds matrix dimensions")
    if pattern is None:
        pattern = SamplingPattern.full(d, N)
    if (pattern.d, pattern.N) != (d, N):
        raise ValueError("pattern dimensions disagree with d, N")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((d, r)) @ rng.standard_normal((r, N))
    singulars = np.linalg.svd(X, compute_uv=False)
    if singulars[r - 1] <= _RANK_TOL * singulars[0]:
        raise RuntimeError("degenerate draw: generated matrix is not of full target rank")

    noise: dict[Cell, float] = {}
    if budget is not None and budget.amount > 0:
        if budget.kind == GLOBAL:
            cells = pattern.cells()
            size = budget.amount if planted else int(rng.integers(0, budget.amount + 1))
            if size > len(cells):
                raise ValueError("noise budget exceeds the number of observed cells")
            picks = rng.choice(len(cells), size=size, replace=False)
            support = [cells[i] for i in sorted(picks)]
        else:
            support = []
            for j in range(N):
                col = pattern.column_rows(j)
                size = budget.amount if planted else int(rng.integers(0, budget.amount + 1))
                if size > len(col):
                    raise ValueError(f"column {j} cannot host {size} noisy cells")
                picks = rng.choice(len(col), size=size, replace=False)
                support.extend((col[i], j) for i in sorted(picks))
        for cell in support:
            noise[cell] = float(rng.standard_normal())
    return Instance(X, noise, pattern, r, budget, planted, seed)


def save_instance(instance: Instance, path) -> None:
    """Write the observation file plus a `<path>.meta.json` sidecar."""
    import json

    from .robust import save_observations

    save_observations(instance.pattern, instance.observations(), path)
    with open(f"{path}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(instance.metadata(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_instance_observations(path):
    """Read back an instance's observations and sidecar metadata."""
    import json

    from .robust import load_observations

    pattern, values = load_observations(path)
    with open(f"{path}.meta.json", "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    return pattern, values, meta


def _observation_arrays(observations: dict[Cell, float], pattern: SamplingPattern):
    M = np.zeros((pattern.d, pattern.N))
    mask = np.zeros((pattern.d, pattern.N), dtype=bool)
    for cell in pattern.cells():
        if cell not in observations:
            raise ValueError(f"missing value for observed cell {cell}")
        M[cell] = observations[cell]
        mask[cell] = True
    return M, mask


def _group_keys(mask: np.ndarray, axis: int) -> dict[bytes, list[int]]:
    groups: dict[bytes, list[int]] = {}
    for idx in range(mask.shape[axis]):
        key = (mask[:, idx] if axis == 1 else mask[idx, :]).tobytes()
        groups.setdefault(key, []).append(idx)
    return groups


def _als_sweeps(M, mask, A, B, col_groups, row_groups, max_iterations, norm, tolerance):
    """Alternate factor solves until the residual stabilizes; returns best state."""
    residual = np.inf
    iterations = 0
    converged = False
    for it in range(1, max_iterations + 1):
        # columns given row factors
        for key, cols in col_groups.items():
            rows = np.flatnonzero(np.frombuffer(key, dtype=bool))
            if rows.size == 0:
                B[:, cols] = 0.0
                continue
            sol, *_ = np.linalg.lstsq(A[rows], M[np.ix_(rows, cols)], rcond=None)
            B[:, cols] = sol
        # rows given column factors
        for key, rows in row_groups.items():
            cols = np.flatnonzero(np.frombuffer(key, dtype=bool))
            if cols.size == 0:
                A[rows, :] = 0.0
                continue
            sol, *_ = np.linalg.lstsq(B[:, cols].T, M[np.ix_(rows, cols)].T, rcond=None)
            A[rows, :] = sol.T
        new_residual = float(np.linalg.norm((A @ B - M) * mask) / norm)
        iterations = it
        if abs(residual - new_residual) < _CONVERGENCE_DELTA:
            residual = new_residual
            converged = True
            break
        residual = new_residual
        if residual <= tolerance:
            converged = True
            break
    return residual, iterations, converged


def rank_r_fit(
    observations: dict[Cell, float],
    pattern: SamplingPattern,
    r: int,
    tolerance: float = 1e-6,
    max_iterations: int = 500,
    restarts: int = 5,
    seed: int = 0,
) -> FitResult:
    """Best relative misfit of a rank-r factor model on the observed cells."""
    if r < 1:
        raise ValueError("rank must be positive")
    M, mask = _observation_arrays(observations, pattern)
    counts = mask.sum(axis=0)
    underdetermined = tuple(int(j) for j in np.flatnonzero((counts > 0) & (counts < r)))
    norm = float(np.linalg.norm(M * mask))
    if norm == 0.0:
        return FitResult(0.0, 0, True, True, underdetermined)
    col_groups = _group_keys(mask, axis=1)
    row_groups = _group_keys(mask, axis=0)

    best = (np.inf, 0, False)
    for restart in range(max(1, restarts)):
        if restart == 0:
            U, S, Vt = np.linalg.svd(M * mask, full_matrices=False)
            root = np.sqrt(S[:r])
            A = U[:, :r] * root
            B = (root[:, None]) * Vt[:r, :]
        else:
            rng = np.random.default_rng([seed, restart])
            A = rng.standard_normal((pattern.d, r))
            B = rng.standard_normal((r, pattern.N))
        residual, iterations, converged = _als_sweeps(
            M, mask, A, B, col_groups, row_groups, max_iterations, norm, tolerance
        )
        if residual < best[0]:
            best = (residual, iterations, converged)
        if best[0] <= tolerance:
            break
    residual, iterations, converged = best
    return FitResult(residual, iterations, converged, residual <= tolerance, underdetermined)


def batched_masked_rank_residuals(
    values: np.ndarray,
    masks: np.ndarray,
    r: int,
    stop_below: float = 0.0,
    max_iterations: int = 60,
    stall_ratio: float = 0.97,
    stall_patience: int = 2,
    min_iterations: int = 6,
) -> np.ndarray:
    """Relative rank-r misfit per observation mask, via batched SVD imputation.

    For each mask the unobserved cells are imputed from the running rank-r
    truncation (starting at zero) and the residual is measured on the observed
    cells only.  A slice stops early once it drops below `stop_below` or once
    its improvement factor stays above `stall_ratio` for `stall_patience`
    consecutive iterations.  The returned residual of a stalled slice is an
    upper bound on what more iterations could achieve, which keeps rejection
    screens conservative in one direction only.
    """
    if masks.ndim != 3 or masks.shape[1:] != values.shape:
        raise ValueError("masks must have shape (batch, d, N)")
    batch = masks.shape[0]
    denom = np.sqrt(np.einsum("ij,bij->b", values * values, masks))
    denom = np.where(denom == 0.0, 1.0, denom)
    Z = np.where(masks, values[None, :, :], 0.0)
    residuals = np.full(batch, np.inf)
    streak = np.zeros(batch, dtype=int)
    active = np.ones(batch, dtype=bool)
    for it in range(1, max_iterations + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        U, S, Vt = np.linalg.svd(Z[idx], full_matrices=False)
        L = (U[:, :, :r] * S[:, None, :r]) @ Vt[:, :r, :]
        sub_masks = masks[idx]
        diff = (L - values[None, :, :]) * sub_masks
        new_res = np.sqrt(np.einsum("bij,bij->b", diff, diff)) / denom[idx]
        Z[idx] = np.where(sub_masks, values[None, :, :], L)
        old_res = residuals[idx]
        improved = new_res < old_res * stall_ratio
        streak[idx] = np.where(improved, 0, streak[idx] + 1)
        residuals[idx] = np.minimum(old_res, new_res)
        if it >= min_iterations:
            done = (residuals[idx] <= stop_below) | (streak[idx] >= stall_patience)
            active[idx[done]] = False
    return residuals
