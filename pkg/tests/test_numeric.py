import numpy as np
import pytest

from robustmc.numeric import (
    batched_masked_rank_residuals,
    generate_instance,
    load_instance_observations,
    rank_r_fit,
    save_instance,
)
from robustmc.pattern import NoiseBudget, SamplingPattern


class TestGenerate:
    def test_deterministic_per_seed(self):
        a = generate_instance(6, 10, 2, NoiseBudget.global_noise(3), seed=5)
        b = generate_instance(6, 10, 2, NoiseBudget.global_noise(3), seed=5)
        assert np.array_equal(a.X, b.X)
        assert a.noise == b.noise

    def test_seeds_differ(self):
        a = generate_instance(6, 10, 2, NoiseBudget.global_noise(3), seed=1)
        b = generate_instance(6, 10, 2, NoiseBudget.global_noise(3), seed=2)
        assert not np.array_equal(a.X, b.X)

    def test_zero_budget_means_no_noise(self):
        inst = generate_instance(5, 8, 2, NoiseBudget.global_noise(0), seed=3)
        assert inst.noise == {}
        assert inst.observations() == {
            cell: float(inst.X[cell]) for cell in inst.pattern.cells()
        }

    def test_planted_global_support_size_exact(self):
        for seed in range(5):
            inst = generate_instance(6, 9, 2, NoiseBudget.global_noise(4), planted=True, seed=seed)
            assert len(inst.noise_support()) == 4
            obs = inst.observations()
            differing = {c for c in inst.pattern.cells() if obs[c] != inst.X[c]}
            assert differing == inst.noise_support()

    def test_planted_per_column_support(self):
        inst = generate_instance(6, 7, 2, NoiseBudget.per_column(2), planted=True, seed=11)
        for j in range(7):
            assert sum(1 for (i, c) in inst.noise_support() if c == j) == 2

    def test_generated_rank_is_exact(self):
        inst = generate_instance(7, 12, 3, seed=4)
        s = np.linalg.svd(inst.X, compute_uv=False)
        assert s[2] / s[0] > 1e-9
        assert s[3] / s[0] < 1e-9

    def test_full_rank_at_dimension(self):
        inst = generate_instance(4, 9, 4, seed=8)
        s = np.linalg.svd(inst.X, compute_uv=False)
        assert s[3] / s[0] > 1e-9

    def test_rank_exceeding_dimensions_rejected(self):
        with pytest.raises(ValueError):
            generate_instance(3, 5, 4)

    def test_save_load_with_sidecar(self, tmp_path):
        inst = generate_instance(5, 7, 2, NoiseBudget.global_noise(2), seed=14)
        path = tmp_path / "inst.obs"
        save_instance(inst, path)
        pattern, values, meta = load_instance_observations(path)
        assert pattern == inst.pattern
        assert values == pytest.approx(inst.observations())
        assert meta["seed"] == 14
        assert {tuple(c) for c in meta["noise_support"]} == inst.noise_support()


class TestFit:
    def test_noiseless_planted_fits(self):
        hits = 0
        for seed in range(100):
            inst = generate_instance(8, 24, 2, seed=seed)
            fit = rank_r_fit(inst.observations(), inst.pattern, 2, tolerance=1e-8)
            hits += fit.residual <= 1e-8
        assert hits >= 99

    def test_higher_rank_data_does_not_fit(self):
        misses = 0
        for seed in range(100):
            inst = generate_instance(8, 24, 3, seed=1000 + seed)
            fit = rank_r_fit(
                inst.observations(), inst.pattern, 2, tolerance=1e-6,
                max_iterations=120, restarts=2,
            )
            misses += fit.residual > 1e-3
        assert misses >= 99

    def test_full_rank_full_observation_exact(self):
        inst = generate_instance(4, 6, 4, seed=2)
        fit = rank_r_fit(inst.observations(), inst.pattern, 4, tolerance=1e-10)
        assert fit.residual <= 1e-10
        assert fit.admits

    def test_residual_nonincreasing_in_r(self):
        inst = generate_instance(7, 10, 4, seed=6)
        obs = inst.observations()
        res = [
            rank_r_fit(obs, inst.pattern, r, tolerance=1e-9, restarts=2).residual
            for r in (2, 3, 4)
        ]
        assert res[1] <= res[0] + 1e-9
        assert res[2] <= res[1] + 1e-9

    def test_permutation_invariance(self):
        inst = generate_instance(6, 9, 2, seed=9)
        obs = inst.observations()
        rng = np.random.default_rng(0)
        prow = rng.permutation(6)
        pcol = rng.permutation(9)
        perm_obs = {(int(prow[i]), int(pcol[j])): v for (i, j), v in obs.items()}
        perm_pattern = SamplingPattern(6, 9, frozenset(perm_obs))
        a = rank_r_fit(obs, inst.pattern, 2, tolerance=1e-9)
        b = rank_r_fit(perm_obs, perm_pattern, 2, tolerance=1e-9)
        assert abs(a.residual - b.residual) < 1e-6

    def test_underdetermined_columns_flagged(self):
        cells = [(i, 0) for i in range(4)] + [(0, 1)]
        p = SamplingPattern.from_cells(4, 2, cells)
        obs = {c: 1.0 for c in cells}
        fit = rank_r_fit(obs, p, 2, restarts=1, max_iterations=20)
        assert fit.underdetermined_columns == (1,)

    def test_zero_observations_zero_residual(self):
        p = SamplingPattern.from_cells(3, 3, [(0, 0)])
        fit = rank_r_fit({(0, 0): 0.0}, p, 1)
        assert fit.residual == 0.0


class TestBatchedScreen:
    def test_matches_direct_fit_on_clean_data(self):
        inst = generate_instance(6, 12, 2, seed=12)
        values = np.zeros((6, 12))
        mask = np.zeros((6, 12), dtype=bool)
        for cell, v in inst.observations().items():
            values[cell] = v
            mask[cell] = True
        res = batched_masked_rank_residuals(values, mask[None, :, :], 2, stop_below=1e-9)
        assert res.shape == (1,)
        assert res[0] <= 1e-6

    def test_detects_rank_excess(self):
        inst = generate_instance(6, 12, 3, seed=13)
        values = inst.X.copy()
        mask = np.ones((6, 12), dtype=bool)
        res = batched_masked_rank_residuals(values, mask[None, :, :], 2)
        assert res[0] > 1e-3

    def test_bad_mask_shape_rejected(self):
        with pytest.raises(ValueError):
            batched_masked_rank_residuals(np.zeros((3, 3)), np.ones((3, 3), dtype=bool), 1)
