import math

import numpy as np
import pytest

from survconcord import (
    DegenerateDesignError,
    EffectEstimates,
    InvalidReplicateError,
    TooManyInvalidReplicates,
    ValidationError,
    anova_stat,
    confidence_ellipsoid,
    fit_groups,
    make_contrast,
    one_way_contrast,
    pairwise_effects,
    run_contrast_tests,
    v_hat,
    wb_statistic,
    wb_test,
)
from survconcord._engine import BootstrapEngine

from conftest import make_group, random_groups
from oracles import entrywise_vhat, naive_boot_statistic


class TestMakeContrast:
    def test_projection_of_projection_is_itself(self):
        p2 = np.array([[0.5, -0.5], [-0.5, 0.5]])
        spec = make_contrast(p2)
        np.testing.assert_allclose(spec.t, p2, atol=1e-12)

    def test_scale_invariance(self):
        c = np.array([[1.0, -2.0, 1.0], [0.0, 1.0, -1.0]])
        np.testing.assert_allclose(make_contrast(c).t, make_contrast(3 * c).t, atol=1e-12)

    def test_rank_one_formula(self):
        c = np.array([[1.0, -1.0, 0.0]])
        np.testing.assert_allclose(make_contrast(c).t, c.T @ c / 2, atol=1e-14)

    def test_row_space_invariance(self, rng):
        c = rng.normal(size=(3, 5))
        mix = rng.normal(size=(3, 3)) + 3 * np.eye(3)
        np.testing.assert_allclose(make_contrast(c).t, make_contrast(mix @ c).t, atol=1e-10)

    def test_projection_properties(self, rng):
        for _ in range(10):
            c = rng.normal(size=(rng.integers(1, 4), 4))
            t = make_contrast(c).t
            np.testing.assert_allclose(t, t.T, atol=1e-12)
            np.testing.assert_allclose(t @ t, t, atol=1e-10)
            np.testing.assert_allclose(t @ c.T, c.T, atol=1e-10)

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValidationError):
            make_contrast(np.zeros((2, 3)))


class TestVhat:
    def test_zero_for_deterministic_single_subjects(self):
        fits = fit_groups([make_group([1.0]), make_group([1.0])], 5.0)
        np.testing.assert_allclose(v_hat(fits), 0.0, atol=1e-15)

    def test_symmetry_and_kernel_vector(self, rng):
        for _ in range(10):
            groups = random_groups(rng, d=int(rng.integers(2, 5)))
            fits = fit_groups(groups, math.inf)
            v = v_hat(fits)
            np.testing.assert_allclose(v, v.T, atol=1e-10)
            assert np.max(np.abs(v @ np.ones(len(fits)))) <= 1e-10
            assert np.all(np.diag(v) >= -1e-10)

    def test_matches_entrywise_formulas_on_spec_dataset(self):
        groups = [make_group([1.0, 2.0]), make_group([1.5, 2.5])]
        fits = fit_groups(groups, 3.0)
        np.testing.assert_allclose(v_hat(fits), entrywise_vhat(fits), rtol=1e-10, atol=1e-12)

    def test_matches_entrywise_formulas_random(self, rng):
        for _ in range(8):
            groups = random_groups(rng, d=int(rng.integers(2, 4)), n_range=(3, 8))
            fits = fit_groups(groups, math.inf)
            np.testing.assert_allclose(v_hat(fits), entrywise_vhat(fits), rtol=1e-8, atol=1e-12)

    def test_engine_fast_path_agrees(self, rng):
        for _ in range(8):
            groups = random_groups(rng, d=int(rng.integers(2, 5)))
            fits = fit_groups(groups, math.inf)
            np.testing.assert_allclose(
                BootstrapEngine(fits).vhat_fast(), v_hat(fits), rtol=1e-10, atol=1e-13
            )


class TestAnovaStat:
    def test_centered_effects_give_zero(self):
        eff = EffectEstimates(w=np.full((3, 3), 0.5), p=np.full(3, 0.5), d=3)
        spec = one_way_contrast(3)
        assert anova_stat(eff, np.eye(3), spec, 30) == pytest.approx(0.0, abs=1e-14)

    def test_homogeneous_in_covariance_scale(self):
        eff = EffectEstimates(w=np.zeros((2, 2)), p=np.array([0.4, 0.6]), d=2)
        spec = one_way_contrast(2)
        v = np.array([[0.3, -0.1], [-0.1, 0.3]])
        f1 = anova_stat(eff, v, spec, 10)
        f2 = anova_stat(eff, 2 * v, spec, 10)
        assert f2 == pytest.approx(f1 / 2, rel=1e-14)

    def test_hand_computed_value(self):
        eff = EffectEstimates(w=np.zeros((2, 2)), p=np.array([0.375, 0.625]), d=2)
        vhat = np.array([[0.25, 0.0], [0.0, 0.25]])  # tr(T vhat) = 0.25
        spec = one_way_contrast(2)
        # N p'Tp / tr = 8 * 0.03125 / 0.25
        assert anova_stat(eff, vhat, spec, 8) == pytest.approx(1.0)
        assert anova_stat(eff, 2 * vhat, spec, 8) == pytest.approx(0.5)

    def test_degenerate_trace_raises(self):
        eff = EffectEstimates(w=np.zeros((2, 2)), p=np.array([0.5, 0.5]), d=2)
        with pytest.raises(DegenerateDesignError):
            anova_stat(eff, np.zeros((2, 2)), one_way_contrast(2), 10)


class TestWbStatistic:
    def test_matches_naive_reconstruction(self, rng):
        for trial in range(6):
            d = int(rng.integers(2, 4))
            groups = random_groups(rng, d=d)
            fits = fit_groups(groups, math.inf if trial % 2 else 6.0)
            spec = one_way_contrast(d) if trial % 2 else make_contrast(rng.normal(size=(2, d)))
            g = rng.poisson(1.0, sum(f.n for f in fits)) - 1.0
            prod = wb_statistic(fits, spec, g)
            naive = naive_boot_statistic(fits, spec, g)
            assert prod == pytest.approx(naive, rel=1e-10)

    def test_zero_multipliers_raise(self, rng):
        groups = random_groups(rng, d=2)
        fits = fit_groups(groups, math.inf)
        with pytest.raises(InvalidReplicateError):
            wb_statistic(fits, one_way_contrast(2), np.zeros(sum(f.n for f in fits)))

    def test_perturbed_effect_matrix_diagonal_vanishes(self, rng):
        from survconcord import stieltjes_pm, wb_process

        groups = random_groups(rng, d=3)
        fits = fit_groups(groups, math.inf)
        n_total = sum(f.n for f in fits)
        offsets = np.concatenate([[0], np.cumsum([f.n for f in fits])]).astype(int)
        g = rng.poisson(1.0, n_total) - 1.0
        for l, fit in enumerate(fits):
            h = wb_process(fit, g[offsets[l] : offsets[l + 1]], n_total)
            diag = stieltjes_pm(h, fit.survival) - stieltjes_pm(h, fit.survival)
            assert diag == 0.0

    def test_multiplier_count_checked(self, rng):
        groups = random_groups(rng, d=2)
        fits = fit_groups(groups, math.inf)
        with pytest.raises(ValidationError):
            wb_statistic(fits, one_way_contrast(2), np.zeros(3))


def small_null_groups(rng, d=3, n=12):
    return [
        make_group(np.round(rng.exponential(2.0, n), 1) + 0.1, (rng.random(n) > 0.3).astype(int), f"g{i}")
        for i in range(d)
    ]


class TestWbTest:
    def test_result_conventions(self, rng):
        groups = small_null_groups(rng)
        res = wb_test(groups, one_way_contrast(3), alpha=0.05, n_boot=99, seed=11)
        assert res.p_value == (1 + np.count_nonzero(res.boot_stats >= res.statistic)) / 100
        k = math.ceil(0.95 * 100)
        assert res.critical_value == pytest.approx(np.sort(res.boot_stats)[k - 1])
        assert res.reject == (res.statistic > res.critical_value)
        if res.reject:
            assert res.p_value <= 0.05
        assert res.boot_stats.size == 99
        assert np.all(np.isfinite(res.boot_stats))

    def test_alpha_one_always_rejects(self, rng):
        groups = small_null_groups(rng)
        res = wb_test(groups, one_way_contrast(3), alpha=1.0, n_boot=39, seed=2)
        assert res.critical_value == -math.inf
        assert res.reject

    def test_extreme_statistic_gives_smallest_p(self, rng):
        # strongly (but not completely) separated groups: the observed
        # statistic clears every bootstrap draw
        groups = [
            make_group(rng.uniform(0.1, 2.0, 40)),
            make_group(rng.uniform(1.8, 4.0, 40)),
        ]
        res = wb_test(groups, one_way_contrast(2), n_boot=39, seed=0)
        assert res.statistic > res.boot_stats.max()
        assert res.p_value == 1 / 40

    def test_statistic_invariant_under_row_equivalent_contrasts(self, rng):
        groups = small_null_groups(rng, d=4)
        fits = fit_groups(groups, math.inf)
        eff = pairwise_effects(fits)
        vhat = v_hat(fits)
        c = rng.normal(size=(2, 4))
        mix = rng.normal(size=(2, 2)) + 4 * np.eye(2)
        f1 = anova_stat(eff, vhat, make_contrast(c), 60)
        f2 = anova_stat(eff, vhat, make_contrast(mix @ c), 60)
        assert f2 == pytest.approx(f1, rel=1e-10)

    def test_seed_determinism_and_worker_independence(self, rng):
        groups = small_null_groups(rng)
        spec = one_way_contrast(3)
        a = wb_test(groups, spec, n_boot=1100, seed=42, workers=1)
        b = wb_test(groups, spec, n_boot=1100, seed=42, workers=3)
        assert np.array_equal(a.boot_stats, b.boot_stats)
        assert a.p_value == b.p_value and a.critical_value == b.critical_value

    def test_normal_multipliers_supported(self, rng):
        groups = small_null_groups(rng)
        res = wb_test(groups, one_way_contrast(3), n_boot=59, seed=1, multiplier="normal")
        assert np.all(np.isfinite(res.boot_stats))

    def test_validation(self, rng):
        groups = small_null_groups(rng)
        spec = one_way_contrast(3)
        with pytest.raises(ValidationError):
            wb_test(groups, spec, n_boot=10)
        with pytest.raises(ValidationError):
            wb_test(groups, spec, alpha=0.0)
        with pytest.raises(ValidationError):
            wb_test(groups, spec, multiplier="rademacher")

    def test_shared_draws_across_contrasts(self, rng):
        groups = small_null_groups(rng, d=4)
        specs = [one_way_contrast(4), make_contrast(np.array([[1.0, -1.0, 0.0, 0.0]]))]
        results = run_contrast_tests(groups, specs, n_boot=79, seed=9)
        single = wb_test(groups, specs[0], n_boot=79, seed=9)
        assert np.array_equal(results[0].boot_stats, single.boot_stats)

    def test_redraw_path_replaces_degenerate_draws(self):
        # Four effective noise sources: roughly 2% of Poisson draws zero the
        # trace, so redraws happen but stay well under the 10% budget.
        groups = [make_group([1.0, 2.0, 3.0]), make_group([1.5, 2.5, 3.5])]
        hit = None
        for seed in range(40):
            res = wb_test(groups, one_way_contrast(2), n_boot=39, seed=seed)
            if res.n_redraws > 0:
                hit = res
                break
        assert hit is not None, "no seed produced a degenerate draw"
        assert np.all(np.isfinite(hit.boot_stats))

    def test_abort_when_degeneracy_dominates(self):
        groups = [make_group([1.0, 2.0]), make_group([1.5, 2.5])]
        saw_abort = False
        for seed in range(60):
            try:
                wb_test(groups, one_way_contrast(2), n_boot=39, seed=seed)
            except TooManyInvalidReplicates:
                saw_abort = True
                break
        assert saw_abort, "expected at least one seed to exhaust the redraw budget"


class TestEllipsoid:
    def test_center_is_inside(self, rng):
        groups = small_null_groups(rng)
        res = wb_test(groups, one_way_contrast(3), n_boot=99, seed=4)
        ell = confidence_ellipsoid(res)
        assert ell.contains(ell.center)

    def test_zero_duality_with_test(self, rng):
        for seed in range(5):
            groups = small_null_groups(rng)
            res = wb_test(groups, one_way_contrast(3), n_boot=99, seed=seed)
            ell = confidence_ellipsoid(res)
            assert ell.contains(np.zeros(3)) == (not res.reject)

    def test_radius_formula(self, rng):
        groups = small_null_groups(rng)
        res = wb_test(groups, one_way_contrast(3), n_boot=99, seed=5)
        ell = confidence_ellipsoid(res)
        assert ell.radius_sq == pytest.approx(
            res.trace_term * res.critical_value / res.total_n, rel=1e-14
        )

    def test_shifted_duality_arbitrary_null_value(self, rng):
        groups = small_null_groups(rng)
        res = wb_test(groups, one_way_contrast(3), n_boot=199, seed=6)
        ell = confidence_ellipsoid(res)
        c = res.contrast.c
        pinv_cc = np.linalg.pinv(c @ c.T)
        for _ in range(20):
            v0 = res.contrast.c @ (res.effects.p + rng.normal(scale=0.05, size=3))
            diff = c @ res.effects.p - v0
            shifted_stat = res.total_n * diff @ pinv_cc @ diff / res.trace_term
            rejected = shifted_stat > res.critical_value
            assert ell.contains(v0) == (not rejected)
