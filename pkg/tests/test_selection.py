"""
Tests for lambda selection and post-selection inference.

This module covers:
- Fold plans grouped by observation
- Cross-validation scoring, tie-breaking, skipped folds and the one-SE rule
- AIC / BIC along a shared path
- Sandwich intervals and singular bread matrices
- Pseudo-R^2
- Invariances of the CV curve and calibration of the sandwich errors
"""

import numpy as np
import pytest

from ising_simreg.estimator import adaptive_weights
from ising_simreg.estimator import build_design
from ising_simreg.estimator import default_lambda_grid
from ising_simreg.estimator import fit_path
from ising_simreg.estimator import fit_unregularized
from ising_simreg.estimator import lambda_max
from ising_simreg.estimator import lasso_weights
from ising_simreg.exceptions import ConfigurationError
from ising_simreg.exceptions import InputError
from ising_simreg.exceptions import SelectionError
from ising_simreg.exceptions import SingularMatrixError
from ising_simreg.model import BinaryDataset
from ising_simreg.model import ParameterSet
from ising_simreg.sampler import sample_exact
from ising_simreg.selection import Z_975
from ising_simreg.selection import Criterion
from ising_simreg.selection import FoldPlan
from ising_simreg.selection import cross_validate
from ising_simreg.selection import pseudo_r2
from ising_simreg.selection import sandwich_inference
from ising_simreg.selection import select_ic
from tests.fakes import RecordingMonitor
from tests.fakes import fast_settings
from tests.fakes import ring_similarity
from tests.fakes import small_dataset
from tests.fakes import small_similarities


@pytest.fixture(scope="module")
def data():
    return small_dataset(n=400, seed=7)


class TestFoldPlan:
    def test_partition_is_balanced_and_reproducible(self):
        plan = FoldPlan.create(23, 4, seed=5)
        sizes = [plan.test(f).size for f in range(4)]

        assert sum(sizes) == 23
        assert max(sizes) - min(sizes) <= 1
        np.testing.assert_array_equal(plan.assignment, FoldPlan.create(23, 4, seed=5).assignment)
        assert not np.array_equal(plan.assignment, FoldPlan.create(23, 4, seed=6).assignment)

    def test_train_and_test_are_complementary(self):
        plan = FoldPlan.create(10, 3, seed=0)
        for fold in range(3):
            both = np.concatenate([plan.train(fold), plan.test(fold)])
            assert sorted(both.tolist()) == list(range(10))

    def test_design_rows_keep_all_responses_of_an_observation(self):
        plan = FoldPlan.create(6, 2, seed=0)
        test = plan.test(0)
        rows = plan.design_rows(0, p=3)
        assert sorted(rows.tolist()) == sorted(j * 6 + i for j in range(3) for i in test.tolist())

    def test_rejects_too_many_folds(self):
        with pytest.raises(ConfigurationError):
            FoldPlan.create(3, 4)
        with pytest.raises(ConfigurationError):
            FoldPlan.create(10, 1)


def test_cross_validation_curve(data):
    """
    GIVEN lasso weights and a fold plan
    WHEN cross-validation runs over the default grid
    THEN every fold is scored, every fold reports to the monitor and the
         chosen lambda maximises the mean held-out score
    """
    settings = fast_settings()
    plan = FoldPlan.create(data.n, 4, seed=1)
    monitor = RecordingMonitor()

    result = cross_validate(data, small_similarities(), lasso_weights(3), plan, settings=settings, monitors=[monitor])

    assert result.fold_scores.shape == (4, settings.n_lambda)
    assert result.skipped_folds == ()
    assert result.mean_scores[result.chosen_index] == pytest.approx(result.mean_scores.max())
    assert sorted(fold for fold, _ in monitor.folds) == [0, 1, 2, 3]
    curve = result.curve()
    assert curve.criterion == "cv"
    assert curve.chosen_index == result.chosen_index


def test_ties_go_to_the_larger_lambda(data):
    """
    GIVEN a grid entirely above lambda_max, so every fit has alpha = 0
    WHEN cross-validation scores it
    THEN all mean scores tie and the largest lambda is chosen
    """
    sims = small_similarities()
    weights = lasso_weights(3)
    lam = lambda_max(build_design(data, sims), weights)
    plan = FoldPlan.create(data.n, 4, seed=1)

    result = cross_validate(data, sims, weights, plan, [10 * lam, 20 * lam, 30 * lam], settings=fast_settings())

    assert result.chosen_index == 0
    assert result.chosen_lambda == pytest.approx(30 * lam)


def test_one_se_rule_prefers_larger_lambda(data):
    sims = small_similarities()
    plan = FoldPlan.create(data.n, 4, seed=1)
    settings = fast_settings()

    best = cross_validate(data, sims, lasso_weights(3), plan, settings=settings)
    sparse = cross_validate(data, sims, lasso_weights(3), plan, settings=settings, one_se_rule=True)

    assert sparse.chosen_index <= best.chosen_index
    threshold = best.mean_scores[best.chosen_index] - best.se_scores[best.chosen_index]
    assert sparse.mean_scores[sparse.chosen_index] >= threshold


def test_fold_with_constant_training_column_is_skipped(caplog):
    """
    GIVEN a response equal to 1 in exactly one observation
    WHEN the fold holding that observation out is trained
    THEN the fold is skipped and reported, and lambda is chosen on the rest
    """
    y = small_dataset(n=80, seed=3).y.copy()
    y[:, 1] = 0
    y[5, 1] = 1
    data = BinaryDataset(y)
    plan = FoldPlan.create(data.n, 4, seed=2)
    monitor = RecordingMonitor()

    result = cross_validate(data, small_similarities(), lasso_weights(3), plan, settings=fast_settings(), monitors=[monitor])

    skipped_fold = int(plan.assignment[5])
    assert result.skipped_folds == (skipped_fold,)
    assert np.all(np.isnan(result.fold_scores[skipped_fold]))
    assert np.all(np.isfinite(result.mean_scores))
    assert (skipped_fold, "skipped: constant response") in monitor.folds
    assert "skipped" in caplog.text


def test_all_folds_skipped_raises():
    y = small_dataset(n=40, seed=3).y.copy()
    y[:, 0] = 1
    data = BinaryDataset(y)
    with pytest.raises(SelectionError):
        cross_validate(data, small_similarities(), lasso_weights(3), FoldPlan.create(40, 4), settings=fast_settings())


def test_cross_validation_checks_plan_size(data):
    with pytest.raises(InputError):
        cross_validate(data, small_similarities(), lasso_weights(3), FoldPlan.create(50, 4), settings=fast_settings())


@pytest.mark.parametrize("criterion", ["aic", "bic"])
def test_information_criteria(data, criterion):
    """
    GIVEN a path shared between criteria
    WHEN AIC or BIC is minimised
    THEN df counts active alpha plus the p main effects and the minimiser is chosen
    """
    sims = small_similarities()
    settings = fast_settings()
    weights = lasso_weights(3)
    path = fit_path(build_design(data, sims), weights, settings=settings)

    result = select_ic(data, sims, weights, path.lambda_grid, criterion, path, settings=settings)

    assert result.path is path
    assert result.criterion is Criterion(criterion)
    assert result.df.tolist() == [len(active) + 4 for active in path.active_sets]
    assert result.values[result.chosen_index] == pytest.approx(result.values.min())


def test_bic_penalises_more_than_aic(data):
    sims = small_similarities()
    settings = fast_settings()
    weights = lasso_weights(3)
    path = fit_path(build_design(data, sims), weights, settings=settings)

    aic = select_ic(data, sims, weights, None, "aic", path, settings=settings)
    bic = select_ic(data, sims, weights, None, "bic", path, settings=settings)

    assert np.all(bic.values >= aic.values)
    assert len(path.active_sets[bic.chosen_index]) <= len(path.active_sets[aic.chosen_index])


def test_sandwich_intervals(data):
    """
    GIVEN a selected support
    WHEN the model is refitted and the sandwich covariance computed
    THEN selected coefficients get positive standard errors and symmetric
         intervals, unselected ones stay zero with NaN errors
    """
    result = sandwich_inference(data, small_similarities(), [0, 2], settings=fast_settings())

    assert result.support == (0, 2)
    assert result.refit.params.alpha[1] == 0.0
    assert np.all(result.se_alpha[[0, 2]] > 0)
    assert np.isnan(result.se_alpha[1])
    assert np.all(result.se_main > 0)
    np.testing.assert_allclose(result.upper[0] - result.refit.params.alpha[0], Z_975 * result.se_alpha[0])
    assert result.covariance.shape == (6, 6)
    np.testing.assert_allclose(result.covariance, result.covariance.T)


def test_sandwich_with_collinear_similarities_is_singular(data):
    """
    GIVEN two identical similarity matrices, both selected
    WHEN the sandwich covariance is computed
    THEN the bread matrix is singular and the error carries its condition number
    """
    sims = [ring_similarity(4, 1, "ring"), ring_similarity(4, 1, "ring_copy")]

    with pytest.raises(SingularMatrixError) as exc_info:
        sandwich_inference(data, sims, [0, 1], settings=fast_settings())
    assert "condition_number" in exc_info.value.details


def test_pseudo_r2(data):
    sims = small_similarities()
    design = build_design(data, sims)
    settings = fast_settings()
    full = fit_unregularized(design, settings=settings)
    null = fit_unregularized(design, support=(), settings=settings)

    r2 = pseudo_r2(-design.N * full.loss, -design.N * null.loss)

    assert 0.0 < r2 < 1.0
    assert pseudo_r2(-5.0, -10.0) == pytest.approx(0.5)
    with pytest.raises(InputError):
        pseudo_r2(-1.0, 0.0)


def test_adaptive_path_selects_true_support():
    """
    GIVEN data from a model where the second similarity has alpha = 0
    WHEN the adaptive lasso path is scored by BIC
    THEN the chosen fit keeps the first and third similarities
    """
    data = small_dataset(n=3000, seed=17)
    sims = small_similarities()
    settings = fast_settings(n_lambda=30)
    design = build_design(data, sims)
    pilot = fit_unregularized(design, settings=settings)
    weights = adaptive_weights(pilot.params)

    result = select_ic(data, sims, weights, None, "bic", settings=settings)

    chosen = result.path.results[result.chosen_index]
    assert {0, 2} <= set(chosen.active_set)


@pytest.mark.parametrize("grid", [[], [0.1, -0.1], [0.1, float("nan")]])
def test_cross_validation_rejects_bad_grid(data, grid):
    plan = FoldPlan.create(data.n, 4, seed=1)
    with pytest.raises(InputError):
        cross_validate(data, small_similarities(), lasso_weights(3), plan, grid, settings=fast_settings())


def test_cross_validation_is_invariant_to_duplication_and_order(data):
    """
    GIVEN every observation duplicated with its fold label, or all observations shuffled with theirs
    WHEN cross-validation scores the same grid
    THEN the curve and the chosen lambda are unchanged
    """
    sims = small_similarities()
    weights = lasso_weights(3)
    settings = fast_settings()
    plan = FoldPlan.create(data.n, 4, seed=1)
    grid = default_lambda_grid(lambda_max(build_design(data, sims), weights), 12, 1e-2)
    order = np.random.default_rng(2).permutation(data.n)

    base = cross_validate(data, sims, weights, plan, grid, settings=settings)
    doubled = cross_validate(
        BinaryDataset.concat(data, data),
        sims,
        weights,
        FoldPlan(2 * data.n, 4, plan.seed, np.concatenate([plan.assignment, plan.assignment])),
        grid,
        settings=settings,
    )
    shuffled = cross_validate(
        data.subset(order), sims, weights, FoldPlan(data.n, 4, plan.seed, plan.assignment[order]), grid, settings=settings
    )

    for other in (doubled, shuffled):
        np.testing.assert_allclose(other.mean_scores, base.mean_scores, atol=1e-7)
        assert other.chosen_index == base.chosen_index


def _independent_coins(n, seed, main=(-1.0, 0.0, 0.5, 1.0)):
    return sample_exact(n, ParameterSet(list(main), [0.0, 0.0, 0.0]), small_similarities(), seed)


def test_sandwich_errors_match_binomial_closed_form():
    """
    GIVEN independent Bernoulli responses and no selected similarity
    WHEN sandwich errors are computed for the main effects
    THEN they match sqrt(1 / (n phat (1 - phat))) within 10%
    """
    data = _independent_coins(500, seed=41)

    result = sandwich_inference(data, small_similarities(), [], settings=fast_settings())

    phat = data.y.mean(axis=0)
    np.testing.assert_allclose(result.se_main, np.sqrt(1.0 / (data.n * phat * (1.0 - phat))), rtol=0.1)
    assert np.all(np.isnan(result.se_alpha))


def test_sandwich_errors_shrink_by_root_two_when_data_double(data):
    sims = small_similarities()

    once = sandwich_inference(data, sims, [0, 2], settings=fast_settings())
    twice = sandwich_inference(BinaryDataset.concat(data, data), sims, [0, 2], settings=fast_settings())

    np.testing.assert_allclose(twice.refit.params.vector(), once.refit.params.vector(), atol=1e-6)
    np.testing.assert_allclose(twice.se_main, once.se_main / np.sqrt(2.0), rtol=1e-5)
    np.testing.assert_allclose(twice.se_alpha[[0, 2]], once.se_alpha[[0, 2]] / np.sqrt(2.0), rtol=1e-5)


def test_pseudo_r2_of_reported_application_fit():
    assert pseudo_r2(-1125.28, -9441.01) == pytest.approx(0.88, abs=0.005)


@pytest.mark.slow
def test_sandwich_interval_coverage():
    """
    GIVEN 500 replicates of independent Bernoulli responses with alpha_ring = 0 selected
    WHEN 95% sandwich intervals are formed for the main effects and alpha_ring
    THEN their pooled coverage lies in [0.90, 0.98]
    """
    truth = np.array([-1.0, 0.0, 0.5, 1.0, 0.0])
    hits = []

    for replicate in range(500):
        data = _independent_coins(200, seed=10_000 + replicate)
        result = sandwich_inference(data, small_similarities(), [0], settings=fast_settings())
        estimate = np.append(result.refit.params.main_effects, result.refit.params.alpha[0])
        se = np.append(result.se_main, result.se_alpha[0])
        hits.append(np.abs(estimate - truth) <= Z_975 * se)

    coverage = float(np.mean(hits))
    assert 0.90 <= coverage <= 0.98
