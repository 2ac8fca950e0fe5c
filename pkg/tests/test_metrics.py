import numpy as np
import pytest

from ising_simreg.exceptions import DimensionMismatchError
from ising_simreg.exceptions import InputError
from ising_simreg.metrics import SelectionTruth
from ising_simreg.metrics import mse_alpha
from ising_simreg.metrics import mse_theta
from ising_simreg.metrics import neighborhood_lasso_baseline
from ising_simreg.metrics import sse_alpha
from ising_simreg.metrics import theta_error
from ising_simreg.metrics import tpr_fpr
from ising_simreg.model import BinaryDataset
from ising_simreg.model import InteractionMatrix
from ising_simreg.model import ParameterSet
from ising_simreg.model import assemble_theta
from tests.fakes import fast_settings
from tests.fakes import small_dataset
from tests.fakes import small_similarities
from tests.fakes import small_truth


def test_error_measures():
    truth = SelectionTruth(ParameterSet([0.0, 0.0], [1.0, 0.0, 0.0, -1.0]))
    est = ParameterSet([0.5, -0.5], [1.5, 0.0, 0.5, -1.0])

    assert sse_alpha(est, truth) == pytest.approx(0.5)
    assert mse_alpha(est, truth) == pytest.approx(0.125)
    assert mse_theta(est, truth) == pytest.approx(0.25)


def test_selection_rates():
    """
    GIVEN a truth with support {0, 3} out of K = 4
    WHEN {0, 2} is selected
    THEN TPR = 1/2 and FPR = 1/2
    """
    truth = SelectionTruth(ParameterSet([0.0], [1.0, 0.0, 0.0, -1.0]))

    assert truth.K0 == 2
    assert tpr_fpr([0, 2], truth) == (0.5, 0.5)
    assert tpr_fpr([], truth) == (0.0, 0.0)


def test_selection_rates_with_empty_denominators():
    null_truth = SelectionTruth(ParameterSet([0.0], [0.0, 0.0]))
    full_truth = SelectionTruth(ParameterSet([0.0], [1.0, 1.0]))

    assert tpr_fpr([1], null_truth) == (None, 0.5)
    assert tpr_fpr([0], full_truth) == (0.5, None)
    with pytest.raises(InputError):
        tpr_fpr([7], full_truth)


def test_theta_error_ignores_the_diagonal():
    a = InteractionMatrix([[1.0, 0.5], [0.5, 2.0]])
    b = InteractionMatrix([[-3.0, 0.0], [0.0, 0.0]])

    assert theta_error(a, b) == pytest.approx(np.sqrt(0.5))
    with pytest.raises(DimensionMismatchError):
        theta_error(a, InteractionMatrix(np.zeros((3, 3))))


def test_dimension_mismatch():
    truth = SelectionTruth(small_truth())
    with pytest.raises(DimensionMismatchError):
        mse_alpha(ParameterSet(np.zeros(4), [0.0]), truth)


def test_neighborhood_baseline_is_symmetric():
    """
    GIVEN data from the small model
    WHEN one lasso-logistic regression per response is fitted
    THEN the combined Theta is symmetric with intercepts on the diagonal and
         approximates the true interactions
    """
    data = small_dataset(n=2000, seed=5)
    truth = assemble_theta(small_truth(), small_similarities())

    fit = neighborhood_lasso_baseline(data, n_folds=3, settings=fast_settings())

    np.testing.assert_allclose(fit.theta.values, fit.theta.values.T)
    assert fit.flagged == ()
    assert fit.lambdas.shape == (4,)
    assert theta_error(fit.theta, truth) < 0.5 * np.linalg.norm(truth.off_diagonal())


def test_neighborhood_baseline_flags_constant_response():
    y = small_dataset(n=200, seed=5).y.copy()
    y[:, 2] = 0

    fit = neighborhood_lasso_baseline(BinaryDataset(y), lam=0.01, settings=fast_settings())

    assert fit.flagged == (2,)
    assert np.isnan(fit.lambdas[2])
    assert np.all(fit.theta.values[2, [0, 1, 3]] == 0.0)
