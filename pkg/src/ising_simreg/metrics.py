"""
Estimation and selection quality measures, and the neighborhood-lasso
baseline for recovering Theta without similarity information.
"""

import logging
from collections.abc import Sequence
from functools import partial

import attrs
import numpy as np

from ising_simreg.config import SimRegSettings
from ising_simreg.estimator import StackedDesign
from ising_simreg.estimator import default_lambda_grid
from ising_simreg.estimator import fit_path
from ising_simreg.estimator import lambda_max
from ising_simreg.estimator import lasso_weights
from ising_simreg.estimator import mean_neg_loglik
from ising_simreg.exceptions import DimensionMismatchError
from ising_simreg.exceptions import InputError
from ising_simreg.model import BinaryDataset
from ising_simreg.model import InteractionMatrix
from ising_simreg.model import ParameterSet
from ising_simreg.parallel import map_concurrently
from ising_simreg.selection import FoldPlan

logger = logging.getLogger("ising_simreg.metrics")


@attrs.frozen(eq=False)
class SelectionTruth:
    params: ParameterSet

    @property
    def support(self) -> tuple[int, ...]:
        return self.params.active_set()

    @property
    def K(self) -> int:
        return self.params.K

    @property
    def K0(self) -> int:
        return len(self.support)


def _match(est: ParameterSet, truth: SelectionTruth) -> None:
    est.check_dimensions(truth.params.p, truth.K)


def sse_alpha(est: ParameterSet, truth: SelectionTruth) -> float:
    _match(est, truth)
    return float(np.sum((est.alpha - truth.params.alpha) ** 2))


def sse_theta(est: ParameterSet, truth: SelectionTruth) -> float:
    _match(est, truth)
    return float(np.sum((est.main_effects - truth.params.main_effects) ** 2))


def mse_alpha(est: ParameterSet, truth: SelectionTruth) -> float:
    """(1/K) ||alpha_hat - alpha_0||^2"""
    return sse_alpha(est, truth) / truth.K


def mse_theta(est: ParameterSet, truth: SelectionTruth) -> float:
    """(1/p) ||diag(Theta_hat) - diag(Theta_0)||^2"""
    return sse_theta(est, truth) / truth.params.p


def tpr_fpr(active: Sequence[int], truth: SelectionTruth) -> tuple[float | None, float | None]:
    """
    True and false positive rates of the selected similarities. A rate with
    an empty denominator (K_0 = 0, or K_0 = K for FPR) is None.
    """
    chosen = {int(k) for k in active}
    if any(not 0 <= k < truth.K for k in chosen):
        raise InputError(f"Active indices must lie in 0..{truth.K - 1}", details={"active": sorted(chosen)})
    support = set(truth.support)
    tpr = len(chosen & support) / truth.K0 if truth.K0 else None
    negatives = truth.K - truth.K0
    fpr = len(chosen - support) / negatives if negatives else None
    return tpr, fpr


def theta_error(est_theta: InteractionMatrix, true_theta: InteractionMatrix) -> float:
    """Frobenius norm of the off-diagonal difference."""
    if est_theta.dim != true_theta.dim:
        raise DimensionMismatchError(
            f"Theta dimensions differ: {est_theta.dim} vs {true_theta.dim}",
            details={"estimate": est_theta.dim, "truth": true_theta.dim},
        )
    return float(np.linalg.norm(est_theta.off_diagonal() - true_theta.off_diagonal()))


@attrs.frozen(eq=False)
class BaselineFit:
    theta: InteractionMatrix
    lambdas: np.ndarray
    flagged: tuple[int, ...]


def _column_design(y: np.ndarray, j: int) -> StackedDesign:
    others = np.delete(np.arange(y.shape[1]), j)
    return StackedDesign(response=y[:, j].copy(), x_block=y[:, others].copy(), n=y.shape[0], p=1)


def _fit_column(
    j: int,
    y: np.ndarray,
    lam: float | None,
    plan: FoldPlan | None,
    settings: SimRegSettings,
) -> tuple[np.ndarray, float, bool]:
    """Lasso-logistic regression of y_j on the other responses: (coefficients incl. intercept, lambda, flagged)."""
    p = y.shape[1]
    column = y[:, j]
    if column.min() == column.max():
        logger.warning("Response %d is constant; its neighborhood is left empty", j)
        return np.zeros(p), float("nan"), True
    design = _column_design(y, j)
    weights = lasso_weights(p - 1)
    if lam is not None:
        grid = np.array([lam])
    else:
        grid = default_lambda_grid(lambda_max(design, weights), settings.n_lambda, settings.lambda_min_ratio)
    path = fit_path(design, weights, grid, settings=settings)
    index = 0
    if lam is None and plan is not None and grid.size > 1:
        scores = []
        for fold in range(plan.n_folds):
            train, test = y[plan.train(fold)], y[plan.test(fold)]
            if train[:, j].min() == train[:, j].max():
                continue
            fold_path = fit_path(_column_design(train, j), weights, grid, settings=settings)
            test_design = _column_design(test, j)
            scores.append([-mean_neg_loglik(test_design, est) for est in fold_path.estimates])
        if scores:
            mean = np.mean(scores, axis=0)
            index = int(np.flatnonzero(mean >= mean.max())[0])
    chosen = path.results[index].params
    return np.concatenate([chosen.main_effects, chosen.alpha]), float(grid[index]), False


def neighborhood_lasso_baseline(
    data: BinaryDataset,
    lam: float | None = None,
    n_folds: int = 5,
    seed: int = 0,
    settings: SimRegSettings | None = None,
) -> BaselineFit:
    """
    One lasso-logistic regression per response on all other responses, with
    lambda chosen per response by cross-validation unless ``lam`` is fixed.
    Theta_jj is the intercept of regression j; Theta_jj' averages the
    coefficients of j' in regression j and of j in regression j'.
    """
    settings = settings if settings is not None else SimRegSettings()
    if data.n < 2:
        raise InputError("The neighborhood baseline needs at least two observations")
    y = data.as_float()
    p = data.p
    plan = FoldPlan.create(data.n, min(n_folds, data.n), seed) if lam is None else None

    fits = map_concurrently(
        partial(_fit_column, y=y, lam=lam, plan=plan, settings=settings),
        range(p),
        settings.max_workers,
        settings.executor,
    )
    raw = np.zeros((p, p))
    for j, (coef, _, _) in enumerate(fits):
        raw[j, j] = coef[0]
        raw[j, np.delete(np.arange(p), j)] = coef[1:]
    off = raw - np.diag(np.diag(raw))
    theta = (off + off.T) / 2.0 + np.diag(np.diag(raw))
    flagged = tuple(j for j, (_, _, flag) in enumerate(fits) if flag)
    return BaselineFit(
        theta=InteractionMatrix(theta),
        lambdas=np.array([lam_j for _, lam_j, _ in fits]),
        flagged=flagged,
    )
