"""
Tuning-parameter selection and post-selection inference.

- FoldPlan / cross_validate: K-fold cross-validation grouped by observation,
  scored by held-out mean log pseudo-likelihood
- select_ic: AIC / BIC along a (shared) regularization path
- sandwich_inference: refit on the selected similarities and Wald intervals
  from the observation-clustered sandwich covariance A^-1 B A^-1
- pseudo_r2 and the serialisable FitResult document
"""

import logging
import math
from collections.abc import Sequence
from enum import Enum
from functools import partial
from typing import Any

import attrs
import numpy as np
from pydantic import BaseModel
from pydantic import Field
from scipy.linalg import LinAlgError
from scipy.linalg import cho_factor
from scipy.linalg import cho_solve
from scipy.linalg import eigvalsh
from scipy.special import expit

from ising_simreg.config import SimRegSettings
from ising_simreg.estimator import MAX_CONDITION
from ising_simreg.estimator import PathResult
from ising_simreg.estimator import PenaltyWeights
from ising_simreg.estimator import SolverResult
from ising_simreg.estimator import StackedDesign
from ising_simreg.estimator import build_design
from ising_simreg.estimator import check_lambda_grid
from ising_simreg.estimator import default_lambda_grid
from ising_simreg.estimator import fit_path
from ising_simreg.estimator import fit_unregularized
from ising_simreg.estimator import hessian
from ising_simreg.estimator import lambda_max
from ising_simreg.estimator import mean_neg_loglik
from ising_simreg.exceptions import ConfigurationError
from ising_simreg.exceptions import InputError
from ising_simreg.exceptions import SelectionError
from ising_simreg.exceptions import SingularMatrixError
from ising_simreg.model import BinaryDataset
from ising_simreg.model import InteractionMatrix
from ising_simreg.model import ParameterSet
from ising_simreg.model import SimilarityMatrix
from ising_simreg.model import assemble_theta
from ising_simreg.monitor import notify
from ising_simreg.parallel import map_concurrently
from ising_simreg.sampler import substream

logger = logging.getLogger("ising_simreg.selection")

Z_975 = 1.959964
SCHEMA_VERSION = 1
_FOLD_STREAM = 2


@attrs.frozen(eq=False)
class FoldPlan:
    """Fold label per observation; folds partition 0..n-1 with sizes differing by at most one."""

    n: int
    n_folds: int
    seed: int
    assignment: np.ndarray

    @classmethod
    def create(cls, n: int, n_folds: int = 10, seed: int = 0) -> "FoldPlan":
        if n_folds < 2:
            raise ConfigurationError(f"At least two folds are required, got {n_folds}")
        if n_folds > n:
            raise ConfigurationError(
                f"{n_folds} folds requested for only {n} observations",
                details={"n": n, "n_folds": n_folds},
            )
        order = substream(seed, _FOLD_STREAM).permutation(n)
        assignment = np.empty(n, dtype=int)
        assignment[order] = np.arange(n) % n_folds
        return cls(n, n_folds, seed, assignment)

    def test(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def design_rows(self, fold: int, p: int) -> np.ndarray:
        """Stacked-design rows of the held-out observations of ``fold``."""
        test = self.test(fold)
        return (np.arange(p)[:, None] * self.n + test[None, :]).reshape(-1)


def _select_max(scores: np.ndarray) -> int:
    # grid is descending, so the first maximiser is the largest lambda
    return int(np.flatnonzero(scores >= np.max(scores))[0])


@attrs.frozen(eq=False)
class CVResult:
    lambda_grid: np.ndarray
    fold_scores: np.ndarray
    skipped_folds: tuple[int, ...]
    chosen_index: int
    one_se_rule: bool = False

    @property
    def used_folds(self) -> np.ndarray:
        mask = np.ones(self.fold_scores.shape[0], dtype=bool)
        mask[list(self.skipped_folds)] = False
        return np.flatnonzero(mask)

    @property
    def mean_scores(self) -> np.ndarray:
        return self.fold_scores[self.used_folds].mean(axis=0)

    @property
    def se_scores(self) -> np.ndarray:
        used = self.fold_scores[self.used_folds]
        if used.shape[0] < 2:
            return np.zeros(used.shape[1])
        return used.std(axis=0, ddof=1) / math.sqrt(used.shape[0])

    @property
    def chosen_lambda(self) -> float:
        return float(self.lambda_grid[self.chosen_index])

    def curve(self) -> "CurveTable":
        return CurveTable(
            criterion="cv",
            lambdas=self.lambda_grid.tolist(),
            values=self.mean_scores.tolist(),
            se=self.se_scores.tolist(),
            chosen_index=self.chosen_index,
        )


def _score_fold(
    fold: int,
    data: BinaryDataset,
    sims: Sequence[SimilarityMatrix],
    weights: PenaltyWeights,
    plan: FoldPlan,
    grid: np.ndarray,
    include_main_effects: bool,
    settings: SimRegSettings,
) -> np.ndarray | None:
    train = data.subset(plan.train(fold))
    constant = train.constant_columns()
    if constant:
        logger.warning(
            "Fold %d skipped: responses %s are constant in its training data", fold, list(constant)
        )
        return None
    path = fit_path(build_design(train, sims), weights, grid, include_main_effects, settings)
    test_design = build_design(data.subset(plan.test(fold)), sims)
    return np.array([-mean_neg_loglik(test_design, params) for params in path.estimates])


def cross_validate(
    data: BinaryDataset,
    sims: Sequence[SimilarityMatrix],
    weights: PenaltyWeights,
    plan: FoldPlan,
    lambda_grid: Sequence[float] | np.ndarray | None = None,
    include_main_effects: bool = True,
    settings: SimRegSettings | None = None,
    monitors: Sequence[Any] = (),
    one_se_rule: bool | None = None,
) -> CVResult:
    """
    Choose lambda maximising the mean held-out log pseudo-likelihood.

    ``weights`` come from the full data and stay fixed across folds. The
    default grid is the full-data grid, so every fold is scored at the same
    lambdas. Ties go to the larger lambda. With ``one_se_rule`` the largest
    lambda whose mean score lies within one standard error of the best is
    chosen instead.
    """
    settings = settings if settings is not None else SimRegSettings()
    if plan.n != data.n:
        raise InputError(f"Fold plan is for n={plan.n}, data has n={data.n}")
    if lambda_grid is None:
        lam_max = lambda_max(build_design(data, sims), weights, include_main_effects)
        grid = default_lambda_grid(lam_max, settings.n_lambda, settings.lambda_min_ratio)
    else:
        grid = check_lambda_grid(lambda_grid)

    score = partial(
        _score_fold,
        data=data,
        sims=sims,
        weights=weights,
        plan=plan,
        grid=grid,
        include_main_effects=include_main_effects,
        settings=settings,
    )
    outcomes = map_concurrently(score, range(plan.n_folds), settings.max_workers, settings.executor)
    for fold, scores in enumerate(outcomes):
        notify(monitors, "on_fold", fold, "ok" if scores is not None else "skipped: constant response")
    skipped = tuple(f for f, scores in enumerate(outcomes) if scores is None)
    if len(skipped) == plan.n_folds:
        raise SelectionError("Every cross-validation fold has a constant response column")
    if skipped:
        logger.warning("Choosing lambda on %d of %d folds", plan.n_folds - len(skipped), plan.n_folds)
    fold_scores = np.vstack(
        [np.full(grid.size, np.nan) if scores is None else scores for scores in outcomes]
    )
    use_one_se = settings.one_se_rule if one_se_rule is None else one_se_rule
    result = CVResult(grid, fold_scores, skipped, 0, use_one_se)
    mean = result.mean_scores
    best = _select_max(mean)
    if use_one_se:
        threshold = mean[best] - result.se_scores[best]
        best = int(np.flatnonzero(mean >= threshold)[0])
    return attrs.evolve(result, chosen_index=best)


class Criterion(str, Enum):
    AIC = "aic"
    BIC = "bic"


@attrs.frozen(eq=False)
class ICResult:
    criterion: Criterion
    lambda_grid: np.ndarray
    values: np.ndarray
    df: np.ndarray
    chosen_index: int
    path: PathResult

    @property
    def chosen_lambda(self) -> float:
        return float(self.lambda_grid[self.chosen_index])

    def curve(self) -> "CurveTable":
        return CurveTable(
            criterion=self.criterion.value,
            lambdas=self.lambda_grid.tolist(),
            values=self.values.tolist(),
            df=self.df.tolist(),
            chosen_index=self.chosen_index,
        )


def information_criterion(
    result: SolverResult, design: StackedDesign, criterion: Criterion, include_main_effects: bool = True
) -> tuple[float, int]:
    """-2 * summed log pseudo-likelihood + penalty * df, with df = |active| + p."""
    df = len(result.active_set) + (design.p if include_main_effects else 0)
    penalty = 2.0 if criterion is Criterion.AIC else math.log(design.N)
    return 2.0 * design.N * result.loss + penalty * df, df


def select_ic(
    data: BinaryDataset,
    sims: Sequence[SimilarityMatrix],
    weights: PenaltyWeights,
    lambda_grid: Sequence[float] | np.ndarray | None,
    criterion: Criterion | str,
    path: PathResult | None = None,
    include_main_effects: bool = True,
    settings: SimRegSettings | None = None,
) -> ICResult:
    """Minimise AIC or BIC along the path; pass ``path`` to share fits with CV."""
    criterion = Criterion(criterion)
    design = build_design(data, sims)
    if path is None:
        path = fit_path(design, weights, lambda_grid, include_main_effects, settings)
    scored = [information_criterion(r, design, criterion, include_main_effects) for r in path.results]
    values = np.array([value for value, _ in scored])
    df = np.array([d for _, d in scored])
    chosen = int(np.flatnonzero(values <= np.min(values))[0])
    return ICResult(criterion, path.lambda_grid, values, df, chosen, path)


@attrs.frozen(eq=False)
class InferenceResult:
    """Refit on the selected similarities with sandwich standard errors (NaN where not estimated)."""

    refit: SolverResult
    support: tuple[int, ...]
    covariance: np.ndarray
    se_main: np.ndarray
    se_alpha: np.ndarray

    @property
    def lower(self) -> np.ndarray:
        return self.refit.params.alpha - Z_975 * self.se_alpha

    @property
    def upper(self) -> np.ndarray:
        return self.refit.params.alpha + Z_975 * self.se_alpha


def observation_scores(
    design: StackedDesign, params: ParameterSet, support: Sequence[int]
) -> tuple[np.ndarray, np.ndarray]:
    """
    Per-observation scores of the log pseudo-likelihood, summed over the p
    responses of each observation: (n x p) for the main effects and
    (n x |support|) for alpha.
    """
    eta = np.repeat(params.main_effects, design.n) + design.x_block @ params.alpha
    resid = (design.response - expit(eta)).reshape(design.p, design.n)
    x_s = design.x_block[:, list(support)].reshape(design.p, design.n, len(support))
    return resid.T, np.einsum("jn,jns->ns", resid, x_s)


def sandwich_inference(
    data: BinaryDataset,
    sims: Sequence[SimilarityMatrix],
    selected: Sequence[int],
    include_main_effects: bool = True,
    settings: SimRegSettings | None = None,
) -> InferenceResult:
    """
    Refit without penalty on the main effects and alpha_k, k in ``selected``,
    then cov = A^-1 B A^-1 with A the summed per-observation Hessians and B
    the summed outer products of per-observation scores.
    """
    design = build_design(data, sims)
    support = tuple(sorted(int(k) for k in selected))
    refit = fit_unregularized(design, include_main_effects, support, settings)
    if not refit.converged or refit.separated:
        logger.warning("Refit for inference did not converge cleanly; intervals may be unreliable")
    free_main = np.ones(design.p, dtype=bool) if include_main_effects else np.zeros(design.p, dtype=bool)
    free_main[list(refit.saturated)] = False
    main_idx = np.flatnonzero(free_main)
    free = np.concatenate([main_idx, design.p + np.asarray(support, dtype=int)])

    score_main, score_alpha = observation_scores(design, refit.params, support)
    scores = np.hstack([score_main[:, main_idx], score_alpha])
    bread = design.N * hessian(design, refit.params)[np.ix_(free, free)]
    meat = scores.T @ scores

    se_main = np.full(design.p, np.nan)
    se_alpha = np.full(design.K, np.nan)
    if free.size == 0:
        return InferenceResult(refit, support, np.zeros((0, 0)), se_main, se_alpha)
    eig = eigvalsh(bread)
    condition = float(eig[-1] / eig[0]) if eig[0] > 0 else float("inf")
    if not condition < MAX_CONDITION:
        raise SingularMatrixError(
            f"Sandwich bread matrix is singular (condition number {condition:.3g})",
            details={"condition_number": condition, "support": list(support)},
        )
    try:
        factor = cho_factor(bread)
    except LinAlgError as e:
        raise SingularMatrixError(
            f"Sandwich bread matrix is not positive definite (condition number {condition:.3g})",
            details={"condition_number": condition},
        ) from e
    half = cho_solve(factor, meat)
    covariance = cho_solve(factor, half.T).T
    covariance = 0.5 * (covariance + covariance.T)
    se = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    se_main[main_idx] = se[: main_idx.size]
    se_alpha[list(support)] = se[main_idx.size :]
    return InferenceResult(refit, support, covariance, se_main, se_alpha)


def pseudo_r2(fit_loglik: float, null_loglik: float) -> float:
    """1 - fit / null on the summed log pseudo-likelihood scale."""
    if not null_loglik < 0:
        raise InputError(
            f"Null log pseudo-likelihood must be negative, got {null_loglik}",
            details={"null_loglik": null_loglik},
        )
    return 1.0 - fit_loglik / null_loglik


class CoefficientRow(BaseModel):
    label: str
    estimate: float
    penalized_estimate: float | None = None
    se: float | None = None
    lower: float | None = None
    upper: float | None = None
    active: bool


class CurveTable(BaseModel):
    criterion: str
    lambdas: list[float]
    values: list[float]
    se: list[float] | None = None
    df: list[int] | None = None
    chosen_index: int


class FitResult(BaseModel):
    """
    Versioned result document. ``coefficients`` holds the post-selection
    refit with Wald intervals for active similarities only.
    """

    schema_version: int = SCHEMA_VERSION
    penalty: str
    tuning: str
    lam: float | None = None
    response_labels: list[str]
    similarity_labels: list[str]
    main_effects: list[float]
    alpha: list[float]
    penalized_main_effects: list[float] | None = None
    penalized_alpha: list[float] | None = None
    active_set: list[int]
    coefficients: list[CoefficientRow]
    main_effect_se: list[float | None] = Field(default_factory=list)
    curve: CurveTable | None = None
    curves: dict[str, CurveTable] = Field(default_factory=dict)
    diagnostics: dict[str, Any] = Field(default_factory=dict)
    provenance: dict[str, Any] = Field(default_factory=dict)

    def params(self) -> ParameterSet:
        return ParameterSet(self.main_effects, self.alpha)

    def theta(self, sims: Sequence[SimilarityMatrix]) -> InteractionMatrix:
        if [s.label for s in sims] != self.similarity_labels:
            logger.warning("Similarity labels differ from those used in the fit")
        return assemble_theta(self.params(), sims)

    def coefficient_table(self) -> list[dict[str, Any]]:
        return [row.model_dump() for row in self.coefficients]


def coefficient_rows(
    labels: Sequence[str],
    inference: InferenceResult,
    penalized: ParameterSet | None = None,
) -> list[CoefficientRow]:
    rows = []
    refit_alpha = inference.refit.params.alpha
    for k, label in enumerate(labels):
        active = k in inference.support
        se = float(inference.se_alpha[k]) if active else None
        rows.append(
            CoefficientRow(
                label=label,
                estimate=float(refit_alpha[k]),
                penalized_estimate=None if penalized is None else float(penalized.alpha[k]),
                se=se,
                lower=float(inference.lower[k]) if active else None,
                upper=float(inference.upper[k]) if active else None,
                active=active,
            )
        )
    return rows
