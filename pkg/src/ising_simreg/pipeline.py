"""
End-to-end fitting of the Ising similarity regression model.

IsingSimilarityRegression chains the pieces the way an analysis runs them:
unregularized pilot fit, penalty weights, one shared regularization path,
lambda selection, post-selection refit with sandwich intervals, pseudo-R^2
against the main-effects-only model, regularity diagnostics and provenance.

Example usage:
    from ising_simreg import IsingSimilarityRegression, SimRegSettings

    model = IsingSimilarityRegression(SimRegSettings(n_folds=5))
    result = model.fit(data, sims, penalty="adaptive", tune="cv")
    print(result.coefficient_table())
"""

import logging
from collections.abc import Sequence
from enum import Enum
from typing import Any

import numpy as np

from ising_simreg import __version__
from ising_simreg.config import SimRegSettings
from ising_simreg.config import decisions
from ising_simreg.config import fingerprint
from ising_simreg.estimator import PathResult
from ising_simreg.estimator import PenaltyWeights
from ising_simreg.estimator import StackedDesign
from ising_simreg.estimator import adaptive_weights
from ising_simreg.estimator import build_design
from ising_simreg.estimator import check_regularity
from ising_simreg.estimator import fit_path
from ising_simreg.estimator import fit_unregularized
from ising_simreg.estimator import lasso_weights
from ising_simreg.exceptions import ConfigurationError
from ising_simreg.exceptions import InputError
from ising_simreg.model import BinaryDataset
from ising_simreg.model import ParameterSet
from ising_simreg.model import SimilarityMatrix
from ising_simreg.model import check_similarities
from ising_simreg.monitor import PathMonitor
from ising_simreg.selection import CVResult
from ising_simreg.selection import Criterion
from ising_simreg.selection import CurveTable
from ising_simreg.selection import FitResult
from ising_simreg.selection import FoldPlan
from ising_simreg.selection import coefficient_rows
from ising_simreg.selection import cross_validate
from ising_simreg.selection import pseudo_r2
from ising_simreg.selection import sandwich_inference
from ising_simreg.selection import select_ic

logger = logging.getLogger("ising_simreg.pipeline")


class Penalty(str, Enum):
    ADAPTIVE = "adaptive"
    LASSO = "lasso"
    NONE = "none"
    ORACLE = "oracle"


class Tuning(str, Enum):
    CV = "cv"
    AIC = "aic"
    BIC = "bic"
    FIXED = "fixed"


class IsingSimilarityRegression:
    """
    Fitting front end holding the settings and the path monitors.

    Args:
        settings (SimRegSettings | None): Tolerances, grid and fold defaults;
            read from the environment when omitted
        monitors (list[PathMonitor] | None): Progress hooks for paths and folds
        include_main_effects (bool): False fits the criterion without theta_jj
    """

    def __init__(
        self,
        settings: SimRegSettings | None = None,
        monitors: list[PathMonitor] | None = None,
        include_main_effects: bool = True,
    ):
        self.settings = settings if settings is not None else SimRegSettings()
        self.monitors = monitors or []
        self.include_main_effects = include_main_effects

    def weights_for(self, penalty: Penalty, design: StackedDesign, pilot: ParameterSet) -> PenaltyWeights:
        if penalty is Penalty.LASSO:
            return lasso_weights(design.K)
        return adaptive_weights(pilot, self.settings.exclusion_tol, self.settings.weight_epsilon)

    def path(
        self,
        design: StackedDesign,
        weights: PenaltyWeights,
        lambda_grid: Sequence[float] | None = None,
    ) -> PathResult:
        return fit_path(
            design, weights, lambda_grid, self.include_main_effects, self.settings, self.monitors
        )

    def cross_validate(
        self,
        data: BinaryDataset,
        sims: Sequence[SimilarityMatrix],
        penalty: Penalty | str = Penalty.ADAPTIVE,
        plan: FoldPlan | None = None,
        lambda_grid: Sequence[float] | None = None,
    ) -> CVResult:
        penalty = Penalty(penalty)
        if penalty not in (Penalty.ADAPTIVE, Penalty.LASSO):
            raise ConfigurationError(f"Cross-validation needs a penalized variant, got {penalty.value}")
        _check_inputs(data, sims)
        design = build_design(data, sims)
        pilot = fit_unregularized(design, self.include_main_effects, settings=self.settings)
        weights = self.weights_for(penalty, design, pilot.params)
        plan = plan or FoldPlan.create(data.n, self.settings.n_folds, self.settings.seed)
        return cross_validate(
            data, sims, weights, plan, lambda_grid, self.include_main_effects, self.settings, self.monitors
        )

    def fit(
        self,
        data: BinaryDataset,
        sims: Sequence[SimilarityMatrix],
        penalty: Penalty | str = Penalty.ADAPTIVE,
        tune: Tuning | str = Tuning.CV,
        support: Sequence[int] | None = None,
        lambda_grid: Sequence[float] | None = None,
        lam: float | None = None,
    ) -> FitResult:
        penalty, tune = Penalty(penalty), Tuning(tune)
        _check_inputs(data, sims)
        settings = self.settings
        design = build_design(data, sims)
        logger.info(
            "Fitting n=%d, p=%d, K=%d (penalty=%s, tune=%s, dataset %s)",
            data.n, data.p, design.K, penalty.value, tune.value, data.digest()[:12],
        )
        pilot = fit_unregularized(design, self.include_main_effects, settings=settings)
        diagnostics: dict[str, Any] = {"pilot": pilot.summary()}
        curves: dict[str, CurveTable] = {}
        curve: CurveTable | None = None
        chosen_lambda: float | None = None
        penalized: ParameterSet | None = None
        grid: np.ndarray | None = None

        if penalty is Penalty.NONE:
            selected = tuple(range(design.K))
        elif penalty is Penalty.ORACLE:
            if support is None:
                raise ConfigurationError("The oracle variant requires an explicit support list")
            selected = tuple(sorted(int(k) for k in support))
        else:
            weights = self.weights_for(penalty, design, pilot.params)
            if tune is Tuning.FIXED:
                if lam is None:
                    raise ConfigurationError("Fixed tuning requires a lambda value")
                lambda_grid = [lam]
            path = self.path(design, weights, lambda_grid)
            grid = path.lambda_grid
            ic = {c: select_ic(data, sims, weights, grid, c, path, self.include_main_effects, settings) for c in Criterion}
            curves.update({c.value: result.curve() for c, result in ic.items()})
            if tune is Tuning.CV:
                plan = FoldPlan.create(data.n, settings.n_folds, settings.seed)
                cv = cross_validate(
                    data, sims, weights, plan, grid, self.include_main_effects, settings, self.monitors
                )
                index = cv.chosen_index
                curves["cv"] = cv.curve()
                diagnostics["skipped_folds"] = list(cv.skipped_folds)
                diagnostics["fold_scores"] = np.where(np.isnan(cv.fold_scores), None, cv.fold_scores).tolist()
            elif tune is Tuning.FIXED:
                index = 0
            else:
                index = ic[Criterion(tune.value)].chosen_index
            curve = curves.get(tune.value)
            chosen = path.results[index]
            chosen_lambda = chosen.lam
            penalized = chosen.params
            selected = chosen.active_set
            diagnostics.update(
                lambda_max=path.lambda_max,
                chosen=chosen.summary(),
                kkt_residuals=[r.kkt_residual for r in path.results],
                path_converged=path.converged,
                excluded=list(weights.excluded),
            )

        inference = sandwich_inference(data, sims, selected, self.include_main_effects, settings)
        null = fit_unregularized(design, self.include_main_effects, support=(), settings=settings)
        fit_loglik = -design.N * inference.refit.loss
        null_loglik = -design.N * null.loss
        diagnostics.update(
            refit=inference.refit.summary(),
            loglik=fit_loglik,
            null_loglik=null_loglik,
            pseudo_r2=pseudo_r2(fit_loglik, null_loglik) if null_loglik < 0 else None,
            regularity=check_regularity(design, inference.refit.params, selected).as_dict(),
        )
        stamped = decisions(settings)
        provenance = {
            "version": __version__,
            "seed": settings.seed,
            "n": data.n,
            "p": data.p,
            "K": design.K,
            "dataset_sha256": data.digest(),
            "lambda_grid": None if grid is None else grid.tolist(),
            "decisions": stamped,
            "decisions_fingerprint": fingerprint(stamped),
            "include_main_effects": self.include_main_effects,
        }
        labels = [sim.label for sim in sims]
        return FitResult(
            penalty=penalty.value,
            tuning=tune.value if penalty in (Penalty.ADAPTIVE, Penalty.LASSO) else "none",
            lam=chosen_lambda,
            response_labels=list(data.response_labels),
            similarity_labels=labels,
            main_effects=inference.refit.params.main_effects.tolist(),
            alpha=inference.refit.params.alpha.tolist(),
            penalized_main_effects=None if penalized is None else penalized.main_effects.tolist(),
            penalized_alpha=None if penalized is None else penalized.alpha.tolist(),
            active_set=list(selected),
            coefficients=coefficient_rows(labels, inference, penalized),
            main_effect_se=[None if np.isnan(se) else float(se) for se in inference.se_main],
            curve=curve,
            curves=curves,
            diagnostics=diagnostics,
            provenance=provenance,
        )


def _check_inputs(data: BinaryDataset, sims: Sequence[SimilarityMatrix]) -> None:
    if not sims:
        raise InputError("at least one similarity source required")
    check_similarities(sims, data.p)
