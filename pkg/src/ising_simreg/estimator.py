"""
Pseudo-likelihood estimators of the Ising similarity regression model.

The pseudo-likelihood is a logistic regression on a stacked design: row
(i, j), stored at position j * n + i, has response y_ij, an indicator of
block j for the main effect theta_jj, and covariates
x_ijk = sum_j' w_jj'^(k) y_ij'. All objectives are on the mean scale
1 / (n p).

Estimators:
- fit_unregularized: damped Newton with Armijo backtracking (lambda = 0)
- fit_penalized: proximal Newton on
  -(1/np) loglik + lambda * sum_k w_k |alpha_k|, main effects unpenalized
- fit_path: warm-started path over a descending lambda grid
- fit_oracle: unregularized fit restricted to a known support

fit_penalized solves one K-dimensional lasso quadratic per iteration by
cyclic coordinate descent with soft-thresholding; the main effects enter
through exact Newton steps on their diagonal Hessian block. The data are
touched once per iteration plus once per line-search trial.
"""

import logging
from collections.abc import Sequence
from typing import Any

import attrs
import numpy as np
from scipy.linalg import LinAlgError
from scipy.linalg import cho_factor
from scipy.linalg import cho_solve
from scipy.linalg import eigvalsh
from scipy.linalg import lstsq
from scipy.linalg import solve
from scipy.special import expit
from scipy.special import logit

from ising_simreg.config import SimRegSettings
from ising_simreg.exceptions import ConvergenceError
from ising_simreg.exceptions import DimensionMismatchError
from ising_simreg.exceptions import InputError
from ising_simreg.model import BinaryDataset
from ising_simreg.model import ParameterSet
from ising_simreg.model import SimilarityMatrix
from ising_simreg.model import similarity_stack
from ising_simreg.monitor import notify

logger = logging.getLogger("ising_simreg.estimator")

# intercept of a response column that is constant in the data
SATURATED_LOGIT = 30.0
_ARMIJO = 1e-4
_MIN_STEP = 1e-10
_MONOTONE_TOL = 1e-12
_LAMBDA_FLOOR = 1e-12
_CURVATURE_FLOOR = 1e-12
# relative ridge on the reduced alpha Hessian
_RIDGE = 1e-10
_INNER_TOL_RATIO = 0.1
_MAX_INNER_SWEEPS = 1000
# condition number above which a curvature matrix is treated as singular
MAX_CONDITION = 1e10


def _resolve(settings: SimRegSettings | None) -> SimRegSettings:
    return settings if settings is not None else SimRegSettings()


@attrs.frozen(eq=False)
class StackedDesign:
    """Stacked logistic design; ``response`` and ``x_block`` rows are j-major."""

    response: np.ndarray
    x_block: np.ndarray
    n: int
    p: int
    labels: tuple[str, ...] = ()

    @property
    def K(self) -> int:
        return int(self.x_block.shape[1])

    @property
    def N(self) -> int:
        return self.n * self.p

    def row(self, i: int, j: int) -> int:
        return j * self.n + i

    def block_sums(self, values: np.ndarray) -> np.ndarray:
        """Sum rows within each response block: (n p, ...) -> (p, ...)."""
        return values.reshape(self.p, self.n, *values.shape[1:]).sum(axis=1)

    def response_means(self) -> np.ndarray:
        return self.response.reshape(self.p, self.n).mean(axis=1)

    def saturated_blocks(self) -> tuple[int, ...]:
        means = self.response_means()
        return tuple(int(j) for j in np.flatnonzero((means == 0.0) | (means == 1.0)))


def build_design(data: BinaryDataset, sims: Sequence[SimilarityMatrix]) -> StackedDesign:
    if data.n == 0:
        raise InputError("Dataset has no observations")
    stack = similarity_stack(sims, data.p)
    y = data.as_float()
    # x[j, i, k] = sum_m W_k[j, m] y[i, m]
    x = np.einsum("kjm,im->jik", stack, y).reshape(data.n * data.p, len(sims))
    return StackedDesign(
        response=y.T.reshape(-1),
        x_block=x,
        n=data.n,
        p=data.p,
        labels=tuple(sim.label for sim in sims),
    )


def _eta(design: StackedDesign, main: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    return np.repeat(main, design.n) + design.x_block @ alpha


def _row_loss(design: StackedDesign, eta: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, eta) - design.response * eta


def _check(design: StackedDesign, params: ParameterSet) -> None:
    params.check_dimensions(design.p, design.K)


def mean_neg_loglik(design: StackedDesign, params: ParameterSet) -> float:
    """-(1/np) log pseudo-likelihood."""
    _check(design, params)
    return float(_row_loss(design, _eta(design, params.main_effects, params.alpha)).sum() / design.N)


def gradient(
    design: StackedDesign, params: ParameterSet, include_main_effects: bool = True
) -> np.ndarray:
    """Gradient of mean_neg_loglik; main-effect block first unless excluded."""
    _check(design, params)
    resid = expit(_eta(design, params.main_effects, params.alpha)) - design.response
    g_alpha = design.x_block.T @ resid / design.N
    if not include_main_effects:
        return g_alpha
    return np.concatenate([design.block_sums(resid) / design.N, g_alpha])


def hessian(
    design: StackedDesign, params: ParameterSet, include_main_effects: bool = True
) -> np.ndarray:
    """Hessian of mean_neg_loglik, ordered like ``gradient``."""
    _check(design, params)
    mu = expit(_eta(design, params.main_effects, params.alpha))
    v = mu * (1.0 - mu)
    xv = design.x_block * v[:, None]
    h_aa = design.x_block.T @ xv / design.N
    if not include_main_effects:
        return h_aa
    h_mm = np.diag(design.block_sums(v) / design.N)
    h_ma = design.block_sums(xv) / design.N
    return np.block([[h_mm, h_ma], [h_ma.T, h_aa]])


def intercept_only(design: StackedDesign) -> np.ndarray:
    """Main effects of the model with alpha = 0: logit of the column means, clamped."""
    with np.errstate(divide="ignore"):
        main = logit(design.response_means())
    return np.clip(main, -SATURATED_LOGIT, SATURATED_LOGIT)


@attrs.frozen(eq=False)
class PenaltyWeights:
    """
    Adaptive-lasso weights w_k. Coefficients in ``excluded`` are held at zero
    on the whole path (the infinite-weight limit); their stored weight is
    not used.
    """

    weights: np.ndarray = attrs.field(converter=lambda w: np.array(w, dtype=float).reshape(-1))
    excluded: tuple[int, ...] = attrs.field(default=(), converter=lambda e: tuple(sorted(int(k) for k in e)))

    def __attrs_post_init__(self) -> None:
        K = self.K
        for k in self.excluded:
            if not 0 <= k < K:
                raise InputError(f"Excluded index {k} out of range for K={K}", details={"index": k})
        mask = self.penalized_mask()
        bad = np.flatnonzero(mask & ~(np.isfinite(self.weights) & (self.weights > 0)))
        if bad.size:
            k = int(bad[0])
            raise InputError(
                f"Penalty weight {k} must be finite and positive, got {self.weights[k]}",
                details={"index": k},
            )

    @property
    def K(self) -> int:
        return int(self.weights.shape[0])

    def penalized_mask(self) -> np.ndarray:
        mask = np.ones(self.K, dtype=bool)
        mask[list(self.excluded)] = False
        return mask

    def effective(self) -> np.ndarray:
        """Weights with zeros at excluded coordinates."""
        return np.where(self.penalized_mask(), self.weights, 0.0)

    def scaled(self, factor: float) -> "PenaltyWeights":
        return PenaltyWeights(self.weights * factor, self.excluded)

    def at(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(lam, self)


@attrs.frozen(eq=False)
class PenaltySpec:
    """lambda * sum_k w_k |alpha_k|; main effects are never penalized."""

    lam: float = attrs.field(converter=float)
    weights: PenaltyWeights

    def __attrs_post_init__(self) -> None:
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise InputError(f"lambda must be finite and nonnegative, got {self.lam}")

    def value(self, alpha: np.ndarray) -> float:
        return self.lam * float(np.sum(self.weights.effective() * np.abs(alpha)))


def adaptive_weights(
    unreg: ParameterSet,
    exclusion_tol: float = 1e-10,
    epsilon: float | None = None,
) -> PenaltyWeights:
    """
    w_k = 1 / |alpha_bar_k|. Coefficients with |alpha_bar_k| < exclusion_tol
    are force-excluded, unless ``epsilon`` is given, in which case
    w_k = 1 / (|alpha_bar_k| + epsilon) for every k.
    """
    magnitude = np.abs(unreg.alpha)
    if epsilon is not None:
        return PenaltyWeights(1.0 / (magnitude + epsilon))
    excluded = np.flatnonzero(magnitude < exclusion_tol)
    weights = np.ones_like(magnitude)
    keep = magnitude >= exclusion_tol
    weights[keep] = 1.0 / magnitude[keep]
    if excluded.size:
        logger.info("Force-excluding coefficients %s with zero pilot estimates", excluded.tolist())
    return PenaltyWeights(weights, excluded)


def lasso_weights(K: int) -> PenaltyWeights:
    return PenaltyWeights(np.ones(K))


@attrs.frozen(eq=False)
class SolverResult:
    params: ParameterSet
    lam: float
    objective: float
    loss: float
    converged: bool
    iterations: int
    kkt_residual: float
    separated: bool = False
    saturated: tuple[int, ...] = ()
    excluded: tuple[int, ...] = ()

    @property
    def active_set(self) -> tuple[int, ...]:
        return self.params.active_set()

    def summary(self) -> dict[str, Any]:
        return {
            "lambda": self.lam,
            "objective": self.objective,
            "converged": self.converged,
            "iterations": self.iterations,
            "kkt_residual": self.kkt_residual,
            "separated": self.separated,
            "saturated": list(self.saturated),
            "excluded": list(self.excluded),
            "active_set": list(self.active_set),
        }


def _support(support: Sequence[int] | None, K: int) -> np.ndarray:
    if support is None:
        return np.arange(K)
    indices = np.unique(np.asarray(list(support), dtype=int))
    if indices.size and (indices[0] < 0 or indices[-1] >= K):
        raise DimensionMismatchError(
            f"Support indices must lie in 0..{K - 1}", details={"support": indices.tolist()}
        )
    return indices


def _free_main(design: StackedDesign, include_main_effects: bool) -> tuple[np.ndarray, tuple[int, ...]]:
    if not include_main_effects:
        return np.zeros(design.p, dtype=bool), ()
    saturated = design.saturated_blocks()
    if saturated:
        logger.warning(
            "Responses %s are constant in the data; their main effects are fixed at +/-%g",
            list(saturated),
            SATURATED_LOGIT,
        )
    free = np.ones(design.p, dtype=bool)
    free[list(saturated)] = False
    return free, saturated


def _newton_direction(h: np.ndarray, g: np.ndarray) -> np.ndarray:
    try:
        step = cho_solve(cho_factor(h, check_finite=False), g, check_finite=False)
    except LinAlgError:
        return lstsq(h, g)[0]
    if not np.all(np.isfinite(step)):
        # numerically singular curvature: minimum-norm step
        return lstsq(h, g)[0]
    return step


def fit_unregularized(
    design: StackedDesign,
    include_main_effects: bool = True,
    support: Sequence[int] | None = None,
    settings: SimRegSettings | None = None,
    start: ParameterSet | None = None,
) -> SolverResult:
    """
    Maximize the pseudo-likelihood over the main effects and alpha_k, k in
    ``support`` (all of them by default), by damped Newton.

    Exits when the gradient max-norm is at most ``gradient_tol``. A free
    coefficient growing beyond ``divergence_cap`` marks the fit as separated.
    """
    settings = _resolve(settings)
    cols = _support(support, design.K)
    free_main, saturated = _free_main(design, include_main_effects)

    main = intercept_only(design) if include_main_effects else np.zeros(design.p)
    alpha = np.zeros(design.K)
    if start is not None:
        _check(design, start)
        main[free_main] = start.main_effects[free_main]
        alpha[cols] = start.alpha[cols]

    free = np.concatenate([np.flatnonzero(free_main), design.p + cols])
    theta = np.concatenate([main, alpha])

    def objective(values: np.ndarray) -> float:
        return float(_row_loss(design, _eta(design, values[: design.p], values[design.p :])).sum() / design.N)

    f0 = objective(theta)
    converged = free.size == 0
    separated = False
    residual = 0.0
    iteration = 0
    for iteration in range(1, settings.max_newton_iter + 1):
        if free.size == 0:
            break
        params = ParameterSet.from_vector(theta, design.p)
        g = gradient(design, params)[free]
        residual = float(np.max(np.abs(g)))
        if residual <= settings.gradient_tol:
            converged = True
            break
        h = hessian(design, params)[np.ix_(free, free)]
        step = _newton_direction(h, g)
        slope = float(g @ step)
        if not slope > 0:
            step, slope = g, float(g @ g)
        t = 1.0
        while True:
            trial = theta.copy()
            trial[free] -= t * step
            f1 = objective(trial)
            if f1 <= f0 - _ARMIJO * t * slope or t < _MIN_STEP:
                break
            t *= 0.5
        if not f1 <= f0:
            logger.warning("Newton line search stalled at gradient norm %.3g", residual)
            break
        theta, f0 = trial, f1
        if np.max(np.abs(theta[free])) > settings.divergence_cap:
            separated = True
            logger.warning(
                "Coefficients exceed %g in magnitude; the data look separated", settings.divergence_cap
            )
            break
    else:
        logger.warning("Newton solver hit %d iterations without converging", settings.max_newton_iter)

    params = ParameterSet.from_vector(theta, design.p)
    if free.size:
        residual = float(np.max(np.abs(gradient(design, params)[free])))
        converged = converged or residual <= settings.gradient_tol
    excluded = tuple(int(k) for k in np.setdiff1d(np.arange(design.K), cols))
    return SolverResult(
        params=params,
        lam=0.0,
        objective=f0,
        loss=f0,
        converged=converged,
        iterations=iteration,
        kkt_residual=residual,
        separated=separated,
        saturated=saturated,
        excluded=excluded,
    )


def _soft_threshold(u: float, t: float) -> float:
    # exact zero at |u| == t up to rounding in t
    if abs(u) <= t + 4.0 * np.finfo(float).eps * max(abs(u), t):
        return 0.0
    return float(np.sign(u) * (abs(u) - t))


def _subgradient_residual(grad: np.ndarray, values: np.ndarray, lam_w: np.ndarray) -> float:
    """Distance of zero from grad + lam_w * d|values|, max-norm."""
    active = values != 0
    on = np.abs(grad[active] + lam_w[active] * np.sign(values[active]))
    off = np.maximum(np.abs(grad[~active]) - lam_w[~active], 0.0)
    return float(max(np.max(on, initial=0.0), np.max(off, initial=0.0)))


@attrs.frozen(eq=False)
class _LocalModel:
    """Gradient and Hessian blocks of the mean loss at one iterate."""

    g_main: np.ndarray
    g_alpha: np.ndarray
    h_main: np.ndarray
    h_cross: np.ndarray
    h_alpha: np.ndarray


def _solve_lasso_quadratic(
    g: np.ndarray,
    h: np.ndarray,
    start: np.ndarray,
    lam_w: np.ndarray,
    tol: float,
    max_sweeps: int,
) -> np.ndarray:
    """
    argmin_a g'(a - start) + (a - start)' h (a - start) / 2 + sum_k lam_w_k |a_k|
    by cyclic coordinate descent, then an exact solve on the sign pattern
    that coordinate descent settled on when it satisfies the optimality
    conditions.
    """
    values = start.copy()
    grad = g.copy()
    diag = np.diag(h)
    for _ in range(max_sweeps):
        for k in range(values.size):
            new = _soft_threshold(diag[k] * values[k] - grad[k], lam_w[k]) / diag[k]
            delta = new - values[k]
            if delta != 0.0:
                values[k] = new
                grad += delta * h[:, k]
        if _subgradient_residual(grad, values, lam_w) <= tol:
            break

    active = np.flatnonzero(values)
    if active.size == 0:
        return values
    signs = np.sign(values[active])
    rhs = h[active] @ start - g[active] - lam_w[active] * signs
    try:
        exact = solve(h[np.ix_(active, active)], rhs, assume_a="pos", check_finite=False)
    except LinAlgError:
        return values
    if not np.all(np.isfinite(exact)) or np.any(np.sign(exact) != signs):
        return values
    polished = np.zeros_like(values)
    polished[active] = exact
    residual = _subgradient_residual(g + h @ (polished - start), polished, lam_w)
    return polished if residual <= _subgradient_residual(grad, values, lam_w) else values


class _ProximalNewton:
    """
    Proximal Newton iterations for the penalized loss.

    Each iteration builds the second-order model of the loss at the current
    iterate, eliminates the unpenalized main effects exactly (each one is a
    separate block of the design, so their Hessian block is diagonal), and
    minimizes the remaining lasso quadratic in alpha by cyclic coordinate
    descent with soft-thresholding. The step is accepted by backtracking on
    the full penalized objective, so the objective never increases.
    """

    def __init__(
        self,
        design: StackedDesign,
        penalty: PenaltySpec,
        free_main: np.ndarray,
        settings: SimRegSettings,
    ):
        self.design = design
        self.N = design.N
        self.lam_w = penalty.lam * penalty.weights.effective()
        self.penalized = np.flatnonzero(penalty.weights.penalized_mask())
        self.free_main = np.flatnonzero(free_main)
        self.settings = settings

    def loss(self, main: np.ndarray, alpha: np.ndarray) -> float:
        return float(_row_loss(self.design, _eta(self.design, main, alpha)).sum() / self.N)

    def penalty(self, alpha: np.ndarray) -> float:
        return float(np.sum(self.lam_w * np.abs(alpha)))

    def local_model(self, main: np.ndarray, alpha: np.ndarray) -> _LocalModel:
        d = self.design
        mu = expit(_eta(d, main, alpha))
        resid = mu - d.response
        v = mu * (1.0 - mu)
        xv = d.x_block * v[:, None]
        return _LocalModel(
            g_main=d.block_sums(resid) / self.N,
            g_alpha=d.x_block.T @ resid / self.N,
            h_main=d.block_sums(v) / self.N,
            h_cross=d.block_sums(xv) / self.N,
            h_alpha=d.x_block.T @ xv / self.N,
        )

    def kkt(self, model: _LocalModel, alpha: np.ndarray) -> float:
        k = self.penalized
        main_part = float(np.max(np.abs(model.g_main[self.free_main]), initial=0.0))
        return max(main_part, _subgradient_residual(model.g_alpha[k], alpha[k], self.lam_w[k]))

    def direction(self, model: _LocalModel, alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Minimizer of the local model plus penalty, as (main step, alpha step)."""
        F, P = self.free_main, self.penalized
        h_main = np.maximum(model.h_main[F], _CURVATURE_FLOOR)
        cross = model.h_cross[np.ix_(F, P)]
        g_reduced = model.g_alpha[P] - cross.T @ (model.g_main[F] / h_main)
        h_reduced = model.h_alpha[np.ix_(P, P)] - cross.T @ (cross / h_main[:, None])
        h_reduced = 0.5 * (h_reduced + h_reduced.T)
        diag = np.maximum(np.diag(h_reduced), 0.0)
        ridge = _RIDGE * max(float(np.max(diag, initial=0.0)), _CURVATURE_FLOOR)
        h_reduced[np.diag_indices_from(h_reduced)] = diag + ridge

        target = _solve_lasso_quadratic(
            g_reduced,
            h_reduced,
            alpha[P],
            self.lam_w[P],
            _INNER_TOL_RATIO * self.settings.kkt_tol,
            _MAX_INNER_SWEEPS,
        )
        step_alpha = np.zeros_like(alpha)
        step_alpha[P] = target - alpha[P]
        step_main = np.zeros(self.design.p)
        step_main[F] = -(model.g_main[F] + cross @ step_alpha[P]) / h_main
        return step_main, step_alpha

    def run(self, main: np.ndarray, alpha: np.ndarray, max_iter: int) -> tuple[int, bool, float]:
        """Update ``main`` and ``alpha`` in place; returns (iterations, converged, KKT residual)."""
        settings = self.settings
        objective = self.loss(main, alpha) + self.penalty(alpha)
        for iteration in range(max_iter + 1):
            model = self.local_model(main, alpha)
            residual = self.kkt(model, alpha)
            if residual <= settings.kkt_tol:
                return iteration, True, residual
            if iteration == max_iter:
                break
            step_main, step_alpha = self.direction(model, alpha)
            target = alpha + step_alpha
            decrease = (
                float(model.g_main @ step_main + model.g_alpha @ step_alpha)
                + self.penalty(target)
                - self.penalty(alpha)
            )
            if not decrease < 0:
                logger.debug("No descent direction at KKT residual %.3g", residual)
                return iteration, False, residual
            t = 1.0
            while True:
                trial_main = main + t * step_main
                trial_alpha = target if t == 1.0 else alpha + t * step_alpha
                trial = self.loss(trial_main, trial_alpha) + self.penalty(trial_alpha)
                if trial <= objective + _ARMIJO * t * decrease:
                    break
                t *= 0.5
                if t < _MIN_STEP:
                    logger.debug("Line search stalled at KKT residual %.3g", residual)
                    return iteration, False, residual
            if trial > objective + _MONOTONE_TOL * max(1.0, abs(objective)):
                raise ConvergenceError(
                    f"Penalized objective increased from {objective!r} to {trial!r} in iteration {iteration + 1}",
                    details={"iteration": iteration + 1, "before": objective, "after": trial},
                )
            main[:] = trial_main
            alpha[:] = trial_alpha
            objective = trial
            largest = max(np.max(np.abs(alpha), initial=0.0), np.max(np.abs(main[self.free_main]), initial=0.0))
            if largest > settings.divergence_cap:
                return iteration + 1, False, self.kkt(self.local_model(main, alpha), alpha)
        return max_iter, False, residual


def fit_penalized(
    design: StackedDesign,
    penalty: PenaltySpec,
    warm_start: ParameterSet | None = None,
    include_main_effects: bool = True,
    settings: SimRegSettings | None = None,
    max_cycles: int | None = None,
) -> SolverResult:
    """
    Minimize -(1/np) loglik + lambda * sum_k w_k |alpha_k|.

    Converged means the KKT residual is at most ``kkt_tol``; ``max_cycles``
    caps the proximal Newton iterations. At lambda = 0 the problem is smooth
    and is handed to the Newton solver on the non-excluded coefficients.
    """
    settings = _resolve(settings)
    if penalty.weights.K != design.K:
        raise DimensionMismatchError(
            f"{penalty.weights.K} penalty weights for K={design.K}",
            details={"weights": penalty.weights.K, "K": design.K},
        )
    excluded = penalty.weights.excluded
    if penalty.lam == 0.0:
        support = np.flatnonzero(penalty.weights.penalized_mask())
        result = fit_unregularized(design, include_main_effects, support, settings, start=warm_start)
        return attrs.evolve(result, excluded=excluded)

    free_main, saturated = _free_main(design, include_main_effects)
    main = intercept_only(design) if include_main_effects else np.zeros(design.p)
    alpha = np.zeros(design.K)
    if warm_start is not None:
        _check(design, warm_start)
        main[free_main] = warm_start.main_effects[free_main]
        alpha[:] = warm_start.alpha
        alpha[list(excluded)] = 0.0

    solver = _ProximalNewton(design, penalty, free_main, settings)
    iterations, converged, residual = solver.run(main, alpha, max_cycles or settings.max_cycles)
    if not converged:
        logger.warning(
            "Penalized solver at lambda=%.4g stopped after %d iterations (KKT residual %.3g)",
            penalty.lam,
            iterations,
            residual,
        )
    separated = bool(np.max(np.abs(alpha), initial=0.0) > settings.divergence_cap)
    if separated:
        logger.warning("Penalized fit at lambda=%.4g has diverging coefficients", penalty.lam)
    loss = solver.loss(main, alpha)
    return SolverResult(
        params=ParameterSet(main, alpha),
        lam=penalty.lam,
        objective=loss + solver.penalty(alpha),
        loss=loss,
        converged=converged,
        iterations=iterations,
        kkt_residual=residual,
        separated=separated,
        saturated=saturated,
        excluded=excluded,
    )


def penalized_objective(design: StackedDesign, params: ParameterSet, penalty: PenaltySpec) -> float:
    return mean_neg_loglik(design, params) + penalty.value(params.alpha)


def lambda_max(
    design: StackedDesign, weights: PenaltyWeights, include_main_effects: bool = True
) -> float:
    """Smallest lambda at which every penalized alpha_k is zero at the optimum."""
    main = intercept_only(design) if include_main_effects else np.zeros(design.p)
    resid = expit(np.repeat(main, design.n)) - design.response
    g = design.x_block.T @ resid / design.N
    mask = weights.penalized_mask()
    return float(np.max(np.abs(g[mask]) / weights.weights[mask], initial=0.0))


def default_lambda_grid(lam_max: float, n_lambda: int = 100, min_ratio: float = 1e-4) -> np.ndarray:
    if lam_max <= 0:
        logger.info("All penalized gradients vanish at the null fit; using a floor lambda_max")
        lam_max = _LAMBDA_FLOOR
    if n_lambda == 1:
        return np.array([lam_max])
    return np.geomspace(lam_max, lam_max * min_ratio, n_lambda)


@attrs.frozen(eq=False)
class PathResult:
    lambda_grid: np.ndarray
    results: tuple[SolverResult, ...]
    weights: PenaltyWeights
    lambda_max: float
    include_main_effects: bool = True

    def __len__(self) -> int:
        return len(self.results)

    @property
    def estimates(self) -> list[ParameterSet]:
        return [r.params for r in self.results]

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.results])

    @property
    def active_sets(self) -> list[tuple[int, ...]]:
        return [r.active_set for r in self.results]

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.results)


def check_lambda_grid(lambda_grid: Sequence[float] | np.ndarray) -> np.ndarray:
    grid = np.asarray(lambda_grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise InputError("lambda grid is empty")
    if not np.all(np.isfinite(grid)) or np.any(grid < 0):
        raise InputError("lambda grid values must be finite and nonnegative")
    return np.sort(grid)[::-1]


def fit_path(
    design: StackedDesign,
    weights: PenaltyWeights,
    lambda_grid: Sequence[float] | np.ndarray | None = None,
    include_main_effects: bool = True,
    settings: SimRegSettings | None = None,
    monitors: Sequence[Any] = (),
    max_cycles: int | None = None,
) -> PathResult:
    """
    Warm-started fits over a descending lambda grid. The default grid has
    ``n_lambda`` log-spaced values from lambda_max down to
    ``lambda_min_ratio * lambda_max``.
    """
    settings = _resolve(settings)
    lam_max = lambda_max(design, weights, include_main_effects)
    if lambda_grid is None:
        grid = default_lambda_grid(lam_max, settings.n_lambda, settings.lambda_min_ratio)
    else:
        grid = check_lambda_grid(lambda_grid)
    notify(monitors, "on_path_start", grid, weights)
    warm: ParameterSet | None = None
    results = []
    for index, lam in enumerate(grid):
        result = fit_penalized(
            design, weights.at(lam), warm, include_main_effects, settings, max_cycles=max_cycles
        )
        notify(monitors, "on_lambda", index, float(lam), result)
        results.append(result)
        warm = result.params
    return PathResult(
        lambda_grid=grid,
        results=tuple(results),
        weights=weights,
        lambda_max=lam_max,
        include_main_effects=include_main_effects,
    )


def fit_oracle(
    design: StackedDesign,
    true_support: Sequence[int],
    include_main_effects: bool = True,
    settings: SimRegSettings | None = None,
) -> SolverResult:
    return fit_unregularized(design, include_main_effects, support=true_support, settings=settings)


@attrs.frozen
class RegularityReport:
    support: tuple[int, ...]
    lambda_min_m_ss: float
    lambda_max_u: float
    incoherence: float | None
    condition_number: float
    singular: bool

    def as_dict(self) -> dict[str, Any]:
        return attrs.asdict(self)


def check_regularity(
    design: StackedDesign,
    fit: ParameterSet,
    support: Sequence[int] | None = None,
) -> RegularityReport:
    """
    Empirical curvature diagnostics at ``fit`` for the support S (the active
    set of ``fit`` by default): the smallest eigenvalue of M_SS with
    M = X' diag(mu (1 - mu)) X / (np), the largest eigenvalue of
    U = X'X / (np), and the irrepresentability measure
    max_{k in S^c} sum_{l in S} |(M_{S^c,S} M_SS^{-1})_kl|.
    A singular M_SS is reported, not raised.
    """
    _check(design, fit)
    S = _support(fit.active_set() if support is None else support, design.K)
    Sc = np.setdiff1d(np.arange(design.K), S)
    m = hessian(design, fit, include_main_effects=False)
    u = design.x_block.T @ design.x_block / design.N
    lambda_max_u = float(eigvalsh(u)[-1]) if design.K else 0.0
    if S.size == 0:
        return RegularityReport((), 0.0, lambda_max_u, 0.0, 1.0, False)
    m_ss = m[np.ix_(S, S)]
    eig = eigvalsh(m_ss)
    lam_min = float(max(eig[0], 0.0))
    condition = float(eig[-1] / eig[0]) if eig[0] > 0 else float("inf")
    singular = not condition < MAX_CONDITION
    incoherence: float | None = None
    if Sc.size == 0:
        incoherence = 0.0
    elif not singular:
        coef = solve(m_ss, m[np.ix_(S, Sc)], assume_a="pos")
        incoherence = float(np.abs(coef).sum(axis=0).max())
    if singular:
        logger.warning("M_SS is singular on support %s (condition %.3g)", S.tolist(), condition)
    return RegularityReport(
        support=tuple(int(k) for k in S),
        lambda_min_m_ss=lam_min,
        lambda_max_u=lambda_max_u,
        incoherence=incoherence,
        condition_number=condition,
        singular=bool(singular),
    )
