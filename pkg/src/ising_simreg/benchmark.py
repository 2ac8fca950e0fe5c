"""
Monte Carlo comparison of the estimators on simulated data.

A scenario fixes (n, p, K, K_0), the true-parameter generator, the sampler
and the estimators to compare. Truth and similarity matrices are drawn once
per scenario; each replicate draws its own dataset from a substream keyed by
(seed, replicate), and every estimator of a replicate sees that same
dataset (its SHA-256 is logged and reported).

True-parameter generator (declared, not taken from any published table):
- alpha_k uniform on +/-[alpha_low, alpha_high] with random sign for the
  first K_0 similarities, 0 for the rest
- theta_jj uniform on [main_low, main_high]
- each W_k the adjacency matrix of a random d-regular graph

BenchmarkRunner is async (replicates run concurrently in worker processes);
run_benchmark is the synchronous wrapper.
"""

import json
import logging
from collections.abc import Callable
from functools import partial
from pathlib import Path
from typing import Any
from typing import Literal

import attrs
import networkx as nx
import numpy as np
import pandas as pd
from pydantic import BaseModel
from pydantic import Field
from pydantic import PositiveInt
from pydantic import ValidationError
from pydantic import model_validator
from tenacity import Retrying
from tenacity import retry_if_exception_type
from tenacity import stop_after_attempt

from ising_simreg import __version__
from ising_simreg.config import SimRegSettings
from ising_simreg.config import decisions
from ising_simreg.config import fingerprint
from ising_simreg.estimator import PathResult
from ising_simreg.estimator import adaptive_weights
from ising_simreg.estimator import build_design
from ising_simreg.estimator import fit_oracle
from ising_simreg.estimator import fit_path
from ising_simreg.estimator import fit_unregularized
from ising_simreg.estimator import lasso_weights
from ising_simreg.exceptions import ConfigurationError
from ising_simreg.exceptions import ConvergenceError
from ising_simreg.exceptions import DataFormatError
from ising_simreg.exceptions import SimRegError
from ising_simreg.io import ResultStore
from ising_simreg.metrics import SelectionTruth
from ising_simreg.metrics import mse_alpha
from ising_simreg.metrics import mse_theta
from ising_simreg.metrics import neighborhood_lasso_baseline
from ising_simreg.metrics import sse_alpha
from ising_simreg.metrics import sse_theta
from ising_simreg.metrics import theta_error
from ising_simreg.metrics import tpr_fpr
from ising_simreg.model import ParameterSet
from ising_simreg.model import SimilarityKind
from ising_simreg.model import SimilarityMatrix
from ising_simreg.model import assemble_theta
from ising_simreg.parallel import gather_bounded
from ising_simreg.parallel import run_sync
from ising_simreg.sampler import SamplerConfig
from ising_simreg.sampler import simulate
from ising_simreg.sampler import substream
from ising_simreg.selection import SCHEMA_VERSION
from ising_simreg.selection import Criterion
from ising_simreg.selection import FoldPlan
from ising_simreg.selection import cross_validate
from ising_simreg.selection import select_ic

logger = logging.getLogger("ising_simreg.benchmark")

_TRUTH_STREAM = 3
_REPLICATE_STREAM = 4

EstimatorName = Literal["unregularized", "regularized", "lasso", "oracle", "neighborhood"]
TuningName = Literal["cv", "aic", "bic"]


class ScenarioSpec(BaseModel):
    name: str = "scenario"
    n: PositiveInt
    p: int = Field(ge=2)
    K: PositiveInt
    K0: int = Field(ge=0)
    replicates: PositiveInt = 100
    seed: int = Field(default=0, ge=0, lt=2**64)
    alpha_low: float = 0.1
    alpha_high: float = 0.3
    main_low: float = -1.0
    main_high: float = 0.0
    degree: PositiveInt = 2
    sampler: Literal["auto", "exact", "gibbs"] = "auto"
    burn_in: int | None = Field(default=None, ge=0)
    thin: PositiveInt | None = None
    estimators: list[EstimatorName] = Field(
        default_factory=lambda: ["unregularized", "regularized", "lasso", "oracle"], min_length=1
    )
    tuning: list[TuningName] = Field(default_factory=lambda: ["cv"], min_length=1)
    n_folds: int = Field(default=10, ge=2)
    n_lambda: PositiveInt | None = None
    baseline_folds: int = Field(default=5, ge=2)

    @model_validator(mode="after")
    def _consistent(self) -> "ScenarioSpec":
        if self.K0 > self.K:
            raise ValueError(f"K0={self.K0} exceeds K={self.K}")
        if self.degree >= self.p or (self.degree * self.p) % 2:
            raise ValueError(f"No {self.degree}-regular graph on {self.p} nodes")
        if not 0 <= self.alpha_low <= self.alpha_high:
            raise ValueError("Need 0 <= alpha_low <= alpha_high")
        if self.main_low > self.main_high:
            raise ValueError("Need main_low <= main_high")
        if self.n_folds > self.n:
            raise ValueError(f"{self.n_folds} folds for n={self.n}")
        return self


def load_scenario(path: Path) -> ScenarioSpec:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise DataFormatError(f"Cannot read scenario: {e}", file=str(path)) from e
    try:
        return ScenarioSpec.model_validate(raw)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid scenario {path}: {e}", details=e.errors()) from e


def random_regular_similarity(p: int, degree: int, seed: int, label: str) -> SimilarityMatrix:
    graph = nx.random_regular_graph(degree, p, seed=seed)
    return SimilarityMatrix(
        nx.to_numpy_array(graph, nodelist=range(p)), label=label, kind=SimilarityKind.ADJACENCY
    )


def generate_truth(spec: ScenarioSpec) -> tuple[ParameterSet, list[SimilarityMatrix]]:
    rng = substream(spec.seed, _TRUTH_STREAM)
    alpha = np.zeros(spec.K)
    magnitude = rng.uniform(spec.alpha_low, spec.alpha_high, size=spec.K0)
    alpha[: spec.K0] = rng.choice([-1.0, 1.0], size=spec.K0) * magnitude
    main = rng.uniform(spec.main_low, spec.main_high, size=spec.p)
    sims = [
        random_regular_similarity(spec.p, spec.degree, int(rng.integers(2**32)), f"W{k + 1}")
        for k in range(spec.K)
    ]
    return ParameterSet(main, alpha), sims


def replicate_seed(seed: int, replicate: int) -> int:
    return int(substream(seed, _REPLICATE_STREAM, replicate).integers(0, 2**63))


def fit_path_escalating(
    fit: Callable[[int], PathResult], base_cycles: int, attempts: int
) -> PathResult:
    """Refit with a doubled cycle budget while the path reports non-convergence."""
    result: PathResult | None = None
    for attempt in Retrying(
        stop=stop_after_attempt(attempts),
        retry=retry_if_exception_type(ConvergenceError),
        reraise=True,
    ):
        with attempt:
            cycles = base_cycles * 2 ** (attempt.retry_state.attempt_number - 1)
            result = fit(cycles)
            if not result.converged:
                raise ConvergenceError(
                    f"Path did not converge within {cycles} cycles", details={"cycles": cycles}
                )
    assert result is not None
    return result


def _row(replicate: int, estimator: str, tuning: str, digest: str, **values: Any) -> dict[str, Any]:
    return {
        "replicate": replicate,
        "estimator": estimator,
        "tuning": tuning,
        "status": "ok",
        "error": None,
        "mse_alpha": None,
        "mse_theta": None,
        "sse_alpha": None,
        "sse_theta": None,
        "tpr": None,
        "fpr": None,
        "theta_error": None,
        "n_active": None,
        "dataset_sha256": digest,
        **values,
    }


def run_replicate(
    spec: ScenarioSpec,
    truth: ParameterSet,
    sims: list[SimilarityMatrix],
    replicate: int,
    settings: SimRegSettings,
) -> list[dict[str, Any]]:
    seed = replicate_seed(spec.seed, replicate)
    config = SamplerConfig(
        method=spec.sampler,
        seed=seed,
        burn_in=settings.gibbs_burn_in if spec.burn_in is None else spec.burn_in,
        thin=settings.gibbs_thin if spec.thin is None else spec.thin,
        chunk_size=settings.gibbs_chunk_size,
    )
    data = simulate(spec.n, truth, sims, config, cap=settings.enumeration_cap)
    digest = data.digest()
    logger.info("Replicate %d: dataset sha256 %s", replicate, digest[:16])
    design = build_design(data, sims)
    selection_truth = SelectionTruth(truth)
    true_theta = assemble_theta(truth, sims)
    rows: list[dict[str, Any]] = []

    def score(estimator: str, tuning: str, params: ParameterSet, selection: bool) -> None:
        tpr, fpr = tpr_fpr(params.active_set(), selection_truth) if selection else (None, None)
        rows.append(
            _row(
                replicate, estimator, tuning, digest,
                mse_alpha=mse_alpha(params, selection_truth),
                mse_theta=mse_theta(params, selection_truth),
                sse_alpha=sse_alpha(params, selection_truth),
                sse_theta=sse_theta(params, selection_truth),
                tpr=tpr,
                fpr=fpr,
                theta_error=theta_error(assemble_theta(params, sims), true_theta),
                n_active=len(params.active_set()),
            )
        )

    def failed(estimator: str, tuning: str, error: Exception) -> None:
        logger.warning("Replicate %d: %s/%s failed: %s", replicate, estimator, tuning, error)
        rows.append(_row(replicate, estimator, tuning, digest, status="failed", error=str(error)))

    pilot = None
    try:
        pilot = fit_unregularized(design, settings=settings)
        if not pilot.converged:
            raise ConvergenceError("Unregularized fit did not converge")
    except SimRegError as e:
        pilot = None
        if "unregularized" in spec.estimators:
            failed("unregularized", "none", e)
    else:
        if "unregularized" in spec.estimators:
            score("unregularized", "none", pilot.params, selection=False)

    if "oracle" in spec.estimators:
        try:
            oracle = fit_oracle(design, selection_truth.support, settings=settings)
            score("oracle", "none", oracle.params, selection=False)
        except SimRegError as e:
            failed("oracle", "none", e)

    for estimator in ("regularized", "lasso"):
        if estimator not in spec.estimators:
            continue
        try:
            if estimator == "lasso":
                weights = lasso_weights(spec.K)
            elif pilot is None:
                raise ConvergenceError("No pilot fit for adaptive weights")
            else:
                weights = adaptive_weights(pilot.params, settings.exclusion_tol, settings.weight_epsilon)
            path = fit_path_escalating(
                lambda cycles: fit_path(design, weights, settings=settings, max_cycles=cycles),
                settings.max_cycles,
                settings.retry_attempts,
            )
        except SimRegError as e:
            for tuning in spec.tuning:
                failed(estimator, tuning, e)
            continue
        for tuning in spec.tuning:
            try:
                if tuning == "cv":
                    plan = FoldPlan.create(spec.n, spec.n_folds, seed)
                    index = cross_validate(data, sims, weights, plan, path.lambda_grid, settings=settings).chosen_index
                else:
                    index = select_ic(data, sims, weights, path.lambda_grid, Criterion(tuning), path, settings=settings).chosen_index
                score(estimator, tuning, path.results[index].params, selection=True)
            except SimRegError as e:
                failed(estimator, tuning, e)

    if "neighborhood" in spec.estimators:
        try:
            baseline = neighborhood_lasso_baseline(data, n_folds=spec.baseline_folds, seed=seed, settings=settings)
            rows.append(
                _row(
                    replicate, "neighborhood", "cv", digest,
                    theta_error=theta_error(baseline.theta, true_theta),
                )
            )
        except SimRegError as e:
            failed("neighborhood", "cv", e)
    return rows


_SUMMARY_COLUMNS = ["mse_alpha", "mse_theta", "sse_alpha", "sse_theta", "tpr", "fpr", "theta_error", "n_active"]


def summarize(rows: pd.DataFrame) -> pd.DataFrame:
    """Per (estimator, tuning) means over successful replicates; MSE_alpha also reported x1000."""
    rows = rows.sort_values(["estimator", "tuning", "replicate"], kind="stable")
    ok = rows[rows["status"] == "ok"].copy()
    ok[_SUMMARY_COLUMNS] = ok[_SUMMARY_COLUMNS].apply(pd.to_numeric, errors="coerce")
    keys = ["estimator", "tuning"]
    summary = ok.groupby(keys)[_SUMMARY_COLUMNS].mean()
    summary["mse_alpha_x1000"] = summary["mse_alpha"] * 1000.0
    summary["theta_error_median"] = ok.groupby(keys)["theta_error"].median()
    summary["n_ok"] = ok.groupby(keys).size()
    summary = summary.reset_index()
    failures = rows[rows["status"] == "failed"].groupby(keys).size().rename("n_failed").reset_index()
    summary = summary.merge(failures, on=keys, how="outer")
    summary["n_ok"] = summary["n_ok"].fillna(0).astype(int)
    summary["n_failed"] = summary["n_failed"].fillna(0).astype(int)
    return summary.sort_values(keys, kind="stable").reset_index(drop=True)


def _records(frame: pd.DataFrame) -> list[dict[str, Any]]:
    return json.loads(frame.to_json(orient="records"))


@attrs.frozen(eq=False)
class BenchmarkReport:
    spec: ScenarioSpec
    rows: pd.DataFrame
    summary: pd.DataFrame
    metadata: dict[str, Any]

    def payload(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "metadata": self.metadata,
            "summary": _records(self.summary),
        }

    def write(self, store: ResultStore, stem: str = "benchmark") -> list[Path]:
        return [
            store.save_table(f"{stem}_summary.csv", self.summary),
            store.save_table(f"{stem}_replicates.csv", self.rows),
            store.save_json(f"{stem}_report.json", self.payload()),
        ]


class BenchmarkRunner:
    """
    Runs the replicates of a scenario concurrently.

    Args:
        settings (SimRegSettings | None): Solver defaults; ``max_workers``
            bounds the number of replicates in flight
    """

    def __init__(self, settings: SimRegSettings | None = None):
        self.settings = settings if settings is not None else SimRegSettings()

    def _inner_settings(self, spec: ScenarioSpec) -> SimRegSettings:
        update: dict[str, Any] = {"max_workers": 1, "n_folds": spec.n_folds}
        if spec.n_lambda is not None:
            update["n_lambda"] = spec.n_lambda
        return self.settings.model_copy(update=update)

    async def run(self, spec: ScenarioSpec) -> BenchmarkReport:
        truth, sims = generate_truth(spec)
        inner = self._inner_settings(spec)
        logger.info(
            "Scenario %s: n=%d p=%d K=%d K0=%d, %d replicates",
            spec.name, spec.n, spec.p, spec.K, spec.K0, spec.replicates,
        )
        per_replicate = await gather_bounded(
            partial(run_replicate, spec, truth, sims, settings=inner),
            range(spec.replicates),
            self.settings.max_workers,
            self.settings.executor,
        )
        rows = pd.DataFrame([row for rows in per_replicate for row in rows])
        summary = summarize(rows)
        stamped = decisions(inner)
        metadata = {
            "version": __version__,
            "scenario": spec.model_dump(),
            "seed": spec.seed,
            "true_alpha": truth.alpha.tolist(),
            "true_main_effects": truth.main_effects.tolist(),
            "generator": {
                "alpha": f"uniform on +/-[{spec.alpha_low}, {spec.alpha_high}] for the first K0",
                "main_effects": f"uniform on [{spec.main_low}, {spec.main_high}]",
                "similarities": f"random {spec.degree}-regular graph adjacency",
            },
            "mse_normalisation": {"alpha": "1/K, also reported x1000", "theta": "1/p"},
            "theta_error_norm": "frobenius, off-diagonal",
            "failures": int((rows["status"] == "failed").sum()),
            "decisions": stamped,
            "decisions_fingerprint": fingerprint(stamped),
        }
        return BenchmarkReport(spec, rows, summary, metadata)


def run_benchmark(spec: ScenarioSpec, settings: SimRegSettings | None = None) -> BenchmarkReport:
    return run_sync(BenchmarkRunner(settings).run(spec))
