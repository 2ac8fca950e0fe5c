"""
Command-line interface for ising_simreg.

Available commands:
- fit: fit the model and write the result JSON, coefficient table and run log
- cv: cross-validation curve for a penalized variant
- simulate: draw a dataset from given or generated parameters
- benchmark: Monte Carlo comparison of the estimators for a scenario file
- export-graph: graph file of a fitted interaction matrix
- similarity build: similarity matrices from an attribute table and edge lists

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

import functools
import json
import logging
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any

import click
import numpy as np
import pandas as pd

from ising_simreg.benchmark import generate_truth
from ising_simreg.benchmark import load_scenario
from ising_simreg.benchmark import run_benchmark
from ising_simreg.config import SimRegSettings
from ising_simreg.config import decisions
from ising_simreg.exceptions import ConfigurationError
from ising_simreg.exceptions import DataFormatError
from ising_simreg.exceptions import InputError
from ising_simreg.exceptions import SimRegError
from ising_simreg.graph import build_graph
from ising_simreg.graph import component_graph
from ising_simreg.graph import write_graph
from ising_simreg.io import FileResultStore
from ising_simreg.io import load_fit
from ising_simreg.io import read_attributes
from ising_simreg.io import read_edges
from ising_simreg.io import read_matrix
from ising_simreg.io import read_matrix_dir
from ising_simreg.io import read_responses
from ising_simreg.io import write_matrix
from ising_simreg.io import write_responses
from ising_simreg.model import ParameterSet
from ising_simreg.model import SimilarityMatrix
from ising_simreg.monitor import LoggingMonitor
from ising_simreg.pipeline import IsingSimilarityRegression
from ising_simreg.sampler import SamplerConfig
from ising_simreg.sampler import simulate as draw
from ising_simreg.selection import FoldPlan
from ising_simreg.similarity import build_similarities
from ising_simreg.similarity import validate

logger = logging.getLogger("ising_simreg.cli")


def handle_errors(command: Callable[..., Any]) -> Callable[..., Any]:
    """Map library errors onto exit codes 2 (input) and 3 (numerical)."""

    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return command(*args, **kwargs)
        except SimRegError as exc:
            logger.error("%s: %s", type(exc).__name__, exc)
            click.echo(f"Error: {exc}", err=True)
            sys.exit(exc.exit_code)

    return wrapper


def _settings(ctx: click.Context, **overrides: Any) -> SimRegSettings:
    settings: SimRegSettings = ctx.obj["settings"]
    update = {key: value for key, value in overrides.items() if value is not None}
    return settings.model_copy(update=update) if update else settings


def _parse_grid(value: str | None) -> dict[str, Any]:
    if value is None:
        return {}
    try:
        length, ratio = value.split(",")
        parsed = {"n_lambda": int(length), "lambda_min_ratio": float(ratio)}
    except ValueError as e:
        raise ConfigurationError(f"--lambda-grid expects LEN,RATIO, got {value!r}") from e
    if parsed["n_lambda"] < 1 or not 0 < parsed["lambda_min_ratio"] < 1:
        raise ConfigurationError(f"--lambda-grid needs LEN >= 1 and 0 < RATIO < 1, got {value!r}")
    return parsed


def _parse_threshold(value: str) -> str | float:
    if value in ("median", "none"):
        return value
    try:
        return float(value)
    except ValueError as e:
        raise ConfigurationError(f"--threshold expects median, none or a number, got {value!r}") from e


def _parse_support(value: str | None, sims: list[SimilarityMatrix]) -> list[int] | None:
    if value is None:
        return None
    labels = [sim.label for sim in sims]
    support = []
    for item in (part.strip() for part in value.split(",") if part.strip()):
        if item in labels:
            support.append(labels.index(item))
        elif item.isdigit() and int(item) < len(sims):
            support.append(int(item))
        else:
            raise ConfigurationError(f"Unknown similarity {item!r} in --support", details={"labels": labels})
    return support


def _load_similarities(
    labels: list[str],
    matrices: tuple[str, ...],
    matrix_dir: str | None,
    attributes: str | None,
    schema: str | None,
    edges: tuple[str, ...],
) -> list[SimilarityMatrix]:
    """Attribute-derived matrices, then edge lists, then matrix files, then the matrix directory."""
    if (attributes is None) != (schema is None):
        raise ConfigurationError("--attributes and --schema must be given together")
    edge_columns = [read_edges(Path(path), labels) for path in edges]
    sims: list[SimilarityMatrix] = []
    if attributes is not None and schema is not None:
        table, columns = read_attributes(Path(attributes), Path(schema), labels)
        sims.extend(build_similarities(table, columns, edge_columns))
    elif edge_columns:
        sims.extend(build_similarities(pd.DataFrame(index=labels), {}, edge_columns))
    sims.extend(read_matrix(Path(path), labels) for path in matrices)
    if matrix_dir is not None:
        sims.extend(read_matrix_dir(Path(matrix_dir), labels))
    if not sims:
        raise InputError("at least one similarity source required")
    return sims


def similarity_options(command: Callable[..., Any]) -> Callable[..., Any]:
    options = [
        click.option("--matrix", "matrices", multiple=True, type=click.Path(exists=True, dir_okay=False), help="p x p similarity CSV (repeatable)"),
        click.option("--matrix-dir", type=click.Path(exists=True, file_okay=False), help="Directory of similarity CSVs"),
        click.option("--attributes", type=click.Path(exists=True, dir_okay=False), help="Attribute table CSV"),
        click.option("--schema", type=click.Path(exists=True, dir_okay=False), help="Attribute schema JSON"),
        click.option("--edges", multiple=True, type=click.Path(exists=True, dir_okay=False), help="Edge list CSV (repeatable)"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


@click.group()
@click.option("--log-level", default=None, help="Logging level (default from settings)")
@click.pass_context
def cli(ctx: click.Context, log_level: str | None) -> None:
    """Ising similarity regression CLI"""
    settings = SimRegSettings()
    logging.basicConfig(
        level=(log_level or settings.log_level).upper(), format="%(levelname)s %(name)s: %(message)s"
    )
    ctx.ensure_object(dict)
    ctx.obj["settings"] = settings


@cli.command()
@click.option("--responses", required=True, type=click.Path(exists=True, dir_okay=False), help="n x p 0/1 response CSV")
@similarity_options
@click.option("--penalty", type=click.Choice(["adaptive", "lasso", "none", "oracle"]), default="adaptive", show_default=True)
@click.option("--tune", type=click.Choice(["cv", "aic", "bic", "fixed"]), default="cv", show_default=True)
@click.option("--lambda", "lam", type=float, default=None, help="Penalty level for --tune fixed")
@click.option("--folds", type=click.IntRange(min=2), default=None, help="Cross-validation folds (default 10)")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Seed for fold assignment")
@click.option("--lambda-grid", default=None, help="Grid as LEN,RATIO")
@click.option("--support", default=None, help="Comma-separated similarity labels for --penalty oracle")
@click.option("--no-main-effects", is_flag=True, help="Fit without the theta_jj main effects")
@click.option("--output", required=True, type=click.Path(file_okay=False), help="Output directory")
@click.pass_context
@handle_errors
def fit(ctx, responses, matrices, matrix_dir, attributes, schema, edges, penalty, tune, lam, folds, seed, lambda_grid, support, no_main_effects, output):
    """Fit the model and write fit_result.json, coefficients.csv and run_log.json."""
    settings = _settings(ctx, n_folds=folds, seed=seed, **_parse_grid(lambda_grid))
    data = read_responses(Path(responses))
    sims = _load_similarities(list(data.response_labels), matrices, matrix_dir, attributes, schema, edges)
    model = IsingSimilarityRegression(settings, [LoggingMonitor(logging.DEBUG)], include_main_effects=not no_main_effects)
    result = model.fit(data, sims, penalty, tune, support=_parse_support(support, sims), lam=lam)

    store = FileResultStore(Path(output))
    store.save_json("fit_result.json", result)
    store.save_table("coefficients.csv", pd.DataFrame(result.coefficient_table()))
    store.write_run_log(
        {"command": "fit", "responses": responses, "penalty": penalty, "tune": tune, "similarities": result.similarity_labels},
        decisions(settings),
    )
    logger.info("Active similarities: %s", [result.similarity_labels[k] for k in result.active_set])
    click.echo(f"Wrote fit results to {output}")


@cli.command()
@click.option("--responses", required=True, type=click.Path(exists=True, dir_okay=False))
@similarity_options
@click.option("--penalty", type=click.Choice(["adaptive", "lasso"]), default="adaptive", show_default=True)
@click.option("--folds", type=click.IntRange(min=2), default=None)
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None)
@click.option("--lambda-grid", default=None, help="Grid as LEN,RATIO")
@click.option("--output", required=True, type=click.Path(file_okay=False))
@click.pass_context
@handle_errors
def cv(ctx, responses, matrices, matrix_dir, attributes, schema, edges, penalty, folds, seed, lambda_grid, output):
    """Cross-validation curve and chosen lambda."""
    settings = _settings(ctx, n_folds=folds, seed=seed, **_parse_grid(lambda_grid))
    data = read_responses(Path(responses))
    sims = _load_similarities(list(data.response_labels), matrices, matrix_dir, attributes, schema, edges)
    model = IsingSimilarityRegression(settings, [LoggingMonitor()])
    plan = FoldPlan.create(data.n, settings.n_folds, settings.seed)
    result = model.cross_validate(data, sims, penalty, plan)

    store = FileResultStore(Path(output))
    curve = result.curve()
    store.save_table(
        "cv_curve.csv",
        pd.DataFrame({"lambda": curve.lambdas, "mean_score": curve.values, "se": curve.se}),
    )
    store.save_json(
        "cv_result.json",
        {"chosen_lambda": result.chosen_lambda, "curve": curve.model_dump(), "skipped_folds": list(result.skipped_folds)},
    )
    click.echo(f"Chosen lambda: {result.chosen_lambda:.6g}")


@cli.command()
@click.option("--n", "n", required=True, type=click.IntRange(min=1), help="Number of observations")
@click.option("--params", type=click.Path(exists=True, dir_okay=False), help="Truth JSON with main_effects and alpha")
@click.option("--generator", type=click.Path(exists=True, dir_okay=False), help="Scenario JSON to generate truth and similarities")
@click.option("--labels", default=None, help="Comma-separated response labels")
@similarity_options
@click.option("--method", type=click.Choice(["auto", "exact", "gibbs"]), default="auto", show_default=True)
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None)
@click.option("--output", required=True, type=click.Path(file_okay=False))
@click.pass_context
@handle_errors
def simulate(ctx, n, params, generator, labels, matrices, matrix_dir, attributes, schema, edges, method, seed, output):
    """Draw responses.csv and truth.json (plus the W_k CSVs with --generator)."""
    settings = _settings(ctx, seed=seed)
    store = FileResultStore(Path(output))
    if (params is None) == (generator is None):
        raise ConfigurationError("Give exactly one of --params and --generator")
    if generator is not None:
        spec = load_scenario(Path(generator))
        truth, sims = generate_truth(spec)
        names = [f"y{j + 1}" for j in range(spec.p)]
        for k, sim in enumerate(sims):
            write_matrix(sim, Path(output) / "similarities" / f"W{k + 1:03d}.csv", names)
    else:
        raw = json.loads(Path(params).read_text(encoding="utf-8"))
        try:
            truth = ParameterSet(raw["main_effects"], raw["alpha"])
        except KeyError as e:
            raise DataFormatError(f"Missing field {e}", file=params) from e
        names = labels.split(",") if labels else raw.get("response_labels") or [f"y{j + 1}" for j in range(truth.p)]
        sims = _load_similarities(names, matrices, matrix_dir, attributes, schema, edges)
    truth.check_dimensions(len(names), len(sims))

    config = SamplerConfig.from_settings(settings, method=method)
    data = draw(n, truth, sims, config, cap=settings.enumeration_cap, labels=names)
    write_responses(data, Path(output) / "responses.csv")
    store.save_json(
        "truth.json",
        {
            "main_effects": truth.main_effects.tolist(),
            "alpha": truth.alpha.tolist(),
            "support": list(truth.active_set()),
            "similarity_labels": [sim.label for sim in sims],
            "response_labels": names,
            "seed": settings.seed,
            "method": method,
            "dataset_sha256": data.digest(),
        },
    )
    click.echo(f"Wrote {data.n} x {data.p} responses to {output}")


@cli.command()
@click.option("--scenario", required=True, type=click.Path(exists=True, dir_okay=False), help="Scenario JSON")
@click.option("--replicates", type=click.IntRange(min=1), default=None, help="Override the replicate count")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None)
@click.option("--output", required=True, type=click.Path(file_okay=False))
@click.pass_context
@handle_errors
def benchmark(ctx, scenario, replicates, seed, output):
    """Monte Carlo report of MSE, TPR/FPR and Theta error per estimator."""
    spec = load_scenario(Path(scenario))
    overrides = {key: value for key, value in {"replicates": replicates, "seed": seed}.items() if value is not None}
    if overrides:
        spec = spec.model_validate({**spec.model_dump(), **overrides})
    report = run_benchmark(spec, _settings(ctx))
    report.write(FileResultStore(Path(output)), stem=f"benchmark_{spec.name}")
    click.echo(report.summary.to_string(index=False))


@cli.command("export-graph")
@click.option("--fit", "fit_path", required=True, type=click.Path(exists=True, dir_okay=False), help="fit_result.json")
@similarity_options
@click.option("--threshold", default="median", show_default=True, help="median, none or a number")
@click.option("--node-attributes", type=click.Path(exists=True, dir_okay=False), help="CSV of node attributes indexed by response label")
@click.option("--color-by", default=None, help="Node attribute used as colour category")
@click.option("--mark-crossing", multiple=True, help="Mark edges whose endpoints differ in these attributes")
@click.option("--top-nodes", type=click.IntRange(min=2), default=None)
@click.option("--component", default=None, help="Export alpha_k W_k for this similarity label instead")
@click.option("--format", "fmt", type=click.Choice(["graphml", "gexf"]), default=None)
@click.option("--output", required=True, type=click.Path(dir_okay=False))
@click.pass_context
@handle_errors
def export_graph(ctx, fit_path, matrices, matrix_dir, attributes, schema, edges, threshold, node_attributes, color_by, mark_crossing, top_nodes, component, fmt, output):
    """Graph of the fitted Theta; edges kept when theta_jj' is above the threshold."""
    settings = _settings(ctx)
    result = load_fit(Path(fit_path))
    labels = result.response_labels
    sims = _load_similarities(labels, matrices, matrix_dir, attributes, schema, edges)
    if [sim.label for sim in sims] != result.similarity_labels:
        raise InputError(
            "Similarity inputs do not match the fit",
            details={"given": [sim.label for sim in sims], "fit": result.similarity_labels},
        )
    if component is not None:
        if component not in result.similarity_labels:
            raise ConfigurationError(f"Unknown similarity {component!r}")
        k = result.similarity_labels.index(component)
        graph = component_graph(result.alpha[k], sims[k], labels)
    else:
        extra: dict[str, list[Any]] = {}
        if node_attributes is not None:
            table = pd.read_csv(node_attributes, index_col=0, dtype=str, keep_default_na=False)
            table.index = table.index.map(str)
            missing = [name for name in labels if name not in table.index]
            if missing:
                raise DataFormatError(f"No node attributes for {missing}", file=node_attributes)
            extra = {column: table.loc[labels, column].tolist() for column in table.columns}
        graph = build_graph(
            result.theta(sims), labels, _parse_threshold(threshold), extra, color_by, mark_crossing, top_nodes
        )
    write_graph(graph, Path(output), fmt or settings.graph_format)
    click.echo(f"Wrote graph with {graph.number_of_nodes()} nodes and {graph.number_of_edges()} edges to {output}")


@cli.group()
def similarity() -> None:
    """Similarity matrix utilities."""


@similarity.command("build")
@click.option("--responses", "responses", type=click.Path(exists=True, dir_okay=False), help="Response CSV supplying the label order")
@click.option("--labels", default=None, help="Comma-separated response labels (instead of --responses)")
@click.option("--attributes", type=click.Path(exists=True, dir_okay=False))
@click.option("--schema", type=click.Path(exists=True, dir_okay=False))
@click.option("--edges", multiple=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", required=True, type=click.Path(file_okay=False))
@handle_errors
def similarity_build(responses, labels, attributes, schema, edges, output):
    """Write one W_k CSV per derived similarity plus validation.json."""
    if responses is not None:
        names = list(read_responses(Path(responses)).response_labels)
    elif labels is not None:
        names = [part.strip() for part in labels.split(",")]
    elif attributes is not None:
        names = [str(i) for i in pd.read_csv(attributes, index_col=0, dtype=str).index]
    else:
        raise ConfigurationError("Give --responses, --labels or --attributes to fix the label order")
    sims = _load_similarities(names, (), None, attributes, schema, edges)
    store = FileResultStore(Path(output))
    for k, sim in enumerate(sims):
        write_matrix(sim, Path(output) / f"W{k + 1:03d}_{_slug(sim.label)}.csv", names)
    store.save_json("validation.json", {"similarities": [validate(sim).as_dict() for sim in sims]})
    click.echo(f"Wrote {len(sims)} similarity matrices to {output}")


def _slug(label: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in label)


if __name__ == "__main__":
    cli()
