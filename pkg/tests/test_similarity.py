import math

import numpy as np
import pandas as pd
import pytest

from ising_simreg.exceptions import DimensionMismatchError
from ising_simreg.exceptions import InputError
from ising_simreg.model import SimilarityKind
from ising_simreg.similarity import AttributeColumn
from ising_simreg.similarity import AttributeKind
from ising_simreg.similarity import ColumnSchema
from ising_simreg.similarity import build_similarities
from ising_simreg.similarity import from_adjacency
from ising_simreg.similarity import from_level
from ising_simreg.similarity import from_qualitative
from ising_simreg.similarity import from_quantitative
from ising_simreg.similarity import validate


def test_quantitative_kernel():
    """
    GIVEN attribute values 0, 1, 3
    WHEN the Gaussian kernel with unit bandwidth is applied
    THEN w_jj' = exp(-(z_j - z_j')^2) off the diagonal and 0 on it
    """
    col = AttributeColumn("age", AttributeKind.QUANTITATIVE, [0.0, 1.0, 3.0])

    sim = from_quantitative(col)

    assert sim.kind is SimilarityKind.QUANTITATIVE
    assert sim.values[0, 1] == pytest.approx(math.exp(-1.0))
    assert sim.values[0, 2] == pytest.approx(math.exp(-9.0))
    assert np.all(np.diag(sim.values) == 0.0)
    wide = from_quantitative(col, bandwidth=3.0)
    assert wide.values[0, 2] == pytest.approx(math.exp(-1.0))


def test_quantitative_standardize():
    col = AttributeColumn("x", AttributeKind.QUANTITATIVE, [10.0, 20.0, 30.0])
    sim = from_quantitative(col, standardize=True)
    z_gap = 10.0 / np.std([10.0, 20.0, 30.0])
    assert sim.values[0, 1] == pytest.approx(math.exp(-(z_gap**2)))


def test_qualitative_and_level_matrices():
    col = AttributeColumn("sector", AttributeKind.QUALITATIVE, ["a", "b", "a", "c"])
    assert from_qualitative(col).values.tolist() == [
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ]

    jobs = AttributeColumn("jobs", AttributeKind.QUALITATIVE, ["x;y", "y", "x", "z; y"])
    sim = from_level(jobs, "y")
    assert sim.label == "y"
    assert sim.values[0, 1] == sim.values[1, 3] == 1.0
    assert sim.values[0, 2] == 0.0


def test_adjacency_is_symmetrised():
    col = AttributeColumn("links", AttributeKind.ADJACENCY, [(0, 1), (2, 1)], dim=3)
    sim = from_adjacency(col)
    assert sim.values.tolist() == [[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]


@pytest.mark.parametrize(
    "kind, values, dim",
    [
        (AttributeKind.ADJACENCY, [(0, 0)], 3),
        (AttributeKind.ADJACENCY, [(0, 5)], 3),
        (AttributeKind.ADJACENCY, [(0, 1)], None),
        (AttributeKind.QUALITATIVE, ["a", "", "b"], None),
        (AttributeKind.QUANTITATIVE, [1.0, float("nan")], None),
    ],
)
def test_invalid_attribute_columns(kind, values, dim):
    with pytest.raises(InputError):
        AttributeColumn("bad", kind, values, dim=dim)


def test_missing_value_names_row():
    with pytest.raises(InputError) as exc_info:
        AttributeColumn("sector", AttributeKind.QUALITATIVE, ["a", None, "b"])
    assert exc_info.value.details == {"row": 1, "column": "sector"}


def test_constructor_kind_mismatch():
    col = AttributeColumn("sector", AttributeKind.QUALITATIVE, ["a", "b"])
    with pytest.raises(InputError):
        from_quantitative(col)


def test_validate_reports_without_raising():
    """
    GIVEN an asymmetric matrix with a nonzero diagonal
    WHEN it is validated
    THEN the report flags it and carries the 1-norm
    """
    raw = np.array([[0.5, 2.0], [1.0, 0.0]])

    report = validate(raw, label="raw")

    assert not report.is_valid
    assert report.symmetry_residual == 1.0
    assert report.max_abs_diagonal == 0.5
    assert report.norm_1 == 2.0
    assert report.as_dict()["is_valid"] is False


def test_build_similarities_follows_schema_order():
    table = pd.DataFrame(
        {"age": [1.0, 2.0, 4.0], "sector": ["a", "a", "b"], "jobs": ["x", "x;y", "y"]},
        index=["p", "q", "r"],
    )
    schema = {
        "sector": ColumnSchema(kind="qualitative"),
        "age": ColumnSchema(kind="quantitative", bandwidth=2.0),
        "jobs": ColumnSchema(kind="qualitative", levels=["x", "y"]),
    }
    edges = [AttributeColumn("links", AttributeKind.ADJACENCY, [(0, 2)], dim=3)]

    sims = build_similarities(table, schema, edges)

    assert [s.label for s in sims] == ["sector", "age", "x", "y", "links"]
    assert sims[1].values[0, 1] == pytest.approx(math.exp(-0.25))
    assert sims[4].values[0, 2] == 1.0


def test_build_similarities_rejects_mismatched_edges():
    table = pd.DataFrame({"age": [1.0, 2.0]}, index=["p", "q"])
    edges = [AttributeColumn("links", AttributeKind.ADJACENCY, [(0, 2)], dim=3)]
    with pytest.raises(DimensionMismatchError):
        build_similarities(table, {"age": ColumnSchema(kind="quantitative")}, edges)
    with pytest.raises(InputError):
        build_similarities(table, {"missing": ColumnSchema(kind="quantitative")})
