"""
Tests for file readers, writers and the result store.

Reader errors must name the file, the 1-based data row and the column.
"""

import json

import numpy as np
import pytest

from ising_simreg.exceptions import DataFormatError
from ising_simreg.io import FileResultStore
from ising_simreg.io import load_fit
from ising_simreg.io import read_attributes
from ising_simreg.io import read_edges
from ising_simreg.io import read_matrix
from ising_simreg.io import read_matrix_dir
from ising_simreg.io import read_responses
from ising_simreg.io import read_schema
from ising_simreg.io import write_matrix
from ising_simreg.selection import SCHEMA_VERSION
from tests.fakes import LABELS
from tests.fakes import small_similarities
from tests.fakes import write_problem


def test_responses_and_matrices_round_trip(tmp_path):
    responses, matrices = write_problem(tmp_path, n=30)

    data = read_responses(responses)
    sims = [read_matrix(path, LABELS) for path in matrices]

    assert data.n == 30
    assert data.response_labels == tuple(LABELS)
    for sim, original in zip(sims, small_similarities(), strict=True):
        np.testing.assert_array_equal(sim.values, original.values)
        assert sim.label == original.label
    assert [s.label for s in read_matrix_dir(tmp_path / "sims", LABELS)] == ["across", "ring", "star"]


def test_non_binary_response_names_row_and_column(tmp_path):
    path = tmp_path / "responses.csv"
    path.write_text("a,b\n0,1\n1,2\n")

    with pytest.raises(DataFormatError) as exc_info:
        read_responses(path)

    error = exc_info.value
    assert (error.file, error.row, error.column) == (str(path), 2, "b")


def test_missing_file(tmp_path):
    with pytest.raises(DataFormatError, match="File not found"):
        read_responses(tmp_path / "nope.csv")


def test_matrix_label_and_value_errors(tmp_path):
    sim = small_similarities()[0]
    path = write_matrix(sim, tmp_path / "ring.csv", LABELS)

    with pytest.raises(DataFormatError) as exc_info:
        read_matrix(path, ["a", "b", "x", "d"])
    assert exc_info.value.column == "c"

    bad = tmp_path / "bad.csv"
    bad.write_text(",a,b\na,0,1\nb,one,0\n")
    with pytest.raises(DataFormatError) as exc_info:
        read_matrix(bad, ["a", "b"])
    assert (exc_info.value.row, exc_info.value.column) == (2, "a")


def test_matrix_with_diagonal_is_reported_with_coordinates(tmp_path):
    path = tmp_path / "diag.csv"
    path.write_text(",a,b\na,0,1\nb,1,3\n")

    with pytest.raises(DataFormatError) as exc_info:
        read_matrix(path, ["a", "b"])

    assert (exc_info.value.row, exc_info.value.column) == (2, "b")


def test_empty_matrix_directory(tmp_path):
    with pytest.raises(DataFormatError):
        read_matrix_dir(tmp_path)


def test_attributes_are_reordered_to_response_labels(tmp_path):
    table = tmp_path / "attributes.csv"
    table.write_text("label,age,sector\nc,3,x\na,1,y\nd,4,x\nb,2,y\n")
    schema = tmp_path / "schema.json"
    schema.write_text(json.dumps({"age": {"kind": "quantitative", "bandwidth": 2}, "sector": "qualitative"}))

    frame, columns = read_attributes(table, schema, LABELS)

    assert list(frame.index) == LABELS
    assert frame["age"].tolist() == [1.0, 2.0, 3.0, 4.0]
    assert columns["age"].bandwidth == 2.0
    assert columns["sector"].kind == "qualitative"


def test_attribute_errors(tmp_path):
    schema = tmp_path / "schema.json"
    schema.write_text(json.dumps({"age": "quantitative"}))
    table = tmp_path / "attributes.csv"

    table.write_text("label,age\na,1\nb,\nc,3\nd,4\n")
    with pytest.raises(DataFormatError) as exc_info:
        read_attributes(table, schema, LABELS)
    assert (exc_info.value.row, exc_info.value.column) == (2, "age")

    table.write_text("label,age\na,1\nb,old\nc,3\nd,4\n")
    with pytest.raises(DataFormatError, match="not a number"):
        read_attributes(table, schema, LABELS)

    table.write_text("label,age\na,1\nb,2\nc,3\n")
    with pytest.raises(DataFormatError, match="No attribute row"):
        read_attributes(table, schema, LABELS)

    schema.write_text(json.dumps({"age": "ordinal"}))
    with pytest.raises(DataFormatError):
        read_schema(schema)


def test_edge_list(tmp_path):
    path = tmp_path / "links.csv"
    path.write_text("source,target\na,b\nc,d\n")

    column = read_edges(path, LABELS)

    assert column.name == "links"
    assert column.values == ((0, 1), (2, 3))

    path.write_text("source,target\na,b\nc,z\n")
    with pytest.raises(DataFormatError) as exc_info:
        read_edges(path, LABELS)
    assert (exc_info.value.row, exc_info.value.column) == (2, "target")

    path.write_text("source,target\nb,b\n")
    with pytest.raises(DataFormatError, match="Self-loop"):
        read_edges(path, LABELS)


def test_result_store_writes_deterministic_json(tmp_path):
    """
    GIVEN a payload with unsorted keys
    WHEN it is saved twice
    THEN both files are byte-identical, sorted and stamped with the schema version
    """
    store = FileResultStore(tmp_path / "out")

    first = store.save_json("a.json", {"b": 1, "a": [1.5, 2]})
    second = store.save_json("b.json", {"a": [1.5, 2], "b": 1})

    assert first.read_bytes() == second.read_bytes()
    assert list(json.loads(first.read_text())) == ["a", "b", "schema_version"]
    assert json.loads(first.read_text())["schema_version"] == SCHEMA_VERSION


def test_run_log(tmp_path):
    store = FileResultStore(tmp_path)
    path = store.write_run_log({"command": "fit"}, {"kkt_tol": 1e-6})
    log = json.loads(path.read_text())
    assert log["config"] == {"command": "fit"}
    assert "timestamp" in log


def test_load_fit_rejects_other_documents(tmp_path):
    path = tmp_path / "other.json"
    path.write_text('{"hello": 1}')
    with pytest.raises(DataFormatError, match="Not a fit result"):
        load_fit(path)
