"""
File formats and result storage.

Tabular inputs are CSV with a header row. Responses: one column per
response, header = response labels, entries 0/1. Similarity matrices: p x p
with the response labels as header and as first column. Attribute tables:
first column = response label, one column per attribute, described by a JSON
schema. Edge lists: two columns of response labels.

Every reader error is a DataFormatError naming the file, the 1-based data row
and the column.

ResultStore is the storage abstraction for outputs; FileResultStore writes
deterministic JSON (sorted keys, fixed indent) and CSV into one directory.
The run log is the only artefact that carries a timestamp.
"""

import json
import logging
from collections.abc import Sequence
from datetime import datetime
from datetime import timezone
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from pydantic import BaseModel
from pydantic import ValidationError

from ising_simreg.exceptions import DataFormatError
from ising_simreg.exceptions import InvalidSimilarityError
from ising_simreg.model import BinaryDataset
from ising_simreg.model import SimilarityKind
from ising_simreg.model import SimilarityMatrix
from ising_simreg.selection import SCHEMA_VERSION
from ising_simreg.selection import FitResult
from ising_simreg.similarity import AttributeColumn
from ising_simreg.similarity import AttributeKind
from ising_simreg.similarity import ColumnSchema

logger = logging.getLogger("ising_simreg.io")

_BINARY = {"0": 0, "1": 1, "0.0": 0, "1.0": 1}


def _read_csv(path: Path, **kwargs: Any) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise DataFormatError("File not found", file=str(path))
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, **kwargs)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataFormatError(f"Cannot parse CSV: {e}", file=str(path)) from e


def read_responses(path: Path) -> BinaryDataset:
    frame = _read_csv(path)
    if frame.shape[1] == 0:
        raise DataFormatError("Response file has no columns", file=str(path))
    cells = frame.to_numpy()
    for row, values in enumerate(cells, start=1):
        for col, cell in enumerate(values):
            if cell.strip() not in _BINARY:
                raise DataFormatError(
                    f"Entry {cell!r} is not 0 or 1",
                    file=str(path),
                    row=row,
                    column=str(frame.columns[col]),
                )
    y = np.vectorize(lambda cell: _BINARY[cell.strip()], otypes=[np.uint8])(cells) if cells.size else cells
    data = BinaryDataset(np.asarray(y, dtype=np.uint8).reshape(frame.shape), [str(c) for c in frame.columns])
    logger.info("Read %d observations of %d responses from %s", data.n, data.p, path)
    return data


def write_responses(data: BinaryDataset, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(data.y, columns=list(data.response_labels)).to_csv(path, index=False)
    return path


def _check_labels(found: Sequence[str], expected: Sequence[str], path: Path, what: str) -> None:
    for position, (got, want) in enumerate(zip(found, expected, strict=False), start=1):
        if got != want:
            raise DataFormatError(
                f"{what} label {got!r} does not match response label {want!r}",
                file=str(path),
                row=position if what == "Row" else None,
                column=got if what == "Column" else None,
            )
    if len(found) != len(expected):
        raise DataFormatError(
            f"{what} labels: found {len(found)}, expected {len(expected)}", file=str(path)
        )


def read_matrix(path: Path, labels: Sequence[str] | None = None, label: str | None = None) -> SimilarityMatrix:
    """p x p similarity CSV; header and first column must list the response labels in order."""
    path = Path(path)
    frame = _read_csv(path, index_col=0)
    columns = [str(c) for c in frame.columns]
    index = [str(i) for i in frame.index]
    expected = list(labels) if labels is not None else columns
    _check_labels(columns, expected, path, "Column")
    _check_labels(index, expected, path, "Row")
    values = np.empty(frame.shape)
    for row, cells in enumerate(frame.to_numpy()):
        for col, cell in enumerate(cells):
            try:
                values[row, col] = float(cell)
            except ValueError:
                raise DataFormatError(
                    f"Entry {cell!r} is not a number", file=str(path), row=row + 1, column=columns[col]
                ) from None
    name = label or path.stem
    try:
        return SimilarityMatrix(values, label=name, kind=SimilarityKind.RAW)
    except InvalidSimilarityError as e:
        details = e.details or {}
        row = details.get("row", details.get("index"))
        col = details.get("column", details.get("index"))
        raise DataFormatError(
            str(e),
            file=str(path),
            row=None if row is None else row + 1,
            column=None if col is None else columns[col],
            details=details,
        ) from e


def write_matrix(sim: SimilarityMatrix, path: Path, labels: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(sim.values, index=list(labels), columns=list(labels)).to_csv(path, float_format="%.17g")
    return path


def read_matrix_dir(directory: Path, labels: Sequence[str] | None = None) -> list[SimilarityMatrix]:
    """All ``*.csv`` matrices of a directory, in file-name order."""
    directory = Path(directory)
    files = sorted(directory.glob("*.csv"))
    if not files:
        raise DataFormatError("No similarity matrices (*.csv) found", file=str(directory))
    return [read_matrix(path, labels) for path in files]


def read_schema(path: Path) -> dict[str, ColumnSchema]:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise DataFormatError(f"Cannot read schema: {e}", file=str(path)) from e
    if not isinstance(raw, dict):
        raise DataFormatError("Schema must be a JSON object of column -> kind", file=str(path))
    schema = {}
    for column, spec in raw.items():
        try:
            schema[column] = ColumnSchema(kind=spec) if isinstance(spec, str) else ColumnSchema(**spec)
        except (ValidationError, TypeError) as e:
            raise DataFormatError(f"Invalid schema entry: {e}", file=str(path), column=column) from e
    return schema


def read_attributes(
    table_path: Path, schema_path: Path, labels: Sequence[str] | None = None
) -> tuple[pd.DataFrame, dict[str, ColumnSchema]]:
    """
    Attribute table indexed by response label, reordered to ``labels``.
    Every response must appear exactly once.
    """
    table_path = Path(table_path)
    frame = _read_csv(table_path, index_col=0)
    frame.index = frame.index.map(str)
    schema = read_schema(schema_path)
    duplicated = frame.index[frame.index.duplicated()]
    if len(duplicated):
        row = int(np.flatnonzero(frame.index.duplicated())[0]) + 1
        raise DataFormatError(f"Duplicate response label {duplicated[0]!r}", file=str(table_path), row=row)
    if labels is not None:
        for position, name in enumerate(frame.index, start=1):
            if name not in labels:
                raise DataFormatError(
                    f"Label {name!r} is not a response", file=str(table_path), row=position, column=frame.index.name
                )
        missing = [name for name in labels if name not in frame.index]
        if missing:
            raise DataFormatError(f"No attribute row for responses {missing}", file=str(table_path))
        frame = frame.loc[list(labels)]
    for column, spec in schema.items():
        if column not in frame.columns:
            raise DataFormatError("Schema column missing from table", file=str(table_path), column=column)
        for position, cell in enumerate(frame[column], start=1):
            if cell.strip() == "":
                raise DataFormatError("Missing value", file=str(table_path), row=position, column=column)
            if spec.kind == "quantitative":
                try:
                    float(cell)
                except ValueError:
                    raise DataFormatError(
                        f"Entry {cell!r} is not a number", file=str(table_path), row=position, column=column
                    ) from None
        if spec.kind == "quantitative":
            frame[column] = frame[column].astype(float)
    return frame, schema


def read_edges(path: Path, labels: Sequence[str], name: str | None = None) -> AttributeColumn:
    path = Path(path)
    frame = _read_csv(path)
    if frame.shape[1] != 2:
        raise DataFormatError(f"Edge list needs two columns, found {frame.shape[1]}", file=str(path))
    position = {label: j for j, label in enumerate(labels)}
    edges = []
    for row, cells in enumerate(frame.to_numpy(), start=1):
        pair = []
        for col, cell in enumerate(cells):
            if cell not in position:
                raise DataFormatError(
                    f"Unknown response label {cell!r}", file=str(path), row=row, column=str(frame.columns[col])
                )
            pair.append(position[cell])
        if pair[0] == pair[1]:
            raise DataFormatError("Self-loop", file=str(path), row=row)
        edges.append(tuple(pair))
    return AttributeColumn(name or path.stem, AttributeKind.ADJACENCY, edges, dim=len(labels))


def _dump(model: BaseModel | dict[str, Any]) -> str:
    payload = json.loads(model.model_dump_json()) if isinstance(model, BaseModel) else dict(model)
    payload.setdefault("schema_version", SCHEMA_VERSION)
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False, default=str) + "\n"


class ResultStore:
    """Abstract interface for result storage."""

    def save_json(self, name: str, model: BaseModel | dict[str, Any]) -> Path:
        raise NotImplementedError

    def save_table(self, name: str, table: pd.DataFrame) -> Path:
        raise NotImplementedError

    def write_run_log(self, config: dict[str, Any], decisions: dict[str, Any]) -> Path:
        raise NotImplementedError


class FileResultStore(ResultStore):
    def __init__(self, output_dir: Path):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def save_json(self, name: str, model: BaseModel | dict[str, Any]) -> Path:
        path = self.output_dir / name
        logger.debug(f"Saving {name} to: {path}")
        path.write_text(_dump(model), encoding="utf-8")
        return path

    def save_table(self, name: str, table: pd.DataFrame) -> Path:
        path = self.output_dir / name
        logger.debug(f"Saving table {name} to: {path}")
        table.to_csv(path, index=False, float_format="%.10g")
        return path

    def write_run_log(self, config: dict[str, Any], decisions: dict[str, Any]) -> Path:
        entry = {
            "schema_version": SCHEMA_VERSION,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "config": config,
            "decisions": decisions,
        }
        return self.save_json("run_log.json", entry)


def load_fit(path: Path) -> FitResult:
    path = Path(path)
    try:
        return FitResult.model_validate_json(path.read_text(encoding="utf-8"))
    except (OSError, ValidationError) as e:
        raise DataFormatError(f"Not a fit result: {e}", file=str(path)) from e
