"""
Similarity matrices from response-level attributes.

Constructors:
- from_quantitative: Gaussian kernel exp(-((z_j - z_j') / h)^2), h = 1 by default
- from_qualitative: 1 when two responses share a categorical level
- from_level: 1 when both responses carry one specific level (multi-label
  cells such as occupations, one matrix per level)
- from_adjacency: symmetrised 0/1 matrix from a directed edge list

validate() reports the diagnostics of a (possibly invalid) matrix without
changing it, including the matrix 1-norm bounded by the theory.
"""

import logging
import math
from collections.abc import Mapping
from collections.abc import Sequence
from enum import Enum
from typing import Any
from typing import Literal

import attrs
import numpy as np
import pandas as pd
from pydantic import BaseModel
from pydantic import Field

from ising_simreg.exceptions import DimensionMismatchError
from ising_simreg.exceptions import InputError
from ising_simreg.model import SimilarityKind
from ising_simreg.model import SimilarityMatrix

logger = logging.getLogger("ising_simreg.similarity")


class AttributeKind(str, Enum):
    QUANTITATIVE = "quantitative"
    QUALITATIVE = "qualitative"
    ADJACENCY = "adjacency-edge-list"


def _is_missing(value: Any) -> bool:
    if value is None:
        return True
    if isinstance(value, str):
        return value.strip() == ""
    try:
        return bool(pd.isna(value))
    except (TypeError, ValueError):
        return False


@attrs.frozen(eq=False)
class AttributeColumn:
    """
    One auxiliary attribute of the p responses.

    ``values`` holds p reals or category labels, or for an adjacency column
    the list of (j, j') edges over response indices, in which case ``dim``
    must give p.
    """

    name: str
    kind: AttributeKind = attrs.field(converter=AttributeKind)
    values: tuple[Any, ...] = attrs.field(converter=tuple)
    dim: int | None = None

    def __attrs_post_init__(self) -> None:
        if self.kind is AttributeKind.ADJACENCY:
            if self.dim is None:
                raise InputError(f"Adjacency column '{self.name}' needs dim (p)")
            for e, edge in enumerate(self.values):
                if len(edge) != 2:
                    raise InputError(
                        f"Edge {e} of '{self.name}' is not a pair", details={"edge": e}
                    )
                a, b = (int(x) for x in edge)
                if not (0 <= a < self.dim and 0 <= b < self.dim):
                    raise InputError(
                        f"Edge {e} of '{self.name}' references ({a}, {b}) outside 0..{self.dim - 1}",
                        details={"edge": e, "column": self.name},
                    )
                if a == b:
                    raise InputError(
                        f"Edge {e} of '{self.name}' is a self-loop on {a}",
                        details={"edge": e, "column": self.name},
                    )
            return
        if self.dim is not None and self.dim != len(self.values):
            raise DimensionMismatchError(
                f"Attribute '{self.name}' has {len(self.values)} values, expected {self.dim}",
                details={"column": self.name},
            )
        for row, value in enumerate(self.values):
            if _is_missing(value):
                raise InputError(
                    f"Attribute '{self.name}' has a missing value at row {row}",
                    details={"row": row, "column": self.name},
                )

    @property
    def p(self) -> int:
        return self.dim if self.kind is AttributeKind.ADJACENCY else len(self.values)  # type: ignore[return-value]


def _require_kind(col: AttributeColumn, kind: AttributeKind) -> None:
    if col.kind is not kind:
        raise InputError(
            f"Attribute '{col.name}' is {col.kind.value}, expected {kind.value}",
            details={"column": col.name},
        )


def _zero_diagonal(w: np.ndarray) -> np.ndarray:
    np.fill_diagonal(w, 0.0)
    return w


def from_quantitative(
    col: AttributeColumn, bandwidth: float = 1.0, standardize: bool = False
) -> SimilarityMatrix:
    _require_kind(col, AttributeKind.QUANTITATIVE)
    if not bandwidth > 0:
        raise InputError(f"Bandwidth must be positive, got {bandwidth}")
    z = np.empty(col.p)
    for row, value in enumerate(col.values):
        try:
            z[row] = float(value)
        except (TypeError, ValueError):
            z[row] = math.nan
        if not math.isfinite(z[row]):
            raise InputError(
                f"Attribute '{col.name}' has a non-finite value {value!r} at row {row}",
                details={"row": row, "column": col.name},
            )
    if standardize:
        spread = z.std()
        z = (z - z.mean()) / spread if spread > 0 else z - z.mean()
    gap = (z[:, None] - z[None, :]) / bandwidth
    w = _zero_diagonal(np.exp(-(gap**2)))
    return SimilarityMatrix(w, label=col.name, kind=SimilarityKind.QUANTITATIVE)


def from_qualitative(col: AttributeColumn) -> SimilarityMatrix:
    _require_kind(col, AttributeKind.QUALITATIVE)
    levels = np.array([str(v).strip() for v in col.values], dtype=object)
    w = _zero_diagonal((levels[:, None] == levels[None, :]).astype(float))
    return SimilarityMatrix(w, label=col.name, kind=SimilarityKind.QUALITATIVE)


def from_level(
    col: AttributeColumn,
    level: str,
    separator: str = ";",
    label: str | None = None,
) -> SimilarityMatrix:
    """w_jj' = 1 when both responses list ``level`` among their labels."""
    _require_kind(col, AttributeKind.QUALITATIVE)
    member = np.array(
        [level in {part.strip() for part in str(v).split(separator)} for v in col.values],
        dtype=float,
    )
    if not member.any():
        logger.warning("Level %r does not occur in attribute '%s'", level, col.name)
    w = _zero_diagonal(np.outer(member, member))
    return SimilarityMatrix(w, label=label or level, kind=SimilarityKind.QUALITATIVE)


def from_adjacency(col: AttributeColumn) -> SimilarityMatrix:
    _require_kind(col, AttributeKind.ADJACENCY)
    w = np.zeros((col.p, col.p))
    for a, b in col.values:
        w[int(a), int(b)] = 1.0
        w[int(b), int(a)] = 1.0
    return SimilarityMatrix(w, label=col.name, kind=SimilarityKind.ADJACENCY)


@attrs.frozen
class SimilarityReport:
    label: str
    dim: int
    symmetry_residual: float
    max_abs_diagonal: float
    norm_1: float
    min_entry: float
    max_entry: float
    finite: bool

    @property
    def is_valid(self) -> bool:
        return self.finite and self.symmetry_residual == 0.0 and self.max_abs_diagonal == 0.0

    def as_dict(self) -> dict[str, Any]:
        return {**attrs.asdict(self), "is_valid": self.is_valid}


def validate(sim: SimilarityMatrix | np.ndarray, label: str | None = None) -> SimilarityReport:
    """Diagnostics of a similarity matrix; ``norm_1`` is the max column absolute sum."""
    if isinstance(sim, SimilarityMatrix):
        values = np.asarray(sim.values, dtype=float)
        label = label or sim.label
    else:
        values = np.asarray(sim, dtype=float)
        label = label or "W"
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise InputError("Similarity must be a square matrix", details={"shape": values.shape})
    finite = bool(np.all(np.isfinite(values)))
    clean = np.where(np.isfinite(values), values, 0.0)
    report = SimilarityReport(
        label=label,
        dim=int(values.shape[0]),
        symmetry_residual=float(np.max(np.abs(clean - clean.T), initial=0.0)),
        max_abs_diagonal=float(np.max(np.abs(np.diag(clean)), initial=0.0)),
        norm_1=float(np.max(np.abs(clean).sum(axis=0), initial=0.0)),
        min_entry=float(np.min(clean, initial=np.inf)),
        max_entry=float(np.max(clean, initial=-np.inf)),
        finite=finite,
    )
    if not report.is_valid:
        logger.warning("Similarity '%s' fails validation: %s", label, report)
    return report


class ColumnSchema(BaseModel):
    """How one attribute-table column becomes similarity matrices."""

    kind: Literal["quantitative", "qualitative"]
    bandwidth: float = Field(default=1.0, gt=0.0)
    standardize: bool = False
    levels: list[str] | None = None
    separator: str = ";"


def build_similarities(
    table: pd.DataFrame,
    schema: Mapping[str, ColumnSchema],
    edges: Sequence[AttributeColumn] = (),
) -> list[SimilarityMatrix]:
    """
    All similarity matrices described by ``schema``, in schema order,
    followed by one adjacency matrix per edge list.

    A qualitative column with ``levels`` contributes one matrix per level
    instead of a single shared-level matrix.
    """
    sims: list[SimilarityMatrix] = []
    p = len(table.index)
    for name, spec in schema.items():
        if name not in table.columns:
            raise InputError(f"Schema column '{name}' not found in attribute table")
        values = tuple(table[name].tolist())
        if spec.kind == "quantitative":
            col = AttributeColumn(name, AttributeKind.QUANTITATIVE, values, dim=p)
            sims.append(from_quantitative(col, spec.bandwidth, spec.standardize))
        elif spec.levels:
            col = AttributeColumn(name, AttributeKind.QUALITATIVE, values, dim=p)
            sims.extend(from_level(col, level, spec.separator) for level in spec.levels)
        else:
            col = AttributeColumn(name, AttributeKind.QUALITATIVE, values, dim=p)
            sims.append(from_qualitative(col))
    for edge_col in edges:
        if edge_col.p != p:
            raise DimensionMismatchError(
                f"Edge list '{edge_col.name}' is over {edge_col.p} responses, table has {p}",
                details={"column": edge_col.name},
            )
        sims.append(from_adjacency(edge_col))
    logger.info("Built %d similarity matrices over p=%d responses", len(sims), p)
    return sims
