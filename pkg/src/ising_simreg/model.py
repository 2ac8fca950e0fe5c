"""
Domain types and exact quantities of the Ising similarity regression model.

The interaction matrix is modelled as

    Theta = sum_j theta_jj Delta_jj + sum_k alpha_k W_k

so that a p-dimensional binary vector u has probability proportional to
exp(sum_j theta_jj u_j + sum_{j<j'} Theta_jj' u_j u_j'). This module holds the
immutable containers (SimilarityMatrix, ParameterSet, InteractionMatrix,
BinaryDataset), the assembly of Theta, exact probabilities by enumeration of
all 2^p states, and the conditional / pseudo-likelihood quantities that the
estimator is built on.
"""

import hashlib
import logging
from collections.abc import Iterator
from collections.abc import Sequence
from enum import Enum
from typing import Any
from typing import Literal

import attrs
import numpy as np
from scipy.special import expit
from scipy.special import logsumexp

from ising_simreg.exceptions import DimensionMismatchError
from ising_simreg.exceptions import EnumerationCapError
from ising_simreg.exceptions import InputError
from ising_simreg.exceptions import InvalidSimilarityError

logger = logging.getLogger("ising_simreg.model")

DEFAULT_ENUMERATION_CAP = 20
SYMMETRY_TOL = 1e-12
_STATE_CHUNK = 1 << 16


class SimilarityKind(str, Enum):
    QUANTITATIVE = "quantitative-derived"
    QUALITATIVE = "qualitative-derived"
    ADJACENCY = "adjacency"
    RAW = "raw"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _float_matrix(value: Any) -> np.ndarray:
    return _frozen(np.array(value, dtype=float))


def _float_vector(value: Any) -> np.ndarray:
    return _frozen(np.array(value, dtype=float).reshape(-1))


def _labels(value: Any) -> tuple[str, ...] | None:
    if value is None:
        return None
    return tuple(str(v) for v in value)


@attrs.frozen(eq=False)
class SimilarityMatrix:
    """
    A p x p symmetric, zero-diagonal similarity matrix W_k.

    Nonzero diagonals are rejected rather than ignored, and symmetry is
    enforced up to a round-off tolerance after which the stored values are
    exactly symmetric.
    """

    values: np.ndarray = attrs.field(converter=_float_matrix)
    label: str = "W"
    kind: SimilarityKind = attrs.field(
        default=SimilarityKind.RAW, converter=SimilarityKind
    )

    def __attrs_post_init__(self) -> None:
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] == 0:
            raise InvalidSimilarityError(
                f"Similarity '{self.label}' must be a non-empty square matrix",
                details={"label": self.label, "shape": v.shape},
            )
        bad = np.argwhere(~np.isfinite(v))
        if bad.size:
            row, col = (int(x) for x in bad[0])
            raise InvalidSimilarityError(
                f"Similarity '{self.label}' has a non-finite entry at ({row}, {col})",
                details={"label": self.label, "row": row, "column": col},
            )
        diagonal = np.flatnonzero(np.diag(v) != 0.0)
        if diagonal.size:
            raise InvalidSimilarityError(
                f"Similarity '{self.label}' must have a zero diagonal "
                f"(entry {int(diagonal[0])} is {v[diagonal[0], diagonal[0]]!r})",
                details={"label": self.label, "index": int(diagonal[0])},
            )
        residual = float(np.max(np.abs(v - v.T)))
        if residual > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(v)))):
            raise InvalidSimilarityError(
                f"Similarity '{self.label}' is not symmetric (residual {residual:.3g})",
                details={"label": self.label, "symmetry_residual": residual},
            )
        object.__setattr__(self, "values", _frozen((v + v.T) / 2.0))

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


@attrs.frozen(eq=False)
class ParameterSet:
    """Main effects theta_11..theta_pp and regression coefficients alpha_1..alpha_K."""

    main_effects: np.ndarray = attrs.field(converter=_float_vector)
    alpha: np.ndarray = attrs.field(converter=_float_vector)

    def __attrs_post_init__(self) -> None:
        if not (np.all(np.isfinite(self.main_effects)) and np.all(np.isfinite(self.alpha))):
            raise InputError("Parameter values must be finite")

    @property
    def p(self) -> int:
        return int(self.main_effects.shape[0])

    @property
    def K(self) -> int:
        return int(self.alpha.shape[0])

    @classmethod
    def zeros(cls, p: int, K: int) -> "ParameterSet":
        return cls(np.zeros(p), np.zeros(K))

    @classmethod
    def from_vector(cls, vector: np.ndarray, p: int) -> "ParameterSet":
        vector = np.asarray(vector, dtype=float)
        return cls(vector[:p], vector[p:])

    def vector(self) -> np.ndarray:
        return np.concatenate([self.main_effects, self.alpha])

    def active_set(self) -> tuple[int, ...]:
        return tuple(int(k) for k in np.flatnonzero(self.alpha != 0.0))

    def check_dimensions(self, p: int, K: int) -> None:
        if self.p != p or self.K != K:
            raise DimensionMismatchError(
                f"Parameter set has p={self.p}, K={self.K}; expected p={p}, K={K}",
                details={"p": self.p, "K": self.K, "expected_p": p, "expected_K": K},
            )


@attrs.frozen(eq=False)
class InteractionMatrix:
    """Symmetric Theta: main effects on the diagonal, interactions off it."""

    values: np.ndarray = attrs.field(converter=_float_matrix)

    def __attrs_post_init__(self) -> None:
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InputError("Interaction matrix must be square", details={"shape": v.shape})
        if np.max(np.abs(v - v.T), initial=0.0) > SYMMETRY_TOL * max(
            1.0, float(np.max(np.abs(v), initial=0.0))
        ):
            raise InputError("Interaction matrix must be symmetric")

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    @property
    def main_effects(self) -> np.ndarray:
        return np.diag(self.values).copy()

    def off_diagonal(self) -> np.ndarray:
        out = np.array(self.values, dtype=float)
        np.fill_diagonal(out, 0.0)
        return out

    def upper_triangle(self) -> np.ndarray:
        """Off-diagonal values theta_jj' for j < j' in row-major order."""
        return self.values[np.triu_indices(self.dim, k=1)]


def _binary_matrix(value: Any) -> np.ndarray:
    arr = np.asarray(value)
    if arr.ndim != 2:
        raise InputError("Binary data must be an n x p matrix", details={"shape": arr.shape})
    invalid = np.argwhere(~((arr == 0) | (arr == 1)))
    if invalid.size:
        row, col = (int(x) for x in invalid[0])
        raise InputError(
            f"Binary data entry at row {row}, column {col} is {arr[row, col]!r}, "
            "expected 0 or 1",
            details={"row": row, "column": col},
        )
    return _frozen(arr.astype(np.uint8))


@attrs.frozen(eq=False)
class BinaryDataset:
    """n i.i.d. observations of p binary responses, stored as bytes."""

    y: np.ndarray = attrs.field(converter=_binary_matrix)
    labels: tuple[str, ...] | None = attrs.field(default=None, converter=_labels)

    def __attrs_post_init__(self) -> None:
        if self.labels is not None and len(self.labels) != self.p:
            raise DimensionMismatchError(
                f"{len(self.labels)} labels given for {self.p} responses",
                details={"labels": len(self.labels), "p": self.p},
            )

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def p(self) -> int:
        return int(self.y.shape[1])

    @property
    def response_labels(self) -> tuple[str, ...]:
        if self.labels is not None:
            return self.labels
        return tuple(f"y{j + 1}" for j in range(self.p))

    def as_float(self) -> np.ndarray:
        return self.y.astype(float)

    def subset(self, rows: Sequence[int] | np.ndarray) -> "BinaryDataset":
        return BinaryDataset(self.y[np.asarray(rows, dtype=int)], self.labels)

    def constant_columns(self) -> tuple[int, ...]:
        means = self.y.mean(axis=0) if self.n else np.zeros(self.p)
        return tuple(int(j) for j in np.flatnonzero((means == 0.0) | (means == 1.0)))

    def digest(self) -> str:
        """SHA-256 of the shape and bytes of y."""
        h = hashlib.sha256(f"{self.n}x{self.p}".encode())
        h.update(np.ascontiguousarray(self.y).tobytes())
        return h.hexdigest()

    @classmethod
    def concat(cls, *datasets: "BinaryDataset") -> "BinaryDataset":
        return cls(np.vstack([d.y for d in datasets]), datasets[0].labels)


def check_similarities(sims: Sequence[SimilarityMatrix], p: int | None = None) -> int:
    """Verify all similarity matrices share one dimension; returns it."""
    if p is None:
        if not sims:
            raise InputError("At least one similarity matrix is required to infer p")
        p = sims[0].dim
    for k, sim in enumerate(sims):
        if sim.dim != p:
            raise DimensionMismatchError(
                f"Similarity matrix {k} ('{sim.label}') has dimension {sim.dim}, "
                f"expected {p}",
                details={"index": k, "label": sim.label, "dim": sim.dim, "expected": p},
            )
    return p


def similarity_stack(sims: Sequence[SimilarityMatrix], p: int) -> np.ndarray:
    """Stack of W_k as a (K, p, p) array."""
    check_similarities(sims, p)
    if not sims:
        return np.zeros((0, p, p))
    return np.stack([sim.values for sim in sims])


def _check_model(params: ParameterSet, sims: Sequence[SimilarityMatrix]) -> None:
    check_similarities(sims, params.p)
    if len(sims) != params.K:
        raise DimensionMismatchError(
            f"{params.K} coefficients given for {len(sims)} similarity matrices",
            details={"alpha_length": params.K, "n_similarities": len(sims)},
        )


def assemble_theta(
    params: ParameterSet, sims: Sequence[SimilarityMatrix]
) -> InteractionMatrix:
    """Theta = sum_j theta_jj Delta_jj + sum_k alpha_k W_k."""
    _check_model(params, sims)
    theta = np.diag(params.main_effects)
    for coefficient, sim in zip(params.alpha, sims, strict=True):
        theta = theta + coefficient * sim.values
    return InteractionMatrix(theta)


def natural_parameters(
    params: ParameterSet, sims: Sequence[SimilarityMatrix]
) -> tuple[np.ndarray, np.ndarray]:
    theta = assemble_theta(params, sims)
    return theta.main_effects, theta.off_diagonal()


def _check_cap(p: int, cap: int) -> None:
    if p > cap:
        raise EnumerationCapError(
            f"p={p} exceeds the exact enumeration cap of {cap}; "
            "use the Gibbs sampler (sample_gibbs) for larger models",
            details={"p": p, "cap": cap},
        )


def state_chunks(p: int, chunk: int = _STATE_CHUNK) -> Iterator[np.ndarray]:
    """All 2^p binary states in index order; state s has u_j = bit j of s."""
    total = 1 << p
    bits = np.arange(p, dtype=np.int64)
    for start in range(0, total, chunk):
        index = np.arange(start, min(total, start + chunk), dtype=np.int64)
        yield ((index[:, None] >> bits) & 1).astype(np.uint8)


def enumerate_states(p: int, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    _check_cap(p, cap)
    return np.vstack(list(state_chunks(p)))


def state_index(states: np.ndarray) -> np.ndarray:
    states = np.atleast_2d(np.asarray(states, dtype=np.int64))
    return states @ (np.int64(1) << np.arange(states.shape[1], dtype=np.int64))


def _energies(states: np.ndarray, main: np.ndarray, off: np.ndarray) -> np.ndarray:
    u = states.astype(float)
    return u @ main + 0.5 * np.einsum("ij,ij->i", u @ off, u)


def log_partition(
    params: ParameterSet,
    sims: Sequence[SimilarityMatrix],
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> float:
    """log Z by exact summation, accumulated chunk by chunk in the log domain."""
    _check_cap(params.p, cap)
    main, off = natural_parameters(params, sims)
    running = -np.inf
    for states in state_chunks(params.p):
        running = float(np.logaddexp(running, logsumexp(_energies(states, main, off))))
    return running


def exact_log_pmf_table(
    params: ParameterSet,
    sims: Sequence[SimilarityMatrix],
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> np.ndarray:
    """log f(u) for every state u, ordered by state index."""
    _check_cap(params.p, cap)
    main, off = natural_parameters(params, sims)
    energies = np.concatenate(
        [_energies(states, main, off) for states in state_chunks(params.p)]
    )
    return energies - logsumexp(energies)


def _binary_vector(u: Any, length: int, name: str) -> np.ndarray:
    arr = np.asarray(u).reshape(-1)
    if arr.shape[0] != length:
        raise DimensionMismatchError(
            f"{name} has length {arr.shape[0]}, expected {length}",
            details={"length": int(arr.shape[0]), "expected": length},
        )
    if not np.all((arr == 0) | (arr == 1)):
        raise InputError(f"{name} must be binary")
    return arr.astype(float)


def exact_log_pmf(
    u: Any,
    params: ParameterSet,
    sims: Sequence[SimilarityMatrix],
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> float:
    """log f(u; theta) with Z computed exactly over all 2^p states."""
    state = _binary_vector(u, params.p, "u")
    log_z = log_partition(params, sims, cap)
    main, off = natural_parameters(params, sims)
    return float(_energies(state[None, :], main, off)[0] - log_z)


def conditional_logits(
    y: np.ndarray, params: ParameterSet, sims: Sequence[SimilarityMatrix]
) -> np.ndarray:
    """n x p matrix of theta_jj + sum_k alpha_k W_k[j] . y_i."""
    main, off = natural_parameters(params, sims)
    return np.asarray(y, dtype=float) @ off + main


def conditional_prob(
    j: int,
    y_rest: Any,
    params: ParameterSet,
    sims: Sequence[SimilarityMatrix],
) -> float:
    """P(y_j = 1 | y_rest) = logistic(theta_jj + sum_k alpha_k sum_j' w_jj' y_j')."""
    p = params.p
    if not 0 <= j < p:
        raise InputError(f"Response index {j} out of range for p={p}", details={"j": j})
    rest = _binary_vector(y_rest, p - 1, "y_rest")
    y = np.insert(rest, j, 0.0)
    main, off = natural_parameters(params, sims)
    return float(expit(main[j] + off[j] @ y))


def log_pseudo_likelihood(
    data: BinaryDataset,
    params: ParameterSet,
    sims: Sequence[SimilarityMatrix],
    reduction: Literal["mean", "sum"] = "mean",
) -> float:
    """
    Log pseudo-likelihood sum_i sum_j log f_j(y_ij | y_i\\j).

    The default "mean" reduction divides by n*p, the scale of the penalized
    objective; "sum" is the scale used for pseudo-R^2 and the information
    criteria.
    """
    if data.p != params.p:
        raise DimensionMismatchError(
            f"Dataset has p={data.p}, parameters have p={params.p}",
            details={"data_p": data.p, "params_p": params.p},
        )
    y = data.as_float()
    eta = conditional_logits(y, params, sims)
    total = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    if reduction == "sum":
        return total
    return total / y.size
