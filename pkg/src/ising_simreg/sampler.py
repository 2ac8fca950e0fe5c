"""
Random draws from the Ising similarity regression model.

Two samplers are provided:
- sample_exact: inverse-CDF sampling from the enumerated pmf (p up to the
  enumeration cap)
- sample_gibbs: single-site Gibbs sweeps with a fresh chain per observation

Row i of a dataset is a function of (seed, i) alone: the exact sampler reads
the i-th uniform of one Philox stream, and Gibbs chain i runs on its own
Philox substream keyed by (seed, sampler, i). Chunking only bounds memory,
so the output never depends on the chunk size or on scheduling order.
"""

import logging
import math
from collections.abc import Sequence
from enum import Enum
from typing import Any

import attrs
import numpy as np
from scipy.special import expit

from ising_simreg.exceptions import ConfigurationError
from ising_simreg.model import DEFAULT_ENUMERATION_CAP
from ising_simreg.model import BinaryDataset
from ising_simreg.model import ParameterSet
from ising_simreg.model import SimilarityMatrix
from ising_simreg.model import exact_log_pmf_table
from ising_simreg.model import natural_parameters

logger = logging.getLogger("ising_simreg.sampler")

_EXACT_STREAM = 0
_GIBBS_STREAM = 1
_ORDER_STREAM = 5
# uniforms held at once by one chunk of Gibbs chains
_UNIFORM_BUDGET = 1 << 22
MAX_KERNEL_DIM = 10


class SamplerMethod(str, Enum):
    EXACT = "exact"
    GIBBS = "gibbs"
    AUTO = "auto"


def _at_least(bound: int):
    def check(instance: Any, attribute: "attrs.Attribute[int]", value: int) -> None:
        if not isinstance(value, int) or value < bound:
            raise ConfigurationError(
                f"SamplerConfig.{attribute.name} must be an integer >= {bound}, got {value!r}"
            )

    return check


def _seed(instance: Any, attribute: "attrs.Attribute[int]", value: int) -> None:
    if not isinstance(value, int) or not 0 <= value < 2**64:
        raise ConfigurationError(f"Seed must be an unsigned 64-bit integer, got {value!r}")


@attrs.frozen
class SamplerConfig:
    """
    Sampler settings.

    Each observation gets a fresh chain (``draws_per_chain=1``). When several
    draws are taken from one chain, ``thin`` sweeps separate consecutive
    retained draws.
    """

    method: SamplerMethod = attrs.field(default=SamplerMethod.GIBBS, converter=SamplerMethod)
    seed: int = attrs.field(default=0, validator=_seed)
    burn_in: int = attrs.field(default=1000, validator=_at_least(0))
    thin: int = attrs.field(default=10, validator=_at_least(1))
    draws_per_chain: int = attrs.field(default=1, validator=_at_least(1))
    chunk_size: int = attrs.field(default=4096, validator=_at_least(1))

    @classmethod
    def from_settings(cls, settings: Any, method: str = "auto", seed: int | None = None) -> "SamplerConfig":
        return cls(
            method=SamplerMethod(method),
            seed=settings.seed if seed is None else seed,
            burn_in=settings.gibbs_burn_in,
            thin=settings.gibbs_thin,
            chunk_size=settings.gibbs_chunk_size,
        )


def substream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the stream identified by (seed, key)."""
    sequence = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))


def _decode(index: np.ndarray, p: int) -> np.ndarray:
    return ((index[:, None] >> np.arange(p, dtype=np.int64)) & 1).astype(np.uint8)


def sample_exact(
    n: int,
    params: ParameterSet,
    sims: Sequence[SimilarityMatrix],
    seed: int,
    cap: int = DEFAULT_ENUMERATION_CAP,
    chunk_size: int = 4096,
    labels: Sequence[str] | None = None,
) -> BinaryDataset:
    """n i.i.d. rows by inverse-CDF lookup in the exact pmf; row i uses the i-th uniform of stream (seed, exact)."""
    p = params.p
    log_pmf = exact_log_pmf_table(params, sims, cap)
    cdf = np.cumsum(np.exp(log_pmf))
    cdf[-1] = 1.0
    rng = substream(seed, _EXACT_STREAM)
    blocks = []
    for start in range(0, n, chunk_size):
        u = rng.random(min(chunk_size, n - start))
        index = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
        blocks.append(_decode(index.astype(np.int64), p))
    y = np.vstack(blocks) if blocks else np.zeros((0, p), dtype=np.uint8)
    return BinaryDataset(y, labels)


def _gibbs_chunk(
    first: int,
    chains: int,
    main: np.ndarray,
    off: np.ndarray,
    config: SamplerConfig,
) -> np.ndarray:
    """Chains first .. first + chains - 1, advanced together as one vectorised block."""
    p = main.shape[0]
    streams = [substream(config.seed, _GIBBS_STREAM, first + c) for c in range(chains)]
    orders = substream(config.seed, _ORDER_STREAM)
    y = np.array([rng.random(p) < 0.5 for rng in streams], dtype=float)
    sweeps = config.burn_in + (config.draws_per_chain - 1) * config.thin
    retain = {config.burn_in + r * config.thin for r in range(config.draws_per_chain)}
    # the uniforms of one chain are read in order, so the block length never changes a draw
    block = max(1, _UNIFORM_BUDGET // (chains * p))

    draws = [y.copy()] if 0 in retain else []
    done = 0
    while done < sweeps:
        size = min(block, sweeps - done)
        u = np.stack([rng.random((size, p)) for rng in streams])
        for b in range(size):
            for j in orders.permutation(p):
                y[:, j] = u[:, b, j] < expit(main[j] + y @ off[:, j])
            done += 1
            if done in retain:
                draws.append(y.copy())
    # chain-major: all draws of chain 0, then chain 1, ...
    return np.stack(draws, axis=1).reshape(chains * config.draws_per_chain, p)


def sample_gibbs(
    n: int,
    params: ParameterSet,
    sims: Sequence[SimilarityMatrix],
    config: SamplerConfig,
    labels: Sequence[str] | None = None,
) -> BinaryDataset:
    """
    n rows from full-sweep single-site Gibbs chains.

    Each sweep visits the coordinates in a random permutation and updates
    coordinate j with probability conditional_prob. Chain c starts from and
    updates with uniforms of its own stream (seed, c); the permutations come
    from one stream per seed and are shared by all chains. ``chunk_size``
    only bounds how many chains advance together.
    """
    main, off = natural_parameters(params, sims)
    p = params.p
    n_chains = math.ceil(n / config.draws_per_chain) if n else 0
    blocks = []
    for start in range(0, n_chains, config.chunk_size):
        chains = min(config.chunk_size, n_chains - start)
        blocks.append(_gibbs_chunk(start, chains, main, off, config))
    y = np.vstack(blocks)[:n] if blocks else np.zeros((0, p))
    return BinaryDataset(y.astype(np.uint8), labels)


def simulate(
    n: int,
    params: ParameterSet,
    sims: Sequence[SimilarityMatrix],
    config: SamplerConfig,
    cap: int = DEFAULT_ENUMERATION_CAP,
    labels: Sequence[str] | None = None,
) -> BinaryDataset:
    """Dispatch on config.method; AUTO picks exact sampling when p fits the cap."""
    method = config.method
    if method is SamplerMethod.AUTO:
        method = SamplerMethod.EXACT if params.p <= cap else SamplerMethod.GIBBS
        if method is SamplerMethod.GIBBS:
            logger.info(
                "p=%d exceeds the enumeration cap %d; routing to the Gibbs sampler "
                "(burn_in=%d, thin=%d)",
                params.p,
                cap,
                config.burn_in,
                config.thin,
            )
    if method is SamplerMethod.EXACT:
        return sample_exact(
            n, params, sims, config.seed, cap=cap, chunk_size=config.chunk_size, labels=labels
        )
    return sample_gibbs(n, params, sims, config, labels=labels)


def sweep_kernel(
    params: ParameterSet,
    sims: Sequence[SimilarityMatrix],
    order: Sequence[int],
) -> np.ndarray:
    """
    Transition matrix of one Gibbs sweep visiting coordinates in ``order``.

    Rows and columns are indexed by state index (bit j of the index is u_j).
    Small p only.
    """
    p = params.p
    if p > MAX_KERNEL_DIM:
        raise ConfigurationError(
            f"sweep_kernel is limited to p <= {MAX_KERNEL_DIM}", details={"p": p}
        )
    main, off = natural_parameters(params, sims)
    size = 1 << p
    states = _decode(np.arange(size, dtype=np.int64), p).astype(float)
    kernel = np.eye(size)
    for j in order:
        prob_one = expit(main[j] + states @ off[:, j])
        bit = 1 << int(j)
        index = np.arange(size)
        site = np.zeros((size, size))
        site[index, index | bit] += prob_one
        site[index, index & ~bit] += 1.0 - prob_one
        kernel = kernel @ site
    return kernel
