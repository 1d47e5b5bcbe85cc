"""Exact end-to-end composition of a batched line network.

W_L = F Q_1^N Phi_1 Q_2^N ... Phi_{L-1} Q_L^N, where Q^N is the N-fold
Kronecker power of a link. The same chain, with each link replaced by its
law conditioned on "no collapse", gives the bottleneck decomposition.
"""

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np

from .channels import canonical_witness, kron_power
from .config import get_settings
from .errors import (
    ConsistencyError,
    DegenerateDecompositionError,
    DimensionError,
    ValidationError,
)
from .models import Alphabet, Dmc
from .recoding import NodeMatrix, NodeRecoder, RecodingScheme, builtin_scheme

logger = logging.getLogger(__name__)

NoiseModel = Literal["coupled", "independent"]


@dataclass(frozen=True, eq=False)
class BatchNetwork:
    """A line network of L links driven by a recoding scheme."""

    links: tuple[Dmc, ...]
    scheme: RecodingScheme

    def __post_init__(self) -> None:
        links = tuple(self.links)
        if not links:
            raise ValidationError("a line network needs at least one link")
        first = links[0]
        for position, link in enumerate(links, start=1):
            if (
                link.input_alphabet != first.input_alphabet
                or link.output_alphabet != first.output_alphabet
            ):
                raise DimensionError(
                    f"link {position} uses different alphabets from link 1"
                )
        if len(self.scheme.nodes) != len(links) - 1:
            raise DimensionError(
                f"scheme has {len(self.scheme.nodes)} node recoders, "
                f"a network of length {len(links)} needs {len(links) - 1}"
            )
        if self.scheme.source.input_alphabet != first.input_alphabet:
            raise DimensionError("source map does not emit the link input alphabet")
        for position, node in enumerate(self.scheme.nodes, start=1):
            if isinstance(node, (NodeMatrix, NodeRecoder)) and (
                node.received_alphabet != first.output_alphabet
                or node.emitted_alphabet != first.input_alphabet
            ):
                raise DimensionError(
                    f"node {position} does not map link outputs to link inputs"
                )
        object.__setattr__(self, "links", links)

    @classmethod
    def build(
        cls,
        links: Sequence[Dmc],
        scheme_name: str,
        params: Mapping[str, Any] | None = None,
        *,
        batch_alphabet: Alphabet,
        batch_size: int,
        inner_blocklength: int,
    ) -> "BatchNetwork":
        """Network whose scheme is one of the built-in baselines."""
        scheme = builtin_scheme(
            scheme_name,
            params,
            length=len(links),
            batch_alphabet=batch_alphabet,
            batch_size=batch_size,
            inner_blocklength=inner_blocklength,
            input_alphabet=links[0].input_alphabet,
            output_alphabet=links[0].output_alphabet,
        )
        return cls(tuple(links), scheme)

    @property
    def length(self) -> int:
        return len(self.links)

    @property
    def inner_blocklength(self) -> int:
        return self.scheme.inner_blocklength

    @property
    def batch_size(self) -> int:
        return self.scheme.source.batch_size

    @property
    def batch_alphabet(self) -> Alphabet:
        return self.scheme.source.batch_alphabet

    @property
    def input_alphabet(self) -> Alphabet:
        return self.links[0].input_alphabet

    @property
    def output_alphabet(self) -> Alphabet:
        return self.links[0].output_alphabet

    def link_powers(self) -> list[np.ndarray]:
        """Q_l^N for every link, computed once per distinct channel object."""
        cache: dict[int, np.ndarray] = {}
        powers = []
        for link in self.links:
            if id(link) not in cache:
                cache[id(link)] = kron_power(link, self.inner_blocklength).rows
            powers.append(cache[id(link)])
        return powers


@dataclass(frozen=True, eq=False)
class Decomposition:
    """W_L = p0 * w0 + (1 - p0) * w1 split on the bottleneck event E0."""

    p0: float
    w0: np.ndarray = field(repr=False)
    w1: np.ndarray | None = field(repr=False)
    collapse_masses: tuple[float, ...]
    y0: tuple[str, ...]
    noise_model: NoiseModel

    @property
    def p1(self) -> float:
        return 1.0 - self.p0

    def reconstruct(self) -> np.ndarray:
        if self.w1 is None:
            return self.w0.copy()
        return self.p0 * self.w0 + self.p1 * self.w1


@dataclass(frozen=True, eq=False)
class HopGrouping:
    """W_L = F G_1 Phi_K G_2 Phi_2K ... G_L' for groups of K hops."""

    group_size: int
    source: np.ndarray = field(repr=False)
    groups: tuple[np.ndarray, ...] = field(repr=False)
    interleaving: tuple[np.ndarray, ...] = field(repr=False)

    def chain_product(self, include_source: bool = True) -> np.ndarray:
        product = self.groups[0]
        for phi, group in zip(self.interleaving, self.groups[1:]):
            product = product @ phi @ group
        return self.source @ product if include_source else product


def end_to_end(net: BatchNetwork, upto: int | None = None) -> Dmc:
    """End-to-end batch channel from A^M to Q_out^N.

    With ``upto`` the chain stops after that many links, giving the prefix
    channel W_l.
    """
    length = net.length if upto is None else upto
    if not 1 <= length <= net.length:
        raise ValidationError(f"prefix length must lie in 1..{net.length}, got {upto}")
    powers = net.link_powers()
    phis = net.scheme.phi_matrices
    matrix = _chain(net.scheme.source.matrix, powers[:length], phis)
    logger.debug("composed %d links into a %s matrix", length, matrix.shape)
    return _as_dmc(net, matrix)


def _chain(
    source: np.ndarray, powers: Sequence[np.ndarray], phis: Sequence[np.ndarray]
) -> np.ndarray:
    matrix = source
    for ell, power in enumerate(powers):
        matrix = matrix @ power
        if ell < len(powers) - 1:
            matrix = matrix @ phis[ell]
    return matrix


def _as_dmc(net: BatchNetwork, matrix: np.ndarray) -> Dmc:
    return Dmc(
        net.batch_alphabet.power(net.batch_size),
        net.output_alphabet.power(net.inner_blocklength),
        np.clip(matrix, 0.0, 1.0),
    )


def bottleneck_decompose(
    net: BatchNetwork,
    y0_per_link: Sequence[str] | None = None,
    noise_model: NoiseModel = "coupled",
) -> Decomposition:
    """Split W_L on the event that some link collapses all N outputs to y0.

    In the ``coupled`` model a use of link l collapses with probability
    c_l = min_x Q_l(y0|x) (for erasure links this is the erasure indicator),
    so q0_l = c_l^N. The ``independent`` model uses the per-input noise
    variables literally: q0_l = prod_x Q_l(y0|x)^N. Given a collapse the link
    emits y0^N whatever its input, so w1 is the chain of conditional link
    matrices and w0 follows from the total-probability identity.
    """
    n = net.inner_blocklength
    if y0_per_link is None:
        witnesses = [canonical_witness(link) for link in net.links]
        missing = [i + 1 for i, w in enumerate(witnesses) if w is None]
        if missing:
            raise DegenerateDecompositionError(
                f"links {missing} have no canonical output, the bottleneck event "
                "has probability 0"
            )
        y0_per_link = [w[0] for w in witnesses if w is not None]
    if len(y0_per_link) != net.length:
        raise ValidationError(
            f"got {len(y0_per_link)} collapse outputs for {net.length} links"
        )

    masses = []
    for position, (link, y0) in enumerate(zip(net.links, y0_per_link), start=1):
        column = link.rows[:, link.output_alphabet.index(y0)]
        if column.min() <= 0.0:
            raise DegenerateDecompositionError(
                f"link {position}: output {y0!r} is not reachable from every input"
            )
        if noise_model == "coupled":
            masses.append(float(column.min()) ** n)
        elif noise_model == "independent":
            masses.append(float(np.prod(column)) ** n)
        else:
            raise ValidationError(f"unknown noise model {noise_model!r}")

    # p0 = 1 - prod(1 - q) without cancellation
    if max(masses) >= 1.0:
        p0, p1 = 1.0, 0.0
    else:
        log_p1 = sum(math.log1p(-q) for q in masses)
        p0, p1 = -math.expm1(log_p1), math.exp(log_p1)
    if p0 <= 0.0:
        raise DegenerateDecompositionError("the bottleneck event has probability 0")

    powers = net.link_powers()
    phis = net.scheme.phi_matrices
    total = _chain(net.scheme.source.matrix, powers, phis)
    if p1 <= 0.0:
        # Some link always collapses: W_L is already input independent.
        return Decomposition(
            p0, total, None, tuple(masses), tuple(y0_per_link), noise_model
        )

    conditioned = [
        _no_collapse_matrix(power, q0, link.output_alphabet, y0, n)
        for power, q0, link, y0 in zip(powers, masses, net.links, y0_per_link)
    ]
    w1 = _clean(_chain(net.scheme.source.matrix, conditioned, phis), "w1")
    w0 = _clean(_collapse_law(net, powers, phis, masses, y0_per_link, p0), "w0")
    logger.debug("bottleneck decomposition p0=%.9g over %d links", p0, net.length)
    return Decomposition(p0, w0, w1, tuple(masses), tuple(y0_per_link), noise_model)


def _collapse_law(
    net: BatchNetwork,
    powers: Sequence[np.ndarray],
    phis: Sequence[np.ndarray],
    masses: Sequence[float],
    y0_per_link: Sequence[str],
    p0: float,
) -> np.ndarray:
    """w0 summed over the first collapsing link; every row is the same law."""
    n = net.inner_blocklength
    law = np.zeros(powers[-1].shape[1])
    log_survive = 0.0
    for ell, (q0, y0) in enumerate(zip(masses, y0_per_link)):
        weight = math.exp(log_survive) * q0
        log_survive += math.log1p(-q0)
        row = np.zeros(powers[ell].shape[1])
        row[net.links[ell].output_alphabet.word_index((y0,) * n)] = 1.0
        for j in range(ell + 1, net.length):
            row = row @ phis[j - 1] @ powers[j]
        law += weight * row
    law /= p0
    return np.tile(law, (net.scheme.source.matrix.shape[0], 1))


def _no_collapse_matrix(
    power: np.ndarray, q0: float, outputs: Alphabet, y0: str, n: int
) -> np.ndarray:
    """(Q^N - q0 * T_y0) / (1 - q0), T_y0 sending every input to y0^N."""
    collapsed = outputs.word_index((y0,) * n)
    conditioned = power.copy()
    conditioned[:, collapsed] -= q0
    return _clean(conditioned / (1.0 - q0), "conditional link matrix")


def _clean(matrix: np.ndarray, what: str) -> np.ndarray:
    """Clamp floating-point negatives to 0 and renormalize rows."""
    tol = get_settings().clamp_tol
    lowest = float(matrix.min())
    if lowest < -tol:
        raise ConsistencyError(f"{what} has entry {lowest:.3g} below -{tol:g}")
    if lowest < 0.0:
        logger.debug("clamping negatives down to %.3g in %s", lowest, what)
        matrix = np.clip(matrix, 0.0, None)
        matrix = matrix / matrix.sum(axis=1, keepdims=True)
    return matrix


def group_hops(net: BatchNetwork, k: int) -> HopGrouping:
    """Regroup the chain into L/K blocks G_i of K consecutive hops.

    G_i = Q_{K(i-1)+1}^N Phi_{K(i-1)+1} ... Q_{Ki}^N, joined by Phi_K, Phi_2K, ...
    """
    if k < 1 or net.length % k != 0:
        raise ValidationError(
            f"group size {k} does not divide the network length {net.length}"
        )
    if not net.scheme.is_deterministic:
        raise ValidationError("hop grouping needs a deterministic recoding scheme")
    powers = net.link_powers()
    phis = net.scheme.phi_matrices
    groups = []
    for start in range(0, net.length, k):
        group = powers[start]
        for ell in range(start + 1, start + k):
            group = group @ phis[ell - 1] @ powers[ell]
        groups.append(group)
    interleaving = tuple(phis[start - 1] for start in range(k, net.length, k))
    return HopGrouping(k, net.scheme.source.matrix, tuple(groups), interleaving)
