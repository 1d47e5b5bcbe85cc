"""Converse upper bounds on the batched-code capacity of a line network.

Every bound has the form p1 * min{M ln|A|, N ln|Q_out|} / N, where p1 is an
upper bound on the probability that no link (or group of K links) collapses
the batch:

* erasure:   p1 = (1 - eps^N)^L
* canonical: p1 = (1 - eps^(|Q_in| N))^L
* general:   p1 = (1 - eps^(N K |Q_in|))^(L/K), with eps <= eps_Q of every link

Values are evaluated in log space so that long networks do not underflow.
"""

import itertools
import logging
import math
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .channels import (
    ERASURE,
    apply_noise,
    canonical_witness,
    epsilon_q,
    erasure_probability,
    noise_probability,
)
from .composition import BatchNetwork
from .errors import (
    BoundPreconditionError,
    ConsistencyError,
    ValidationError,
    WitnessConflictError,
)
from .infotheory import cardinality_cap
from .models import Dmc, NoiseRealization, Word

logger = logging.getLogger(__name__)

Regime = Literal["erasure", "canonical", "general"]
REGIMES: tuple[Regime, ...] = ("erasure", "canonical", "general")
RegimeChoice = Regime | Literal["auto"]
Schedule = int | Literal["log"]


@dataclass(frozen=True)
class BoundParams:
    """Parameters of one bound evaluation.

    ``eps`` is the erasure probability, the canonical eps or the uniform
    lower bound on eps_Q depending on the regime.
    """

    regime: Regime
    length: int
    inner_blocklength: int
    batch_size: int
    batch_alphabet_size: int
    input_alphabet_size: int
    output_alphabet_size: int
    eps: float
    group_size: int = 1

    def __post_init__(self) -> None:
        if self.regime not in REGIMES:
            raise BoundPreconditionError(
                f"unknown regime {self.regime!r}, expected one of {', '.join(REGIMES)}"
            )
        for name in (
            "length",
            "inner_blocklength",
            "batch_size",
            "batch_alphabet_size",
            "input_alphabet_size",
            "output_alphabet_size",
            "group_size",
        ):
            if getattr(self, name) < 1:
                raise BoundPreconditionError(f"{name} must be >= 1")
        if not 0.0 < self.eps <= 1.0:
            raise BoundPreconditionError(f"eps must lie in (0, 1], got {self.eps}")
        if self.regime == "general":
            needed = self.inner_blocklength * math.log2(self.input_alphabet_size)
            if self.group_size < needed - 1e-12:
                raise BoundPreconditionError(
                    f"group size K={self.group_size} is below N log2|Q_in| = "
                    f"{needed:.6g}"
                )
            if self.length % self.group_size != 0:
                raise BoundPreconditionError(
                    f"group size K={self.group_size} does not divide L={self.length}"
                )

    @property
    def cap(self) -> float:
        return cardinality_cap(
            self.batch_size,
            self.batch_alphabet_size,
            self.inner_blocklength,
            self.output_alphabet_size,
        )


@dataclass(frozen=True, eq=False)
class CollapseWitness:
    """Per-hop noise that sends every reachable word to one output word."""

    per_hop_noise: tuple[NoiseRealization, ...]
    final_output: Word
    probability_lower_bound: float
    probability: float
    set_sizes: tuple[int, ...]

    @property
    def hops(self) -> int:
        return len(self.per_hop_noise)


@dataclass(frozen=True, eq=False)
class BoundReport:
    """An evaluated bound, its regime and the data witnessing the collapse."""

    params: BoundParams
    value_nats: float
    log_value: float
    y0: tuple[str, ...] | None = None
    witness: CollapseWitness | None = field(default=None, repr=False)

    @property
    def regime(self) -> Regime:
        return self.params.regime

    def as_row(self) -> dict[str, object]:
        p = self.params
        return {
            "regime": p.regime,
            "L": p.length,
            "N": p.inner_blocklength,
            "M": p.batch_size,
            "K": p.group_size,
            "eps": p.eps,
            "bound_nats": self.value_nats,
            "log_bound": self.log_value,
        }


def _evaluate(p: BoundParams, exponent: int, repetitions: float) -> tuple[float, float]:
    """(1 - eps^exponent)^repetitions * cap / N and its natural log."""
    collapse = math.exp(exponent * math.log(p.eps))
    if collapse >= 1.0 or p.cap <= 0.0:
        return 0.0, -math.inf
    log_value = (
        repetitions * math.log1p(-collapse)
        + math.log(p.cap)
        - math.log(p.inner_blocklength)
    )
    return math.exp(log_value), log_value


def _require(p: BoundParams, regime: Regime) -> None:
    if p.regime != regime:
        raise BoundPreconditionError(
            f"{regime} bound called with {p.regime} parameters"
        )


def erasure_bound(p: BoundParams) -> float:
    """Packet erasure links: (1 - eps^N)^L min{...} / N."""
    _require(p, "erasure")
    return _evaluate(p, p.inner_blocklength, p.length)[0]


def canonical_bound(p: BoundParams) -> float:
    """eps-canonical links: (1 - eps^(|Q_in| N))^L min{...} / N."""
    _require(p, "canonical")
    return _evaluate(p, p.input_alphabet_size * p.inner_blocklength, p.length)[0]


def general_bound(p: BoundParams) -> float:
    """Links with eps_Q >= eps: (1 - eps^(N K |Q_in|))^(L/K) min{...} / N."""
    _require(p, "general")
    exponent = p.inner_blocklength * p.group_size * p.input_alphabet_size
    return _evaluate(p, exponent, p.length // p.group_size)[0]


def evaluate_bound(
    p: BoundParams,
    y0: tuple[str, ...] | None = None,
    witness: CollapseWitness | None = None,
) -> BoundReport:
    if p.regime == "erasure":
        exponent, repetitions = p.inner_blocklength, p.length
    elif p.regime == "canonical":
        exponent, repetitions = p.input_alphabet_size * p.inner_blocklength, p.length
    else:
        exponent = p.inner_blocklength * p.group_size * p.input_alphabet_size
        repetitions = p.length // p.group_size
    value, log_value = _evaluate(p, exponent, repetitions)
    return BoundReport(p, value, log_value, y0, witness)


def default_group_size(inner_blocklength: int, input_alphabet_size: int) -> int:
    """Smallest K with K >= N log2|Q_in|."""
    return max(1, math.ceil(inner_blocklength * math.log2(input_alphabet_size) - 1e-12))


def applicable_bound(
    net: BatchNetwork,
    regime: RegimeChoice = "auto",
    group_size: int | None = None,
    with_witness: bool = False,
) -> BoundReport:
    """Bound for a concrete network, using the weakest link's eps.

    ``auto`` picks the erasure bound when every link is a packet erasure
    channel, the canonical bound when every link has a canonical output and
    the general bound otherwise.
    """
    if regime == "auto":
        if all(erasure_probability(link) is not None for link in net.links):
            regime = "erasure"
        elif all(canonical_witness(link) is not None for link in net.links):
            regime = "canonical"
        else:
            regime = "general"

    y0: tuple[str, ...] | None = None
    witness = None
    k = 1
    if regime == "erasure":
        found = [erasure_probability(link) for link in net.links]
        if any(e is None for e in found):
            raise BoundPreconditionError("erasure bound needs packet erasure links")
        eps = min(e for e in found if e is not None)
        y0 = tuple(ERASURE for _ in net.links)
    elif regime == "canonical":
        witnesses = [canonical_witness(link) for link in net.links]
        if any(w is None for w in witnesses):
            raise BoundPreconditionError(
                "a link has no canonical output; use the general bound"
            )
        y0 = tuple(w[0] for w in witnesses if w is not None)
        eps = min(w[1] for w in witnesses if w is not None)
    elif regime == "general":
        eps = min(epsilon_q(link) for link in net.links)
        if eps <= 0.0:
            raise BoundPreconditionError(
                "a link has positive zero-error capacity (eps_Q = 0)"
            )
        k = group_size or default_group_size(
            net.inner_blocklength, net.input_alphabet.size
        )
        if with_witness:
            witness = collapse_chain(net, k)
    else:
        raise BoundPreconditionError(f"unknown regime {regime!r}")

    params = BoundParams(
        regime=regime,
        length=net.length,
        inner_blocklength=net.inner_blocklength,
        batch_size=net.batch_size,
        batch_alphabet_size=net.batch_alphabet.size,
        input_alphabet_size=net.input_alphabet.size,
        output_alphabet_size=net.output_alphabet.size,
        eps=eps,
        group_size=k,
    )
    return evaluate_bound(params, y0, witness)


def _schedule_value(schedule: Schedule, length: int) -> int:
    if schedule == "log":
        return max(1, math.ceil(math.log(length)))
    return int(schedule)


def regime_curve(
    regime: Regime,
    lengths: Iterable[int],
    eps: float,
    *,
    batch_size: Schedule = 1,
    inner_blocklength: Schedule = 1,
    group_size: int | None = None,
    batch_alphabet_size: int = 2,
    input_alphabet_size: int = 2,
    output_alphabet_size: int = 2,
) -> list[BoundReport]:
    """Bound over a range of L with N and M fixed or growing as ceil(ln L)."""
    reports = []
    for length in lengths:
        n = _schedule_value(inner_blocklength, length)
        k = 1
        if regime == "general":
            k = group_size or default_group_size(n, input_alphabet_size)
        params = BoundParams(
            regime=regime,
            length=length,
            inner_blocklength=n,
            batch_size=_schedule_value(batch_size, length),
            batch_alphabet_size=batch_alphabet_size,
            input_alphabet_size=input_alphabet_size,
            output_alphabet_size=output_alphabet_size,
            eps=eps,
            group_size=k,
        )
        reports.append(evaluate_bound(params))
    return reports


# Collapse witnesses

# Caps on the fallback searches of the pairing witness.
_SEARCH_STEPS = 20_000
_SEARCH_ASSIGNMENTS = 1 << 16


def lemma4_witness(
    q: Dmc, n: int, inputs: Iterable[Sequence[str]]
) -> tuple[NoiseRealization, frozenset[Word]]:
    """Noise z and image b with |b| <= ceil(|inputs| / 2).

    Input words are paired in lexicographic order. For each pair and each
    position where the words differ, both symbols are sent to the output
    maximizing min(Q(y|x), Q(y|x')). An assignment made by an earlier pair is
    kept; a word whose partner would contradict it is paired with the next
    compatible word instead, or with itself. When that greedy pass leaves too
    many output words, other pairings and merge targets are searched, then
    every assignment of the entries the words use. Remaining entries take
    argmax_y Q(y|x). Every entry has Q >= eps_Q, so Pr{Z = z} >= eps_Q^(|Q_in| n).
    """
    eps = epsilon_q(q)
    if eps <= 0.0:
        raise BoundPreconditionError(
            "channel has positive zero-error capacity (eps_Q = 0)"
        )
    alphabet = q.input_alphabet
    words = sorted({tuple(alphabet.index(s) for s in word) for word in inputs})
    if not words:
        raise ValidationError("pairing witness needs a non-empty set of input words")
    if any(len(word) != n for word in words):
        raise ValidationError(f"input words must all have length {n}")
    limit = math.ceil(len(words) / 2)

    table: np.ndarray | None = _greedy_pairing(words, q.rows, eps, n)
    if _image_size(_filled(table, q.rows), words) > limit:
        logger.debug("greedy pairing failed on %d words, searching", len(words))
        table = _search_pairing(words, q.rows, eps, n)
    if table is None:
        table = _search_assignments(words, q.rows, eps, n, limit)
    if table is None:
        raise WitnessConflictError(
            f"no noise assignment maps {len(words)} words onto at most {limit} "
            "output words"
        )

    z = NoiseRealization(q.input_alphabet, q.output_alphabet, _filled(table, q.rows))
    image = frozenset(
        apply_noise(tuple(alphabet.symbols[i] for i in word), z) for word in words
    )
    if len(image) > limit:
        raise WitnessConflictError(
            f"pairing conflicts left {len(image)} output words, at most {limit} allowed"
        )
    probability = noise_probability(q, z)
    floor = eps ** (alphabet.size * n)
    if probability < floor * (1.0 - 1e-12):
        raise ConsistencyError(
            f"witness probability {probability:.6g} is below {floor:.6g}"
        )
    return z, image


def _filled(table: np.ndarray, rows: np.ndarray) -> np.ndarray:
    filled = table.copy()
    for x in range(rows.shape[0]):
        filled[filled[:, x] < 0, x] = int(np.argmax(rows[x]))
    return filled


def _image_size(table: np.ndarray, words: Sequence[tuple[int, ...]]) -> int:
    return len({tuple(table[i, x] for i, x in enumerate(word)) for word in words})


def _greedy_pairing(
    words: list[tuple[int, ...]], rows: np.ndarray, eps: float, n: int
) -> np.ndarray:
    table = np.full((n, rows.shape[0]), -1, dtype=np.int64)
    pending = list(words)
    while pending:
        word = pending.pop(0)
        for j, other in enumerate(pending):
            merged = next(_merge_options(table, word, other, rows, eps), None)
            if merged is not None:
                table = merged
                del pending[j]
                break
        else:
            logger.debug("word %s left without a partner", word)
    return table


def _search_pairing(
    words: list[tuple[int, ...]], rows: np.ndarray, eps: float, n: int
) -> np.ndarray | None:
    """Backtrack over partners and merge targets; one word may stay single."""
    steps = 0

    def extend(
        table: np.ndarray, pending: list[tuple[int, ...]], singles: int
    ) -> np.ndarray | None:
        nonlocal steps
        if not pending:
            return table
        steps += 1
        if steps > _SEARCH_STEPS:
            return None
        word, rest = pending[0], pending[1:]
        for j, other in enumerate(rest):
            for merged in _merge_options(table, word, other, rows, eps):
                found = extend(merged, rest[:j] + rest[j + 1 :], singles)
                if found is not None:
                    return found
                if steps > _SEARCH_STEPS:
                    return None
        if singles:
            return extend(table, rest, singles - 1)
        return None

    start = np.full((n, rows.shape[0]), -1, dtype=np.int64)
    found = extend(start, list(words), len(words) % 2)
    if found is None:
        logger.debug("pairing search gave up after %d steps", steps)
    return found


def _search_assignments(
    words: list[tuple[int, ...]],
    rows: np.ndarray,
    eps: float,
    n: int,
    limit: int,
) -> np.ndarray | None:
    """Most likely assignment of the used entries with at most ``limit`` images."""
    entries = sorted({(i, x) for word in words for i, x in enumerate(word)})
    choices = [np.flatnonzero(rows[x] >= eps).tolist() for _, x in entries]
    if math.prod(len(c) for c in choices) > _SEARCH_ASSIGNMENTS:
        logger.debug("%d used entries, too many assignments to search", len(entries))
        return None
    best: np.ndarray | None = None
    best_log = -math.inf
    for picks in itertools.product(*choices):
        table = np.full((n, rows.shape[0]), -1, dtype=np.int64)
        for (i, x), y in zip(entries, picks):
            table[i, x] = y
        if _image_size(table, words) > limit:
            continue
        log_p = sum(math.log(rows[x, y]) for (_, x), y in zip(entries, picks))
        if log_p > best_log:
            best, best_log = table, log_p
    return best


def _merge_options(
    table: np.ndarray,
    first: tuple[int, ...],
    second: tuple[int, ...],
    rows: np.ndarray,
    eps: float,
) -> Iterator[np.ndarray]:
    """Assignments making both words produce the same output, best target first."""
    merged = table.copy()
    free: list[tuple[int, int, int]] = []
    for i, (x, x2) in enumerate(zip(first, second)):
        if x == x2:
            continue
        y, y2 = merged[i, x], merged[i, x2]
        if y < 0 and y2 < 0:
            free.append((i, x, x2))
        elif y < 0:
            if rows[x, y2] < eps:
                return
            merged[i, x] = y2
        elif y2 < 0:
            if rows[x2, y] < eps:
                return
            merged[i, x2] = y
        elif y != y2:
            return
    targets = []
    for _, x, x2 in free:
        overlap = np.minimum(rows[x], rows[x2])
        order = np.argsort(-overlap, kind="stable")
        targets.append([int(y) for y in order if overlap[y] >= eps])
    for picks in itertools.product(*targets):
        option = merged.copy()
        for (i, x, x2), y in zip(free, picks):
            option[i, x] = option[i, x2] = y
        yield option


def _deterministic_image(matrix: np.ndarray, row: int) -> int:
    return int(np.argmax(matrix[row]))


def collapse_chain(net: BatchNetwork, k: int) -> CollapseWitness:
    """Apply the pairing witness hop by hop until one output word remains.

    Starting from the words the source map can emit, each hop halves the
    surviving set (at least) and the hop's deterministic recoder carries it
    to the next link.
    """
    if not net.scheme.is_deterministic:
        raise BoundPreconditionError("collapse chain needs a deterministic scheme")
    n = net.inner_blocklength
    needed = n * math.log2(net.input_alphabet.size)
    if k < needed - 1e-12:
        raise BoundPreconditionError(
            f"k={k} hops is below N log2|Q_in| = {needed:.6g}"
        )
    hops = min(k, net.length)
    eps = min(epsilon_q(link) for link in net.links[:hops])
    if eps <= 0.0:
        raise BoundPreconditionError(
            "a link has positive zero-error capacity (eps_Q = 0)"
        )

    inputs, outputs = net.input_alphabet, net.output_alphabet
    source = net.scheme.source.matrix
    current = {
        inputs.word_at(_deterministic_image(source, row), n)
        for row in range(source.shape[0])
    }
    sizes = [len(current)]
    noise: list[NoiseRealization] = []
    image: frozenset[Word] = frozenset()
    for hop in range(hops):
        z, image = lemma4_witness(net.links[hop], n, current)
        noise.append(z)
        sizes.append(len(image))
        if len(image) == 1 or hop == hops - 1:
            break
        phi = net.scheme.phi_matrices[hop]
        current = {
            inputs.word_at(_deterministic_image(phi, outputs.word_index(y)), n)
            for y in image
        }
    if len(image) != 1 and hops < k:
        raise BoundPreconditionError(
            f"{len(image)} output words remain after all {net.length} links, "
            f"collapse may need up to k={k} hops"
        )
    if len(image) != 1:
        raise WitnessConflictError(
            f"{len(image)} output words remain after {len(noise)} hops"
        )

    probability = float(
        np.prod([noise_probability(link, z) for link, z in zip(net.links, noise)])
    )
    lower = eps ** (inputs.size * n * k)
    logger.debug("collapse after %d hops, set sizes %s", len(noise), sizes)
    return CollapseWitness(
        tuple(noise), next(iter(image)), lower, probability, tuple(sizes)
    )


def verify_collapse(net: BatchNetwork, witness: CollapseWitness) -> bool:
    """Run every batch word through the chain under the witness noise."""
    n = net.inner_blocklength
    inputs, outputs = net.input_alphabet, net.output_alphabet
    source = net.scheme.source.matrix
    for row in range(source.shape[0]):
        word = inputs.word_at(_deterministic_image(source, row), n)
        received: Word = ()
        for hop, z in enumerate(witness.per_hop_noise):
            received = apply_noise(word, z)
            if hop < witness.hops - 1:
                phi = net.scheme.phi_matrices[hop]
                word = inputs.word_at(
                    _deterministic_image(phi, outputs.word_index(received)), n
                )
        if received != witness.final_output:
            return False
    return True
