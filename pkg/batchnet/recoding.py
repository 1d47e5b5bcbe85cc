"""Inner codes: the source recoder and the buffer-constrained node recoders.

A node recoder is a transducer run for steps i = 1..N+N'. At step i it reads
the i-th received symbol (EMPTY once i > N), updates its buffer and emits a
channel input, except during the first N' steps where it emits EMPTY. The
per-node transition matrix Phi used by composition is derived by running
that recursion over every received word.
"""

import itertools
import logging
import math
from collections import defaultdict
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np

from .config import check_budget
from .errors import DimensionError, RecodingError, ValidationError
from .models import EMPTY, Alphabet, MaybeSymbol, Word, validate_stochastic

logger = logging.getLogger(__name__)

StepKey = tuple[str, MaybeSymbol]
Transition = tuple[str, MaybeSymbol]
Outcomes = tuple[tuple[Transition, float], ...]

BUILTIN_SCHEMES = (
    "store_and_forward",
    "random_map",
    "random_recoder",
    "constant",
    "custom",
)


@dataclass(frozen=True, eq=False)
class SourceRecoder:
    """The source map F from batch words in A^M to channel words in Q_in^N.

    ``matrix[x, u]`` is the probability that batch word x is sent as u;
    deterministic maps have one 1 per row.
    """

    batch_alphabet: Alphabet
    batch_size: int
    inner_blocklength: int
    input_alphabet: Alphabet
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=float)
        expected = (
            self.batch_alphabet.size**self.batch_size,
            self.input_alphabet.size**self.inner_blocklength,
        )
        if matrix.shape != expected:
            raise DimensionError(
                f"source map has shape {matrix.shape}, expected {expected}"
            )
        validate_stochastic(matrix, what="source row")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_table(
        cls,
        batch_alphabet: Alphabet,
        batch_size: int,
        input_alphabet: Alphabet,
        inner_blocklength: int,
        table: Sequence[int],
    ) -> "SourceRecoder":
        """Deterministic source map sending batch word k to channel word table[k]."""
        cols = input_alphabet.size**inner_blocklength
        check_budget(len(table), cols, "source map")
        return cls(
            batch_alphabet,
            batch_size,
            inner_blocklength,
            input_alphabet,
            _one_hot(table, cols),
        )

    @property
    def is_deterministic(self) -> bool:
        return _is_zero_one(self.matrix)


@dataclass(frozen=True, eq=False)
class NodeMatrix:
    """A node's transition matrix Phi from Q_out^N to Q_in^N."""

    received_alphabet: Alphabet
    emitted_alphabet: Alphabet
    inner_blocklength: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=float)
        n = self.inner_blocklength
        expected = (self.received_alphabet.size**n, self.emitted_alphabet.size**n)
        if matrix.shape != expected:
            raise DimensionError(
                f"node matrix has shape {matrix.shape}, expected {expected}"
            )
        validate_stochastic(matrix, what="node row")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_table(
        cls,
        received_alphabet: Alphabet,
        emitted_alphabet: Alphabet,
        inner_blocklength: int,
        table: Sequence[int],
    ) -> "NodeMatrix":
        cols = emitted_alphabet.size**inner_blocklength
        check_budget(len(table), cols, "node lookup table")
        return cls(
            received_alphabet,
            emitted_alphabet,
            inner_blocklength,
            _one_hot(table, cols),
        )

    @property
    def is_deterministic(self) -> bool:
        return _is_zero_one(self.matrix)


@dataclass(frozen=True, eq=False)
class NodeRecoder:
    """A time-invariant buffer transducer with latency N'.

    ``step`` maps (buffer state, received symbol or EMPTY) to the possible
    (next state, emitted symbol or EMPTY) pairs with their probabilities.
    Step values may be given as a single transition for deterministic
    recoders; they are normalized to outcome tuples on construction.
    """

    received_alphabet: Alphabet
    emitted_alphabet: Alphabet
    buffer_alphabet: Alphabet
    latency: int
    initial_buffer: str
    step: Mapping[StepKey, Any] = field(repr=False)

    def __post_init__(self) -> None:
        if self.latency < 0:
            raise RecodingError(f"latency must be >= 0, got {self.latency}")
        if self.initial_buffer not in self.buffer_alphabet:
            raise RecodingError(
                f"initial buffer {self.initial_buffer!r} is not a buffer state"
            )
        normalized: dict[StepKey, Outcomes] = {}
        for (state, received), value in self.step.items():
            if state not in self.buffer_alphabet:
                raise RecodingError(f"step uses unknown buffer state {state!r}")
            if received is not EMPTY and received not in self.received_alphabet:
                raise RecodingError(f"step reads unknown symbol {received!r}")
            outcomes = _normalize_outcomes(value)
            for (target, emitted), _ in outcomes:
                if target not in self.buffer_alphabet:
                    raise RecodingError(f"step moves to unknown state {target!r}")
                if emitted is not EMPTY and emitted not in self.emitted_alphabet:
                    raise RecodingError(f"step emits unknown symbol {emitted!r}")
            normalized[(state, received)] = outcomes
        object.__setattr__(self, "step", normalized)

    @property
    def is_deterministic(self) -> bool:
        return all(len(outcomes) == 1 for outcomes in self.step.values())

    def outcomes(self, state: str, received: MaybeSymbol) -> Outcomes:
        try:
            return self.step[(state, received)]  # type: ignore[no-any-return]
        except KeyError:
            raise RecodingError(
                f"step undefined for (buffer {state!r}, received {received!r})"
            ) from None


Node = NodeRecoder | NodeMatrix


@dataclass(frozen=True, eq=False)
class RecodingScheme:
    """Source map plus one recoder per intermediate node."""

    source: SourceRecoder
    nodes: tuple[Node, ...]

    def __post_init__(self) -> None:
        nodes = tuple(self.nodes)
        n = self.source.inner_blocklength
        for position, node in enumerate(nodes, start=1):
            if isinstance(node, NodeMatrix) and node.inner_blocklength != n:
                raise DimensionError(
                    f"node {position} uses N={node.inner_blocklength}, "
                    f"source uses N={n}"
                )
            if isinstance(node, NodeRecoder) and node.latency > n:
                raise RecodingError(
                    f"node {position} has latency {node.latency} > N={n}"
                )
        object.__setattr__(self, "nodes", nodes)

    @property
    def inner_blocklength(self) -> int:
        return self.source.inner_blocklength

    @property
    def is_deterministic(self) -> bool:
        return self.source.is_deterministic and all(
            node.is_deterministic for node in self.nodes
        )

    @cached_property
    def phi_matrices(self) -> tuple[np.ndarray, ...]:
        """Phi_1, ..., Phi_{L-1} as dense arrays."""
        return tuple(node_matrix(node, self.inner_blocklength) for node in self.nodes)


def derive_phi(r: NodeRecoder, n: int) -> NodeMatrix:
    """Transition matrix from received words to emitted words of length n.

    Runs the step recursion from the initial buffer for every received word,
    tracking the distribution over (buffer state, emitted prefix).
    """
    if r.latency > n:
        raise RecodingError(f"latency {r.latency} exceeds inner blocklength {n}")
    rows, cols = r.received_alphabet.size**n, r.emitted_alphabet.size**n
    check_budget(rows, cols, "node transition matrix")

    matrix = np.zeros((rows, cols))
    for row, received in enumerate(r.received_alphabet.words(n)):
        paths: dict[tuple[str, Word], float] = {(r.initial_buffer, ()): 1.0}
        for i in range(1, n + r.latency + 1):
            symbol: MaybeSymbol = received[i - 1] if i <= n else EMPTY
            advanced: dict[tuple[str, Word], float] = defaultdict(float)
            for (state, emitted), mass in paths.items():
                for (target, out), weight in r.outcomes(state, symbol):
                    _check_emission(out, i, r.latency, state, symbol)
                    word = emitted if out is EMPTY else (*emitted, out)
                    advanced[(target, word)] += mass * weight  # type: ignore[arg-type]
            paths = advanced
        for (_, emitted), mass in paths.items():
            matrix[row, r.emitted_alphabet.word_index(emitted)] += mass
    return NodeMatrix(r.received_alphabet, r.emitted_alphabet, n, matrix)


def _check_emission(
    out: MaybeSymbol, i: int, latency: int, state: str, symbol: MaybeSymbol
) -> None:
    if i <= latency and out is not EMPTY:
        raise RecodingError(
            f"recoder emits {out!r} at step {i} during its latency of {latency} "
            f"(buffer {state!r}, received {symbol!r})"
        )
    if i > latency and out is EMPTY:
        raise RecodingError(
            f"recoder emits nothing at step {i} after its latency of {latency} "
            f"(buffer {state!r}, received {symbol!r})"
        )


def node_matrix(node: Node, n: int) -> np.ndarray:
    if isinstance(node, NodeMatrix):
        return node.matrix
    return derive_phi(node, n).matrix


def buffer_bits(r: NodeRecoder) -> float:
    """Buffer size B in bits: log|B|, doubled when the node has latency."""
    bits = math.log2(r.buffer_alphabet.size)
    return 2.0 * bits if r.latency > 0 else bits


def scheme_buffer_bits(scheme: RecodingScheme) -> float | None:
    """Largest buffer over the state-machine nodes, None if there are none."""
    sizes = [buffer_bits(n) for n in scheme.nodes if isinstance(n, NodeRecoder)]
    return max(sizes) if sizes else None


# Recoder constructors

_HOLD = "-"
_START = "^"


def _forward(symbol: str, emitted: Alphabet, fallback: str | None) -> str:
    if symbol in emitted:
        return symbol
    return fallback if fallback is not None else emitted.symbols[0]


def pass_through_recoder(
    received: Alphabet, emitted: Alphabet, fallback: str | None = None
) -> NodeRecoder:
    """Forward each received symbol; symbols outside Q_in become ``fallback``."""
    step = {(_HOLD, y): (_HOLD, _forward(y, emitted, fallback)) for y in received}
    return NodeRecoder(received, emitted, Alphabet((_HOLD,)), 0, _HOLD, step)


def delay_recoder(
    received: Alphabet, emitted: Alphabet, fallback: str | None = None
) -> NodeRecoder:
    """Latency-1 recoder that holds the last symbol and emits it one step later."""
    held = [_forward(y, emitted, fallback) for y in received]
    states = Alphabet((_START, *dict.fromkeys(held)))
    step: dict[StepKey, Transition] = {}
    for y, kept in zip(received, held):
        step[(_START, y)] = (kept, EMPTY)
        for state in states.symbols[1:]:
            step[(state, y)] = (kept, state)
    for state in states.symbols[1:]:
        step[(state, EMPTY)] = (_START, state)
    return NodeRecoder(received, emitted, states, 1, _START, step)


def constant_recoder(received: Alphabet, emitted: Alphabet, symbol: str) -> NodeRecoder:
    """Emit ``symbol`` at every step whatever was received."""
    if symbol not in emitted:
        raise RecodingError(f"constant symbol {symbol!r} is not a channel input")
    step = {(_HOLD, y): (_HOLD, symbol) for y in received}
    return NodeRecoder(received, emitted, Alphabet((_HOLD,)), 0, _HOLD, step)


def random_recoder(
    received: Alphabet,
    emitted: Alphabet,
    buffer_size: int,
    seed: int | np.random.Generator | None = None,
    randomized: bool = False,
) -> NodeRecoder:
    """Zero-latency state machine with uniformly random transitions.

    With ``randomized`` every step splits its mass between two random
    outcomes instead of picking one.
    """
    rng = np.random.default_rng(seed)
    states = Alphabet(tuple(f"s{k}" for k in range(buffer_size)))
    step: dict[StepKey, Any] = {}
    for state in states:
        for y in received:
            picks = [
                (
                    states.symbols[rng.integers(buffer_size)],
                    emitted.symbols[rng.integers(emitted.size)],
                )
                for _ in range(2 if randomized else 1)
            ]
            if randomized:
                weight = float(rng.uniform(0.1, 0.9))
                step[(state, y)] = ((picks[0], weight), (picks[1], 1.0 - weight))
            else:
                step[(state, y)] = picks[0]
    return NodeRecoder(received, emitted, states, 0, states.symbols[0], step)


def determinizations(r: NodeRecoder) -> Iterator[NodeRecoder]:
    """Every deterministic recoder obtained by fixing each random choice."""
    keys = list(r.step)
    choices = [[t for t, _ in r.step[key]] for key in keys]
    for picked in itertools.product(*choices):
        yield NodeRecoder(
            r.received_alphabet,
            r.emitted_alphabet,
            r.buffer_alphabet,
            r.latency,
            r.initial_buffer,
            dict(zip(keys, picked)),
        )


def identity_embedding(
    batch_alphabet: Alphabet,
    batch_size: int,
    input_alphabet: Alphabet,
    inner_blocklength: int,
) -> SourceRecoder:
    """Embed A^M into Q_in^N.

    Symbols are kept by label when M = N and A is a subset of Q_in;
    otherwise batch word k is sent as channel word k.
    """
    rows = batch_alphabet.size**batch_size
    cols = input_alphabet.size**inner_blocklength
    if rows > cols:
        raise DimensionError(
            f"cannot embed {rows} batch words into {cols} channel words "
            f"(|A|^M > |Q_in|^N)"
        )
    same_labels = all(a in input_alphabet for a in batch_alphabet)
    if batch_size == inner_blocklength and same_labels:
        table = [
            input_alphabet.word_index(word) for word in batch_alphabet.words(batch_size)
        ]
    else:
        table = list(range(rows))
    return SourceRecoder.from_table(
        batch_alphabet, batch_size, input_alphabet, inner_blocklength, table
    )


def builtin_scheme(
    name: str,
    params: Mapping[str, Any] | None,
    *,
    length: int,
    batch_alphabet: Alphabet,
    batch_size: int,
    inner_blocklength: int,
    input_alphabet: Alphabet,
    output_alphabet: Alphabet,
) -> RecodingScheme:
    """Build one of the named baseline schemes for a length-L line network.

    ``store_and_forward`` forwards symbols, ``random_map`` draws a random
    deterministic lookup table per node, ``random_recoder`` draws random
    buffer state machines, ``constant`` makes every node emit one symbol and
    ``custom`` reads the source table and node specs from ``params``.
    """
    params = dict(params or {})
    n_nodes = length - 1
    n = inner_blocklength
    if length < 1:
        raise ValidationError(f"network length must be >= 1, got {length}")
    fallback = params.get("fallback")

    if name == "store_and_forward":
        source = identity_embedding(batch_alphabet, batch_size, input_alphabet, n)
        nodes: list[Node] = [
            pass_through_recoder(output_alphabet, input_alphabet, fallback)
            for _ in range(n_nodes)
        ]
    elif name == "random_map":
        rng = np.random.default_rng(params.get("seed", 0))
        source_rows = batch_alphabet.size**batch_size
        node_rows = output_alphabet.size**n
        cols = input_alphabet.size**n
        source = SourceRecoder.from_table(
            batch_alphabet,
            batch_size,
            input_alphabet,
            n,
            rng.integers(cols, size=source_rows).tolist(),
        )
        nodes = [
            NodeMatrix.from_table(
                output_alphabet,
                input_alphabet,
                n,
                rng.integers(cols, size=node_rows).tolist(),
            )
            for _ in range(n_nodes)
        ]
    elif name == "random_recoder":
        rng = np.random.default_rng(params.get("seed", 0))
        source = identity_embedding(batch_alphabet, batch_size, input_alphabet, n)
        nodes = [
            random_recoder(
                output_alphabet,
                input_alphabet,
                int(params.get("buffer_size", 2)),
                rng,
                bool(params.get("randomized", False)),
            )
            for _ in range(n_nodes)
        ]
    elif name == "constant":
        symbol = str(params.get("symbol", input_alphabet.symbols[0]))
        source = identity_embedding(batch_alphabet, batch_size, input_alphabet, n)
        nodes = [
            constant_recoder(output_alphabet, input_alphabet, symbol)
            for _ in range(n_nodes)
        ]
    elif name == "custom":
        source = source_from_spec(
            params.get("source"), batch_alphabet, batch_size, input_alphabet, n
        )
        specs = params.get("nodes", [])
        if len(specs) != n_nodes:
            raise ValidationError(
                f"custom scheme lists {len(specs)} nodes, network needs {n_nodes}"
            )
        nodes = [
            node_from_spec(spec, output_alphabet, input_alphabet, n) for spec in specs
        ]
    else:
        raise ValidationError(
            f"unknown scheme {name!r}, expected one of {', '.join(BUILTIN_SCHEMES)}"
        )
    logger.debug("built %s scheme with %d nodes", name, len(nodes))
    return RecodingScheme(source, tuple(nodes))


def source_from_spec(
    spec: Any,
    batch_alphabet: Alphabet,
    batch_size: int,
    input_alphabet: Alphabet,
    n: int,
) -> SourceRecoder:
    """Source map from a lookup table (list of ints) or explicit rows."""
    if spec is None:
        return identity_embedding(batch_alphabet, batch_size, input_alphabet, n)
    if spec and all(isinstance(v, int) for v in spec):
        return SourceRecoder.from_table(
            batch_alphabet, batch_size, input_alphabet, n, spec
        )
    return SourceRecoder(
        batch_alphabet, batch_size, n, input_alphabet, np.array(spec, dtype=float)
    )


def node_from_spec(
    spec: Mapping[str, Any], received: Alphabet, emitted: Alphabet, n: int
) -> Node:
    """Node from its JSON description; ``null`` symbols stand for EMPTY."""
    kind = spec.get("kind")
    if kind == "pass_through":
        return pass_through_recoder(received, emitted, spec.get("fallback"))
    if kind == "delay":
        return delay_recoder(received, emitted, spec.get("fallback"))
    if kind == "constant":
        return constant_recoder(received, emitted, str(spec["symbol"]))
    if kind == "table":
        return NodeMatrix.from_table(received, emitted, n, spec["table"])
    if kind == "matrix":
        return NodeMatrix(received, emitted, n, np.array(spec["rows"], dtype=float))
    if kind == "recoder":
        step: dict[StepKey, list[tuple[Transition, float]]] = defaultdict(list)
        for t in spec["transitions"]:
            key = (str(t["buffer"]), _symbol(t.get("received")))
            target = (str(t["next"]), _symbol(t.get("emit")))
            step[key].append((target, float(t.get("prob", 1.0))))
        return NodeRecoder(
            received,
            emitted,
            Alphabet(tuple(spec["buffer"])),
            int(spec.get("latency", 0)),
            str(spec.get("initial", spec["buffer"][0])),
            {key: tuple(value) for key, value in step.items()},
        )
    raise ValidationError(f"unknown node kind {kind!r}")


def _symbol(value: Any) -> MaybeSymbol:
    return EMPTY if value is None else str(value)


def _normalize_outcomes(value: Any) -> Outcomes:
    # A bare (state, symbol) pair is a deterministic step.
    if (
        isinstance(value, tuple)
        and len(value) == 2
        and isinstance(value[0], str)
        and (value[1] is EMPTY or isinstance(value[1], str))
    ):
        return (((value[0], value[1]), 1.0),)
    outcomes = tuple(((str(t[0]), t[1]), float(p)) for t, p in value)
    total = sum(p for _, p in outcomes)
    if any(p < 0 for _, p in outcomes) or abs(total - 1.0) > 1e-9:
        raise RecodingError(f"step outcome probabilities sum to {total:.10g}")
    return tuple((t, p) for t, p in outcomes if p > 0.0)


def _one_hot(table: Sequence[int], cols: int) -> np.ndarray:
    table = np.asarray(table, dtype=np.int64)
    if np.any(table < 0) or np.any(table >= cols):
        raise DimensionError(f"lookup table points outside 0..{cols - 1}")
    matrix = np.zeros((len(table), cols))
    matrix[np.arange(len(table)), table] = 1.0
    return matrix


def _is_zero_one(matrix: np.ndarray) -> bool:
    return bool(np.all((matrix == 0.0) | (matrix == 1.0)))
