"""Monte-Carlo execution of batched codes on long line networks.

Each trial draws a batch word, runs the source map and then, link by link,
samples N channel uses and the next node's recoder. Trials are processed in
vectorized chunks.

Random numbers come from counter-based Philox streams keyed by the seed:
stream 0 feeds the input and source draws and stream l feeds link l and the
node after it. Trial t always reads the same fixed-size block of its streams,
so results do not depend on the chunk size or on the number of workers.
"""

import dataclasses
import logging
import math
import time
from collections.abc import Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np

from .bounds import RegimeChoice, applicable_bound
from .channels import channel_from_spec
from .composition import BatchNetwork
from .config import check_budget, get_settings
from .errors import BoundPreconditionError, RecodingError, ValidationError
from .infotheory import jackknife_mutual_information
from .models import EMPTY, Alphabet, Dmc, InputDistribution
from .recoding import BUILTIN_SCHEMES, NodeMatrix, NodeRecoder

logger = logging.getLogger(__name__)

InputLaw = Literal["uniform", "balanced"] | tuple[float, ...]

# Philox4x64 yields 64-bit words in blocks of four; one double per word.
_WORDS_PER_BLOCK = 4


@dataclass(frozen=True)
class SimConfig:
    """A resolved simulation run.

    ``channels`` holds one channel spec per link, or a single spec shared by
    every link. ``input_law`` is "uniform", "balanced" (batch words taken in
    turn, so every word is sent equally often) or explicit probabilities over
    the batch words in index order.
    """

    channels: tuple[Mapping[str, Any], ...]
    length: int
    batch_alphabet: tuple[str, ...]
    batch_size: int
    inner_blocklength: int
    scheme: str = "store_and_forward"
    scheme_params: Mapping[str, Any] = field(default_factory=dict)
    trials: int = 10_000
    seed: int = 0
    input_law: InputLaw = "uniform"
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "batch_alphabet", tuple(self.batch_alphabet))
        if self.trials < 1:
            raise ValidationError(f"trials must be >= 1, got {self.trials}")
        if self.length < 1:
            raise ValidationError(f"length must be >= 1, got {self.length}")
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if len(self.channels) not in (1, self.length):
            raise ValidationError(
                f"{len(self.channels)} channel specs for {self.length} links"
            )
        if self.scheme not in BUILTIN_SCHEMES:
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        if not isinstance(self.input_law, str):
            law = tuple(float(p) for p in self.input_law)
            object.__setattr__(self, "input_law", law)
            InputDistribution(self.words_alphabet, np.array(law))
        elif self.input_law not in ("uniform", "balanced"):
            raise ValidationError(f"unknown input law {self.input_law!r}")

    @property
    def words_alphabet(self) -> Alphabet:
        return Alphabet(self.batch_alphabet).power(self.batch_size)

    def links(self) -> tuple[Dmc, ...]:
        if len(self.channels) == 1:
            shared = channel_from_spec(self.channels[0])
            return (shared,) * self.length
        return tuple(channel_from_spec(spec) for spec in self.channels)

    def network(self) -> BatchNetwork:
        return BatchNetwork.build(
            self.links(),
            self.scheme,
            self.scheme_params,
            batch_alphabet=Alphabet(self.batch_alphabet),
            batch_size=self.batch_size,
            inner_blocklength=self.inner_blocklength,
        )

    def with_length(self, length: int) -> "SimConfig":
        """Same run on a network of another length; needs a shared channel."""
        if len(self.channels) != 1 and length != self.length:
            raise ValidationError("per-link channel specs fix the network length")
        return dataclasses.replace(self, length=length)

    def to_dict(self) -> dict[str, Any]:
        law = self.input_law
        return {
            "channels": [dict(spec) for spec in self.channels],
            "length": self.length,
            "batch": {"alphabet": list(self.batch_alphabet), "size": self.batch_size},
            "inner_blocklength": self.inner_blocklength,
            "scheme": {"name": self.scheme, "params": dict(self.scheme_params)},
            "trials": self.trials,
            "seed": self.seed,
            "input_law": law if isinstance(law, str) else list(law),
            "workers": self.workers,
        }


@dataclass(frozen=True, eq=False)
class SimReport:
    """Counts of (batch word, final output word) pairs and the MI estimate."""

    config: SimConfig
    counts: np.ndarray = field(repr=False)
    delivered: int
    mi_estimate_nats: float
    mi_stderr: float
    elapsed: float

    @property
    def trials(self) -> int:
        return int(self.counts.sum())

    @property
    def delivery_fraction(self) -> float:
        """Share of trials whose final output equals the word sent by the source."""
        return self.delivered / self.trials

    @property
    def mi_nats_per_use(self) -> float:
        return self.mi_estimate_nats / self.config.inner_blocklength

    def empirical_matrix(self) -> np.ndarray:
        """Row-normalized counts; rows of batch words never drawn stay zero."""
        totals = self.counts.sum(axis=1, keepdims=True)
        return np.divide(
            self.counts,
            totals,
            out=np.zeros(self.counts.shape),
            where=totals > 0,
        )

    def empirical_rows(self, outputs: Alphabet) -> dict[str, dict[str, float]]:
        """Observed rows keyed by batch word and output word labels."""
        words = self.config.words_alphabet
        matrix = self.empirical_matrix()
        return {
            words.symbols[x]: {
                outputs.symbols[y]: float(matrix[x, y])
                for y in np.flatnonzero(matrix[x])
            }
            for x in np.flatnonzero(self.counts.sum(axis=1))
        }


@dataclass(frozen=True)
class SweepRow:
    length: int
    trials: int
    mi_nats_per_use: float
    mi_stderr: float
    bound_nats_per_use: float

    @property
    def ratio(self) -> float:
        if not self.bound_nats_per_use > 0.0:
            return math.nan
        return self.mi_nats_per_use / self.bound_nats_per_use

    def as_row(self) -> dict[str, object]:
        return {
            "L": self.length,
            "trials": self.trials,
            "mi_nats_per_use": self.mi_nats_per_use,
            "mi_stderr": self.mi_stderr,
            "bound_nats_per_use": self.bound_nats_per_use,
            "ratio": self.ratio,
        }


SWEEP_COLUMNS = (
    "L",
    "trials",
    "mi_nats_per_use",
    "mi_stderr",
    "bound_nats_per_use",
    "ratio",
)


# Compiled network


def _sample(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling along the last axis."""
    index = (cdf <= u[..., None]).sum(axis=-1)
    return np.minimum(index, cdf.shape[-1] - 1)


def _cdf(matrix: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(matrix, axis=-1)
    return cdf / cdf[..., -1:]


def _is_zero_one(matrix: np.ndarray) -> bool:
    return bool(np.all((matrix == 0.0) | (matrix == 1.0)))


class _RowSampler:
    """Draws a column of a stochastic matrix for each requested row."""

    def __init__(self, matrix: np.ndarray) -> None:
        self.table: np.ndarray | None = None
        self.cdf: np.ndarray | None = None
        if _is_zero_one(matrix):
            self.table = np.argmax(matrix, axis=1)
        else:
            self.cdf = _cdf(matrix)

    def __call__(self, rows: np.ndarray, u: np.ndarray) -> np.ndarray:
        if self.table is not None:
            return self.table[rows]
        assert self.cdf is not None
        return _sample(self.cdf[rows], u)


def _digits(index: np.ndarray, base: int, n: int) -> np.ndarray:
    powers = base ** np.arange(n - 1, -1, -1)
    return (index[:, None] // powers) % base


def _undigits(digits: np.ndarray, base: int) -> np.ndarray:
    n = digits.shape[1]
    return digits @ (base ** np.arange(n - 1, -1, -1))


class _CompiledRecoder:
    """A node recoder as lookup tables over (state, received symbol).

    The received column past the last symbol stands for EMPTY; emitted
    symbol -1 stands for EMPTY.
    """

    def __init__(self, r: NodeRecoder) -> None:
        self.latency = r.latency
        self.states = r.buffer_alphabet.symbols
        self.symbols = (*r.received_alphabet.symbols, EMPTY)
        self.initial = r.buffer_alphabet.index(r.initial_buffer)
        width = max((len(v) for v in r.step.values()), default=1)
        shape = (len(self.states), len(self.symbols), width)
        self.cdf = np.ones(shape)
        self.targets = np.zeros(shape, dtype=np.int64)
        self.emits = np.zeros(shape, dtype=np.int64)
        self.defined = np.zeros(shape[:2], dtype=bool)
        for (state, symbol), outcomes in r.step.items():
            s = r.buffer_alphabet.index(state)
            y = (
                len(self.symbols) - 1
                if symbol is EMPTY
                else r.received_alphabet.index(symbol)
            )
            self.defined[s, y] = True
            weights = np.array([p for _, p in outcomes])
            self.cdf[s, y, : len(outcomes)] = np.cumsum(weights) / weights.sum()
            for k, ((target, emitted), _) in enumerate(outcomes):
                self.targets[s, y, k] = r.buffer_alphabet.index(target)
                self.emits[s, y, k] = (
                    -1 if emitted is EMPTY else r.emitted_alphabet.index(emitted)
                )

    def draws(self, n: int) -> int:
        return n + self.latency

    def __call__(self, received: np.ndarray, u: np.ndarray) -> np.ndarray:
        count, n = received.shape
        state = np.full(count, self.initial)
        emitted = np.empty((count, n), dtype=np.int64)
        empty = len(self.symbols) - 1
        for i in range(n + self.latency):
            symbol = received[:, i] if i < n else np.full(count, empty)
            undefined = ~self.defined[state, symbol]
            if undefined.any():
                t = int(np.argmax(undefined))
                raise RecodingError(
                    f"step undefined for (buffer {self.states[state[t]]!r}, "
                    f"received {self.symbols[symbol[t]]!r})"
                )
            k = _sample(self.cdf[state, symbol], u[:, i])
            out = self.emits[state, symbol, k]
            state = self.targets[state, symbol, k]
            if i < self.latency:
                if (out >= 0).any():
                    raise RecodingError(
                        f"recoder emits at step {i + 1} during its latency"
                    )
            else:
                if (out < 0).any():
                    raise RecodingError(
                        f"recoder emits nothing at step {i + 1} after its latency"
                    )
                emitted[:, i - self.latency] = out
        return emitted


class _CompiledMatrix:
    """A node given by its transition matrix, sampled one row per trial."""

    def __init__(self, node: NodeMatrix) -> None:
        self.received_size = node.received_alphabet.size
        self.emitted_size = node.emitted_alphabet.size
        self.sampler = _RowSampler(node.matrix)

    def draws(self, n: int) -> int:
        return 1

    def __call__(self, received: np.ndarray, u: np.ndarray) -> np.ndarray:
        rows = _undigits(received, self.received_size)
        word = self.sampler(rows, u[:, 0])
        return _digits(word, self.emitted_size, received.shape[1])


class _Engine:
    def __init__(self, cfg: SimConfig, net: BatchNetwork) -> None:
        self.cfg = cfg
        self.n = net.inner_blocklength
        self.words = net.batch_alphabet.size**net.batch_size
        self.inputs, self.outputs = net.input_alphabet, net.output_alphabet
        check_budget(self.words, self.outputs.size**self.n, "simulation count table")
        self.key = np.random.SeedSequence(cfg.seed).generate_state(2, dtype=np.uint64)

        law = cfg.input_law
        self.law_cdf = None if isinstance(law, str) else _cdf(np.array(law))
        self.source = _RowSampler(net.scheme.source.matrix)
        self.links = [_cdf(link.rows) for link in net.links]
        self.nodes: list[_CompiledRecoder | _CompiledMatrix] = [
            (
                _CompiledRecoder(node)
                if isinstance(node, NodeRecoder)
                else _CompiledMatrix(node)
            )
            for node in net.scheme.nodes
        ]
        # Output index carrying the same label as each input, -1 if none.
        self.same_label = np.array(
            [self.outputs.index(x) if x in self.outputs else -1 for x in self.inputs]
        )

    def _uniforms(self, stream: int, start: int, count: int, draws: int) -> np.ndarray:
        blocks = max(1, -(-draws // _WORDS_PER_BLOCK))
        bitgen = np.random.Philox(key=self.key, counter=[start * blocks, 0, stream, 0])
        width = blocks * _WORDS_PER_BLOCK
        u = np.random.Generator(bitgen).random(count * width).reshape(count, width)
        return u[:, :draws]

    def run_chunk(self, start: int, count: int) -> tuple[np.ndarray, int]:
        n = self.n
        u = self._uniforms(0, start, count, 2)
        if self.cfg.input_law == "balanced":
            x = (start + np.arange(count)) % self.words
        elif self.law_cdf is not None:
            x = _sample(self.law_cdf, u[:, 0])
        else:
            x = np.minimum((u[:, 0] * self.words).astype(np.int64), self.words - 1)
        sent = _digits(self.source(x, u[:, 1]), self.inputs.size, n)

        word = sent
        received = sent
        for ell, cdf in enumerate(self.links):
            node = self.nodes[ell] if ell < len(self.nodes) else None
            draws = n + (node.draws(n) if node is not None else 0)
            u = self._uniforms(ell + 1, start, count, draws)
            received = _sample(cdf[word], u[:, :n])
            if node is not None:
                word = node(received, u[:, n:])

        y = _undigits(received, self.outputs.size)
        cols = self.outputs.size**n
        counts = np.bincount(x * cols + y, minlength=self.words * cols)
        delivered = int(np.all(received == self.same_label[sent], axis=1).sum())
        return counts.reshape(self.words, cols), delivered


def simulate(cfg: SimConfig, net: BatchNetwork | None = None) -> SimReport:
    """Run cfg.trials executions of the network and estimate I(X; Y).

    ``net`` may be passed to reuse an already built network; it must match
    the configuration. Channel uses are sampled from the row of the input
    actually sent, which has the same law as applying a full noise
    realization.
    """
    started = time.perf_counter()
    net = net if net is not None else cfg.network()
    if net.length != cfg.length:
        raise ValidationError(
            f"network has {net.length} links, configuration asks for {cfg.length}"
        )
    engine = _Engine(cfg, net)
    chunk = get_settings().sim_chunk_trials
    starts = range(0, cfg.trials, chunk)

    def run(start: int) -> tuple[np.ndarray, int]:
        return engine.run_chunk(start, min(chunk, cfg.trials - start))

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(start) for start in starts]

    counts = np.sum([c for c, _ in results], axis=0)
    delivered = sum(d for _, d in results)
    mi, stderr = jackknife_mutual_information(counts)
    elapsed = time.perf_counter() - started
    logger.debug(
        "simulated %d trials over %d links in %.3fs", cfg.trials, cfg.length, elapsed
    )
    return SimReport(cfg, counts, delivered, mi, stderr, elapsed)


def sweep(
    cfg: SimConfig,
    lengths: Iterable[int],
    regime: RegimeChoice = "auto",
    group_size: int | None = None,
) -> list[SweepRow]:
    """Simulate the configuration at every length and pair it with its bound.

    Rows follow the order of ``lengths``. A length where the bound's
    preconditions fail (for example K not dividing L) gets a NaN bound.
    """
    rows = []
    for length in lengths:
        point = cfg.with_length(length)
        net = point.network()
        rows.append(summarize(simulate(point, net), net, regime, group_size))
    return rows


def summarize(
    report: SimReport,
    net: BatchNetwork,
    regime: RegimeChoice = "auto",
    group_size: int | None = None,
) -> SweepRow:
    """Per-use MI estimate of a run next to the bound for its network."""
    try:
        bound = applicable_bound(net, regime, group_size).value_nats
    except BoundPreconditionError as exc:
        logger.warning("no bound at L=%d: %s", net.length, exc)
        bound = math.nan
    n = report.config.inner_blocklength
    return SweepRow(
        length=report.config.length,
        trials=report.trials,
        mi_nats_per_use=report.mi_nats_per_use,
        mi_stderr=report.mi_stderr / n,
        bound_nats_per_use=bound,
    )
