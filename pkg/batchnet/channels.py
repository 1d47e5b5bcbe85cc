"""Channel constructors, Kronecker powers and the noise-variable model.

A channel Q can be written as Y = alpha(X, Z) where Z = (Z_x) holds one
independent output per input symbol with Pr{Z_x = y} = Q(y|x). The
realization helpers below sample and apply that representation, and the
two channel parameters used by the converse bounds (the canonical witness
y0 and eps_Q) are computed here.
"""

import logging
import string
from collections.abc import Mapping, Sequence
from fractions import Fraction
from functools import reduce
from typing import Any

import numpy as np

from .config import check_budget
from .errors import ChannelError, ConfigError, DimensionError
from .models import Alphabet, Dmc, NoiseRealization, Word

logger = logging.getLogger(__name__)

ERASURE = "0"
BINARY = Alphabet(("0", "1"))


def default_labels(count: int) -> tuple[str, ...]:
    """Labels a, b, c, ... (s26, s27, ... past the Latin alphabet)."""
    letters = string.ascii_lowercase
    return tuple(letters[i] if i < len(letters) else f"s{i}" for i in range(count))


def make_erasure(
    q_star_size: int, epsilon: float, labels: Sequence[str] | None = None
) -> Dmc:
    """Packet erasure channel on {0} plus a q_star_size symbol alphabet.

    Every non-erasure input is received intact with probability 1 - epsilon
    and erased otherwise; the idle input 0 is always received as 0.
    """
    if q_star_size < 2:
        raise ChannelError(
            f"erasure alphabet needs at least 2 symbols, got {q_star_size}"
        )
    if not 0.0 < epsilon < 1.0:
        raise ChannelError(f"erasure probability must lie in (0, 1), got {epsilon}")
    q_star = tuple(labels) if labels is not None else default_labels(q_star_size)
    if len(q_star) != q_star_size:
        raise ChannelError(f"expected {q_star_size} labels, got {len(q_star)}")
    if ERASURE in q_star:
        raise ChannelError("the erasure symbol 0 cannot label a packet")

    alphabet = Alphabet((ERASURE, *q_star))
    rows = np.zeros((alphabet.size, alphabet.size))
    rows[0, 0] = 1.0
    for x in range(1, alphabet.size):
        rows[x, 0] = epsilon
        rows[x, x] = 1.0 - epsilon
    return Dmc(alphabet, alphabet, rows)


def make_bsc(p: float) -> Dmc:
    """Binary symmetric channel with crossover probability p."""
    _check_probability(p)
    return Dmc(BINARY, BINARY, np.array([[1.0 - p, p], [p, 1.0 - p]]))


def make_bec(p: float) -> Dmc:
    """Binary erasure channel, outputs ordered (0, e, 1)."""
    _check_probability(p)
    rows = np.array([[1.0 - p, p, 0.0], [0.0, p, 1.0 - p]])
    return Dmc(BINARY, Alphabet(("0", "e", "1")), rows)


def make_noiseless(size: int, labels: Sequence[str] | None = None) -> Dmc:
    alphabet = Alphabet(tuple(labels) if labels is not None else default_labels(size))
    return Dmc(alphabet, alphabet, np.eye(alphabet.size))


def make_custom(
    rows: Sequence[Sequence[float]] | np.ndarray,
    input_labels: Sequence[str] | None = None,
    output_labels: Sequence[str] | None = None,
) -> Dmc:
    """Channel from an explicit matrix; rows must be stochastic."""
    matrix = np.array(rows, dtype=float)
    if matrix.ndim != 2:
        raise ChannelError("custom channel rows must form a matrix")
    n_in, n_out = matrix.shape
    if input_labels is None:
        input_labels = [str(i) for i in range(n_in)]
    if output_labels is None:
        output_labels = [str(j) for j in range(n_out)]
    return Dmc(Alphabet(tuple(input_labels)), Alphabet(tuple(output_labels)), matrix)


def _check_probability(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ChannelError(f"probability must lie in [0, 1], got {p}")


def erasure_probability(q: Dmc) -> float | None:
    """Return epsilon if q is a packet erasure channel, else None."""
    symbols = q.input_alphabet.symbols
    if (
        q.output_alphabet != q.input_alphabet
        or len(symbols) < 3
        or symbols[0] != ERASURE
    ):
        return None
    eps = float(q.rows[1, 0])
    if not 0.0 < eps < 1.0:
        return None
    expected = make_erasure(len(symbols) - 1, eps, symbols[1:]).rows
    return eps if np.allclose(q.rows, expected, rtol=0.0, atol=1e-12) else None


def kron_power(q: Dmc, n: int) -> Dmc:
    """Channel of n independent uses of q, indexed lexicographically."""
    if n < 1:
        raise DimensionError(f"Kronecker power needs n >= 1, got {n}")
    if n == 1:
        return q
    rows, cols = q.num_inputs**n, q.num_outputs**n
    check_budget(rows, cols, f"Kronecker power {n} of a {q.num_inputs}-input channel")
    logger.debug("materializing %d x %d Kronecker power", rows, cols)
    matrix = reduce(np.kron, [q.rows] * n)
    return Dmc(q.input_alphabet.power(n), q.output_alphabet.power(n), matrix)


def sample_noise(
    q: Dmc, n: int, rng_seed: int | np.random.Generator | None = None
) -> NoiseRealization:
    """Draw (Z[i])_x independently with law Q(.|x) for n uses."""
    rng = np.random.default_rng(rng_seed)
    table = np.empty((n, q.num_inputs), dtype=np.int64)
    for x in range(q.num_inputs):
        table[:, x] = rng.choice(q.num_outputs, size=n, p=q.rows[x])
    return NoiseRealization(q.input_alphabet, q.output_alphabet, table)


def apply_noise(u: Sequence[str], z: NoiseRealization) -> Word:
    """Channel output y with y[i] = (z[i])_{u[i]}."""
    if len(u) != z.length:
        raise DimensionError(
            f"word has length {len(u)} but the noise covers {z.length} uses"
        )
    return tuple(z.output(i, symbol) for i, symbol in enumerate(u))


def noise_probability(q: Dmc, z: NoiseRealization) -> float:
    """Pr{Z = z}, the product of Q((z[i])_x | x) over uses and inputs."""
    inputs = np.arange(q.num_inputs)
    return float(np.prod(q.rows[inputs, z.table]))


def canonical_witness(q: Dmc) -> tuple[str, float] | None:
    """Output y0 maximizing min_x Q(y0|x), with that minimum.

    Returns None when every output misses some input entirely.
    """
    column_mins = q.rows.min(axis=0)
    best = int(np.argmax(column_mins))
    eps = float(column_mins[best])
    if eps <= 0.0:
        return None
    return q.output_alphabet.symbols[best], eps


def pair_overlaps(q: Dmc) -> np.ndarray:
    """overlap[x, x'] = max_y min(Q(y|x), Q(y|x'))."""
    return np.minimum(q.rows[:, None, :], q.rows[None, :, :]).max(axis=2)


def epsilon_q(q: Dmc) -> float:
    """Largest eps such that every input pair shares an output of mass >= eps.

    Pairs with x == x' are included; the result is positive iff the
    zero-error capacity of q is 0.
    """
    return float(pair_overlaps(q).min())


def channel_summary(q: Dmc) -> dict[str, object]:
    witness = canonical_witness(q)
    return {
        "inputs": list(q.input_alphabet.symbols),
        "outputs": list(q.output_alphabet.symbols),
        "epsilon_q": epsilon_q(q),
        "canonical_output": witness[0] if witness else None,
        "canonical_eps": witness[1] if witness else None,
        "erasure_probability": erasure_probability(q),
    }


CHANNEL_KINDS = ("erasure", "bsc", "bec", "noiseless", "custom")


def channel_from_spec(spec: Mapping[str, Any]) -> Dmc:
    """Channel from its JSON description, e.g. {"kind": "bsc", "p": 0.1}.

    Probabilities may be numbers or strings such as "0.1" or "1/3".
    """
    kind = spec.get("kind")
    try:
        if kind == "erasure":
            return make_erasure(
                int(spec.get("size", 2)),
                _probability(spec["epsilon"]),
                spec.get("labels"),
            )
        if kind == "bsc":
            return make_bsc(_probability(spec["p"]))
        if kind == "bec":
            return make_bec(_probability(spec["p"]))
        if kind == "noiseless":
            return make_noiseless(int(spec.get("size", 2)), spec.get("labels"))
        if kind == "custom":
            rows = [[_probability(v) for v in row] for row in spec["rows"]]
            return make_custom(rows, spec.get("inputs"), spec.get("outputs"))
    except KeyError as exc:
        raise ConfigError(f"{kind} channel is missing {exc.args[0]!r}") from None
    raise ConfigError(
        f"unknown channel kind {kind!r}, expected one of {', '.join(CHANNEL_KINDS)}"
    )


def channel_to_spec(q: Dmc) -> dict[str, Any]:
    """Explicit "custom" description of q."""
    return {
        "kind": "custom",
        "rows": q.rows.tolist(),
        "inputs": list(q.input_alphabet.symbols),
        "outputs": list(q.output_alphabet.symbols),
    }


def _probability(value: Any) -> float:
    try:
        return float(Fraction(str(value)))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{value!r} is not a probability") from None
