"""Data models for batchnet."""

import enum
import itertools
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Final

import numpy as np

from .config import get_settings
from .errors import ChannelError, DimensionError, ValidationError

Word = tuple[str, ...]


class _Empty(enum.Enum):
    EMPTY = "EMPTY"

    def __repr__(self) -> str:
        return "EMPTY"


# Stands for the "empty random variable" of out-of-range recoding steps.
EMPTY: Final = _Empty.EMPTY
MaybeSymbol = str | _Empty


@dataclass(frozen=True)
class Alphabet:
    """An ordered finite set of distinct symbol labels.

    The order is used for all matrix indexing; words over the alphabet are
    indexed lexicographically with the first position most significant,
    which matches the index order of ``numpy.kron``.
    """

    symbols: tuple[str, ...]

    def __post_init__(self) -> None:
        symbols = tuple(str(s) for s in self.symbols)
        if not symbols:
            raise ValidationError("alphabet must not be empty")
        if len(set(symbols)) != len(symbols):
            raise ValidationError(f"alphabet labels are not distinct: {symbols}")
        object.__setattr__(self, "symbols", symbols)

    @property
    def size(self) -> int:
        return len(self.symbols)

    @cached_property
    def _positions(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.symbols)}

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self) -> Iterator[str]:
        return iter(self.symbols)

    def __contains__(self, symbol: object) -> bool:
        return symbol in self._positions

    def index(self, symbol: str) -> int:
        try:
            return self._positions[symbol]
        except KeyError:
            raise ValidationError(
                f"symbol {symbol!r} is not in alphabet {self.symbols}"
            ) from None

    def words(self, n: int) -> list[Word]:
        """All words of length n in index order."""
        return [tuple(w) for w in itertools.product(self.symbols, repeat=n)]

    def word_index(self, word: Sequence[str]) -> int:
        index = 0
        for symbol in word:
            index = index * self.size + self.index(symbol)
        return index

    def word_at(self, index: int, n: int) -> Word:
        digits = []
        for _ in range(n):
            index, digit = divmod(index, self.size)
            digits.append(self.symbols[digit])
        return tuple(reversed(digits))

    def word_label(self, word: Sequence[str]) -> str:
        separator = "" if all(len(s) == 1 for s in self.symbols) else ","
        return separator.join(word)

    def power(self, n: int) -> "Alphabet":
        """The alphabet of length-n words, labelled by concatenation."""
        if n == 1:
            return self
        return Alphabet(tuple(self.word_label(w) for w in self.words(n)))


@dataclass(frozen=True, eq=False)
class Dmc:
    """A discrete memoryless channel given by its row-stochastic matrix."""

    input_alphabet: Alphabet
    output_alphabet: Alphabet
    rows: np.ndarray

    def __post_init__(self) -> None:
        rows = np.array(self.rows, dtype=float)
        expected = (self.input_alphabet.size, self.output_alphabet.size)
        if rows.ndim != 2 or rows.shape != expected:
            raise DimensionError(
                f"channel matrix has shape {rows.shape}, alphabets require {expected}"
            )
        validate_stochastic(rows)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def num_inputs(self) -> int:
        return self.input_alphabet.size

    @property
    def num_outputs(self) -> int:
        return self.output_alphabet.size

    def prob(self, y: str, x: str) -> float:
        """Q(y|x)."""
        return float(
            self.rows[self.input_alphabet.index(x), self.output_alphabet.index(y)]
        )

    def row(self, x: str) -> np.ndarray:
        return self.rows[self.input_alphabet.index(x)]

    def same_as(self, other: "Dmc", atol: float = 0.0) -> bool:
        return (
            self.input_alphabet == other.input_alphabet
            and self.output_alphabet == other.output_alphabet
            and np.allclose(self.rows, other.rows, rtol=0.0, atol=atol)
        )


def validate_stochastic(rows: np.ndarray, what: str = "row") -> None:
    """Check entries lie in [0, 1] and every row sums to 1."""
    tol = get_settings().stochastic_tol
    if not np.all(np.isfinite(rows)):
        raise ChannelError("matrix contains non-finite entries")
    for i, row in enumerate(rows):
        if np.any(row < -tol) or np.any(row > 1.0 + tol):
            raise ChannelError(f"{what} {i} has entries outside [0, 1]")
        total = float(row.sum())
        if abs(total - 1.0) > tol:
            raise ChannelError(f"{what} {i} sums to {total:.10g}")


@dataclass(frozen=True, eq=False)
class NoiseRealization:
    """Noise values (Z[i])_x for n uses of a channel.

    ``table[i, x]`` is the output index that input index x is sent to at use i.
    """

    input_alphabet: Alphabet
    output_alphabet: Alphabet
    table: np.ndarray

    def __post_init__(self) -> None:
        table = np.array(self.table, dtype=np.int64)
        if table.ndim != 2 or table.shape[1] != self.input_alphabet.size:
            raise DimensionError(
                f"noise table has shape {table.shape}, expected (n, "
                f"{self.input_alphabet.size})"
            )
        if np.any(table < 0) or np.any(table >= self.output_alphabet.size):
            raise ValidationError("noise table maps outside the output alphabet")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def length(self) -> int:
        return int(self.table.shape[0])

    def output(self, i: int, x: str) -> str:
        """(Z[i])_x as a symbol, with i counted from 0."""
        return self.output_alphabet.symbols[
            self.table[i, self.input_alphabet.index(x)]
        ]

    def as_mappings(self) -> list[dict[str, str]]:
        outs = self.output_alphabet.symbols
        return [
            {x: outs[row[j]] for j, x in enumerate(self.input_alphabet)}
            for row in self.table
        ]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NoiseRealization):
            return NotImplemented
        return (
            self.input_alphabet == other.input_alphabet
            and self.output_alphabet == other.output_alphabet
            and np.array_equal(self.table, other.table)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class InputDistribution:
    """A probability vector over an alphabet."""

    alphabet: Alphabet
    probabilities: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        p = np.array(self.probabilities, dtype=float)
        if p.shape != (self.alphabet.size,):
            raise DimensionError(
                f"distribution has shape {p.shape}, alphabet has "
                f"{self.alphabet.size} symbols"
            )
        if np.any(p < 0.0):
            raise ValidationError("distribution has negative entries")
        if abs(float(p.sum()) - 1.0) > get_settings().stochastic_tol:
            raise ValidationError(f"distribution sums to {float(p.sum()):.10g}")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    @classmethod
    def uniform(cls, alphabet: Alphabet) -> "InputDistribution":
        return cls(alphabet, np.full(alphabet.size, 1.0 / alphabet.size))

    def as_dict(self) -> dict[str, Any]:
        return {s: float(v) for s, v in zip(self.alphabet, self.probabilities)}
