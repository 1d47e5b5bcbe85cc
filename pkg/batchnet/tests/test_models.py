"""Tests for the models module."""

import numpy as np
import pytest

from batchnet.config import override
from batchnet.errors import ChannelError, DimensionError, ValidationError
from batchnet.models import (
    EMPTY,
    Alphabet,
    Dmc,
    InputDistribution,
    NoiseRealization,
)


def test_alphabet_word_indexing() -> None:
    """Test that words are indexed with the first position most significant."""
    ternary = Alphabet(("0", "1", "2"))

    assert ternary.word_index(("1", "2")) == 5
    assert ternary.word_at(5, 2) == ("1", "2")
    assert ternary.words(2)[5] == ("1", "2")
    assert [ternary.word_index(w) for w in ternary.words(3)] == list(range(27))


def test_alphabet_power_labels() -> None:
    """Test the labels of word alphabets."""
    binary = Alphabet(("0", "1"))
    assert binary.power(1) is binary
    assert binary.power(2).symbols == ("00", "01", "10", "11")

    # Multi-character labels are joined with commas
    states = Alphabet(("s0", "s1"))
    assert states.power(2).symbols[1] == "s0,s1"


def test_alphabet_rejects_bad_labels() -> None:
    """Test that empty or duplicated alphabets are refused."""
    with pytest.raises(ValidationError):
        Alphabet(())
    with pytest.raises(ValidationError):
        Alphabet(("a", "b", "a"))
    with pytest.raises(ValidationError):
        Alphabet(("a", "b")).index("c")


def test_dmc_validation() -> None:
    """Test shape and stochasticity checks on channel matrices."""
    binary = Alphabet(("0", "1"))

    # 1. Rows that do not sum to one
    with pytest.raises(ChannelError, match="sums to"):
        Dmc(binary, binary, [[0.5, 0.4], [0.0, 1.0]])

    # 2. Negative entries
    with pytest.raises(ChannelError, match="outside"):
        Dmc(binary, binary, [[1.5, -0.5], [0.0, 1.0]])

    # 3. Wrong shape
    with pytest.raises(DimensionError):
        Dmc(binary, Alphabet(("0", "e", "1")), [[1.0, 0.0], [0.0, 1.0]])

    # 4. Rounding noise within the tolerance is accepted
    with override(stochastic_tol=1e-6):
        Dmc(binary, binary, [[0.5 + 1e-8, 0.5], [0.0, 1.0]])


def test_dmc_is_read_only() -> None:
    """Test that channel rows cannot be modified after construction."""
    binary = Alphabet(("0", "1"))
    q = Dmc(binary, binary, np.eye(2))

    with pytest.raises(ValueError):
        q.rows[0, 0] = 0.5
    assert q.prob("1", "1") == 1.0
    assert q.same_as(Dmc(binary, binary, np.eye(2)))


def test_noise_realization() -> None:
    """Test lookups in a noise table."""
    binary = Alphabet(("0", "1"))
    z = NoiseRealization(binary, binary, [[0, 0], [1, 0]])

    assert z.length == 2
    assert z.output(0, "1") == "0"
    assert z.output(1, "0") == "1"
    assert z.as_mappings() == [{"0": "0", "1": "0"}, {"0": "1", "1": "0"}]
    assert z == NoiseRealization(binary, binary, [[0, 0], [1, 0]])

    with pytest.raises(ValidationError):
        NoiseRealization(binary, binary, [[0, 2]])


def test_input_distribution() -> None:
    """Test uniform and invalid input distributions."""
    alphabet = Alphabet(("a", "b", "c", "d"))
    uniform = InputDistribution.uniform(alphabet)

    assert uniform.as_dict() == {"a": 0.25, "b": 0.25, "c": 0.25, "d": 0.25}
    with pytest.raises(ValidationError):
        InputDistribution(alphabet, [0.5, 0.5, 0.5, -0.5])
    with pytest.raises(ValidationError):
        InputDistribution(alphabet, [0.5, 0.5, 0.5, 0.5])
    with pytest.raises(DimensionError):
        InputDistribution(alphabet, [1.0])


def test_empty_is_a_singleton() -> None:
    assert repr(EMPTY) == "EMPTY"
    assert EMPTY is EMPTY
    assert EMPTY != "EMPTY"
