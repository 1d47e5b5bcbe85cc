"""Shared fixtures for the batchnet tests."""

from collections.abc import Callable, Mapping, Sequence
from typing import Any

import numpy as np
import pytest

from batchnet.channels import make_bsc, make_custom, make_erasure
from batchnet.composition import BatchNetwork
from batchnet.models import Alphabet, Dmc

LineFactory = Callable[..., BatchNetwork]


def build_line(
    channel: Dmc,
    length: int,
    batch: Sequence[str] = ("0", "1"),
    m: int = 1,
    n: int = 1,
    scheme: str = "store_and_forward",
    params: Mapping[str, Any] | None = None,
) -> BatchNetwork:
    return BatchNetwork.build(
        [channel] * length,
        scheme,
        params,
        batch_alphabet=Alphabet(tuple(batch)),
        batch_size=m,
        inner_blocklength=n,
    )


@pytest.fixture
def make_line() -> LineFactory:
    return build_line


@pytest.fixture
def erasure() -> Dmc:
    """Packet erasure channel on {0, a, b} with erasure probability 1/2."""
    return make_erasure(2, 0.5)


@pytest.fixture
def erasure_net(erasure: Dmc) -> BatchNetwork:
    """Two erasure links, one symbol per batch, store-and-forward."""
    return build_line(erasure, 2, batch=("a", "b"))


@pytest.fixture
def bsc() -> Dmc:
    return make_bsc(0.1)


@pytest.fixture
def cyclic() -> Dmc:
    """Ternary channel with no canonical output but eps_Q = 1/2."""
    return make_custom(
        [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
        ["0", "1", "2"],
        ["x", "y", "z"],
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
