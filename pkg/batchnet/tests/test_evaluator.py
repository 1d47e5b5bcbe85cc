"""Tests for the evaluator module."""

import itertools
import math

import pytest

from batchnet.bounds import applicable_bound
from batchnet.channels import make_bsc, make_erasure
from batchnet.composition import BatchNetwork, end_to_end
from batchnet.evaluator import (
    check_decomposition,
    check_witness,
    display_decomposition,
    display_witness,
)
from batchnet.infotheory import blahut_arimoto
from batchnet.models import Dmc
from batchnet.tests.conftest import build_line

LINKS = [
    make_erasure(2, 0.2),
    make_erasure(2, 0.5),
    make_erasure(2, 0.8),
    make_bsc(0.1),
    make_bsc(0.3),
]


def random_networks(seeds: range) -> list[BatchNetwork]:
    """Random deterministic schemes on short lines with M = N."""
    nets = []
    for link, length, n, seed in itertools.product(LINKS, (2, 3), (1, 2), seeds):
        batch = ("a", "b") if link.input_alphabet.size == 3 else ("0", "1")
        nets.append(
            build_line(
                link,
                length,
                batch=batch,
                m=n,
                n=n,
                scheme="random_map",
                params={"seed": seed},
            )
        )
    return nets


def test_decomposition_checks_pass_on_random_schemes() -> None:
    """Test that w0 carries no information and the split reconstructs W_L."""
    for net in random_networks(range(20)):
        check = check_decomposition(net, samples=100, seed=1)

        assert check.ok, (net.links[0], net.length, net.inner_blocklength)
        assert check.samples == 100


def test_capacity_never_exceeds_the_bound() -> None:
    """Test C_L <= applicable bound over random deterministic schemes."""
    violations = []
    for net in random_networks(range(10)):
        rate = blahut_arimoto(end_to_end(net), tol=1e-7).capacity_nats
        bound = applicable_bound(net).value_nats
        if rate / net.inner_blocklength > bound + 1e-9:
            violations.append((net.length, net.inner_blocklength, rate, bound))

    assert violations == []


def test_decomposition_check_on_erasure_line(
    erasure_net: BatchNetwork, capsys: pytest.CaptureFixture[str]
) -> None:
    """Test the reported quantities and their display."""
    check = check_decomposition(erasure_net)

    assert check.p0 == pytest.approx(0.75)
    assert check.implied_bound == pytest.approx(0.25 * math.log(2))
    bound = applicable_bound(erasure_net)
    assert check.implied_bound == pytest.approx(bound.value_nats)

    display_decomposition(check, units="bits")
    out = capsys.readouterr().out
    assert "p0 = 0.75" in out
    assert "implied bound = 0.25 bits per use" in out
    assert "✅ decomposition holds" in out


def test_independent_noise_model(erasure_net: BatchNetwork) -> None:
    check = check_decomposition(erasure_net, noise_model="independent")

    assert check.ok
    assert check.p0 == pytest.approx(0.4375)
    assert check.noise_model == "independent"


def test_witness_check(capsys: pytest.CaptureFixture[str]) -> None:
    """Test the collapse chain report on a two-hop BSC line."""
    check = check_witness(build_line(make_bsc(0.3), 2, m=2, n=2))

    assert check.ok
    assert check.hops == 2
    assert check.set_sizes == (4, 2, 1)
    assert check.final_output == "00"

    display_witness(check)
    out = capsys.readouterr().out
    assert "set sizes: 4 -> 2 -> 1" in out
    assert "✅ witness verified" in out


def test_witness_check_with_explicit_hops(cyclic: Dmc) -> None:
    net = build_line(cyclic, 4, batch=("0", "1", "2"), scheme="random_map")
    check = check_witness(net, k=3)

    assert check.ok
    assert check.hops <= 3
