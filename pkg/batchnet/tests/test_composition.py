"""Tests for the composition module."""

import numpy as np
import pytest

from batchnet.channels import make_bec, make_bsc, make_noiseless
from batchnet.composition import (
    BatchNetwork,
    bottleneck_decompose,
    end_to_end,
    group_hops,
)
from batchnet.errors import (
    DegenerateDecompositionError,
    DimensionError,
    ValidationError,
)
from batchnet.infotheory import blahut_arimoto, mutual_information
from batchnet.models import Dmc
from batchnet.tests.conftest import LineFactory, build_line


def brute_force_channel(net: BatchNetwork) -> np.ndarray:
    """W_L by summing over every intermediate word, one symbol at a time.

    Only for deterministic schemes; node maps are read off as lookup tables.
    """
    n = net.inner_blocklength
    q_in, q_out = net.input_alphabet, net.output_alphabet
    link_words = q_out.words(n)
    tables = [phi.argmax(axis=1) for phi in net.scheme.phi_matrices]
    source = net.scheme.source.matrix.argmax(axis=1)

    def link(q: Dmc, x: tuple[str, ...]) -> list[float]:
        return [
            float(np.prod([q.prob(yi, xi) for xi, yi in zip(x, y)])) for y in link_words
        ]

    result = np.zeros((source.size, len(link_words)))
    for row, start in enumerate(source):
        law = {q_in.word_at(int(start), n): 1.0}
        for ell, q in enumerate(net.links):
            received = np.zeros(len(link_words))
            for x, mass in law.items():
                received += mass * np.array(link(q, x))
            if ell == net.length - 1:
                result[row] = received
                break
            law = {}
            for y, mass in zip(link_words, received):
                if mass == 0.0:
                    continue
                x = q_in.word_at(int(tables[ell][q_out.word_index(y)]), n)
                law[x] = law.get(x, 0.0) + mass
    return result


def test_erasure_network_rows(erasure_net: BatchNetwork) -> None:
    """Test W_2 of the two-hop erasure line: each packet survives with 1/4."""
    w = end_to_end(erasure_net)

    assert w.output_alphabet.symbols == ("0", "a", "b")
    np.testing.assert_allclose(w.rows, [[0.75, 0.25, 0.0], [0.75, 0.0, 0.25]])
    np.testing.assert_allclose(
        end_to_end(erasure_net, upto=1).rows, [[0.5, 0.5, 0.0], [0.5, 0.0, 0.5]]
    )
    with pytest.raises(ValidationError):
        end_to_end(erasure_net, upto=0)


@pytest.mark.parametrize(
    "channel, length, n, scheme, params",
    [
        (make_bsc(0.1), 3, 1, "store_and_forward", None),
        (make_bsc(0.1), 2, 2, "store_and_forward", None),
        (make_bsc(0.3), 3, 2, "random_map", {"seed": 1}),
        (make_bec(0.2), 2, 2, "random_map", {"seed": 8}),
    ],
)
def test_end_to_end_matches_brute_force(
    channel: Dmc, length: int, n: int, scheme: str, params: dict | None
) -> None:
    """Test the Kronecker chain against explicit enumeration."""
    net = build_line(channel, length, m=n, n=n, scheme=scheme, params=params)
    np.testing.assert_allclose(
        end_to_end(net).rows, brute_force_channel(net), atol=1e-12
    )


def test_erasure_brute_force(erasure_net: BatchNetwork) -> None:
    np.testing.assert_allclose(
        end_to_end(erasure_net).rows, brute_force_channel(erasure_net), atol=1e-12
    )


def test_prefix_capacities_never_increase(make_line: LineFactory) -> None:
    """Test the data-processing inequality along the line."""
    net = make_line(make_bsc(0.1), 4, m=2, n=2, scheme="random_map", params={"seed": 5})
    capacities = [
        blahut_arimoto(end_to_end(net, upto=ell)).capacity_nats for ell in range(1, 5)
    ]

    for before, after in zip(capacities, capacities[1:]):
        assert after <= before + 1e-8


def test_decomposition_of_erasure_line(erasure_net: BatchNetwork) -> None:
    """Test p0 under both noise models on the two-hop erasure line."""
    # 1. Coupled: a use collapses exactly when it is erased
    coupled = bottleneck_decompose(erasure_net)
    assert coupled.p0 == pytest.approx(0.75)
    assert coupled.collapse_masses == (0.5, 0.5)
    assert coupled.y0 == ("0", "0")
    np.testing.assert_allclose(coupled.w0, [[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    np.testing.assert_allclose(coupled.w1, [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])

    # 2. Independent per-input noise variables
    independent = bottleneck_decompose(erasure_net, noise_model="independent")
    assert independent.p0 == pytest.approx(0.4375)
    np.testing.assert_allclose(independent.w0[0], independent.w0[1], atol=1e-12)

    for d in (coupled, independent):
        np.testing.assert_allclose(
            d.reconstruct(), end_to_end(erasure_net).rows, atol=1e-12
        )


@pytest.mark.parametrize("seed", range(5))
def test_decomposition_w0_is_input_independent(
    make_line: LineFactory, seed: int
) -> None:
    net = make_line(
        make_bsc(0.2), 3, m=2, n=2, scheme="random_map", params={"seed": seed}
    )
    d = bottleneck_decompose(net)

    assert d.p0 == pytest.approx(1 - (1 - 0.2**2) ** 3)
    np.testing.assert_allclose(d.w0 - d.w0[0], 0.0, atol=1e-9)
    np.testing.assert_allclose(d.reconstruct(), end_to_end(net).rows, atol=1e-12)


def test_decomposition_needs_a_collapse_output(
    make_line: LineFactory, cyclic: Dmc
) -> None:
    """Test that channels without a reachable common output are refused."""
    with pytest.raises(DegenerateDecompositionError):
        bottleneck_decompose(make_line(make_noiseless(2), 2))
    with pytest.raises(DegenerateDecompositionError):
        bottleneck_decompose(make_line(cyclic, 2, batch=("0", "1", "2")))
    with pytest.raises(DegenerateDecompositionError, match="not reachable"):
        bottleneck_decompose(
            make_line(cyclic, 2, batch=("0", "1", "2")), y0_per_link=["x", "x"]
        )
    with pytest.raises(ValidationError):
        bottleneck_decompose(make_line(make_bsc(0.1), 2), y0_per_link=["0"])


def test_group_hops_chain(make_line: LineFactory) -> None:
    """Test that regrouping hops does not change the end-to-end channel."""
    net = make_line(make_bsc(0.1), 4, m=2, n=2, scheme="random_map", params={"seed": 2})
    grouping = group_hops(net, 2)

    assert len(grouping.groups) == 2
    assert len(grouping.interleaving) == 1
    np.testing.assert_allclose(grouping.chain_product(), end_to_end(net).rows)

    with pytest.raises(ValidationError, match="does not divide"):
        group_hops(net, 3)
    randomized = make_line(
        make_bsc(0.1),
        2,
        scheme="random_recoder",
        params={"seed": 0, "randomized": True},
    )
    with pytest.raises(ValidationError, match="deterministic"):
        group_hops(randomized, 1)


def test_network_shape_checks(bsc: Dmc) -> None:
    """Test that links and recoders must agree on alphabets and count."""
    two_hops = build_line(bsc, 2).scheme

    with pytest.raises(DimensionError, match="different alphabets"):
        BatchNetwork((bsc, make_bec(0.1)), two_hops)
    with pytest.raises(DimensionError, match="node recoders"):
        BatchNetwork((bsc, bsc, bsc), two_hops)
    with pytest.raises(ValidationError):
        BatchNetwork((), two_hops)


def test_link_powers_are_shared(bsc: Dmc) -> None:
    net = build_line(bsc, 3, n=2)
    powers = net.link_powers()

    assert powers[0] is powers[2]
    assert powers[0].shape == (4, 4)


@pytest.mark.parametrize("noise_model", ["coupled", "independent"])
def test_decomposition_bounds_information(
    make_line: LineFactory, noise_model: str, rng: np.random.Generator
) -> None:
    """Test I(p, W_L) <= p0 I(p, w0) + p1 I(p, w1) over random input laws."""
    nets = [
        make_line(make_bsc(0.2), 3, m=2, n=2, scheme="random_map", params={"seed": 3}),
        make_line(make_bec(0.3), 2, m=2, n=2),
    ]
    for net in nets:
        d = bottleneck_decompose(net, noise_model=noise_model)  # type: ignore[arg-type]
        assert d.w1 is not None
        np.testing.assert_allclose(d.w1.sum(axis=1), 1.0, atol=1e-12)
        total = end_to_end(net).rows

        for p in rng.dirichlet(np.ones(total.shape[0]), size=100):
            mixed = d.p0 * mutual_information(p, d.w0) + d.p1 * mutual_information(
                p, d.w1
            )
            assert mutual_information(p, total) <= mixed + 1e-12
            # w0 carries nothing about the input
            assert mutual_information(p, d.w0) == pytest.approx(0.0, abs=1e-12)


def test_decomposition_with_tiny_collapse_mass(make_line: LineFactory) -> None:
    """Test that p0 of order 1e-18 is kept instead of rounding to zero."""
    net = make_line(make_bsc(1e-9), 2, m=2, n=2)
    d = bottleneck_decompose(net)

    assert d.collapse_masses == pytest.approx((1e-18, 1e-18), rel=1e-9)
    assert d.p0 == pytest.approx(2e-18, rel=1e-9)
    # Every collapse ends as 00 at the destination, up to 1e-9 flips
    np.testing.assert_allclose(d.w0[:, 0], 1.0, atol=1e-8)
    np.testing.assert_allclose(d.reconstruct(), end_to_end(net).rows, atol=1e-12)
