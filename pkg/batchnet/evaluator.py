"""Evaluator module: numerical checks of the bottleneck arguments on a network."""

import logging
from dataclasses import dataclass

import numpy as np

from .bounds import collapse_chain, default_group_size, verify_collapse
from .composition import BatchNetwork, NoiseModel, bottleneck_decompose, end_to_end
from .infotheory import NATS_PER_BIT, cardinality_cap, mutual_information

logger = logging.getLogger(__name__)

INFORMATION_TOL = 1e-9
RECONSTRUCTION_TOL = 1e-9


@dataclass(frozen=True)
class DecompositionCheck:
    p0: float
    max_w0_information: float
    reconstruction_error: float
    implied_bound: float
    samples: int
    noise_model: NoiseModel

    @property
    def ok(self) -> bool:
        return (
            self.max_w0_information < INFORMATION_TOL
            and self.reconstruction_error < RECONSTRUCTION_TOL
        )


@dataclass(frozen=True)
class WitnessCheck:
    hops: int
    set_sizes: tuple[int, ...]
    final_output: str
    probability: float
    probability_lower_bound: float
    verified: bool

    @property
    def ok(self) -> bool:
        return self.verified and self.probability >= self.probability_lower_bound


def check_decomposition(
    net: BatchNetwork,
    samples: int = 100,
    seed: int = 0,
    noise_model: NoiseModel = "coupled",
) -> DecompositionCheck:
    """Decompose W_L and measure I(p, w0) over random input laws.

    The uniform law is always included; the other samples - 1 laws are
    drawn from a flat Dirichlet distribution.
    """
    decomposition = bottleneck_decompose(net, noise_model=noise_model)
    rows = decomposition.w0.shape[0]
    rng = np.random.default_rng(seed)
    laws = [np.full(rows, 1.0 / rows)]
    laws += list(rng.dirichlet(np.ones(rows), size=max(samples - 1, 0)))
    worst = max(mutual_information(p, decomposition.w0) for p in laws)

    total = decomposition.reconstruct()
    error = float(np.abs(total - end_to_end(net).rows).max())
    cap = cardinality_cap(
        net.batch_size,
        net.batch_alphabet.size,
        net.inner_blocklength,
        net.output_alphabet.size,
    )
    logger.debug("max I(p, w0) = %.3g over %d laws", worst, len(laws))
    return DecompositionCheck(
        p0=decomposition.p0,
        max_w0_information=worst,
        reconstruction_error=error,
        implied_bound=decomposition.p1 * cap / net.inner_blocklength,
        samples=len(laws),
        noise_model=noise_model,
    )


def check_witness(net: BatchNetwork, k: int | None = None) -> WitnessCheck:
    """Build the collapse chain over the first k hops and replay it."""
    if k is None:
        k = default_group_size(net.inner_blocklength, net.input_alphabet.size)
    witness = collapse_chain(net, k)
    return WitnessCheck(
        hops=witness.hops,
        set_sizes=witness.set_sizes,
        final_output=net.output_alphabet.word_label(witness.final_output),
        probability=witness.probability,
        probability_lower_bound=witness.probability_lower_bound,
        verified=verify_collapse(net, witness),
    )


def _scale(nats: float, units: str) -> float:
    return nats / NATS_PER_BIT if units == "bits" else nats


def display_decomposition(check: DecompositionCheck, units: str = "nats") -> None:
    print("\nBottleneck decomposition:")
    print(f"  noise model: {check.noise_model}")
    print(f"  p0 = {check.p0:.9g}")
    print(
        f"  max I(p, w0) = {_scale(check.max_w0_information, units):.9g} {units} "
        f"over {check.samples} input laws"
    )
    print(f"  reconstruction error = {check.reconstruction_error:.9g}")
    print(
        f"  implied bound = {_scale(check.implied_bound, units):.9g} {units} per use"
    )
    print("  ✅ decomposition holds" if check.ok else "  ❌ decomposition fails")


def display_witness(check: WitnessCheck) -> None:
    print("\nCollapse witness:")
    print(f"  hops used: {check.hops}")
    print(f"  set sizes: {' -> '.join(str(s) for s in check.set_sizes)}")
    print(f"  final output: {check.final_output}")
    print(
        f"  Pr{{Z = z}} = {check.probability:.9g} "
        f"(lower bound {check.probability_lower_bound:.9g})"
    )
    print("  ✅ witness verified" if check.ok else "  ❌ witness invalid")
