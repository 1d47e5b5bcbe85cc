"""Entropy, mutual information and Blahut-Arimoto capacity, all in nats."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import entr, rel_entr, xlogy

from .composition import BatchNetwork, end_to_end
from .config import get_settings
from .errors import DimensionError, ValidationError
from .models import Dmc, InputDistribution

logger = logging.getLogger(__name__)

NATS_PER_BIT = math.log(2.0)


@dataclass(frozen=True, eq=False)
class CapacityResult:
    """Outcome of a Blahut-Arimoto run.

    ``capacity_nats`` is the lower estimate I(p, W) at the final iterate and
    ``gap_bound`` the distance to the upper estimate max_x D(W(.|x) || pW).
    """

    capacity_nats: float
    optimizer: InputDistribution
    iterations: int
    gap_bound: float
    converged: bool
    history: tuple[float, ...] = field(default=(), repr=False)


def _as_vector(p: InputDistribution | np.ndarray | list[float]) -> np.ndarray:
    if isinstance(p, InputDistribution):
        return np.asarray(p.probabilities)
    return np.asarray(p, dtype=float)


def _as_matrix(w: Dmc | np.ndarray) -> np.ndarray:
    return w.rows if isinstance(w, Dmc) else np.asarray(w, dtype=float)


def entropy(p: InputDistribution | np.ndarray | list[float]) -> float:
    """Shannon entropy in nats, with 0 ln 0 = 0."""
    return float(entr(_as_vector(p)).sum())


def mutual_information(
    p: InputDistribution | np.ndarray | list[float], w: Dmc | np.ndarray
) -> float:
    """I(p, W) in nats."""
    vector, matrix = _as_vector(p), _as_matrix(w)
    if vector.shape != (matrix.shape[0],):
        raise DimensionError(
            f"distribution over {vector.shape[0]} inputs, channel has "
            f"{matrix.shape[0]}"
        )
    support = vector > 0.0
    output = vector @ matrix
    divergences = rel_entr(matrix[support], output[None, :]).sum(axis=1)
    return max(float(vector[support] @ divergences), 0.0)


def _divergences(matrix: np.ndarray, p: np.ndarray) -> np.ndarray:
    """D(W(.|x) || pW) for inputs in the support of p, -inf elsewhere."""
    output = p @ matrix
    result = np.full(matrix.shape[0], -np.inf)
    support = p > 0.0
    result[support] = rel_entr(matrix[support], output[None, :]).sum(axis=1)
    return result


def blahut_arimoto(
    w: Dmc, tol: float | None = None, max_iter: int | None = None
) -> CapacityResult:
    """Capacity of w by alternating maximization from the uniform input.

    Stops once max_x D(x) - I(p, W) <= tol. Inputs whose mass underflows to
    zero never come back, so the gap is taken over the support.
    """
    settings = get_settings()
    tol = settings.capacity_tol if tol is None else tol
    max_iter = settings.capacity_max_iter if max_iter is None else max_iter
    if tol <= 0:
        raise ValidationError(f"tolerance must be positive, got {tol}")

    matrix = w.rows
    p = np.full(w.num_inputs, 1.0 / w.num_inputs)
    history: list[float] = []
    lower, gap = 0.0, math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        divergences = _divergences(matrix, p)
        lower = max(float(p @ np.where(p > 0, divergences, 0.0)), 0.0)
        upper = float(divergences.max())
        gap = max(upper - lower, 0.0)
        history.append(lower)
        if gap <= tol:
            break
        # Multiplicative update in log space; shift by the max for stability.
        exponent = np.where(p > 0, divergences - upper, -np.inf)
        p = p * np.exp(exponent)
        p /= p.sum()

    converged = gap <= tol
    if not converged:
        logger.warning(
            "Blahut-Arimoto stopped after %d iterations with gap %.3g > %.3g",
            iterations,
            gap,
            tol,
        )
    logger.debug("capacity %.9g nats after %d iterations", lower, iterations)
    return CapacityResult(
        capacity_nats=lower,
        optimizer=InputDistribution(w.input_alphabet, p),
        iterations=iterations,
        gap_bound=gap,
        converged=converged,
        history=tuple(history),
    )


def batch_rate(net: BatchNetwork, tol: float | None = None) -> float:
    """C_L = max_p I(p, W_L) / N in nats per channel use."""
    result = blahut_arimoto(end_to_end(net), tol=tol)
    return result.capacity_nats / net.inner_blocklength


def cardinality_cap(
    batch_size: int, batch_alphabet_size: int, n: int, output_alphabet_size: int
) -> float:
    """min{M ln|A|, N ln|Q_out|}, the largest information one batch can carry."""
    return min(
        batch_size * math.log(batch_alphabet_size), n * math.log(output_alphabet_size)
    )


def plugin_mutual_information(counts: np.ndarray) -> float:
    """Mutual information of the empirical joint given by a contingency table."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        return 0.0
    joint = counts / total
    row = joint.sum(axis=1, keepdims=True)
    col = joint.sum(axis=0, keepdims=True)
    mask = joint > 0
    return max(float(rel_entr(joint[mask], (row @ col)[mask]).sum()), 0.0)


def jackknife_mutual_information(counts: np.ndarray) -> tuple[float, float]:
    """Plug-in estimate with its delete-one jackknife standard error.

    With S = sum c ln c over cells, rows and columns, the plug-in estimate is
    ln n + (S_xy - S_x - S_y) / n. Deleting one sample of cell (x, y) only
    changes n, n_xy, n_x and n_y, so every leave-one-out value follows in
    closed form and is shared by the n_xy samples of that cell.
    """
    counts = np.asarray(counts, dtype=float)
    n = float(counts.sum())
    estimate = plugin_mutual_information(counts)
    if n < 2:
        return estimate, 0.0
    rows, cols = counts.sum(axis=1), counts.sum(axis=0)
    s_xy = float(xlogy(counts, counts).sum())
    s_x = float(xlogy(rows, rows).sum())
    s_y = float(xlogy(cols, cols).sum())

    x, y = np.nonzero(counts)
    weights = counts[x, y]

    def drop(c: np.ndarray) -> np.ndarray:
        return xlogy(c - 1.0, c - 1.0) - xlogy(c, c)

    leave_one_out = math.log(n - 1.0) + (
        s_xy + drop(weights) - s_x - drop(rows[x]) - s_y - drop(cols[y])
    ) / (n - 1.0)
    mean = float(weights @ leave_one_out) / n
    variance = (n - 1.0) / n * float(weights @ (leave_one_out - mean) ** 2)
    return estimate, math.sqrt(max(variance, 0.0))
