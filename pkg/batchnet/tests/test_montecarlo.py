"""Tests for the montecarlo module."""

import io
import math
from typing import Any

import numpy as np
import pytest

from batchnet.composition import end_to_end
from batchnet.config import override
from batchnet.errors import ValidationError
from batchnet.export import format_number, write_csv, write_matrix_csv
from batchnet.montecarlo import SWEEP_COLUMNS, SimConfig, simulate, summarize, sweep

ERASURE = {"kind": "erasure", "epsilon": 0.5}
BSC = {"kind": "bsc", "p": 0.2}


def sim(channel: dict[str, Any], length: int, **changes: Any) -> SimConfig:
    values: dict[str, Any] = dict(
        channels=(channel,),
        length=length,
        batch_alphabet=("0", "1"),
        batch_size=1,
        inner_blocklength=1,
        seed=20240617,
    )
    values.update(changes)
    return SimConfig(**values)


def worst_row_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Largest total variation distance between matching rows."""
    return float(0.5 * np.abs(a - b).sum(axis=1).max())


def test_noiseless_line_delivers_everything() -> None:
    """Test the balanced law on a noiseless line, where the MI is exactly ln 2."""
    noiseless = {"kind": "noiseless", "size": 2}
    cfg = sim(
        noiseless, 3, batch_alphabet=("a", "b"), trials=1000, input_law="balanced"
    )
    report = simulate(cfg)

    np.testing.assert_array_equal(report.counts, [[500, 0], [0, 500]])
    assert report.delivery_fraction == 1.0
    assert report.mi_estimate_nats == pytest.approx(math.log(2))
    assert report.empirical_rows(cfg.network().output_alphabet) == {
        "a": {"a": 1.0},
        "b": {"b": 1.0},
    }


def test_erasure_delivery_fraction() -> None:
    """Test that a packet survives three erasure hops with probability 1/8."""
    cfg = sim(ERASURE, 3, batch_alphabet=("a", "b"), trials=100_000)
    report = simulate(cfg)

    sigma = math.sqrt(0.125 * 0.875 / 100_000)
    assert report.trials == 100_000
    assert abs(report.delivery_fraction - 0.125) <= 3 * sigma


@pytest.mark.parametrize(
    "scheme, params",
    [
        ("store_and_forward", {}),
        ("random_map", {"seed": 6}),
        ("random_recoder", {"seed": 2, "randomized": True}),
        ("custom", {"nodes": [{"kind": "delay"}]}),
    ],
)
def test_empirical_matrix_matches_exact(scheme: str, params: dict[str, Any]) -> None:
    """Test per-row total variation against the composed channel."""
    cfg = sim(
        BSC,
        2,
        batch_size=2,
        inner_blocklength=2,
        scheme=scheme,
        scheme_params=params,
        trials=100_000,
        input_law="balanced",
    )
    net = cfg.network()
    report = simulate(cfg, net)

    assert worst_row_distance(report.empirical_matrix(), end_to_end(net).rows) <= 0.02


def test_results_do_not_depend_on_chunks_or_workers() -> None:
    """Test that trial t always sees the same random numbers."""
    shape: dict[str, Any] = dict(batch_size=2, inner_blocklength=2, trials=5000)
    baseline = simulate(sim(BSC, 3, **shape))

    with override(sim_chunk_trials=1000):
        chunked = simulate(sim(BSC, 3, **shape))
    with override(sim_chunk_trials=700):
        threaded = simulate(sim(BSC, 3, workers=2, **shape))

    for other in (chunked, threaded):
        np.testing.assert_array_equal(other.counts, baseline.counts)
        assert other.delivered == baseline.delivered
        assert other.mi_estimate_nats == baseline.mi_estimate_nats

    different = simulate(sim(BSC, 3, seed=1, **shape))
    assert not np.array_equal(different.counts, baseline.counts)


def test_explicit_input_law() -> None:
    noiseless = {"kind": "noiseless", "size": 2}
    cfg = sim(noiseless, 1, trials=20_000, input_law=(0.25, 0.75))
    report = simulate(cfg)

    share = report.counts.sum(axis=1)[0] / report.trials
    assert share == pytest.approx(0.25, abs=0.02)
    assert cfg.to_dict()["input_law"] == [0.25, 0.75]


def test_sweep_stays_below_bound() -> None:
    """Test that the estimate does not exceed the bound beyond sampling error."""
    rows = sweep(sim(ERASURE, 1, batch_alphabet=("a", "b"), trials=20_000), [1, 3, 2])

    assert [row.length for row in rows] == [1, 3, 2]
    for row in rows:
        assert row.trials == 20_000
        assert row.mi_nats_per_use <= row.bound_nats_per_use + 3 * row.mi_stderr + 1e-4
        assert row.mi_nats_per_use <= math.log(2) + 1e-12
        assert list(row.as_row()) == list(SWEEP_COLUMNS)


def test_sweep_without_a_bound() -> None:
    """Test that a length violating the bound's preconditions gets NaN."""
    ternary = {
        "kind": "custom",
        "rows": [["1/2", "1/2", 0], [0, "1/2", "1/2"], ["1/2", 0, "1/2"]],
    }
    cfg = sim(ternary, 3, batch_alphabet=("0", "1", "2"), trials=500)
    row = summarize(simulate(cfg), cfg.network(), "general", group_size=2)

    assert math.isnan(row.bound_nats_per_use)
    assert math.isnan(row.ratio)


def test_sim_config_validation() -> None:
    """Test that malformed runs are refused before any sampling."""
    with pytest.raises(ValidationError, match="trials"):
        sim(BSC, 2, trials=0)
    with pytest.raises(ValidationError, match="seed"):
        sim(BSC, 2, seed=-1)
    with pytest.raises(ValidationError, match="2 channel specs"):
        sim(BSC, 3, channels=(BSC, BSC))
    with pytest.raises(ValidationError, match="unknown scheme"):
        sim(BSC, 2, scheme="flooding")
    with pytest.raises(ValidationError, match="unknown input law"):
        sim(BSC, 2, input_law="zipf")
    with pytest.raises(ValidationError):
        sim(BSC, 2, input_law=(0.5, 0.6))
    with pytest.raises(ValidationError, match="fix the network length"):
        sim(BSC, 2, channels=(BSC, BSC)).with_length(3)
    with pytest.raises(ValidationError, match="configuration asks for"):
        simulate(sim(BSC, 2), sim(BSC, 3).network())


def test_identical_seeds_give_identical_csv() -> None:
    """Test byte-identical sweep output for repeated runs."""
    outputs = []
    for _ in range(2):
        cfg = sim(BSC, 2, trials=3000)
        buffer = io.StringIO()
        row = summarize(simulate(cfg), cfg.network())
        write_csv([row.as_row()], SWEEP_COLUMNS, buffer)
        outputs.append(buffer.getvalue())

    assert outputs[0] == outputs[1]
    assert outputs[0].startswith("L,trials,mi_nats_per_use,mi_stderr")


def test_number_formatting() -> None:
    assert format_number(1 / 3) == "0.333333333"
    assert format_number(None) == ""
    assert format_number(math.nan) == "nan"
    assert format_number(7) == "7"


def test_write_matrix_csv() -> None:
    cfg = sim(ERASURE, 2, batch_alphabet=("a", "b"))
    buffer = io.StringIO()
    write_matrix_csv(end_to_end(cfg.network()), buffer)

    assert buffer.getvalue().splitlines() == [
        "input,0,a,b",
        "a,0.75,0.25,0",
        "b,0.75,0,0.25",
    ]


def test_erasure_sweep_decays_geometrically() -> None:
    """Test that log MI falls by about ln(1 - eps) per extra link."""
    erasure = {"kind": "erasure", "epsilon": 0.1}
    lengths = list(range(1, 21))
    rows = sweep(sim(erasure, 1, batch_alphabet=("a", "b"), trials=100_000), lengths)

    estimates = np.array([row.mi_nats_per_use for row in rows])
    slope = np.polyfit(lengths, np.log(estimates), 1)[0]
    assert slope == pytest.approx(math.log(0.9), abs=0.01)
    for row in rows:
        assert row.mi_nats_per_use <= row.bound_nats_per_use + 3 * row.mi_stderr + 1e-4
