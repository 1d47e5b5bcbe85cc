"""Tests for the parser module."""

from pathlib import Path
from typing import Any

import pytest

from batchnet.errors import ConfigError
from batchnet.parser import dump_config, load_config, parse_config

INPUTS = Path(__file__).parents[2] / "inputs"
SAMPLES = sorted(INPUTS.glob("*.json"))


def minimal(**changes: Any) -> dict[str, Any]:
    data: dict[str, Any] = {
        "schema_version": 1,
        "channel": {"kind": "bsc", "p": 0.1},
        "length": 2,
    }
    data.update(changes)
    return data


@pytest.mark.parametrize("path", SAMPLES, ids=lambda p: p.stem)
def test_sample_configs_load_and_round_trip(path: Path) -> None:
    """Test every shipped configuration: it loads, builds and survives a dump."""
    cfg = load_config(path)
    net = cfg.network()

    assert net.length == cfg.length
    assert parse_config(dump_config(cfg)) == cfg


def test_erasure_sample() -> None:
    cfg = load_config(INPUTS / "erasure_line.json")

    assert cfg.batch_alphabet == ("a", "b")
    assert cfg.bound.regime == "erasure"
    assert cfg.bound.lengths == (1, 2, 4, 8, 16, 32, 64)
    assert cfg.simulation.seed == 20240617
    assert cfg.sim_config(seed=99).seed == 99
    assert cfg.sim_config().trials == 100_000


def test_defaults() -> None:
    """Test the values filled in for omitted keys."""
    cfg = parse_config(minimal())

    assert cfg.batch_alphabet == ("0", "1")
    assert cfg.batch_size == 1
    assert cfg.inner_blocklength == 1
    assert cfg.scheme == "store_and_forward"
    assert cfg.bound.regime == "auto"
    assert cfg.simulation.input_law == "uniform"
    assert cfg.max_matrix_entries is None

    # Packet erasure links drop the idle symbol from the batch alphabet
    erasure = parse_config(minimal(channel={"kind": "erasure", "epsilon": 0.3}))
    assert erasure.batch_alphabet == ("a", "b")


def test_per_link_channels() -> None:
    cfg = parse_config(
        {
            "schema_version": 1,
            "links": [{"kind": "bsc", "p": 0.1}, {"kind": "bsc", "p": 0.2}],
        }
    )
    net = cfg.network()

    assert cfg.length == 2
    assert net.links[0].rows[0, 1] == pytest.approx(0.1)
    assert net.links[1].rows[0, 1] == pytest.approx(0.2)
    assert "links" in dump_config(cfg)


@pytest.mark.parametrize(
    "data, message",
    [
        (minimal(schema_version=2), "schema_version"),
        (minimal(budget=10), "unknown configuration keys: budget"),
        (minimal(links=[{"kind": "bsc", "p": 0.1}]), "exactly one"),
        ({"schema_version": 1, "length": 2}, "exactly one"),
        (minimal(length="3"), "length must be an integer"),
        (minimal(length=True), "length must be an integer"),
        (minimal(bound={"regime": "cut_set"}), "unknown regime"),
        (minimal(simulation={"input_law": "zipf"}), "unknown input law"),
        (minimal(simulation={"lengths": 4}), "must be a list"),
        (minimal(channel={"kind": "bsc"}), "missing 'p'"),
        (minimal(channel={"kind": "bsc", "p": 2}), "channel:"),
        (minimal(scheme=["random_map"]), "scheme must be an object"),
        ([1, 2], "JSON object"),
    ],
)
def test_parse_errors(data: Any, message: str) -> None:
    with pytest.raises(ConfigError, match=message):
        parse_config(data)


def test_link_count_must_match_length() -> None:
    data = {
        "schema_version": 1,
        "links": [{"kind": "bsc", "p": 0.1}],
        "length": 2,
    }
    with pytest.raises(ConfigError, match="1 links listed for length 2"):
        parse_config(data)


def test_load_errors(tmp_path: Path) -> None:
    """Test unreadable and malformed files."""
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")

    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(broken)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
