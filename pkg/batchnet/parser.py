"""Load and dump JSON run configurations.

A configuration describes one line network (links, batch, inner blocklength
and recoding scheme) plus optional "bound" and "simulation" sections. Every
file carries "schema_version": 1.
"""

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, cast

from .bounds import RegimeChoice, Schedule
from .channels import ERASURE, channel_from_spec, erasure_probability
from .composition import BatchNetwork
from .errors import ConfigError, ValidationError
from .models import Dmc
from .montecarlo import SimConfig

SCHEMA_VERSION = 1

_TOP_LEVEL = {
    "schema_version",
    "channel",
    "links",
    "length",
    "batch",
    "inner_blocklength",
    "scheme",
    "bound",
    "simulation",
    "max_matrix_entries",
}
_REGIMES = ("auto", "erasure", "canonical", "general")


@dataclass(frozen=True)
class BoundSection:
    regime: RegimeChoice = "auto"
    group_size: int | None = None
    lengths: tuple[int, ...] = ()
    batch_schedule: Schedule | None = None
    blocklength_schedule: Schedule | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "regime": self.regime,
            "group_size": self.group_size,
            "lengths": list(self.lengths),
            "batch_schedule": self.batch_schedule,
            "blocklength_schedule": self.blocklength_schedule,
        }


@dataclass(frozen=True)
class SimulationSection:
    trials: int = 10_000
    seed: int = 0
    input_law: str | tuple[float, ...] = "uniform"
    lengths: tuple[int, ...] = ()
    workers: int = 1

    def to_dict(self) -> dict[str, Any]:
        law = self.input_law
        return {
            "trials": self.trials,
            "seed": self.seed,
            "input_law": law if isinstance(law, str) else list(law),
            "lengths": list(self.lengths),
            "workers": self.workers,
        }


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved configuration; defaults are filled in."""

    channels: tuple[Mapping[str, Any], ...]
    length: int
    batch_alphabet: tuple[str, ...]
    batch_size: int = 1
    inner_blocklength: int = 1
    scheme: str = "store_and_forward"
    scheme_params: Mapping[str, Any] = field(default_factory=dict)
    bound: BoundSection = BoundSection()
    simulation: SimulationSection = SimulationSection()
    max_matrix_entries: int | None = None

    def network(self) -> BatchNetwork:
        return self.sim_config().network()

    def sim_config(self, seed: int | None = None) -> SimConfig:
        sim = self.simulation
        return SimConfig(
            channels=self.channels,
            length=self.length,
            batch_alphabet=self.batch_alphabet,
            batch_size=self.batch_size,
            inner_blocklength=self.inner_blocklength,
            scheme=self.scheme,
            scheme_params=self.scheme_params,
            trials=sim.trials,
            seed=sim.seed if seed is None else seed,
            input_law=sim.input_law,
            workers=sim.workers,
        )


def load_config(file_path: str | Path) -> RunConfig:
    """Load a run configuration from a JSON file.

    Args:
        file_path: Path to the configuration file

    Returns:
        The resolved RunConfig
    """
    try:
        with open(file_path) as f:
            data = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read {file_path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{file_path} is not valid JSON: {exc}") from None
    return parse_config(data)


def parse_config(data: Any) -> RunConfig:
    """Resolve a decoded JSON document into a RunConfig."""
    if not isinstance(data, Mapping):
        raise ConfigError("configuration must be a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}"
        )
    unknown = sorted(set(data) - _TOP_LEVEL)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")

    if ("channel" in data) == ("links" in data):
        raise ConfigError('give exactly one of "channel" or "links"')
    if "links" in data:
        specs = _list(data["links"], "links")
        channels = tuple(_mapping(spec, "link") for spec in specs)
        length = _int(data.get("length", len(channels)), "length")
        if len(channels) != length:
            raise ConfigError(f"{len(channels)} links listed for length {length}")
    else:
        channels = (_mapping(data["channel"], "channel"),)
        length = _int(data.get("length", 1), "length")

    try:
        first = channel_from_spec(channels[0])
    except ValidationError as exc:
        raise ConfigError(f"channel: {exc}") from None
    batch = _mapping(data.get("batch", {}), "batch")
    alphabet = batch.get("alphabet")
    scheme = _mapping(data.get("scheme", {}), "scheme")
    budget = data.get("max_matrix_entries")

    return RunConfig(
        channels=channels,
        length=length,
        batch_alphabet=(
            tuple(str(a) for a in _list(alphabet, "batch.alphabet"))
            if alphabet is not None
            else _default_batch_alphabet(first)
        ),
        batch_size=_int(batch.get("size", 1), "batch.size"),
        inner_blocklength=_int(data.get("inner_blocklength", 1), "inner_blocklength"),
        scheme=str(scheme.get("name", "store_and_forward")),
        scheme_params=dict(_mapping(scheme.get("params", {}), "scheme.params")),
        bound=_parse_bound(_mapping(data.get("bound", {}), "bound")),
        simulation=_parse_simulation(
            _mapping(data.get("simulation", {}), "simulation")
        ),
        max_matrix_entries=(
            None if budget is None else _int(budget, "max_matrix_entries")
        ),
    )


def dump_config(cfg: RunConfig) -> dict[str, Any]:
    """JSON form of a resolved configuration; parse_config inverts it."""
    data: dict[str, Any] = {"schema_version": SCHEMA_VERSION}
    if len(cfg.channels) == 1:
        data["channel"] = dict(cfg.channels[0])
    else:
        data["links"] = [dict(spec) for spec in cfg.channels]
    data.update(
        {
            "length": cfg.length,
            "batch": {"alphabet": list(cfg.batch_alphabet), "size": cfg.batch_size},
            "inner_blocklength": cfg.inner_blocklength,
            "scheme": {"name": cfg.scheme, "params": dict(cfg.scheme_params)},
            "bound": cfg.bound.to_dict(),
            "simulation": cfg.simulation.to_dict(),
        }
    )
    if cfg.max_matrix_entries is not None:
        data["max_matrix_entries"] = cfg.max_matrix_entries
    return data


def _default_batch_alphabet(q: Dmc) -> tuple[str, ...]:
    # Packet erasure links carry packets; the idle symbol is not a batch symbol.
    symbols = q.input_alphabet.symbols
    if erasure_probability(q) is not None:
        return tuple(s for s in symbols if s != ERASURE)
    return symbols


def _parse_bound(data: Mapping[str, Any]) -> BoundSection:
    regime = str(data.get("regime", "auto"))
    if regime not in _REGIMES:
        raise ConfigError(f"unknown regime {regime!r}, expected one of {_REGIMES}")
    group_size = data.get("group_size")
    return BoundSection(
        regime=cast(RegimeChoice, regime),
        group_size=(
            None if group_size is None else _int(group_size, "bound.group_size")
        ),
        lengths=_lengths(data.get("lengths", []), "bound.lengths"),
        batch_schedule=_schedule(data.get("batch_schedule"), "bound.batch_schedule"),
        blocklength_schedule=_schedule(
            data.get("blocklength_schedule"), "bound.blocklength_schedule"
        ),
    )


def _parse_simulation(data: Mapping[str, Any]) -> SimulationSection:
    law = data.get("input_law", "uniform")
    if isinstance(law, str):
        if law not in ("uniform", "balanced"):
            raise ConfigError(f"unknown input law {law!r}")
        input_law: str | tuple[float, ...] = law
    else:
        input_law = tuple(float(p) for p in _list(law, "simulation.input_law"))
    return SimulationSection(
        trials=_int(data.get("trials", 10_000), "simulation.trials"),
        seed=_int(data.get("seed", 0), "simulation.seed"),
        input_law=input_law,
        lengths=_lengths(data.get("lengths", []), "simulation.lengths"),
        workers=_int(data.get("workers", 1), "simulation.workers"),
    )


def _schedule(value: Any, name: str) -> Schedule | None:
    if value is None or value == "log":
        return cast(Schedule | None, value)
    return _int(value, name)


def _lengths(value: Any, name: str) -> tuple[int, ...]:
    return tuple(_int(v, name) for v in _list(value, name))


def _int(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return value


def _list(value: Any, name: str) -> Sequence[Any]:
    if not isinstance(value, list):
        raise ConfigError(f"{name} must be a list")
    return value


def _mapping(value: Any, name: str) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise ConfigError(f"{name} must be an object")
    return value
