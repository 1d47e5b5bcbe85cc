"""Process-wide numerical settings."""

from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, replace
from typing import Any

from .errors import SizeBudgetExceeded


@dataclass(frozen=True)
class Settings:
    """Numerical knobs shared by every module."""

    # Exact matrices refuse to materialize beyond this many entries.
    max_matrix_entries: int = 2**20
    stochastic_tol: float = 1e-9
    # Negative entries above -clamp_tol are floating noise and get clamped to 0.
    clamp_tol: float = 1e-12
    capacity_tol: float = 1e-9
    capacity_max_iter: int = 100_000
    sim_chunk_trials: int = 8192


_active = Settings()


def get_settings() -> Settings:
    """Return the active settings."""
    return _active


def configure(**changes: Any) -> Settings:
    """Replace the active settings with the given fields changed."""
    global _active
    _active = replace(_active, **changes)
    return _active


@contextmanager
def override(**changes: Any) -> Iterator[Settings]:
    """Temporarily change settings inside a ``with`` block."""
    global _active
    previous = _active
    _active = replace(previous, **changes)
    try:
        yield _active
    finally:
        _active = previous


def check_budget(rows: int, cols: int, what: str) -> None:
    """Fail loudly when a rows x cols matrix would exceed the size budget."""
    limit = _active.max_matrix_entries
    if rows * cols > limit:
        raise SizeBudgetExceeded(
            f"{what} needs a {rows} x {cols} matrix ({rows * cols} entries), "
            f"budget is {limit} entries"
        )
