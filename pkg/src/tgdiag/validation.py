"""Input validation helpers used across the package.

Errors raised here signal problems with user-supplied data (bad files,
bad parameters) and map to exit code 2 in the CLI, as opposed to
:class:`tgdiag.diagnostics.DiagnosticsError` which maps to exit code 1.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

TIME_KINDS = ("continuous", "discrete")
ORIENTATIONS = ("as_stored", "single_direction")
EXCLUSIONS = ("per_timestep", "any_timestep")


class InputError(ValueError):
    """Invalid user input: malformed file, bad parameter, schema violation."""


def check_positive_int(value: int, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise InputError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_probability(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0.0 or value > 1.0:
        raise InputError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def check_fraction(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0.0 or value >= 1.0:
        raise InputError(f"{name} must lie strictly inside (0, 1), got {value!r}")
    return value


def check_choice(value: str, choices: Iterable[str], name: str) -> str:
    if value not in tuple(choices):
        raise InputError(f"{name} must be one of {tuple(choices)}, got {value!r}")
    return value


def check_time_kind(value: str) -> str:
    return check_choice(value, TIME_KINDS, "time_kind")


def check_stream_kind(stream, kind: str, operation: str) -> None:
    if stream.time_kind != kind:
        raise InputError(
            f"{operation} requires a {kind}-time stream, got {stream.time_kind}"
        )


def as_id_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional")
    return arr
