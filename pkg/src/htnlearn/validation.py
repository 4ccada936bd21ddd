"""Input validation helpers shared by the estimators."""
from __future__ import annotations

import numbers


def check_fraction(value, name: str) -> float:
    if not isinstance(value, numbers.Real) or not 0.0 <= float(value) <= 1.0:
        raise ValueError(f"{name} must be a number in [0, 1], got {value!r}")
    return float(value)


def check_positive_int(value, name: str) -> int:
    if not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_sample_set(samples) -> None:
    """Reject anything that does not look like a SampleSet with executable-shaped traces."""
    from .sampling import SampleSet

    if not isinstance(samples, SampleSet):
        raise TypeError(f"expected a SampleSet, got {type(samples).__name__}")
    for i, trace in enumerate(samples.positive):
        n = len(trace.steps)
        for a in trace.annotations:
            if not 0 <= a.start <= a.end <= n:
                raise ValueError(f"annotation {a.task} out of bounds in trace {i}")
    for seq in samples.negative:
        if not seq:
            raise ValueError("negative sequences must be non-empty")
