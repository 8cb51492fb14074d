"""Mean and sample standard deviation, shared by corpus stats and aggregation.

SD uses the n-1 denominator throughout the package; a single observation has
SD 0 by convention.
"""

from __future__ import annotations

import math
from typing import Sequence


def mean(values: Sequence[float]) -> float:
    if not values:
        raise ValueError("mean of empty sequence")
    return sum(values) / len(values)


def sample_sd(values: Sequence[float]) -> float:
    if not values:
        raise ValueError("sample_sd of empty sequence")
    if len(values) == 1:
        return 0.0
    m = mean(values)
    return math.sqrt(sum((v - m) ** 2 for v in values) / (len(values) - 1))
