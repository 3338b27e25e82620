"""Independent reference computations used to freeze expected values in tests.

None of these share code with the package under test.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction


def doubled_u(x, y) -> int:
    """2*U for x straight from the definition: pairs with x > y count 2, ties 1."""
    return sum(2 if xi > yj else 1 if xi == yj else 0 for xi in x for yj in y)


def mann_whitney_bruteforce_p(a, b) -> Fraction:
    """Exact two-sided p by relabelling the pooled values every possible way."""
    pooled = list(a) + list(b)
    n1, n2 = len(a), len(b)
    centre = n1 * n2  # 2 * (n1*n2/2)
    observed = abs(doubled_u(a, b) - centre)
    hits = total = 0
    for idx in itertools.combinations(range(len(pooled)), n1):
        chosen = set(idx)
        x = [pooled[i] for i in idx]
        y = [pooled[i] for i in range(len(pooled)) if i not in chosen]
        total += 1
        if abs(doubled_u(x, y) - centre) >= observed:
            hits += 1
    assert total == math.comb(n1 + n2, n1)
    return Fraction(hits, total)


def single_server_waits(arrivals, services):
    """Lindley recursion for a FIFO single-server queue: waits in queue."""
    waits = []
    free_at = 0.0
    for t, s in zip(arrivals, services):
        start = max(t, free_at)
        waits.append(start - t)
        free_at = start + s
    return waits
