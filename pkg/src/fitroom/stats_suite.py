"""Descriptive statistics and the two black-box validation tests.

Test 1 is a two-sided Mann-Whitney U test on waiting-time samples; test 2
compares sample variances by percentage difference. ``histogram`` bins a
sample for frequency plots.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from itertools import groupby
from typing import Iterable, Sequence

import numpy as np

EXACT_MAX_POOLED = 16
DEFAULT_ALPHA = 0.05
DEFAULT_VARIANCE_THRESHOLD = 10.0


class EmptySample(ValueError):
    pass


class VarianceUndefined(ValueError):
    pass


class ZeroReferenceVariance(ValueError):
    pass


class InvalidBinWidth(ValueError):
    pass


class DegenerateSamples(UserWarning):
    """Pooled sample is constant; the test reports p = 1 and flags the result."""


@dataclass(frozen=True)
class Sample:
    values: tuple[float, ...]
    label: str = ""

    def __init__(self, values: Iterable[float], label: str = "") -> None:
        vals = tuple(float(v) for v in values)
        bad = [v for v in vals if not math.isfinite(v)]
        if bad:
            raise ValueError(f"sample {label!r} contains non-finite values: {bad[:3]}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "label", label)

    def __len__(self) -> int:
        return len(self.values)


def _values(sample: Sample | Sequence[float]) -> tuple[float, ...]:
    if isinstance(sample, Sample):
        return sample.values
    return Sample(sample).values


# -- descriptive ----------------------------------------------------------------


@dataclass(frozen=True)
class Description:
    n: int
    mean: float
    median: float
    std_dev: float
    variance: float

    def to_dict(self) -> dict:
        return asdict(self)


def sample_variance(sample: Sample | Sequence[float]) -> float:
    """Unbiased (n - 1) variance."""
    vals = _values(sample)
    if len(vals) < 2:
        raise VarianceUndefined(f"variance needs at least 2 values, got {len(vals)}")
    return float(np.var(np.asarray(vals), ddof=1))


def describe(sample: Sample | Sequence[float]) -> Description:
    """Mean, median, standard deviation and (n - 1) variance.

    >>> describe([1, 2, 3])
    Description(n=3, mean=2.0, median=2.0, std_dev=1.0, variance=1.0)
    """
    vals = _values(sample)
    if not vals:
        raise EmptySample("cannot describe an empty sample")
    var = sample_variance(vals)
    arr = np.asarray(vals)
    return Description(len(vals), float(arr.mean()), float(np.median(arr)), math.sqrt(var), var)


# -- Mann-Whitney -----------------------------------------------------------------


@dataclass(frozen=True)
class MannWhitneyResult:
    u_statistic: float
    method: str
    z: float | None
    p_two_sided: float
    alpha: float
    reject_null: bool
    n1: int
    n2: int
    degenerate: bool = False

    def verdict(self) -> str:
        if self.reject_null:
            return f"p={self.p_two_sided:.4f} < alpha {self.alpha:g}: reject the null hypothesis"
        return f"p={self.p_two_sided:.4f} >= alpha {self.alpha:g}: insufficient evidence to reject"

    def to_dict(self) -> dict:
        return asdict(self)


def rankdata(values: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the average of their positions."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    pos = 0
    for _, grp in groupby(order, key=values.__getitem__):
        idx = list(grp)
        avg = pos + (len(idx) + 1) / 2.0
        for i in idx:
            ranks[i] = avg
        pos += len(idx)
    return ranks


def _tie_term(values: Sequence[float]) -> int:
    return sum(t ** 3 - t for t in (len(list(g)) for _, g in groupby(sorted(values))))


def _exact_p(doubled_ranks: Sequence[int], n1: int, observed_dev: int) -> float:
    """P(|n1(N+1) - S| >= observed_dev) over all size-n1 subsets of the pooled ranks.

    ``S`` is the doubled rank sum of the subset; doubling keeps midranks integral.
    """
    N = len(doubled_ranks)
    top = sum(doubled_ranks)
    # ways[k][s]: subsets of size k with doubled rank sum s
    ways = [[0] * (top + 1) for _ in range(n1 + 1)]
    ways[0][0] = 1
    for r in doubled_ranks:
        for k in range(n1, 0, -1):
            row, prev = ways[k], ways[k - 1]
            for s in range(top, r - 1, -1):
                if prev[s - r]:
                    row[s] += prev[s - r]
    centre = n1 * (N + 1)
    hits = sum(c for s, c in enumerate(ways[n1]) if c and abs(centre - s) >= observed_dev)
    return hits / math.comb(N, n1)


def mann_whitney_u(a: Sample | Sequence[float], b: Sample | Sequence[float],
                   alpha: float = DEFAULT_ALPHA, method: str = "auto") -> MannWhitneyResult:
    """Two-sided Mann-Whitney U test of ``a`` against ``b``.

    ``u_statistic`` is U for ``a``: the number of (a, b) pairs with a > b,
    ties counting one half. ``method="auto"`` enumerates the exact
    permutation distribution when the pooled size is at most 16 and uses the
    tie-corrected normal approximation with continuity correction otherwise.
    """
    x, y = _values(a), _values(b)
    n1, n2 = len(x), len(y)
    if n1 < 1 or n2 < 1:
        raise EmptySample("both samples need at least one value")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if method not in ("auto", "exact", "normal"):
        raise ValueError(f"unknown method {method!r}")
    N = n1 + n2
    pooled = x + y
    ranks = rankdata(pooled)
    r1 = math.fsum(ranks[:n1])
    u1 = r1 - n1 * (n1 + 1) / 2.0
    degenerate = min(pooled) == max(pooled)
    if degenerate:
        warnings.warn("pooled sample is constant; p-value set to 1", DegenerateSamples, stacklevel=2)

    use_exact = method == "exact" or (method == "auto" and N <= EXACT_MAX_POOLED)
    if use_exact:
        doubled = [int(round(2 * r)) for r in ranks]
        observed = abs(n1 * (N + 1) - sum(doubled[:n1]))
        p = 1.0 if degenerate else _exact_p(doubled, n1, observed)
        z = None
        used = "exact_permutation"
    else:
        used = "normal_approximation"
        var = (n1 * n2 / 12.0) * ((N + 1) - _tie_term(pooled) / (N * (N - 1)))
        if degenerate or var <= 0:
            z, p = 0.0, 1.0
        else:
            dev = u1 - n1 * n2 / 2.0
            corrected = max(abs(dev) - 0.5, 0.0)
            z = math.copysign(corrected / math.sqrt(var), dev)
            p = math.erfc(abs(z) / math.sqrt(2.0))
    p = min(max(p, 0.0), 1.0)
    return MannWhitneyResult(u1, used, z, p, alpha, p < alpha, n1, n2, degenerate)


# -- variance comparison ------------------------------------------------------------


@dataclass(frozen=True)
class VarianceComparison:
    variance_model: float
    variance_reference: float
    percent_difference: float
    similarity_threshold: float
    verdict: str

    def to_dict(self) -> dict:
        return asdict(self)


def compare_variances(variance_model: float, variance_reference: float,
                      threshold_percent: float = DEFAULT_VARIANCE_THRESHOLD) -> VarianceComparison:
    """Percent difference of a model variance from a reference variance.

    >>> round(compare_variances(1.96, 3.01).percent_difference, 1)
    34.9
    """
    if variance_reference <= 0:
        raise ZeroReferenceVariance("reference variance must be > 0")
    if variance_model < 0:
        raise ValueError("variance cannot be negative")
    pct = abs(variance_model - variance_reference) / variance_reference * 100.0
    verdict = "similar" if pct <= threshold_percent else "different"
    return VarianceComparison(variance_model, variance_reference, pct, threshold_percent, verdict)


def variance_comparison(model: Sample | Sequence[float], reference: Sample | Sequence[float],
                        threshold_percent: float = DEFAULT_VARIANCE_THRESHOLD) -> VarianceComparison:
    return compare_variances(sample_variance(model), sample_variance(reference), threshold_percent)


# -- histogram ----------------------------------------------------------------------


@dataclass(frozen=True)
class HistogramBin:
    start: float
    end: float
    count: int


def _bin_index(x: float, origin: float, width: float) -> int:
    k = math.floor((x - origin) / width)
    # settle float round-off against the bin edges actually reported
    while x < origin + k * width:
        k -= 1
    while x >= origin + (k + 1) * width:
        k += 1
    return k


def histogram(sample: Sample | Sequence[float], bin_width: float,
              origin: float = 0.0) -> list[HistogramBin]:
    """Counts over half-open bins [origin + k*w, origin + (k+1)*w).

    Bins run contiguously from the lowest to the highest occupied bin.

    >>> [b.count for b in histogram([0.5, 1.2, 1.4, 2.8], 1.0)]
    [1, 2, 1]
    """
    if not (bin_width > 0 and math.isfinite(bin_width)):
        raise InvalidBinWidth(f"bin width must be > 0, got {bin_width}")
    vals = _values(sample)
    if not vals:
        return []
    counts: dict[int, int] = {}
    for x in vals:
        k = _bin_index(x, origin, bin_width)
        counts[k] = counts.get(k, 0) + 1
    lo, hi = min(counts), max(counts)
    return [HistogramBin(origin + k * bin_width, origin + (k + 1) * bin_width, counts.get(k, 0))
            for k in range(lo, hi + 1)]
