"""Evaluation statistics: MSE, Spearman correlation, run aggregation, and
one-tailed independent two-sample Student t-tests.

The t-test is the pooled equal-variance form with df = n1 + n2 - 2 and
t = (mean(baseline) - mean(treatment)) / (s_p * sqrt(1/n1 + 1/n2)). The
one-tailed p-value covers "treatment improves": the left tail when higher
values are better, the right tail when lower values are better. The t CDF
is evaluated through the regularized incomplete beta function.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

HIGHER_BETTER = "higher_better"
LOWER_BETTER = "lower_better"

_BETA_EPS = 1e-15
_BETA_TINY = 1e-300
_BETA_MAX_ITER = 500


@dataclass(frozen=True)
class RunSeries:
    """Metric values from repeated seeded runs of one configuration."""

    label: str
    values: tuple[float, ...]
    direction: str = HIGHER_BETTER

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError(f"series {self.label!r} has no values")
        if self.direction not in (HIGHER_BETTER, LOWER_BETTER):
            raise ValueError(f"unknown direction {self.direction!r}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    df: int
    p_value: float


def mse(pred: Sequence[float], gold: Sequence[float]) -> float:
    if len(pred) != len(gold):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(gold)}")
    if not pred:
        raise ValueError("mse of empty sequences is undefined")
    return sum((p - g) ** 2 for p, g in zip(pred, gold)) / len(pred)


def fractional_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks with ties averaged."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def _pearson(x: Sequence[float], y: Sequence[float]) -> float:
    n = len(x)
    mean_x = sum(x) / n
    mean_y = sum(y) / n
    dx = [v - mean_x for v in x]
    dy = [v - mean_y for v in y]
    var_x = sum(d * d for d in dx)
    var_y = sum(d * d for d in dy)
    if var_x == 0.0 or var_y == 0.0:
        raise ValueError("correlation undefined: zero rank variance")
    r = sum(a * b for a, b in zip(dx, dy)) / math.sqrt(var_x * var_y)
    return max(-1.0, min(1.0, r))


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of tie-averaged ranks."""
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ValueError("spearman needs at least 2 points")
    return _pearson(fractional_ranks(x), fractional_ranks(y))


def aggregate(series: RunSeries) -> tuple[float, float]:
    """(mean, sample standard deviation with n-1 denominator)."""
    values = series.values
    if len(values) < 2:
        raise ValueError(f"series {series.label!r}: need >= 2 values for a standard deviation")
    mean = sum(values) / len(values)
    variance = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(variance)


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Modified Lentz evaluation of the incomplete beta continued fraction."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETA_TINY:
        d = _BETA_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        numerator = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + numerator * d
        if abs(d) < _BETA_TINY:
            d = _BETA_TINY
        c = 1.0 + numerator / c
        if abs(c) < _BETA_TINY:
            c = _BETA_TINY
        d = 1.0 / d
        h *= d * c
        numerator = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + numerator * d
        if abs(d) < _BETA_TINY:
            d = _BETA_TINY
        c = 1.0 + numerator / c
        if abs(c) < _BETA_TINY:
            c = _BETA_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) via the continued fraction, switched for fast convergence."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(1.0 - x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def t_cdf(t: float, df: int) -> float:
    """P(T <= t) for a Student t variable with df degrees of freedom."""
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    if t == 0.0:
        return 0.5
    # P(|T| > |t|) = I_x(df/2, 1/2) with x = df / (df + t^2)
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x)
    return tail if t < 0.0 else 1.0 - tail


def t_test_one_tailed(baseline: RunSeries, treatment: RunSeries) -> TTestResult:
    """Pooled independent two-sample t-test of "treatment improves"."""
    n1, n2 = len(baseline.values), len(treatment.values)
    if n1 < 2 or n2 < 2:
        raise ValueError("both series need at least 2 runs")
    if baseline.direction != treatment.direction:
        raise ValueError(
            f"direction mismatch: {baseline.direction} vs {treatment.direction}"
        )
    mean1, std1 = aggregate(baseline)
    mean2, std2 = aggregate(treatment)
    df = n1 + n2 - 2
    pooled_variance = ((n1 - 1) * std1 ** 2 + (n2 - 1) * std2 ** 2) / df
    if pooled_variance == 0.0:
        if mean1 != mean2:
            raise ValueError("degenerate t-test: zero pooled variance with unequal means")
        t = 0.0
    else:
        t = (mean1 - mean2) / math.sqrt(pooled_variance * (1.0 / n1 + 1.0 / n2))
    if baseline.direction == HIGHER_BETTER:
        p = t_cdf(t, df)
    else:
        p = 1.0 - t_cdf(t, df)
    return TTestResult(t_statistic=t, df=df, p_value=p)


def format_fixed(value: float, places: int = 4) -> str:
    """Decimal formatting that rounds halves away from zero."""
    quantum = Decimal(1).scaleb(-places)
    return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


ReportRow = tuple[str, "TTestResult | tuple[float, float]"]


def _row_cells(item) -> list[str]:
    if isinstance(item, TTestResult):
        return [format_fixed(item.t_statistic), str(item.df), format_fixed(item.p_value)]
    mean, std = item
    return [format_fixed(mean), format_fixed(std)]


def _table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = ["  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(headers, widths)))]
    for row in rows:
        lines.append(
            "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
        )
    return "\n".join(lines)


def render_report(rows: Sequence[ReportRow]) -> str:
    """Fixed-width text table, 4 decimal places, tiny p-values shown as 0.0000."""
    ttest_rows = [(label, item) for label, item in rows if isinstance(item, TTestResult)]
    agg_rows = [(label, item) for label, item in rows if not isinstance(item, TTestResult)]
    blocks = []
    if ttest_rows or not agg_rows:
        blocks.append(
            _table(
                ["label", "t-statistic", "df", "p-value"],
                [[label] + _row_cells(item) for label, item in ttest_rows],
            )
        )
    if agg_rows:
        blocks.append(
            _table(
                ["label", "mean", "stddev"],
                [[label] + _row_cells(item) for label, item in agg_rows],
            )
        )
    return "\n\n".join(blocks)


def render_report_csv(rows: Sequence[ReportRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["label", "t_statistic", "df", "p_value", "mean", "stddev"])
    for label, item in rows:
        if isinstance(item, TTestResult):
            writer.writerow(
                [label, format_fixed(item.t_statistic), item.df, format_fixed(item.p_value), "", ""]
            )
        else:
            mean, std = item
            writer.writerow([label, "", "", "", format_fixed(mean), format_fixed(std)])
    return buffer.getvalue()


def load_run_file(path: str, direction: str) -> dict[str, RunSeries]:
    """Read a run CSV (header run,metric,value) into one series per metric."""
    by_metric: dict[str, list[float]] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        required = {"run", "metric", "value"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected CSV header run,metric,value")
        for row in reader:
            by_metric.setdefault(row["metric"], []).append(float(row["value"]))
    return {
        metric: RunSeries(label=metric, values=tuple(values), direction=direction)
        for metric, values in by_metric.items()
    }
