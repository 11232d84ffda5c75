"""Student's t-tests with p-values from the regularized incomplete beta function."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

FLAVORS = ("two_sample_pooled", "welch", "paired")

_TINY = 1e-300


@dataclass(frozen=True)
class SampleVector:
    label: str
    values: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if len(values) < 2:
            raise ValueError(f"{self.label}: need at least 2 values, got {len(values)}")
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"{self.label}: values must be finite")


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    p_value: float
    degrees_of_freedom: float
    flavor: str


def _betacf(a: float, b: float, x: float, tol: float, max_iter: int) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _betainc(a: float, b: float, x: float, y: float, tol: float, max_iter: int) -> float:
    # y = 1 - x, passed separately so callers can supply it without cancellation
    log_x = math.log(x) if x <= 0.5 else math.log1p(-y)
    log_y = math.log(y) if y <= 0.5 else math.log1p(-x)
    front = math.exp(math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * log_x + b * log_y)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x, tol, max_iter) / a
    return 1.0 - front * _betacf(b, a, y, tol, max_iter) / b


def betainc_regularized(a: float, b: float, x: float, tol: float = 1e-15, max_iter: int = 10_000) -> float:
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    return _betainc(a, b, x, 1.0 - x, tol, max_iter)


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isnan(t):
        raise ValueError("t is NaN")
    if math.isinf(t):
        return 0.0
    if t == 0.0:
        return 1.0
    t2 = t * t
    p = _betainc(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2), 1e-15, 10_000)
    return min(1.0, max(0.0, p))


def t_critical(alpha: float, df: float, tol: float = 1e-12) -> float:
    """Two-sided critical value: the t > 0 with ``t_two_sided_p(t, df) == alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    lo, hi = 0.0, 1.0
    while t_two_sided_p(hi, df) > alpha:
        hi *= 2.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if t_two_sided_p(mid, df) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _mean_var(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, var


def t_test(a: SampleVector, b: SampleVector, flavor: str = "welch") -> TTestResult:
    """Two-sided t-test of mean(a) - mean(b)."""
    if flavor not in FLAVORS:
        raise ValueError(f"unknown flavor {flavor!r}; expected one of {FLAVORS}")
    na, nb = len(a.values), len(b.values)
    if flavor == "paired":
        if na != nb:
            raise ValueError(f"paired test needs equal lengths, got {na} and {nb}")
        diff, var = _mean_var([x - y for x, y in zip(a.values, b.values)])
        se = math.sqrt(var / na)
        df = float(na - 1)
    else:
        ma, va = _mean_var(a.values)
        mb, vb = _mean_var(b.values)
        diff = ma - mb
        if flavor == "two_sample_pooled":
            df = float(na + nb - 2)
            pooled = ((na - 1) * va + (nb - 1) * vb) / df
            se = math.sqrt(pooled * (1.0 / na + 1.0 / nb))
        else:
            qa, qb = va / na, vb / nb
            se = math.sqrt(qa + qb)
            if qa + qb > 0:
                df = (qa + qb) ** 2 / (qa * qa / (na - 1) + qb * qb / (nb - 1))
            else:
                df = float(na + nb - 2)
    if se == 0.0:
        if diff == 0.0:
            return TTestResult(0.0, 1.0, df, flavor)
        return TTestResult(math.copysign(math.inf, diff), 0.0, df, flavor)
    t = diff / se
    return TTestResult(t, t_two_sided_p(t, df), df, flavor)


def pairwise_matrix(vectors: Sequence[SampleVector], flavor: str = "welch") -> dict[tuple[str, str], TTestResult]:
    """t-test for every unordered pair (i < j), keyed by (label_i, label_j)."""
    if len(vectors) < 2:
        raise ValueError("need at least two sample vectors")
    labels = [v.label for v in vectors]
    if len(set(labels)) != len(labels):
        raise ValueError("sample vector labels must be unique")
    return {(a.label, b.label): t_test(a, b, flavor) for a, b in combinations(vectors, 2)}


def render_matrix(vectors: Sequence[SampleVector], results: dict[tuple[str, str], TTestResult]) -> str:
    """Markdown upper-triangular table: rows are all but the last model, columns all but the first."""
    labels = [v.label for v in vectors]
    cols = labels[1:]
    head = "| Models | " + " | ".join(f"{c} t | {c} p" for c in cols) + " |"
    rule = "|---|" + "---|---|" * len(cols)
    lines = [head, rule]
    for i, row in enumerate(labels[:-1]):
        cells = []
        for j, col in enumerate(cols, start=1):
            if j <= i:
                cells += ["-", "-"]
            else:
                res = results[row, col]
                cells += [f"{res.t_statistic:.3f}", f"{res.p_value:.3f}"]
        lines.append(f"| {row} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
