"""One-way ANOVA with F-distribution p-values and Bonferroni adjustment."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
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
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    if a == b and x == 0.5:
        return 0.5
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _check_df(d1, d2):
    if d1 < 1 or d2 < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got ({d1}, {d2})")


def f_cdf(x: float, d1: float, d2: float) -> float:
    """CDF of the F distribution with ``(d1, d2)`` degrees of freedom."""
    _check_df(d1, d2)
    if x < 0 or math.isnan(x):
        raise ValueError(f"x must be >= 0, got {x}")
    if math.isinf(x):
        return 1.0
    return betainc_reg(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))


def f_sf(x: float, d1: float, d2: float) -> float:
    """Upper tail ``1 - f_cdf``, computed without cancellation."""
    _check_df(d1, d2)
    if x < 0 or math.isnan(x):
        raise ValueError(f"x must be >= 0, got {x}")
    if math.isinf(x):
        return 0.0
    return betainc_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x))


@dataclass(frozen=True)
class AnovaResult:
    f_value: float
    df_between: int
    df_within: int
    p: float
    p_adjusted: float | None = None


def one_way_anova(groups: Sequence[Sequence[float]]) -> AnovaResult:
    """Classical between/within F test; ``p_adjusted`` is left unset."""
    arrays = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(arrays) < 2:
        raise ValueError("one-way ANOVA needs at least two groups")
    if any(a.size < 2 for a in arrays):
        raise ValueError("every group needs at least two samples")
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise ValueError("samples must be finite")
    n = sum(a.size for a in arrays)
    k = len(arrays)
    grand = np.concatenate(arrays).mean()
    ss_between = float(sum(a.size * (a.mean() - grand) ** 2 for a in arrays))
    ss_within = float(sum(((a - a.mean()) ** 2).sum() for a in arrays))
    dfb, dfw = k - 1, n - k
    if ss_within == 0.0:
        f = 0.0 if ss_between == 0.0 else math.inf
    else:
        f = (ss_between / dfb) / (ss_within / dfw)
    p = f_sf(f, dfb, dfw)
    return AnovaResult(f, dfb, dfw, min(1.0, max(0.0, p)))


def bonferroni(pvals: Sequence[float], m: int | None = None) -> list[float]:
    """``min(1, p * m)`` elementwise; ``m`` defaults to the number of p-values."""
    pvals = [float(p) for p in pvals]
    if m is None:
        m = len(pvals)
    if m < len(pvals):
        raise ValueError(f"m={m} smaller than the number of tests {len(pvals)}")
    for p in pvals:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value {p} outside [0, 1]")
    return [min(1.0, p * m) for p in pvals]


def per_frequency_anova(freqs: Sequence[float], group_data: Sequence[np.ndarray],
                        m: int | None = None) -> list[tuple[float, AnovaResult]]:
    """ANOVA at each frequency.

    ``group_data[g]`` is a ``(subjects, frequencies)`` array for group ``g``.
    """
    mats = [np.atleast_2d(np.asarray(g, dtype=float)) for g in group_data]
    nf = len(freqs)
    if any(mat.shape[1] != nf for mat in mats):
        raise ValueError("group matrices must have one column per frequency")
    raw = [one_way_anova([mat[:, i] for mat in mats]) for i in range(nf)]
    adj = bonferroni([r.p for r in raw], nf if m is None else m)
    return [(float(f), AnovaResult(r.f_value, r.df_between, r.df_within, r.p, pa))
            for f, r, pa in zip(freqs, raw, adj)]


def write_anova_csv(path, rows: Sequence[tuple[float, AnovaResult]], alpha: float = 0.05) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frequency", "F", "p", "p_adjusted", "significant"])
        for freq, r in rows:
            w.writerow([repr(freq), repr(r.f_value), repr(r.p), repr(r.p_adjusted),
                        int(r.p_adjusted < alpha)])
