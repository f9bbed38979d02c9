"""Deviation metrics, correlation and Granger causality for daily price data.

p-values come from a regularised incomplete beta function evaluated with a
continued fraction, so no statistics package is needed at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date
from typing import Sequence, Union

import numpy as np

from .errors import DegenerateVariance, EmptySeries, InsufficientOverlap, SingularDesign

BETA_TOL = 1e-12
BETA_MAX_ITER = 10_000
PERFECT_FIT_RSS = 1e-14
_TINY = 1e-300


# -- special functions -------------------------------------------------------


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), modified Lentz method."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < BETA_TOL:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularised incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc needs a, b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    # the fraction converges fast only on this side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: float) -> float:
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    tail = 0.5 * betainc(0.5 * df, 0.5, df / (df + t * t))
    return 1.0 - tail if t > 0 else tail


def t_two_sided_p(t: float, df: float) -> float:
    if math.isinf(t):
        return 0.0
    return min(1.0, betainc(0.5 * df, 0.5, df / (df + t * t)))


def f_cdf(F: float, d1: float, d2: float) -> float:
    if F <= 0:
        return 0.0
    if math.isinf(F):
        return 1.0
    return betainc(0.5 * d1, 0.5 * d2, d1 * F / (d1 * F + d2))


def f_sf(F: float, d1: float, d2: float) -> float:
    """Upper tail P(X > F), computed directly to keep precision for large F."""
    if F <= 0:
        return 1.0
    if math.isinf(F):
        return 0.0
    return betainc(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * F))


# -- series ------------------------------------------------------------------


@dataclass(frozen=True)
class Point:
    value: float = 1.0

    @property
    def lower(self) -> float:
        return self.value


@dataclass(frozen=True)
class Band:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"band lo={self.lo} exceeds hi={self.hi}")

    @property
    def lower(self) -> float:
        return self.lo


Target = Union[Point, Band]
DateLike = Union[str, date]


def _check_dates(dates: Sequence[DateLike]):
    for a, b in zip(dates, dates[1:]):
        if not a < b:
            raise ValueError(f"dates must be strictly increasing ({a!r} then {b!r})")


@dataclass(frozen=True)
class PriceSeries:
    dates: tuple
    prices: np.ndarray
    target: Target = Point()

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "prices", np.asarray(self.prices, dtype=float))
        if len(self.dates) != len(self.prices):
            raise ValueError("dates and prices differ in length")
        _check_dates(self.dates)
        if np.any(self.prices <= 0):
            raise ValueError("prices must be > 0")

    @classmethod
    def from_values(cls, prices: Sequence[float], target: Target = Point()) -> "PriceSeries":
        return cls(tuple(range(len(prices))), prices, target)

    def __len__(self) -> int:
        return len(self.prices)


@dataclass(frozen=True)
class VSeries:
    dates: tuple
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(self.dates) != len(self.values):
            raise ValueError("dates and values differ in length")
        _check_dates(self.dates)
        if np.any(self.values < 0):
            raise ValueError("v must be >= 0")

    def __len__(self) -> int:
        return len(self.values)


def _as_price_series(series) -> PriceSeries:
    if isinstance(series, PriceSeries):
        return series
    return PriceSeries.from_values(list(series))


# -- deviation metrics -------------------------------------------------------


def squared_deviation_terms(series) -> np.ndarray:
    """Per-observation squared distance to the target (0 inside a band)."""
    s = _as_price_series(series)
    if len(s) == 0:
        raise EmptySeries("deviation needs at least one observation")
    p = s.prices
    if isinstance(s.target, Band):
        gap = np.maximum(s.target.lo - p, 0.0) + np.maximum(p - s.target.hi, 0.0)
    else:
        gap = p - s.target.value
    return gap * gap


def downward_terms(series) -> np.ndarray:
    """Per-observation squared shortfall; a VSeries is measured against 1."""
    if isinstance(series, VSeries):
        values, floor = series.values, 1.0
    else:
        s = _as_price_series(series)
        values, floor = s.prices, s.target.lower
    if len(values) == 0:
        raise EmptySeries("deviation needs at least one observation")
    gap = np.minimum(values - floor, 0.0)
    return gap * gap


def price_deviation(series) -> float:
    """Root-mean-square distance of the prices from the target."""
    return math.sqrt(float(np.mean(squared_deviation_terms(series))))


def downward_deviation(series) -> float:
    """Root-mean-square shortfall below the target (or the band's floor)."""
    return math.sqrt(float(np.mean(downward_terms(series))))


@dataclass(frozen=True)
class DeviationReport:
    deviation: float
    downward_deviation: float
    n: int


def deviation_report(series) -> DeviationReport:
    s = _as_price_series(series)
    return DeviationReport(price_deviation(s), downward_deviation(s), len(s))


def downward_clip(values, cap: float = 1.0):
    """Elementwise min(value, cap); keeps PriceSeries/VSeries wrappers."""
    if isinstance(values, PriceSeries):
        return PriceSeries(values.dates, np.minimum(values.prices, cap), values.target)
    if isinstance(values, VSeries):
        return VSeries(values.dates, np.minimum(values.values, cap))
    return np.minimum(np.asarray(values, dtype=float), cap)


# -- tests -------------------------------------------------------------------


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: float


def ttest_two_sample(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Welch two-sample t-test with a two-sided p-value."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise EmptySeries("each sample needs at least 2 observations")
    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    se2 = va + vb
    if se2 <= 0:
        raise DegenerateVariance("both samples are constant")
    t = float((a.mean() - b.mean()) / math.sqrt(se2))
    df = float(se2 * se2 / (va * va / (len(a) - 1) + vb * vb / (len(b) - 1)))
    return TTestResult(t, t_two_sided_p(t, df), df)


@dataclass(frozen=True)
class PearsonResult:
    rho: float
    p: float
    n: int


def _values_of(s):
    if isinstance(s, PriceSeries):
        return s.dates, s.prices
    if isinstance(s, VSeries):
        return s.dates, s.values
    return None, np.asarray(s, dtype=float)


def align(x, y) -> tuple[np.ndarray, np.ndarray]:
    """Inner join on dates when both inputs are dated, else positional pairing."""
    dx, vx = _values_of(x)
    dy, vy = _values_of(y)
    if dx is None or dy is None:
        if len(vx) != len(vy):
            raise InsufficientOverlap(f"undated series differ in length ({len(vx)} vs {len(vy)})")
        return vx, vy
    index = {d: i for i, d in enumerate(dy)}
    pairs = [(vx[i], vy[index[d]]) for i, d in enumerate(dx) if d in index]
    if not pairs:
        return np.empty(0), np.empty(0)
    xs, ys = zip(*pairs)
    return np.asarray(xs), np.asarray(ys)


def pearson(x, y) -> PearsonResult:
    xs, ys = align(x, y)
    n = len(xs)
    if n < 3:
        raise InsufficientOverlap(f"pearson needs >= 3 paired observations, got {n}")
    dx, dy = xs - xs.mean(), ys - ys.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise DegenerateVariance("pearson needs nonconstant series")
    rho = float(dx @ dy) / math.sqrt(sxx * syy)
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) >= 1.0:
        return PearsonResult(rho, 0.0, n)
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return PearsonResult(rho, t_two_sided_p(t, n - 2), n)


@dataclass(frozen=True)
class GrangerResult:
    F: float
    p: float
    lag: int
    n_used: int
    perfect_fit: bool = False


def _lagged(series: np.ndarray, lag: int) -> np.ndarray:
    n = len(series)
    return np.column_stack([series[lag - k: n - k] for k in range(1, lag + 1)])


def _rss(X: np.ndarray, y: np.ndarray) -> float:
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularDesign("lagged regressors are collinear")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ beta
    return float(r @ r)


def granger(cause, effect, lag: int = 1) -> GrangerResult:
    """F-test of whether ``lag`` lags of ``cause`` help predict ``effect``."""
    if lag < 1:
        raise ValueError("lag must be >= 1")
    c, e = align(cause, effect)
    n = len(e)
    nobs = n - lag
    dof = nobs - 2 * lag - 1
    if dof <= 0:
        raise InsufficientOverlap(f"{n} paired observations are too few for lag {lag}")
    y = e[lag:]
    if np.ptp(y) == 0:
        raise DegenerateVariance("effect series is constant")
    const = np.ones((nobs, 1))
    restricted = np.hstack([const, _lagged(e, lag)])
    unrestricted = np.hstack([restricted, _lagged(c, lag)])
    rss_r = _rss(restricted, y)
    rss_u = _rss(unrestricted, y)
    if rss_u < PERFECT_FIT_RSS:
        return GrangerResult(math.inf, 0.0, lag, nobs, perfect_fit=True)
    F = max(0.0, ((rss_r - rss_u) / lag) / (rss_u / dof))
    return GrangerResult(F, f_sf(F, lag, dof), lag, nobs)


@dataclass(frozen=True)
class CausalityReport:
    pearson_rho: float
    pearson_p: float
    granger_F: float
    granger_p: float
    lag: int
    n_used: int
    degenerate: bool = False


def causality_report(price: PriceSeries, v: VSeries, lag: int = 1) -> CausalityReport:
    """Correlation and v-to-price Granger test on values clipped at 1."""
    p_c, v_c = downward_clip(price), downward_clip(v)
    try:
        pr = pearson(p_c, v_c)
        gr = granger(v_c, p_c, lag)
    except (DegenerateVariance, SingularDesign):
        n = len(align(p_c, v_c)[0])
        return CausalityReport(math.nan, math.nan, math.nan, math.nan, lag, n, degenerate=True)
    return CausalityReport(pr.rho, pr.p, gr.F, gr.p, lag, gr.n_used, degenerate=gr.perfect_fit)


def rank_by_deviation(reports: dict[str, DeviationReport], downward: bool = False) -> dict[str, int]:
    """Ordinal ranks, 1 = most stable."""
    key = (lambda n: reports[n].downward_deviation) if downward else (lambda n: reports[n].deviation)
    return {name: i + 1 for i, name in enumerate(sorted(reports, key=lambda n: (key(n), n)))}


def insignificant_pairs(series: dict[str, PriceSeries], alpha: float = 0.1, downward: bool = False) -> list[tuple[str, str, float]]:
    """Pairs whose per-day squared deviations do not differ at level ``alpha``."""
    terms = {k: (downward_terms(s) if downward else squared_deviation_terms(s)) for k, s in series.items()}
    names = sorted(terms)
    out = []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            try:
                res = ttest_two_sample(terms[a], terms[b])
            except DegenerateVariance:
                out.append((a, b, 1.0))
                continue
            if res.p > alpha:
                out.append((a, b, res.p))
    return out
