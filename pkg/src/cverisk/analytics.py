"""Correlation, conditional, distribution, and benchmark statistics over
scored vulnerability records."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .encoding import FACTOR_NAMES
from .model import ScoredRecord, Severity, SeverityThresholds, classify
from .vector import (
    AttackComplexity,
    AttackVector,
    ImpactLevel,
    PrivilegesRequired,
    Scope,
    UserInteraction,
    variant_label,
)


class TooFewRowsError(ValueError):
    """The statistic needs more rows than were supplied."""


class UnknownFactorError(ValueError):
    """A factor or score selector name is not registered."""


class DimensionMismatchError(ValueError):
    """Vector/matrix shapes do not line up."""


class EmptyInputError(ValueError):
    """The statistic is undefined on empty input."""


class TooFewPointsError(ValueError):
    """Density estimation needs at least two points."""


class LengthMismatchError(ValueError):
    """Paired inputs must have equal length."""


# --------------------------------------------------------------------------
# factor selectors
# --------------------------------------------------------------------------

_IMPACT_ORDER = (ImpactLevel.NONE, ImpactLevel.LOW, ImpactLevel.HIGH)


def _domain(enum: type) -> tuple[str, ...]:
    return tuple(variant_label(m) for m in enum)


def _combined_cia_label(sr: ScoredRecord, t: SeverityThresholds) -> str:
    worst = max((sr.vector.c, sr.vector.i, sr.vector.a), key=_IMPACT_ORDER.index)
    return variant_label(worst)


def _official_severity_label(sr: ScoredRecord, t: SeverityThresholds) -> str:
    if sr.record.official_score is None:
        raise ValueError(f"{sr.record.cve_id} has no official score")
    return classify(sr.record.official_score, t).label


@dataclass(frozen=True)
class _Factor:
    domain: tuple[str, ...]
    extract: Callable[[ScoredRecord, SeverityThresholds], str]


_SEVERITY_DOMAIN = tuple(s.label for s in Severity)

CATEGORICAL_FACTORS: dict[str, _Factor] = {
    "AV": _Factor(_domain(AttackVector), lambda sr, t: variant_label(sr.vector.av)),
    "AC": _Factor(_domain(AttackComplexity), lambda sr, t: variant_label(sr.vector.ac)),
    "PR": _Factor(_domain(PrivilegesRequired), lambda sr, t: variant_label(sr.vector.pr)),
    "UI": _Factor(_domain(UserInteraction), lambda sr, t: variant_label(sr.vector.ui)),
    "S": _Factor(_domain(Scope), lambda sr, t: variant_label(sr.vector.scope)),
    "C": _Factor(_domain(ImpactLevel), lambda sr, t: variant_label(sr.vector.c)),
    "I": _Factor(_domain(ImpactLevel), lambda sr, t: variant_label(sr.vector.i)),
    "A": _Factor(_domain(ImpactLevel), lambda sr, t: variant_label(sr.vector.a)),
    "combined_cia": _Factor(_domain(ImpactLevel), _combined_cia_label),
    "severity": _Factor(_SEVERITY_DOMAIN, lambda sr, t: sr.severity.label),
    "official_severity": _Factor(_SEVERITY_DOMAIN, _official_severity_label),
}

SCORE_SELECTORS: dict[str, Callable[[ScoredRecord], float]] = {
    "official": lambda sr: sr.record.official_score,
    "composite": lambda sr: sr.composite,
}


def _factor(name: str) -> _Factor:
    try:
        return CATEGORICAL_FACTORS[name]
    except KeyError:
        raise UnknownFactorError(f"unknown categorical factor {name!r}") from None


def _score_selector(name: str) -> Callable[[ScoredRecord], float]:
    try:
        return SCORE_SELECTORS[name]
    except KeyError:
        raise UnknownFactorError(f"unknown score selector {name!r}") from None


# --------------------------------------------------------------------------
# factor matrix and correlations
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FactorMatrix:
    """Rows of numeric risk factors, columns ordered like ``factor_names``."""

    factor_names: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=float)
        object.__setattr__(self, "rows", rows)
        if rows.ndim != 2 or rows.shape[1] != len(self.factor_names):
            raise DimensionMismatchError("rows must be n x len(factor_names)")
        if len(self.factor_names) < 2:
            raise ValueError("need at least two factors")
        if len(set(self.factor_names)) != len(self.factor_names):
            raise ValueError("factor names must be unique")

    @classmethod
    def from_scored(
        cls, records: Sequence[ScoredRecord], include_official: bool = True
    ) -> FactorMatrix:
        """Eight encoded factors per record, plus the official CVSS column."""
        names = FACTOR_NAMES + (("CVSS",) if include_official else ())
        data = np.empty((len(records), len(names)), dtype=float)
        for k, sr in enumerate(records):
            row = list(sr.factors)
            if include_official:
                if sr.record.official_score is None:
                    raise ValueError(f"{sr.record.cve_id} has no official score")
                row.append(sr.record.official_score)
            data[k] = row
        return cls(names, data)


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: tuple[str, ...]
    values: np.ndarray
    constant_labels: tuple[str, ...] = ()

    def undefined_pairs(self) -> list[tuple[str, str]]:
        """Off-diagonal pairs whose correlation is undefined (NaN)."""
        out = []
        m = len(self.labels)
        for i in range(m):
            for j in range(i + 1, m):
                if math.isnan(self.values[i, j]):
                    out.append((self.labels[i], self.labels[j]))
        return out


def correlation_matrix(fm: FactorMatrix) -> CorrelationMatrix:
    """Pearson correlation for every factor pair.

    Columns with no variation produce NaN entries and are reported in
    ``constant_labels`` instead of being silently zeroed. Needs at least
    two rows.
    """
    x = fm.rows
    n, m = x.shape
    if n < 2:
        raise TooFewRowsError(f"need at least 2 rows, got {n}")
    constant = np.array([bool(np.all(col == col[0])) for col in x.T])
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered
    scale = np.sqrt(np.diag(cov).copy())
    scale[constant] = np.nan
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = cov / np.outer(scale, scale)
    corr = np.clip(corr, -1.0, 1.0)
    for k in range(m):
        corr[k, k] = math.nan if constant[k] else 1.0
    corr[constant, :] = math.nan
    corr[:, constant] = math.nan
    corr = np.triu(corr) + np.triu(corr, 1).T  # mirror for exact symmetry
    labels = fm.factor_names
    flagged = tuple(label for label, const in zip(labels, constant) if const)
    return CorrelationMatrix(labels, corr, flagged)


# --------------------------------------------------------------------------
# conditional matrices
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionalMatrix:
    """P[row][col] = P(Y=col | X=row), with the raw counts retained."""

    x_name: str
    y_name: str
    row_domain: tuple[str, ...]
    col_domain: tuple[str, ...]
    probs: np.ndarray
    counts: np.ndarray
    empty_rows: tuple[str, ...] = ()


def conditional_matrix(
    records: Sequence[ScoredRecord],
    x: str,
    y: str,
    *,
    thresholds: SeverityThresholds = SeverityThresholds(),
) -> ConditionalMatrix:
    """Conditional distribution of factor ``y`` given factor ``x``.

    Rows over categories of ``x`` that never occur are all-zero and flagged
    in ``empty_rows`` rather than renormalized.
    """
    fx = _factor(x)
    fy = _factor(y)
    counts = np.zeros((len(fx.domain), len(fy.domain)), dtype=int)
    row_index = {label: k for k, label in enumerate(fx.domain)}
    col_index = {label: k for k, label in enumerate(fy.domain)}
    for sr in records:
        counts[row_index[fx.extract(sr, thresholds)], col_index[fy.extract(sr, thresholds)]] += 1
    row_totals = counts.sum(axis=1)
    probs = np.zeros(counts.shape, dtype=float)
    filled = row_totals > 0
    probs[filled] = counts[filled] / row_totals[filled, None]
    empty = tuple(label for label, total in zip(fx.domain, row_totals) if total == 0)
    return ConditionalMatrix(x, y, fx.domain, fy.domain, probs, counts, empty)


# --------------------------------------------------------------------------
# joint risk index
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class JointRiskConfig:
    """Pair weights and per-factor activation thresholds for the joint index."""

    weights: np.ndarray
    thresholds: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        t = np.asarray(self.thresholds, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "thresholds", t)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or t.shape != (w.shape[0],):
            raise DimensionMismatchError("weights must be m x m and thresholds length m")
        if not np.all(np.isfinite(w)):
            raise ValueError("pair weights must be finite")
        if not np.allclose(w, w.T, atol=1e-12):
            raise ValueError("pair weights must be symmetric")
        if not np.all(np.isfinite(t)):
            raise ValueError("thresholds must be finite")

    @classmethod
    def from_data(cls, corr: CorrelationMatrix, fm: FactorMatrix) -> JointRiskConfig:
        """Defaults: |correlation| as pair weight (0 where undefined) and
        column medians as activation thresholds."""
        weights = np.abs(np.nan_to_num(corr.values, nan=0.0))
        return cls(weights, np.median(fm.rows, axis=0))


def joint_risk_index(
    factors: Sequence[float] | np.ndarray, corr: CorrelationMatrix, cfg: JointRiskConfig
) -> float:
    """Correlation-weighted sum over factor pairs at or above their thresholds.

    Pairs with an undefined correlation contribute nothing.
    """
    f = np.asarray(factors, dtype=float)
    m = len(corr.labels)
    if f.shape != (m,):
        raise DimensionMismatchError(f"expected {m} factors, got {f.shape}")
    if cfg.weights.shape != (m, m):
        raise DimensionMismatchError("pair-weight matrix does not match the factor count")
    active = f >= cfg.thresholds
    terms = cfg.weights * np.nan_to_num(corr.values, nan=0.0)
    mask = np.triu(np.outer(active, active), k=1)
    return float(np.sum(terms[mask]))


# --------------------------------------------------------------------------
# distributions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Ecdf:
    """Right-continuous empirical CDF: F(r) is the share of scores <= r."""

    sorted_scores: np.ndarray

    def __post_init__(self) -> None:
        scores = np.sort(np.asarray(self.sorted_scores, dtype=float))
        if scores.size == 0:
            raise EmptyInputError("ecdf requires at least one score")
        object.__setattr__(self, "sorted_scores", scores)

    def __call__(self, r):
        out = np.searchsorted(self.sorted_scores, r, side="right") / self.sorted_scores.size
        return float(out) if np.ndim(out) == 0 else out

    def curve(self) -> tuple[np.ndarray, np.ndarray]:
        """The jump points: (unique scores, F evaluated at each)."""
        values = np.unique(self.sorted_scores)
        return values, self(values)


def ecdf(scores: Iterable[float]) -> Ecdf:
    arr = np.asarray(list(scores), dtype=float)
    if arr.size == 0:
        raise EmptyInputError("ecdf requires at least one score")
    if arr.min() < 0.0 or arr.max() > 10.0:
        raise ValueError("scores must lie in [0, 10]")
    return Ecdf(arr)


@dataclass(frozen=True)
class GroupStats:
    category: str
    count: int
    mean: float
    std: float
    median: float
    q1: float
    q3: float


def group_statistics(
    records: Sequence[ScoredRecord],
    group_by: str,
    value: str = "official",
    *,
    sample_std: bool = True,
    thresholds: SeverityThresholds = SeverityThresholds(),
) -> list[GroupStats]:
    """Count/mean/std/median/quartiles of ``value`` per category, in the
    factor's domain order.

    ``std`` is the sample standard deviation unless ``sample_std`` is false;
    quartiles use linear interpolation. Statistics undefined for a category
    (empty, or a singleton under the sample std) come back as NaN.
    """
    if not records:
        raise EmptyInputError("no records to group")
    factor = _factor(group_by)
    select = _score_selector(value)
    buckets: dict[str, list[float]] = {label: [] for label in factor.domain}
    for sr in records:
        buckets[factor.extract(sr, thresholds)].append(select(sr))
    ddof = 1 if sample_std else 0
    out = []
    for label in factor.domain:
        vals = np.asarray(buckets[label], dtype=float)
        if vals.size == 0:
            nan = math.nan
            out.append(GroupStats(label, 0, nan, nan, nan, nan, nan))
            continue
        std = float(vals.std(ddof=ddof)) if vals.size > ddof else math.nan
        out.append(
            GroupStats(
                label,
                int(vals.size),
                float(vals.mean()),
                std,
                float(np.median(vals)),
                float(np.percentile(vals, 25.0)),
                float(np.percentile(vals, 75.0)),
            )
        )
    return out


@dataclass(frozen=True)
class HighRiskShare:
    category: str
    count: int
    high_risk: int
    share: float


def high_risk_share(
    records: Sequence[ScoredRecord],
    group_by: str,
    threshold: float = 7.0,
    *,
    thresholds: SeverityThresholds = SeverityThresholds(),
) -> list[HighRiskShare]:
    """Per-category share of records whose official score is >= threshold."""
    if not records:
        raise EmptyInputError("no records to group")
    factor = _factor(group_by)
    totals = {label: 0 for label in factor.domain}
    high = {label: 0 for label in factor.domain}
    for sr in records:
        label = factor.extract(sr, thresholds)
        totals[label] += 1
        if sr.record.official_score >= threshold:
            high[label] += 1
    return [
        HighRiskShare(
            label,
            totals[label],
            high[label],
            high[label] / totals[label] if totals[label] else math.nan,
        )
        for label in factor.domain
    ]


@dataclass(frozen=True)
class CrossTable:
    """Mean of a score per (x, y) category pair, with the cell counts."""

    x_name: str
    y_name: str
    row_domain: tuple[str, ...]
    col_domain: tuple[str, ...]
    means: np.ndarray
    counts: np.ndarray


def cross_statistics(
    records: Sequence[ScoredRecord],
    x: str,
    y: str,
    value: str = "official",
    *,
    thresholds: SeverityThresholds = SeverityThresholds(),
) -> CrossTable:
    """Cell means of ``value`` over the x/y category grid; empty cells are NaN."""
    fx = _factor(x)
    fy = _factor(y)
    select = _score_selector(value)
    sums = np.zeros((len(fx.domain), len(fy.domain)))
    counts = np.zeros(sums.shape, dtype=int)
    row_index = {label: k for k, label in enumerate(fx.domain)}
    col_index = {label: k for k, label in enumerate(fy.domain)}
    for sr in records:
        r = row_index[fx.extract(sr, thresholds)]
        c = col_index[fy.extract(sr, thresholds)]
        sums[r, c] += select(sr)
        counts[r, c] += 1
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), math.nan)
    return CrossTable(x, y, fx.domain, fy.domain, means, counts)


# --------------------------------------------------------------------------
# density estimation and agreement measures
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DensityEstimate:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float


def silverman_bandwidth(scores: np.ndarray) -> float:
    """0.9 * min(sample std, IQR/1.34) * n^(-1/5), with degenerate fallbacks."""
    n = scores.size
    std = float(scores.std(ddof=1))
    iqr = float(np.percentile(scores, 75.0) - np.percentile(scores, 25.0))
    spread = min(std, iqr / 1.34)
    if spread <= 0.0:
        spread = std if std > 0.0 else 1e-3
    return 0.9 * spread * n ** (-0.2)


def kernel_density(scores: Iterable[float], grid: np.ndarray | None = None) -> DensityEstimate:
    """Gaussian-kernel density estimate with the Silverman bandwidth rule.

    The default evaluation grid is 512 points spanning [0, 10] widened by
    three bandwidths on each side.
    """
    arr = np.asarray(list(scores), dtype=float)
    if arr.size < 2:
        raise TooFewPointsError(f"need at least 2 scores, got {arr.size}")
    h = silverman_bandwidth(arr)
    if grid is None:
        grid = np.linspace(0.0 - 3.0 * h, 10.0 + 3.0 * h, 512)
    else:
        grid = np.asarray(grid, dtype=float)
    z = (grid[:, None] - arr[None, :]) / h
    density = np.exp(-0.5 * z * z).sum(axis=1) / (arr.size * h * math.sqrt(2.0 * math.pi))
    return DensityEstimate(grid, density, h)


def mae(pred: Iterable[float], truth: Iterable[float]) -> float:
    """Mean absolute error between paired score sequences."""
    p = np.asarray(list(pred), dtype=float)
    t = np.asarray(list(truth), dtype=float)
    if p.shape != t.shape:
        raise LengthMismatchError(f"length mismatch: {p.size} vs {t.size}")
    if p.size == 0:
        raise EmptyInputError("mae of empty input")
    return float(np.abs(p - t).mean())


def midranks(values: Iterable[float]) -> np.ndarray:
    """Ranks 1..n where tied values share the average of their positions."""
    v = np.asarray(list(values), dtype=float)
    order = np.argsort(v, kind="stable")
    sorted_v = v[order]
    ranks = np.empty(v.size, dtype=float)
    start = 0
    for stop in range(1, v.size + 1):
        if stop == v.size or sorted_v[stop] != sorted_v[start]:
            ranks[order[start:stop]] = 0.5 * (start + stop + 1)
            start = stop
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float((xc * xc).sum()) * float((yc * yc).sum()))
    if denom == 0.0:
        return math.nan
    r = float((xc * yc).sum()) / denom
    return max(-1.0, min(1.0, r))


def spearman_rho(pred: Iterable[float], truth: Iterable[float]) -> float:
    """Spearman rank correlation with average ranks on ties.

    Returns NaN when either side has no rank variation.
    """
    p = np.asarray(list(pred), dtype=float)
    t = np.asarray(list(truth), dtype=float)
    if p.shape != t.shape:
        raise LengthMismatchError(f"length mismatch: {p.size} vs {t.size}")
    if p.size < 2:
        raise TooFewRowsError(f"need at least 2 pairs, got {p.size}")
    return _pearson(midranks(p), midranks(t))
