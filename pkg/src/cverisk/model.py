"""Weighted severity scoring: exploitability aggregation, CIA impact, and the
rounded composite score with its severity classification."""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import IntEnum

from .encoding import ETA, AttributeMaps, encode_factors
from .records import CveRecord
from .vector import CvssVector, VectorError, parse_vector

#: Absolute slack absorbed when deciding whether a value already sits on the
#: rounding grid.
GRID_TOLERANCE = 1e-9

SIMPLEX_TOLERANCE = 1e-12


class Severity(IntEnum):
    LOW = 1
    MEDIUM = 2
    HIGH = 3
    CRITICAL = 4

    @property
    def label(self) -> str:
        return self.name.capitalize()


@dataclass(frozen=True)
class ModelWeights:
    """Exploitability weights (a point on the unit simplex), CIA weights,
    scale factor, and score granularity."""

    alpha: float
    beta: float
    gamma: float
    lambda_c: float = 1.0
    lambda_i: float = 1.0
    lambda_a: float = 1.0
    kappa: float = 1.0
    delta: float = 0.1

    def __post_init__(self) -> None:
        if min(self.alpha, self.beta, self.gamma) < 0.0:
            raise ValueError("alpha, beta, gamma must be non-negative")
        if abs(self.alpha + self.beta + self.gamma - 1.0) > SIMPLEX_TOLERANCE:
            raise ValueError("alpha + beta + gamma must equal 1")
        for name in ("lambda_c", "lambda_i", "lambda_a"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")
        if self.delta <= 0.0:
            raise ValueError("delta must be positive")


@dataclass(frozen=True)
class SeverityThresholds:
    """Severity class boundaries on the 0-10 score scale."""

    tau1: float = 4.0
    tau2: float = 7.0
    tau3: float = 9.0

    def __post_init__(self) -> None:
        if not 0.0 < self.tau1 < self.tau2 < self.tau3 <= 10.0:
            raise ValueError("thresholds must satisfy 0 < tau1 < tau2 < tau3 <= 10")


@dataclass(frozen=True)
class ModelConfig:
    """All scoring constants: attribute maps, weights, and thresholds."""

    maps: AttributeMaps = field(default_factory=AttributeMaps)
    weights: ModelWeights = field(default_factory=lambda: ModelWeights(1 / 3, 1 / 3, 1 / 3))
    thresholds: SeverityThresholds = field(default_factory=SeverityThresholds)


class ScoringError(ValueError):
    """A record could not be scored; carries the CVE id for diagnostics."""

    def __init__(self, cve_id: str, reason: str) -> None:
        super().__init__(f"{cve_id}: {reason}")
        self.cve_id = cve_id
        self.reason = reason


@dataclass(frozen=True)
class ScoredRecord:
    record: CveRecord
    vector: CvssVector
    factors: tuple[float, ...]
    base_risk: float
    impact: float
    composite: float
    severity: Severity


def round_up(x: float, delta: float) -> float:
    """Smallest multiple of ``delta`` at or above ``x``, absorbing float dust."""
    return math.ceil(x / delta - GRID_TOLERANCE) * delta


def base_risk(v: CvssVector, maps: AttributeMaps, w: ModelWeights) -> float:
    """Weighted sum of the three exploitability encodings."""
    return w.alpha * maps.phi[v.av] + w.beta * maps.psi[v.ac] + w.gamma * maps.omega[v.pr]


def impact_score(v: CvssVector, w: ModelWeights) -> float:
    """Complement-product aggregation of the weighted C/I/A impact values."""
    return 1.0 - (
        (1.0 - w.lambda_c * ETA[v.c])
        * (1.0 - w.lambda_i * ETA[v.i])
        * (1.0 - w.lambda_a * ETA[v.a])
    )


def composite_score(rb: float, impact: float, w: ModelWeights) -> float:
    """Scale the exploitability/impact product to 0-10, round up to the
    ``delta`` grid, and cap at exactly 10."""
    return min(10.0, round_up(10.0 * rb * impact * w.kappa, w.delta))


def classify(sv: float, t: SeverityThresholds = SeverityThresholds()) -> Severity:
    """Map a composite score to a severity level; lower bounds are inclusive."""
    if not 0.0 <= sv <= 10.0:
        raise ValueError(f"score {sv} outside [0, 10]")
    if sv < t.tau1:
        return Severity.LOW
    if sv < t.tau2:
        return Severity.MEDIUM
    if sv < t.tau3:
        return Severity.HIGH
    return Severity.CRITICAL


def score_record(
    record: CveRecord, config: ModelConfig | None = None, *, lenient: bool = False
) -> ScoredRecord:
    """Parse, encode, and score one record.

    Raises ``ScoringError`` tagged with the CVE id when the record has no
    vector string or the string fails to parse.
    """
    config = config or ModelConfig()
    if not record.vector_string:
        raise ScoringError(record.cve_id, "no CVSS v3.1 vector string")
    try:
        vector = parse_vector(record.vector_string, lenient=lenient)
    except VectorError as exc:
        raise ScoringError(record.cve_id, str(exc)) from exc
    rb = base_risk(vector, config.maps, config.weights)
    impact = impact_score(vector, config.weights)
    composite = composite_score(rb, impact, config.weights)
    return ScoredRecord(
        record=record,
        vector=vector,
        factors=encode_factors(vector, config.maps),
        base_risk=rb,
        impact=impact,
        composite=composite,
        severity=classify(composite, config.thresholds),
    )


def score_records(
    records: Iterable[CveRecord], config: ModelConfig | None = None, *, lenient: bool = False
) -> tuple[list[ScoredRecord], list[tuple[CveRecord, str]]]:
    """Score a batch; unscoreable records come back as (record, reason) pairs."""
    config = config or ModelConfig()
    scored: list[ScoredRecord] = []
    skipped: list[tuple[CveRecord, str]] = []
    for record in records:
        try:
            scored.append(score_record(record, config, lenient=lenient))
        except ScoringError as exc:
            skipped.append((record, exc.reason))
    return scored, skipped
