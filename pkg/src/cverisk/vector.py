"""Parsing, validation, and serialization of CVSS v3.1 base vector strings."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

STRICT_PREFIX = "CVSS:3.1"
LENIENT_PREFIXES = (STRICT_PREFIX, "CVSS:3.0")


class VectorError(ValueError):
    """A vector string failed to parse. Exactly one subclass is raised per defect."""


class BadPrefixError(VectorError):
    def __init__(self, found: str) -> None:
        super().__init__(f"expected {STRICT_PREFIX!r} prefix, found {found!r}")
        self.found = found


class MissingMetricError(VectorError):
    def __init__(self, name: str) -> None:
        super().__init__(f"base metric {name} is missing")
        self.name = name


class DuplicateMetricError(VectorError):
    def __init__(self, name: str) -> None:
        super().__init__(f"base metric {name} appears more than once")
        self.name = name


class UnknownMetricValueError(VectorError):
    def __init__(self, name: str, code: str) -> None:
        super().__init__(f"metric {name} has no value {code!r}")
        self.name = name
        self.code = code


class TrailingGarbageError(VectorError):
    def __init__(self, offset: int, token: str) -> None:
        super().__init__(f"unrecognized content {token!r} at offset {offset}")
        self.offset = offset
        self.token = token


class AttackVector(Enum):
    NETWORK = "N"
    ADJACENT = "A"
    LOCAL = "L"
    PHYSICAL = "P"


class AttackComplexity(Enum):
    LOW = "L"
    HIGH = "H"


class PrivilegesRequired(Enum):
    NONE = "N"
    LOW = "L"
    HIGH = "H"


class UserInteraction(Enum):
    NONE = "N"
    REQUIRED = "R"


class Scope(Enum):
    UNCHANGED = "U"
    CHANGED = "C"


class ImpactLevel(Enum):
    NONE = "N"
    LOW = "L"
    HIGH = "H"


def variant_label(member: Enum) -> str:
    """Display label for an enum member, e.g. AttackVector.NETWORK -> 'Network'."""
    return member.name.capitalize()


@dataclass(frozen=True)
class CvssVector:
    """The eight base metrics of one CVSS v3.1 vector."""

    av: AttackVector
    ac: AttackComplexity
    pr: PrivilegesRequired
    ui: UserInteraction
    scope: Scope
    c: ImpactLevel
    i: ImpactLevel
    a: ImpactLevel


# Canonical metric order; doubles as the serialization order.
_METRICS: dict[str, tuple[str, type[Enum]]] = {
    "AV": ("av", AttackVector),
    "AC": ("ac", AttackComplexity),
    "PR": ("pr", PrivilegesRequired),
    "UI": ("ui", UserInteraction),
    "S": ("scope", Scope),
    "C": ("c", ImpactLevel),
    "I": ("i", ImpactLevel),
    "A": ("a", ImpactLevel),
}

METRIC_NAMES = tuple(_METRICS)


def parse_vector(s: str, lenient: bool = False) -> CvssVector:
    """Parse a CVSS v3.1 base vector string.

    Metrics may appear in any order but each base metric must appear exactly
    once; metric names and value codes are case-sensitive. With ``lenient``
    a ``CVSS:3.0`` prefix is also accepted (the base metric grammar is
    identical between the two revisions).

    Raises the ``VectorError`` subclass naming the first defect found:
    ``BadPrefixError``, ``TrailingGarbageError`` (unrecognized token),
    ``DuplicateMetricError``, ``UnknownMetricValueError``, or
    ``MissingMetricError``.
    """
    prefix, sep, rest = s.partition("/")
    allowed = LENIENT_PREFIXES if lenient else (STRICT_PREFIX,)
    if prefix not in allowed:
        raise BadPrefixError(prefix)
    if not sep:
        raise MissingMetricError(METRIC_NAMES[0])

    fields: dict[str, Enum] = {}
    offset = len(prefix) + 1
    for token in rest.split("/"):
        name, colon, code = token.partition(":")
        if not colon or name not in _METRICS:
            raise TrailingGarbageError(offset, token)
        field, enum = _METRICS[name]
        if field in fields:
            raise DuplicateMetricError(name)
        try:
            fields[field] = enum(code)
        except ValueError:
            raise UnknownMetricValueError(name, code) from None
        offset += len(token) + 1

    for name, (field, _) in _METRICS.items():
        if field not in fields:
            raise MissingMetricError(name)
    return CvssVector(**fields)


def serialize_vector(v: CvssVector) -> str:
    """Serialize to the canonical AV/AC/PR/UI/S/C/I/A order."""
    parts = [STRICT_PREFIX]
    for name, (field, _) in _METRICS.items():
        parts.append(f"{name}:{getattr(v, field).value}")
    return "/".join(parts)
