"""Severity levels and per-run outcomes."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Tuple


class SeverityLevel(enum.IntEnum):
    """Harm bins S0 (cosmetic damage) .. S3 (life-threatening), plus SNONE.

    SNONE sits below S0 and marks a run with no undesired outcome; it never
    counts toward any tolerability threshold.
    """

    SNONE = -1
    S0 = 0
    S1 = 1
    S2 = 2
    S3 = 3

    @classmethod
    def parse(cls, name: str) -> "SeverityLevel":
        try:
            return cls[name]
        except KeyError:
            raise ValueError(f"unknown severity level {name!r}") from None


#: Levels that carry tolerability requirements, lowest first.
RATED_LEVELS: Tuple[SeverityLevel, ...] = (
    SeverityLevel.S0,
    SeverityLevel.S1,
    SeverityLevel.S2,
    SeverityLevel.S3,
)


@dataclass(frozen=True)
class RunOutcome:
    """Result of scoring one concrete run.

    Exactly one of the two variants is populated: a prescriptive failure
    (``violated_rules`` nonempty, ``severity`` None) or a scored run.
    Use :meth:`failure` and :meth:`scored` to build instances.
    """

    severity: Optional[SeverityLevel] = None
    violated_rules: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.violated_rules and self.severity is not None:
            raise ValueError("a run outcome is either a prescriptive failure or scored")
        if not self.violated_rules and self.severity is None:
            raise ValueError("scored outcome needs a severity")

    @classmethod
    def failure(cls, rule_names) -> "RunOutcome":
        names = tuple(rule_names)
        if not names:
            raise ValueError("prescriptive failure needs at least one rule name")
        return cls(severity=None, violated_rules=names)

    @classmethod
    def scored(cls, severity: SeverityLevel) -> "RunOutcome":
        return cls(severity=SeverityLevel(severity))

    @property
    def is_failure(self) -> bool:
        return bool(self.violated_rules)

    def __str__(self):
        if self.is_failure:
            return "FAIL(" + ", ".join(self.violated_rules) + ")"
        return self.severity.name
