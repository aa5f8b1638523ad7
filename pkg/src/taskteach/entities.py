"""Rule-based extraction of typed values from GUI text and utterances.

Matches are leftmost-longest and never overlap; ties at the same span are
broken by a fixed dimension priority so extraction is deterministic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import values
from .values import TypedValue

_NUM = r"\d+(?:\.\d+)?"

# (priority, dimension, compiled pattern, builder). Lower priority wins on
# identical spans. Builders receive the match and return a TypedValue, or
# None when the match fails validation (e.g. 25:99 is not a time).
_PATTERNS: list[tuple[int, str, re.Pattern[str]]] = []


def _pattern(priority: int, dimension: str, regex: str):
    compiled = re.compile(regex, re.IGNORECASE)

    def register(builder):
        _PATTERNS.append((priority, dimension, compiled, builder))
        return builder

    return register


@_pattern(0, values.TEMPERATURE, rf"({_NUM})\s*°\s*([CF])\b")
def _temp_symbol(m: re.Match[str]) -> TypedValue:
    magnitude = float(m.group(1))
    if m.group(2).upper() == "C":
        return values.temperature_c(magnitude)
    return values.temperature_f(magnitude)


@_pattern(0, values.TEMPERATURE, rf"({_NUM})\s+degrees?(?:\s+(fahrenheit|celsius))?\b")
def _temp_words(m: re.Match[str]) -> TypedValue:
    magnitude = float(m.group(1))
    if m.group(2) and m.group(2).lower() == "celsius":
        return values.temperature_c(magnitude)
    return values.temperature_f(magnitude)  # bare "degrees" defaults to F


@_pattern(
    1,
    values.DURATION,
    rf"({_NUM})\s*(?:hours?|hrs?)(?:\s+(?:and\s+)?({_NUM})\s*(?:minutes?|mins?))?\b",
)
def _duration_hours(m: re.Match[str]) -> TypedValue:
    minutes = float(m.group(2)) if m.group(2) else 0.0
    return values.duration_hours(float(m.group(1)), minutes)


@_pattern(1, values.DURATION, rf"({_NUM})\s*(?:minutes?|mins?)\b")
def _duration_minutes(m: re.Match[str]) -> TypedValue:
    return values.duration_minutes(float(m.group(1)))


@_pattern(2, values.MONEY, rf"\$\s*({_NUM})")
def _money_sign(m: re.Match[str]) -> TypedValue:
    return values.money_usd(float(m.group(1)))


@_pattern(2, values.MONEY, rf"({_NUM})\s+dollars?\b")
def _money_words(m: re.Match[str]) -> TypedValue:
    return values.money_usd(float(m.group(1)))


@_pattern(3, values.TIME_OF_DAY, r"(\d{1,2}):(\d{2})\s*([ap])\.?m\.?\b")
def _time_12h(m: re.Match[str]) -> TypedValue | None:
    hour, minute = int(m.group(1)), int(m.group(2))
    if not (1 <= hour <= 12 and 0 <= minute <= 59):
        return None
    hour %= 12
    if m.group(3).lower() == "p":
        hour += 12
    return values.time_of_day(hour * 60 + minute)


@_pattern(3, values.TIME_OF_DAY, r"(\d{1,2}):(\d{2})\b")
def _time_24h(m: re.Match[str]) -> TypedValue | None:
    hour, minute = int(m.group(1)), int(m.group(2))
    if not (0 <= hour <= 23 and 0 <= minute <= 59):
        return None
    return values.time_of_day(hour * 60 + minute)


@_pattern(3, values.TIME_OF_DAY, r"(\d{1,2})\s*([ap])\.?m\.?\b")
def _time_hour_only(m: re.Match[str]) -> TypedValue | None:
    hour = int(m.group(1))
    if not 1 <= hour <= 12:
        return None
    hour %= 12
    if m.group(2).lower() == "p":
        hour += 12
    return values.time_of_day(hour * 60)


@_pattern(4, values.NUMBER, _NUM)
def _bare_number(m: re.Match[str]) -> TypedValue:
    return values.number(float(m.group(0)))


@dataclass(frozen=True)
class EntityMatch:
    source_text: str
    value: TypedValue
    char_span: tuple[int, int]

    @property
    def span_text(self) -> str:
        return self.source_text[self.char_span[0] : self.char_span[1]]


def extract_entities(text: str) -> list[EntityMatch]:
    """All typed values in `text`, leftmost-longest, non-overlapping."""
    candidates: list[tuple[int, int, int, TypedValue]] = []
    for priority, _dimension, pattern, builder in _PATTERNS:
        for m in pattern.finditer(text):
            value = builder(m)
            if value is not None:
                candidates.append((m.start(), -(m.end() - m.start()), priority, value))
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    matches: list[EntityMatch] = []
    cursor = 0
    for start, neg_length, _priority, value in candidates:
        end = start - neg_length
        if start >= cursor:
            matches.append(EntityMatch(text, value, (start, end)))
            cursor = end
    return matches


def first_entity(text: str, dimension: str | None = None) -> EntityMatch | None:
    """First extracted entity, optionally restricted to one dimension."""
    for match in extract_entities(text):
        if dimension is None or match.value.dimension == dimension:
            return match
    return None


comparable_with = values.comparable_with
