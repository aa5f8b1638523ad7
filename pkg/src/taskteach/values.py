"""Typed quantities: a magnitude plus a dimension and canonical unit.

Every value the engine compares or extracts from a screen is normalized
into exactly one canonical unit per dimension, so comparisons never need
unit arithmetic at runtime.
"""

from __future__ import annotations

from dataclasses import dataclass

TEMPERATURE = "temperature"
DURATION = "duration"
MONEY = "money"
TIME_OF_DAY = "time_of_day"
NUMBER = "number"

DIMENSIONS = (TEMPERATURE, DURATION, MONEY, TIME_OF_DAY, NUMBER)

# One canonical unit tag per dimension.
CANONICAL_UNITS = {
    TEMPERATURE: "F",
    DURATION: "minute",
    MONEY: "USD",
    TIME_OF_DAY: "minute_of_day",
    NUMBER: "unitless",
}

DIMENSION_OF_UNIT = {unit: dim for dim, unit in CANONICAL_UNITS.items()}

MINUTES_PER_DAY = 1440


class UnitError(ValueError):
    """A magnitude/dimension/unit combination that cannot be normalized."""


def canonical_magnitude_text(magnitude: float) -> str:
    """Render a magnitude with at most 3 decimals and no trailing zeros."""
    text = f"{float(magnitude):.3f}".rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


@dataclass(frozen=True)
class TypedValue:
    """An immutable magnitude in the canonical unit of its dimension."""

    magnitude: float
    dimension: str
    unit: str

    def __post_init__(self) -> None:
        if self.dimension not in CANONICAL_UNITS:
            raise UnitError(f"unknown dimension: {self.dimension!r}")
        if self.unit != CANONICAL_UNITS[self.dimension]:
            raise UnitError(
                f"unit {self.unit!r} is not canonical for {self.dimension}"
            )
        if self.dimension == TIME_OF_DAY and not 0 <= self.magnitude < MINUTES_PER_DAY:
            raise UnitError(f"time of day out of range: {self.magnitude}")
        if self.dimension == DURATION and self.magnitude < 0:
            raise UnitError(f"negative duration: {self.magnitude}")

    def rounded(self) -> float:
        return round(self.magnitude, 3)

    def render(self) -> str:
        """Canonical human-readable rendering, re-extractable by `entities`."""
        mag = canonical_magnitude_text(self.magnitude)
        if self.dimension == TEMPERATURE:
            return f"{mag}°F"
        if self.dimension == DURATION:
            return f"{mag} min"
        if self.dimension == MONEY:
            return f"${mag}"
        if self.dimension == TIME_OF_DAY:
            return render_time_of_day(self.magnitude)
        return mag


def temperature_f(magnitude: float) -> TypedValue:
    return TypedValue(magnitude, TEMPERATURE, "F")


def temperature_c(magnitude: float) -> TypedValue:
    return TypedValue(magnitude * 9 / 5 + 32, TEMPERATURE, "F")


def duration_minutes(magnitude: float) -> TypedValue:
    return TypedValue(magnitude, DURATION, "minute")


def duration_hours(hours: float, minutes: float = 0) -> TypedValue:
    return TypedValue(hours * 60 + minutes, DURATION, "minute")


def money_usd(magnitude: float) -> TypedValue:
    return TypedValue(magnitude, MONEY, "USD")


def time_of_day(minutes: float) -> TypedValue:
    return TypedValue(minutes, TIME_OF_DAY, "minute_of_day")


def number(magnitude: float) -> TypedValue:
    return TypedValue(magnitude, NUMBER, "unitless")


# Accepted source units with their conversion into the canonical unit.
_CONVERSIONS = {
    (TEMPERATURE, "F"): lambda m: m,
    (TEMPERATURE, "C"): lambda m: m * 9 / 5 + 32,
    (DURATION, "minute"): lambda m: m,
    (DURATION, "hour"): lambda m: m * 60,
    (MONEY, "USD"): lambda m: m,
    (TIME_OF_DAY, "minute_of_day"): lambda m: m,
    (NUMBER, "unitless"): lambda m: m,
}


def normalize(magnitude: float, dimension: str, unit: str) -> TypedValue:
    """Convert a raw (magnitude, dimension, unit) into a canonical TypedValue.

    Face-value money in non-USD currencies is rejected rather than converted.
    """
    convert = _CONVERSIONS.get((dimension, unit))
    if convert is None:
        raise UnitError(f"no conversion for unit {unit!r} in {dimension!r}")
    return TypedValue(convert(magnitude), dimension, CANONICAL_UNITS[dimension])


def render_time_of_day(minutes: float) -> str:
    """12-hour clock rendering, e.g. 420 -> "7:00 AM"."""
    total = int(round(minutes)) % MINUTES_PER_DAY
    hour24, minute = divmod(total, 60)
    suffix = "AM" if hour24 < 12 else "PM"
    hour12 = hour24 % 12
    if hour12 == 0:
        hour12 = 12
    return f"{hour12}:{minute:02d} {suffix}"


def compare(op: str, lhs: TypedValue, rhs: TypedValue) -> bool:
    """Evaluate GT/LT/EQ between two values of the same dimension.

    EQ uses exact equality after rounding both magnitudes to 3 decimals.
    """
    if lhs.dimension != rhs.dimension:
        raise DimensionMismatch(
            f"cannot compare {lhs.dimension} with {rhs.dimension}"
        )
    if op == "GT":
        return lhs.magnitude > rhs.magnitude
    if op == "LT":
        return lhs.magnitude < rhs.magnitude
    if op == "EQ":
        return lhs.rounded() == rhs.rounded()
    raise ValueError(f"unknown comparison operator: {op!r}")


class DimensionMismatch(ValueError):
    """Two values of different dimensions were compared."""


def comparable_with(candidate: TypedValue, target: TypedValue) -> bool:
    """True iff the two values live in the same dimension."""
    return candidate.dimension == target.dimension
