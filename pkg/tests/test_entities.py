import pytest
from hypothesis import given, strategies as st

from taskteach import values
from taskteach.entities import extract_entities, first_entity


def _values(text):
    return [m.value for m in extract_entities(text)]


def test_temperature_forms():
    assert _values("85 degrees Fahrenheit") == [values.temperature_f(85)]
    assert _values("90°F") == [values.temperature_f(90)]
    assert _values("90 °F") == [values.temperature_f(90)]
    assert _values("32 degrees") == [values.temperature_f(32)]
    assert _values("30°C") == [values.temperature_f(86)]


def test_duration_forms():
    assert _values("25 min") == [values.duration_minutes(25)]
    assert _values("30 minutes") == [values.duration_minutes(30)]
    assert _values("1 hr 5 min") == [values.duration_minutes(65)]
    assert _values("2 hours") == [values.duration_minutes(120)]


def test_money_forms():
    assert _values("$100") == [values.money_usd(100)]
    assert _values("$89.99") == [values.money_usd(89.99)]
    assert _values("15 dollars") == [values.money_usd(15)]


def test_time_of_day_forms():
    assert _values("7:00 AM") == [values.time_of_day(420)]
    assert _values("19:30") == [values.time_of_day(1170)]
    assert _values("12:00 am") == [values.time_of_day(0)]
    assert _values("12:15 PM") == [values.time_of_day(735)]
    assert _values("7 pm") == [values.time_of_day(1140)]


def test_invalid_time_is_a_number_pair():
    matches = extract_entities("25:99")
    assert all(m.value.dimension == "number" for m in matches)


def test_bare_numbers_and_no_match():
    assert _values("2") == [values.number(2)]
    assert extract_entities("hello") == []


def test_leftmost_longest_non_overlapping():
    matches = extract_entities("leave at 7:00 AM, drive 25 min, spend $12")
    assert [m.value.dimension for m in matches] == ["time_of_day", "duration", "money"]
    spans = [m.char_span for m in matches]
    assert spans == sorted(spans)
    assert all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))


def test_range_yields_first_value_and_alternative():
    matches = extract_entities("25-40 min")
    assert matches[0].value == values.number(25)
    assert matches[1].value == values.duration_minutes(40)


def test_span_reextraction_agrees():
    for match in extract_entities("it is 85 degrees and the trip takes 1 hr 5 min"):
        again = extract_entities(match.span_text)
        assert again and again[0].value == match.value


def test_first_entity_dimension_filter():
    match = first_entity("wait 10 minutes then pay $5", dimension="money")
    assert match is not None and match.value == values.money_usd(5)
    assert first_entity("hello") is None


def test_extraction_is_deterministic():
    text = "routes take 25 min or 1 hr 5 min at 7:30 PM for $12.50"
    assert extract_entities(text) == extract_entities(text)


@st.composite
def typed_values(draw):
    dimension = draw(st.sampled_from(values.DIMENSIONS))
    if dimension == values.TIME_OF_DAY:
        return values.time_of_day(draw(st.integers(min_value=0, max_value=1439)))
    magnitude = round(draw(st.floats(min_value=0, max_value=9999, allow_nan=False)), 3)
    return values.TypedValue(magnitude, dimension, values.CANONICAL_UNITS[dimension])


@given(typed_values())
def test_round_trip_of_canonical_rendering(value):
    matches = extract_entities(value.render())
    assert len(matches) == 1
    found = matches[0].value
    assert found.dimension == value.dimension
    assert found.magnitude == pytest.approx(value.magnitude, abs=1e-9)
