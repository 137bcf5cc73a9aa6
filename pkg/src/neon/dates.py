"""Calendar-day helpers. A DateStamp is a plain ``datetime.date``."""

from __future__ import annotations

import datetime as dt

from .errors import BadDate

DateStamp = dt.date

# Fixed English names; strftime("%B") depends on the process locale.
MONTHS = (
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
)


def parse_datestamp(value: str | int | dt.date) -> dt.date:
    """Parse ``YYYYMMDD`` (string or int) into a date, raising BadDate."""
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    text = str(value).strip()
    if len(text) != 8 or not text.isdigit():
        raise BadDate(f"expected YYYYMMDD, got {value!r}")
    try:
        return dt.date(int(text[:4]), int(text[4:6]), int(text[6:]))
    except ValueError as exc:
        raise BadDate(f"not a calendar day: {value!r}") from exc


def format_datestamp(day: dt.date) -> str:
    return f"{day.year:04d}{day.month:02d}{day.day:02d}"


def natural_date(day: dt.date) -> str:
    """Render a day as ``August 31, 2023``."""
    return f"{MONTHS[day.month - 1]} {day.day}, {day.year}"
