"""Timestamp normalization.

All stored timestamps use one canonical shape: UTC, second precision,
"YYYY-MM-DDTHH:MM:SSZ". With a single fixed format, lexicographic order
equals chronological order, which the store's range queries rely on.
Original tracker/git offsets are kept separately as integer minutes.
"""

import re
from datetime import datetime, timedelta, timezone

CANONICAL = "%Y-%m-%dT%H:%M:%SZ"

_ISO_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})[T ](\d{2}):(\d{2}):(\d{2})"
    r"(?:\.(\d+))?"
    r"(Z|[+-]\d{2}:?\d{2})?$"
)


def from_epoch(seconds: int | float) -> str:
    dt = datetime.fromtimestamp(int(seconds), tz=timezone.utc)
    return dt.strftime(CANONICAL)


def parse_iso(text: str) -> datetime:
    """Parse ISO-8601 variants used by git, Jira, and GitHub into aware UTC."""
    m = _ISO_RE.match(text.strip())
    if not m:
        raise ValueError(f"unparseable timestamp: {text!r}")
    year, month, day, hour, minute, second = (int(m.group(i)) for i in range(1, 7))
    offset = m.group(8)
    if offset in (None, "Z"):
        tz = timezone.utc
    else:
        sign = 1 if offset[0] == "+" else -1
        digits = offset[1:].replace(":", "")
        tz = timezone(sign * timedelta(hours=int(digits[:2]), minutes=int(digits[2:])))
    dt = datetime(year, month, day, hour, minute, second, tzinfo=tz)
    return dt.astimezone(timezone.utc)


def canonical(text: str) -> str:
    """Normalize any accepted timestamp string to the canonical UTC shape."""
    return parse_iso(text).strftime(CANONICAL)


def to_datetime(ts: str) -> datetime:
    return datetime.strptime(ts, CANONICAL).replace(tzinfo=timezone.utc)


def now() -> str:
    return datetime.now(tz=timezone.utc).strftime(CANONICAL)


def shift_days(ts: str, days: float) -> str:
    return (to_datetime(ts) + timedelta(days=days)).strftime(CANONICAL)


def is_canonical(text: str) -> bool:
    try:
        return to_datetime(text).strftime(CANONICAL) == text
    except ValueError:
        return False
