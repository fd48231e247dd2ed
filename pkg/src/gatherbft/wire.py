"""Canonical payload serialization.

Every protocol message travels through the simulator as bytes.  Equality of
payloads is byte equality, so the encoding must be order-stable: compact JSON
with sorted keys and ASCII escapes.  ``None`` stands for the undecided value.
"""

import json
from fractions import Fraction


def encode(obj) -> bytes:
    return json.dumps(obj, separators=(",", ":"), sort_keys=True, ensure_ascii=True).encode("ascii")


def decode(payload: bytes):
    """Decode a payload, returning ``None`` for garbage instead of raising."""
    try:
        return json.loads(payload)
    except (ValueError, UnicodeDecodeError, TypeError):
        return None


def value_key(value) -> str:
    # dict key for arbitrary JSON-able values (lists are unhashable, tuples
    # and lists must collide)
    return json.dumps(value, separators=(",", ":"), sort_keys=True)


def fmt_time(t: Fraction) -> str:
    t = Fraction(t)
    return f"{t.numerator}/{t.denominator}"


def parse_time(text: str) -> Fraction:
    num, sep, den = text.partition("/")
    if not sep:
        raise ValueError(f"time must look like num/den, got {text!r}")
    t = Fraction(int(num), int(den))
    if t < 0:
        raise ValueError(f"negative time {text!r}")
    return t


def encode_grade(grade: Fraction) -> tuple[int, int]:
    """Dyadic rational as (numerator, log2 of denominator)."""
    grade = Fraction(grade)
    den = grade.denominator
    if den & (den - 1):
        raise ValueError(f"grade {grade} is not dyadic")
    return grade.numerator, den.bit_length() - 1


def decode_grade(num, logden) -> Fraction:
    if not isinstance(num, int) or not isinstance(logden, int) or isinstance(num, bool):
        raise ValueError("grade fields must be integers")
    if logden < 0 or logden > 64:
        raise ValueError(f"log-denominator {logden} out of range")
    return Fraction(num, 1 << logden)
