"""The four-valued truth lattice and its three operations.

Values are encoded as two-bit masks: bit 0 is "at least true", bit 1 is
"at least false".  Under this encoding the lattice order is bitmask
inclusion, the least upper bound is bitwise or, and epistemic negation
is a bit swap.  TOP carries both bits (contradictory evidence), BOTTOM
carries neither (no evidence).
"""

from __future__ import annotations

import enum


class TruthValue(enum.IntEnum):
    BOTTOM = 0
    TRUE = 1
    FALSE = 2
    TOP = 3

    @property
    def text(self) -> str:
        return _NAMES[self]

    def __str__(self) -> str:
        return _NAMES[self]


_NAMES = {
    TruthValue.BOTTOM: "bottom",
    TruthValue.TRUE: "t",
    TruthValue.FALSE: "f",
    TruthValue.TOP: "top",
}

_BY_NAME = {name: value for value, name in _NAMES.items()}

BOTTOM = TruthValue.BOTTOM
TRUE = TruthValue.TRUE
FALSE = TruthValue.FALSE
TOP = TruthValue.TOP

ALL_VALUES = (BOTTOM, TRUE, FALSE, TOP)


def truth_value_from_name(name: str) -> TruthValue:
    """Map the canonical annotation spellings t/f/top/bottom to values."""
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ValueError(f"unknown annotation {name!r}") from None


def leq(a: TruthValue, b: TruthValue) -> bool:
    """Lattice order: bottom <= t <= top and bottom <= f <= top."""
    return a & b == a


def lub(a: TruthValue, b: TruthValue) -> TruthValue:
    """Least upper bound; TRUE joined with FALSE gives TOP."""
    return TruthValue(a | b)


def eneg(a: TruthValue) -> TruthValue:
    """Epistemic negation: swaps TRUE and FALSE, fixes TOP and BOTTOM."""
    return TruthValue(((a & 1) << 1) | (a >> 1))
