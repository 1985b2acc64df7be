"""Decibel conversions, used only where values enter or leave the tool."""

from __future__ import annotations

import math


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(value: float) -> float:
    if value <= 0:
        raise ValueError("decibels need a positive linear value")
    return 10.0 * math.log10(value)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)
