"""Unit conversions used at the configuration boundary."""

from __future__ import annotations

import math

import numpy as np


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w) + 30.0


def path_loss_db(distance_m: float) -> float:
    """Urban macro path loss in dB for a distance in metres."""
    return 35.3 + 37.6 * math.log10(distance_m)


def path_gain(distance_m: float, shadowing_db: float = 0.0) -> float:
    """Linear large-scale gain including an optional shadowing term in dB."""
    return db_to_linear(-path_loss_db(distance_m) + shadowing_db)


def path_loss_db_array(distance_m: np.ndarray) -> np.ndarray:
    return 35.3 + 37.6 * np.log10(distance_m)
