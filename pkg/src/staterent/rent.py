"""Rent arithmetic: due amounts, collection decisions, caps, partial
timestamp advancement, penalties, and holiday adjustment.

Everything is exact integer math.  Gas amounts are non-negative ints; the
rental rate is a power-of-two reciprocal so charges are computed as shifts
and floor divisions, never floats.  All functions are pure.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal

SECONDS_PER_YEAR = 31_536_000  # 365 days exactly
DEFAULT_RATE_LOG2 = 21
DEFAULT_OVERHEAD_BYTES = 64
DEFAULT_READ_THRESHOLD = 5_000
DEFAULT_WRITE_THRESHOLD = 1_000
DEFAULT_CAP = 10_000
DEFAULT_HORIZON = 3 * 365 * 86_400  # accrual stops after three years
DEFAULT_REVERT_FRACTION = Fraction(1, 4)


class RentError(Exception):
    pass


class Reason(enum.Enum):
    """Why a settlement produced the amount it did."""

    SKIPPED_BELOW_THRESHOLD = "skipped_below_threshold"
    COLLECTED_FULL = "collected_full"
    COLLECTED_CAPPED = "collected_capped"
    PENALTY_MISSING_KEY = "penalty_missing_key"
    REVERTED_FRACTION = "reverted_fraction"
    HOLIDAY_PAUSED = "holiday_paused"
    CREATED_NO_RENT = "created_no_rent"


class HolidayMode(enum.Enum):
    PAUSE = "pause"
    DISCOUNT = "discount"


@dataclass(frozen=True)
class HolidayWindow:
    """Half-open [start_ts, end_ts) window where collection is suspended
    (pause) or reduced (discount = fraction of the charge waived)."""

    start_ts: int
    end_ts: int
    mode: HolidayMode = HolidayMode.PAUSE
    discount: Fraction | None = None

    def __post_init__(self):
        if self.start_ts >= self.end_ts:
            raise RentError("holiday window must satisfy start_ts < end_ts")
        if self.mode is HolidayMode.DISCOUNT:
            if self.discount is None or not (0 < self.discount < 1):
                raise RentError("discount mode needs a discount in (0, 1)")
        elif self.discount is not None:
            raise RentError("pause mode takes no discount")

    def covers(self, ts: int) -> bool:
        return self.start_ts <= ts < self.end_ts


@dataclass(frozen=True)
class RentParams:
    rate_denominator_log2: int = DEFAULT_RATE_LOG2
    storage_overhead_bytes: int = DEFAULT_OVERHEAD_BYTES
    read_threshold_gas: int = DEFAULT_READ_THRESHOLD
    write_threshold_gas: int = DEFAULT_WRITE_THRESHOLD
    cap_gas_per_node: int = DEFAULT_CAP
    missing_key_penalty_gas: int | None = None  # None: one_year_rent(32)
    revert_fraction: Fraction = DEFAULT_REVERT_FRACTION
    accrual_horizon_seconds: int | None = DEFAULT_HORIZON  # None: unlimited
    seconds_per_year: int = SECONDS_PER_YEAR
    holidays: tuple[HolidayWindow, ...] = ()

    def __post_init__(self):
        for name in ("rate_denominator_log2", "storage_overhead_bytes",
                     "read_threshold_gas", "write_threshold_gas",
                     "cap_gas_per_node", "seconds_per_year"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise RentError(f"{name} must be a non-negative integer")
        if self.seconds_per_year == 0:
            raise RentError("seconds_per_year must be positive")
        if self.write_threshold_gas > self.read_threshold_gas:
            raise RentError("write threshold must not exceed read threshold")
        if self.cap_gas_per_node < self.read_threshold_gas:
            raise RentError("cap must be at least the read threshold")
        if not isinstance(self.revert_fraction, (Fraction, int)) \
                or isinstance(self.revert_fraction, bool):
            raise RentError("revert_fraction must be an exact rational")
        if not (0 <= self.revert_fraction <= 1):
            raise RentError("revert_fraction must lie in [0, 1]")
        object.__setattr__(self, "revert_fraction",
                           Fraction(self.revert_fraction))
        if (self.accrual_horizon_seconds is not None
                and self.accrual_horizon_seconds <= 0):
            raise RentError("accrual horizon must be positive or disabled")
        if self.missing_key_penalty_gas is None:
            object.__setattr__(self, "missing_key_penalty_gas",
                               one_year_rent(32, self))
        elif self.missing_key_penalty_gas < 0:
            raise RentError("missing_key_penalty_gas must be non-negative")
        windows = sorted(self.holidays, key=lambda w: w.start_ts)
        for a, b in zip(windows, windows[1:]):
            if a.end_ts > b.start_ts:
                raise RentError("holiday windows must not overlap")


@dataclass(frozen=True)
class RentComputation:
    """Per-node settlement outcome."""

    effective_size: int
    duration_charged: int
    due: int
    collected: int
    new_ts: int
    reason: Reason

    def __post_init__(self):
        if self.reason is not Reason.PENALTY_MISSING_KEY \
                and self.collected > self.due:
            raise RentError("collected exceeds due")


def effective_size(value_len: int, params: RentParams) -> int:
    if value_len < 0:
        raise RentError("value_len must be non-negative")
    return value_len + params.storage_overhead_bytes


def charged_duration(last_paid_ts: int, now: int, params: RentParams) -> int:
    """Seconds of accrual between settlements, clamped to the horizon."""
    if now < last_paid_ts:
        raise RentError("settlement time precedes last payment")
    dt = now - last_paid_ts
    h = params.accrual_horizon_seconds
    if h is not None and dt > h:
        return h
    return dt


def rent_due(eff_size: int, last_paid_ts: int, now: int,
             params: RentParams) -> int:
    dt = charged_duration(last_paid_ts, now, params)
    return (eff_size * dt) >> params.rate_denominator_log2


def collection_decision(due: int, strongest_access: Literal["read", "write"],
                        params: RentParams) -> bool:
    if strongest_access == "read":
        return due >= params.read_threshold_gas
    if strongest_access == "write":
        return due >= params.write_threshold_gas
    raise RentError(f"unknown access strength {strongest_access!r}")


def apply_cap(due: int, params: RentParams) -> tuple[int, bool]:
    if due <= params.cap_gas_per_node:
        return due, True
    return params.cap_gas_per_node, False


def advance_timestamp(last_paid_ts: int, now: int, collected: int,
                      eff_size: int, params: RentParams,
                      fully_paid: bool) -> int:
    """New rent timestamp after collecting `collected` gas.  Full payment
    settles to `now` (horizon-forgiven arrears included); partial payment
    buys seconds at the rental rate, never moving past `now`."""
    if fully_paid:
        return now
    if eff_size <= 0:
        raise RentError("effective size must be positive")
    bought = (collected << params.rate_denominator_log2) // eff_size
    return min(now, last_paid_ts + bought)


def one_year_rent(value_len: int, params: RentParams | None = None) -> int:
    if params is None:
        params = RentParams(missing_key_penalty_gas=0)
    size = effective_size(value_len, params)
    return (size * params.seconds_per_year) >> params.rate_denominator_log2


def missing_key_penalty(params: RentParams) -> int:
    assert params.missing_key_penalty_gas is not None
    return params.missing_key_penalty_gas


def holiday_adjust(collected: int, settle_ts: int,
                   params: RentParams) -> tuple[int, bool]:
    """Returns (adjusted charge, advance_allowed).  Pause zeroes the charge
    and freezes timestamps; discount waives a fraction of the charge but the
    waived part is forgiven, so timestamps still advance on the pre-discount
    amount."""
    for window in params.holidays:
        if window.covers(settle_ts):
            if window.mode is HolidayMode.PAUSE:
                return 0, False
            d = window.discount
            assert d is not None
            return (collected * (d.denominator - d.numerator)) // d.denominator, True
    return collected, True


def revert_charge(adjusted: int, params: RentParams) -> int:
    """Gas still owed for a key whose touching frame reverted."""
    f = params.revert_fraction
    return (adjusted * f.numerator) // f.denominator
