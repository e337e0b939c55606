"""Hourly electricity-price profiles and the 12-hour perfect forecast.

Profiles are immutable sequences of hourly prices covering at least 36
hours (one operating day plus the forecast tail). Synthetic profiles have
a fixed two-peak daily shape (morning around hour 8, evening around hour
18) with seeded noise; real profiles are read from a two-column CSV.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import GapError, OutOfRangeError, ParseError, ShortProfileError

CSV_HEADER = ["hour", "price_usd_per_mwh"]
MIN_HOURS = 36
FORECAST_HOURS = 12

# Two-Gaussian daily bump shape: (center hour, width, relative weight).
# The evening peak dominates so the daily maximum lands in hours 16-20.
PEAKS = ((8.0, 2.0, 0.6), (18.0, 2.0, 1.0))


@dataclass(frozen=True)
class PriceProfile:
    """Immutable hourly price series starting at ``start_hour``."""

    prices: tuple[float, ...]
    start_hour: int = 0

    def __post_init__(self):
        if len(self.prices) < MIN_HOURS:
            raise ShortProfileError(
                f"profile has {len(self.prices)} hours, need >= {MIN_HOURS}"
            )
        if not all(math.isfinite(p) for p in self.prices):
            raise ParseError("profile contains non-finite prices")

    @property
    def horizon_hours(self) -> int:
        return len(self.prices)

    def price_at(self, t_sim: float) -> float:
        """Price in effect at simulation time ``t_sim`` seconds
        (piecewise constant within each hour)."""
        hour = int(t_sim // 3600.0)
        if not 0 <= hour < len(self.prices):
            raise OutOfRangeError(f"t_sim={t_sim}s outside the profile")
        return self.prices[hour]


def forecast(profile: PriceProfile, t_sim: float) -> np.ndarray:
    """Perfect 12-hour price forecast from the hour containing ``t_sim``."""
    hour = int(t_sim // 3600.0)
    if hour < 0 or hour + FORECAST_HOURS > profile.horizon_hours:
        raise OutOfRangeError(
            f"forecast window [{hour}, {hour + FORECAST_HOURS}) exceeds "
            f"profile of {profile.horizon_hours} hours"
        )
    return np.array(profile.prices[hour:hour + FORECAST_HOURS])


def synth_profile(seed: int, base: float = 30.0, peak_amp: float = 60.0,
                  noise_frac: float = 0.05, hours: int = MIN_HOURS) -> PriceProfile:
    """Synthetic two-peak daily price profile, deterministic in ``seed``.

    price(h) = base + peak_amp * bump(h mod 24) + noise, with per-hour
    uniform noise bounded by ``noise_frac * base``. ``noise_frac=0`` gives
    the pure bump shape.
    """
    if base <= 0:
        raise ValueError("base price must be positive")
    if peak_amp < 0 or noise_frac < 0:
        raise ValueError("peak_amp and noise_frac must be non-negative")
    rng = np.random.default_rng(seed)
    noise = noise_frac * base * rng.uniform(-1.0, 1.0, size=hours)
    prices = []
    for h in range(hours):
        hd = h % 24
        bump = sum(w * math.exp(-((hd - c) ** 2) / (2.0 * s * s)) for c, s, w in PEAKS)
        prices.append(float(base + peak_amp * bump + noise[h]))
    return PriceProfile(tuple(prices))


def load_profile(path) -> PriceProfile:
    """Read a profile from CSV with header ``hour,price_usd_per_mwh``.

    Rows must be consecutive integer hours starting at 0.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != CSV_HEADER:
            raise ParseError(f"bad header in {path}: {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                hour = int(row[0])
                price = float(row[1])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            rows.append((hour, price))
    for i, (hour, _) in enumerate(rows):
        if hour != i:
            raise GapError(f"{path}: expected hour {i}, found {hour}")
    if len(rows) < MIN_HOURS:
        raise ShortProfileError(
            f"{path}: {len(rows)} hours, need >= {MIN_HOURS}"
        )
    return PriceProfile(tuple(p for _, p in rows))


def save_profile(profile: PriceProfile, path) -> None:
    """Write a profile in the CSV format accepted by :func:`load_profile`."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for hour, price in enumerate(profile.prices):
            writer.writerow([hour, repr(price)])
