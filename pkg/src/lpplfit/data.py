"""Price series ingestion, window slicing and synthetic LPPL series."""

from __future__ import annotations

import datetime as dt
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import PhaseParams, eval_lppl_phase

MIN_WINDOW = 30
SYNTH_FIRST_DATE = "2000-01-03"


class CsvParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateDateError(CsvParseError):
    pass


class NonPositivePriceError(CsvParseError):
    pass


class EmptyWindowError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Observations on a trading-day axis.

    ``index`` is the time coordinate used for fitting; by default it is the
    row position 0..N-1, so calendar gaps do not enter ``t_c - t``.
    """

    dates: tuple[dt.date, ...]
    price: np.ndarray
    log_price: np.ndarray = field(default=None)
    index: np.ndarray = field(default=None)

    def __post_init__(self):
        price = np.asarray(self.price, dtype=float)
        if price.ndim != 1 or price.size < 2:
            raise ValueError("a price series needs at least 2 observations")
        if len(self.dates) != price.size:
            raise ValueError("dates and prices differ in length")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")
        if np.any(~np.isfinite(price)) or np.any(price <= 0):
            raise ValueError("prices must be finite and positive")
        log_price = np.log(price) if self.log_price is None else np.asarray(self.log_price, dtype=float)
        if log_price.shape != price.shape or np.any(~np.isfinite(log_price)):
            raise ValueError("log_price must be finite and match price in length")
        index = np.arange(price.size, dtype=float) if self.index is None else np.asarray(self.index, dtype=float)
        if index.shape != price.shape or np.any(np.diff(index) <= 0):
            raise ValueError("index must be strictly increasing and match price in length")
        for name, arr in (("price", price), ("log_price", log_price), ("index", index)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "dates", tuple(self.dates))

    def __len__(self) -> int:
        return self.price.size

    @classmethod
    def from_log_prices(cls, dates, log_price, index=None) -> "PriceSeries":
        log_price = np.asarray(log_price, dtype=float)
        return cls(tuple(dates), np.exp(log_price), log_price, index)

    def shifted(self, delta: float) -> "PriceSeries":
        """Same observations with the time axis moved by ``delta``."""
        return PriceSeries(self.dates, self.price, self.log_price, self.index + delta)

    def scaled(self, factor: float) -> "PriceSeries":
        """Prices multiplied by ``factor`` (log-prices shifted by ln factor)."""
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        return PriceSeries(self.dates, self.price * factor, self.log_price + math.log(factor), self.index)

    def window(self, window: "FitWindow") -> tuple[np.ndarray, np.ndarray]:
        """(times, log-prices) inside ``window``."""
        sl = slice(window.start_index, window.end_index + 1)
        return self.index[sl], self.log_price[sl]


@dataclass(frozen=True)
class FitWindow:
    """Inclusive index bounds [t1, t2] into a PriceSeries."""

    start_index: int
    end_index: int
    min_length: int = field(default=MIN_WINDOW, compare=False)

    def __post_init__(self):
        if self.start_index < 0:
            raise ValueError("window start must be non-negative")
        if self.length < self.min_length:
            raise ValueError(f"window holds {self.length} observations; at least {self.min_length} required")

    @property
    def length(self) -> int:
        return self.end_index - self.start_index + 1

    @classmethod
    def whole(cls, series: PriceSeries, min_length: int = MIN_WINDOW) -> "FitWindow":
        return cls(0, len(series) - 1, min_length)


def _parse_date(text: str, line: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise CsvParseError(line, f"invalid ISO-8601 date {text!r}") from None


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_csv(text: str) -> PriceSeries:
    rows = []
    seen: dict[dt.date, int] = {}
    first_data = True
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 2:
            raise CsvParseError(lineno, f"expected 2 comma-separated fields, got {len(fields)}")
        date_text, price_text = fields
        if first_data and not _is_number(price_text):
            first_data = False
            continue  # header
        first_data = False
        date = _parse_date(date_text, lineno)
        try:
            price = float(price_text)
        except ValueError:
            raise CsvParseError(lineno, f"invalid price {price_text!r}") from None
        if not math.isfinite(price):
            raise CsvParseError(lineno, f"non-finite price {price_text!r}")
        if price <= 0:
            raise NonPositivePriceError(lineno, f"non-positive price {price_text}")
        if date in seen:
            raise DuplicateDateError(lineno, f"duplicate date {date} (first seen on line {seen[date]})")
        seen[date] = lineno
        rows.append((date, price))
    if len(rows) < 2:
        raise CsvParseError(0, "need at least 2 data rows")
    rows.sort(key=lambda r: r[0])
    return PriceSeries(tuple(r[0] for r in rows), np.array([r[1] for r in rows]))


def load_csv(source) -> PriceSeries:
    """Read ``date,price`` rows from a path or an open text stream."""
    if isinstance(source, (str, os.PathLike)):
        text = Path(source).read_text()
    else:
        text = source.read()
    return parse_csv(text)


def to_csv(series: PriceSeries, dest=None) -> str:
    """Serialize with a ``date,price`` header; prices use shortest round-trip repr."""
    buf = io.StringIO()
    buf.write("date,price\n")
    for d, p in zip(series.dates, series.price):
        buf.write(f"{d.isoformat()},{float(p)!r}\n")
    text = buf.getvalue()
    if dest is not None:
        if isinstance(dest, (str, os.PathLike)):
            Path(dest).write_text(text)
        else:
            dest.write(text)
    return text


def slice_window(series: PriceSeries, t1_date, t2_date, min_length: int = MIN_WINDOW) -> FitWindow:
    """Inclusive window between two dates; dates missing from the series snap inward."""
    t1 = dt.date.fromisoformat(t1_date) if isinstance(t1_date, str) else t1_date
    t2 = dt.date.fromisoformat(t2_date) if isinstance(t2_date, str) else t2_date
    first, last = series.dates[0], series.dates[-1]
    for d in (t1, t2):
        if not first <= d <= last:
            raise ValueError(f"date {d} outside the series range {first}..{last}")
    start = next(i for i, d in enumerate(series.dates) if d >= t1)
    end = max(i for i, d in enumerate(series.dates) if d <= t2)
    if start > end:
        raise EmptyWindowError(f"no observations between {t1} and {t2}")
    return FitWindow(start, end, min_length)


@dataclass(frozen=True)
class SynthSpec:
    params: PhaseParams
    n_points: int
    noise_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError("n_points must be at least 2")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be non-negative")


def synth_generate(spec: SynthSpec) -> PriceSeries:
    """Exact LPPL curve on 0..n-1 plus seeded Gaussian noise on the log-price."""
    t = np.arange(spec.n_points, dtype=float)
    # eval_lppl_phase raises DomainError when t_c <= n_points - 1
    curve = eval_lppl_phase(spec.params, t)
    rng = np.random.Generator(np.random.PCG64(spec.rng_seed))
    noise = rng.standard_normal(spec.n_points)
    log_price = curve + spec.noise_sigma * noise
    dates = np.busday_offset(SYNTH_FIRST_DATE, np.arange(spec.n_points), roll="forward")
    return PriceSeries.from_log_prices([d.item() for d in dates], log_price)
