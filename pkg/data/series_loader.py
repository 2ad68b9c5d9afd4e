"""
Quarterly series loader for the output-gap toolkit.
Reads GDP / CPI level files, validates the quarterly contract and turns the
levels into the model's observation matrix.
"""
import logging
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from output_gap.errors import SeriesValidationError

logger = logging.getLogger(__name__)

QUARTER_PATTERN = re.compile(r"^(\d{4})\s*[-:/ ]?\s*Q([1-4])$", re.IGNORECASE)
MIN_MODEL_LENGTH = 8


def format_quarter(period: pd.Period) -> str:
    return f"{period.year}-Q{period.quarter}"


@dataclass
class SeriesFile:
    """One quarterly level series: consecutive quarters, positive values."""

    name: str
    index: pd.PeriodIndex
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.index) != self.values.size:
            raise SeriesValidationError(
                f"{self.name}: {len(self.index)} dates for {self.values.size} values"
            )

    def __len__(self) -> int:
        return self.values.size

    @property
    def start(self) -> pd.Period:
        return self.index[0]

    @property
    def end(self) -> pd.Period:
        return self.index[-1]

    def sliced(self, start: pd.Period, end: pd.Period) -> "SeriesFile":
        mask = (self.index >= start) & (self.index <= end)
        return SeriesFile(self.name, self.index[mask], self.values[mask])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "date": [format_quarter(p) for p in self.index],
            "value": self.values,
        })


@dataclass
class ModelData:
    """Observation matrix handed to the sampler."""

    dates: pd.PeriodIndex
    observations: np.ndarray  # (T, d): 100 log GDP [, annualized inflation]
    names: Tuple[str, ...]

    @property
    def n_obs(self) -> int:
        return self.observations.shape[0]

    def date_labels(self):
        return [format_quarter(p) for p in self.dates]


class SeriesLoader:
    """Handles loading quarterly level series from CSV files."""

    def load(self, path: Path, name: Optional[str] = None) -> SeriesFile:
        """
        Load and validate one series.

        Expected file columns (after normalization):
            - date (required, "YYYY-Qn"; "YYYYQn" is accepted too)
            - value (required, positive level)

        Raises:
            SeriesValidationError naming the 1-based data row on a gap,
            duplicate, non-positive or unparsable entry
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Series file not found: {path}")
        df = self._read_table(path)
        name = name or path.stem

        periods = []
        values = []
        for position, (_, row) in enumerate(df.iterrows(), start=1):
            period = self._parse_quarter(row["date"], position)
            value = self._parse_value(row["value"], position)
            if periods:
                previous = periods[-1]
                if period == previous:
                    raise SeriesValidationError(f"duplicate quarter {format_quarter(period)}", row=position)
                if period != previous + 1:
                    raise SeriesValidationError(
                        f"expected {format_quarter(previous + 1)} after {format_quarter(previous)}, "
                        f"got {format_quarter(period)}",
                        row=position,
                    )
            periods.append(period)
            values.append(value)

        if not periods:
            raise SeriesValidationError(f"{path} contains no observations")
        series = SeriesFile(name, pd.PeriodIndex(periods, freq="Q"), np.array(values))
        logger.info(
            f"Loaded {len(series)} quarters of {name} "
            f"({format_quarter(series.start)} to {format_quarter(series.end)})"
        )
        return series

    def _read_table(self, path: Path) -> pd.DataFrame:
        if path.suffix.lower() != ".csv":
            raise SeriesValidationError(f"Unsupported file format: {path.suffix}")
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
        df = self._normalize_columns(df)
        missing_columns = {"date", "value"} - set(df.columns)
        if missing_columns:
            raise SeriesValidationError(
                f"Missing required columns after normalization: {', '.join(sorted(missing_columns))}"
            )
        return df

    def _normalize_columns(self, df: pd.DataFrame) -> pd.DataFrame:
        """Normalize column names and common aliases for predictable access."""
        normalized = {col: self._slugify(col) for col in df.columns}
        df = df.rename(columns=normalized)

        aliases = {
            "quarter": "date",
            "period": "date",
            "time": "date",
            "obs": "value",
            "level": "value",
            "gdp": "value",
            "cpi": "value",
        }
        df = df.rename(columns={col: aliases.get(col, col) for col in df.columns})
        return df

    def _slugify(self, value: str) -> str:
        normalized = unicodedata.normalize("NFKD", str(value))
        cleaned = "".join(ch for ch in normalized if ch.isalnum())
        return cleaned.lower()

    def _parse_quarter(self, raw: str, row: int) -> pd.Period:
        match = QUARTER_PATTERN.match(str(raw).strip())
        if not match:
            raise SeriesValidationError(f"cannot parse quarter '{raw}' (expected YYYY-Qn)", row=row)
        return pd.Period(year=int(match.group(1)), quarter=int(match.group(2)), freq="Q")

    def _parse_value(self, raw: str, row: int) -> float:
        try:
            value = float(str(raw).strip())
        except ValueError:
            raise SeriesValidationError(f"value '{raw}' is not a number", row=row)
        if not np.isfinite(value) or value <= 0:
            raise SeriesValidationError(f"value must be positive, got {raw}", row=row)
        return value


def load_series(path: Path, name: Optional[str] = None) -> SeriesFile:
    return SeriesLoader().load(path, name)


def align_series(first: SeriesFile, second: SeriesFile) -> Tuple[SeriesFile, SeriesFile]:
    """Trim two series to their common date range."""
    start = max(first.start, second.start)
    end = min(first.end, second.end)
    if start > end:
        raise SeriesValidationError(f"{first.name} and {second.name} do not overlap")
    return first.sliced(start, end), second.sliced(start, end)


def transform(gdp: SeriesFile, cpi: Optional[SeriesFile] = None) -> ModelData:
    """
    y_t = 100 log GDP_t and, for bivariate runs, pi_t = 400 (log CPI_t - log CPI_t-1).

    Bivariate data lose their first quarter so both rows share one index.
    """
    if cpi is None:
        dates = gdp.index
        observations = (100.0 * np.log(gdp.values))[:, None]
        names: Tuple[str, ...] = ("gdp",)
    else:
        gdp, cpi = align_series(gdp, cpi)
        log_cpi = np.log(cpi.values)
        inflation = 400.0 * np.diff(log_cpi)
        output = 100.0 * np.log(gdp.values[1:])
        dates = gdp.index[1:]
        observations = np.column_stack([output, inflation])
        names = ("gdp", "inflation")

    if observations.shape[0] < MIN_MODEL_LENGTH:
        raise SeriesValidationError(
            f"{observations.shape[0]} usable quarters after transformation, need at least {MIN_MODEL_LENGTH}"
        )
    return ModelData(dates=dates, observations=observations, names=names)


def levels_from_output(y) -> np.ndarray:
    """Invert y = 100 log level."""
    return np.exp(np.asarray(y, dtype=float) / 100.0)


def levels_from_inflation(inflation, base: float = 100.0) -> np.ndarray:
    """CPI levels whose annualized log changes are ``inflation``; the first entry is ``base``."""
    steps = np.concatenate([[0.0], np.cumsum(np.asarray(inflation, dtype=float) / 400.0)])
    return base * np.exp(steps)


def write_series(series: SeriesFile, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    series.to_frame().to_csv(path, index=False, float_format="%.17g")
    logger.debug(f"Wrote {len(series)} quarters to {path}")
