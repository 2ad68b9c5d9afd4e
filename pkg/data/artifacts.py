"""
Run artifacts: draws, summaries, state bands, turning points and manifests.
All files are UTF-8; CSVs use a header row, comma delimiter and "." decimals.
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from data.series_loader import ModelData
from output_gap.diagnostics import (
    SummaryRow,
    TurningPoint,
    credible_bands,
    summary_frame,
)
from output_gap.errors import SeriesValidationError
from output_gap.models import ModelSpec
from output_gap.sampler import PosteriorDraws

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
DRAWS_FILE = "draws.csv"
SUMMARY_FILE = "summary.csv"
STATES_FILE = "states.csv"
TURNING_POINTS_FILE = "turning_points.csv"
AUTOCORRELATION_FILE = "autocorrelation.csv"
MANIFEST_FILE = "manifest.json"


def _ensure_dir(path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_draws_csv(draws: PosteriorDraws, path: Path) -> None:
    """One row per kept draw; parameter columns then log_posterior."""
    path = _ensure_dir(path)
    draws.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {draws.n_keep} draws to {path}")


def read_draws_csv(path: Path, spec: ModelSpec) -> PosteriorDraws:
    """Reload a draws file; state paths are not part of it."""
    df = pd.read_csv(path)
    if "log_posterior" not in df.columns:
        raise SeriesValidationError(f"{path} has no log_posterior column")
    names = tuple(col for col in df.columns if col != "log_posterior")
    missing = set(spec.active_parameters) - set(names)
    if missing:
        raise SeriesValidationError(f"{path} lacks columns for {', '.join(sorted(missing))}")
    n = len(df)
    return PosteriorDraws(
        spec_label=spec.label,
        names=names,
        draws=df[list(names)].to_numpy(dtype=float),
        log_posterior=df["log_posterior"].to_numpy(dtype=float),
        acceptance_rates={},
        metadata={"spec": spec.label, "n_keep": n, "source": str(path)},
        trend_paths=np.empty((n, 0)),
        cycle_paths=np.empty((n, 0)),
    )


def write_summary_csv(rows: Sequence[SummaryRow], path: Path) -> pd.DataFrame:
    path = _ensure_dir(path)
    frame = summary_frame(rows)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote summary of {len(rows)} rows to {path}")
    return frame


def states_frame(
    data: ModelData, draws: PosteriorDraws, map_states: np.ndarray, level: float
) -> pd.DataFrame:
    """
    Per-quarter smoothed MaP trend/cycle paths next to the observations.

    ``map_states`` holds the smoothed states at the MaP parameters (T, p); the
    bands are HPD intervals of the sampled paths.
    """
    spec = draws.spec
    frame = pd.DataFrame({"date": data.date_labels(), "gdp": data.observations[:, 0]})

    components = [("trend", "mu", draws.trend_paths), ("cycle", "psi", draws.cycle_paths)]
    if draws.core_inflation_paths is not None:
        frame["inflation"] = data.observations[:, 1]
        components.append(("core_inflation", "tau", draws.core_inflation_paths))

    for label, state, paths in components:
        lower, upper = credible_bands(paths, level)
        frame[f"{label}_map"] = map_states[:, spec.state_index(state)]
        frame[f"{label}_lower"] = lower
        frame[f"{label}_upper"] = upper
    return frame


def write_states_csv(
    data: ModelData, draws: PosteriorDraws, map_states: np.ndarray, path: Path, level: float
) -> pd.DataFrame:
    path = _ensure_dir(path)
    frame = states_frame(data, draws, map_states, level)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {len(frame)} quarters of smoothed states to {path}")
    return frame


def write_autocorrelation_csv(frame: pd.DataFrame, path: Path) -> None:
    """One row per lag, one column per parameter."""
    path = _ensure_dir(path)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote autocorrelations up to lag {int(frame['lag'].iloc[-1])} to {path}")


def write_turning_points_csv(points: List[TurningPoint], dates: Sequence[str], path: Path) -> None:
    path = _ensure_dir(path)
    frame = pd.DataFrame(
        [{"date": dates[p.index], **p.to_dict()} for p in points],
        columns=["date", "index", "kind", "value"],
    )
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {len(points)} turning points to {path}")


def write_json(payload: Dict, path: Path) -> None:
    path = _ensure_dir(path)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, default=_json_default)


def read_json(path: Path) -> Dict:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")
