"""
Posterior summaries and convergence diagnostics.

HPD intervals, Geweke z-scores, MaP selection, autocorrelation / effective
sample size, the Phillips-curve effects implied by each draw, the
Hodrick-Prescott filter and turning-point extraction from a cycle path.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from config import settings
from output_gap.errors import DegenerateChainError, DomainError, NumericalError, StructuralError
from output_gap.models import DerivedEffects, ParameterVector, build_model
from output_gap.sampler import PosteriorDraws
from output_gap.statespace import kalman_filter, kalman_smoother

logger = logging.getLogger(__name__)

MIN_HPD_DRAWS = 100
MIN_GEWEKE_DRAWS = 1000
SUMMARY_COLUMNS = ["Param", "Mean", "Std. Dev.", "MaP", "HPD lower", "HPD upper", "Geweke"]

# Derived rows appended to bivariate summaries.
EFFECT_LABELS = {
    "gap_loading": "theta0*phi1+theta1",
    "lagged_gap_loading": "theta0*phi2",
    "level_effect": "level_effect",
    "change_effect": "change_effect",
}


@dataclass(frozen=True)
class SummaryRow:
    """One line of the posterior summary table."""

    name: str
    mean: float
    std: float
    map: float
    hpd_lower: float
    hpd_upper: float
    geweke_z: float

    def to_dict(self) -> Dict[str, object]:
        return dict(zip(SUMMARY_COLUMNS, (
            self.name, self.mean, self.std, self.map, self.hpd_lower, self.hpd_upper, self.geweke_z,
        )))


def hpd_interval(draws, level: float = settings.hpd_level) -> Tuple[float, float]:
    """Shortest interval covering ceil(level * n) of the sorted draws."""
    x = np.sort(np.asarray(draws, dtype=float).ravel())
    n = x.size
    if n < MIN_HPD_DRAWS:
        raise StructuralError(f"HPD interval needs at least {MIN_HPD_DRAWS} draws, got {n}")
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    m = int(np.ceil(level * n - 1e-9))
    widths = x[m - 1:] - x[: n - m + 1]
    j = int(np.argmin(widths))
    return float(x[j]), float(x[j + m - 1])


def _centered(draws) -> np.ndarray:
    x = np.asarray(draws, dtype=float).ravel()
    xc = x - x.mean()
    if not np.any(xc):
        raise DegenerateChainError("chain is constant")
    return xc


def autocorrelation(draws, max_lag: int = settings.autocorrelation_max_lag) -> np.ndarray:
    """Sample autocorrelations at lags 0..max_lag by direct sums."""
    xc = _centered(draws)
    n = xc.size
    max_lag = min(max_lag, n - 1)
    c0 = np.dot(xc, xc) / n
    return np.array([np.dot(xc[: n - k], xc[k:]) / n / c0 for k in range(max_lag + 1)])


def effective_sample_size(draws, max_lag: int = settings.autocorrelation_max_lag) -> float:
    """n / (1 + 2 sum rho_k), truncated at the first non-positive autocorrelation."""
    acf = autocorrelation(draws, max_lag)
    total = 0.0
    for rho in acf[1:]:
        if rho <= 0:
            break
        total += rho
    return float(np.asarray(draws).size / (1.0 + 2.0 * total))


def chain_autocorrelations(
    draws: PosteriorDraws, max_lag: int = settings.autocorrelation_max_lag
) -> pd.DataFrame:
    """Autocorrelations of every parameter column, one row per lag; constant columns are NaN."""
    if draws.n_keep == 0:
        raise StructuralError("no kept draws")
    lags = min(max_lag, draws.n_keep - 1)
    frame = pd.DataFrame({"lag": np.arange(lags + 1)})
    for j, name in enumerate(draws.names):
        try:
            frame[name] = autocorrelation(draws.draws[:, j], lags)
        except DegenerateChainError:
            logger.warning(f"{name}: chain is constant, autocorrelation undefined")
            frame[name] = np.nan
    return frame


def effective_sample_sizes(
    draws: PosteriorDraws, max_lag: int = settings.autocorrelation_max_lag
) -> Dict[str, Optional[float]]:
    """ESS per parameter; None for constant columns."""
    sizes: Dict[str, Optional[float]] = {}
    for j, name in enumerate(draws.names):
        try:
            sizes[name] = effective_sample_size(draws.draws[:, j], max_lag)
        except DegenerateChainError:
            sizes[name] = None
    return sizes


def _spectral_density_at_zero(x: np.ndarray) -> float:
    """Bartlett lag-window estimate with bandwidth floor(n^(1/3))."""
    n = x.size
    xc = x - x.mean()
    bandwidth = int(np.floor(n ** (1.0 / 3.0)))
    s = np.dot(xc, xc) / n
    for k in range(1, bandwidth + 1):
        weight = 1.0 - k / (bandwidth + 1.0)
        s += 2.0 * weight * np.dot(xc[: n - k], xc[k:]) / n
    return float(s)


def geweke_z(draws, first: float = 0.1, last: float = 0.5) -> float:
    """
    Difference of early and late window means over its spectral standard error.

    Two constant windows with different means give +/-inf; a chain that is
    constant across both windows raises DegenerateChainError.
    """
    x = np.asarray(draws, dtype=float).ravel()
    n = x.size
    if n < MIN_GEWEKE_DRAWS:
        raise StructuralError(f"Geweke diagnostic needs at least {MIN_GEWEKE_DRAWS} draws, got {n}")
    a = x[: int(first * n)]
    b = x[n - int(last * n):]
    diff = a.mean() - b.mean()
    var = _spectral_density_at_zero(a) / a.size + _spectral_density_at_zero(b) / b.size
    if var <= 0:
        if diff == 0:
            raise DegenerateChainError("both Geweke windows are constant")
        return float(np.sign(diff) * np.inf)
    return float(diff / np.sqrt(var))


def map_index(draws: PosteriorDraws) -> int:
    if draws.n_keep == 0:
        raise StructuralError("no kept draws")
    return int(np.argmax(draws.log_posterior))


def map_estimate(draws: PosteriorDraws) -> ParameterVector:
    """Kept draw with the highest stored log joint posterior."""
    return draws.parameter_vector(map_index(draws))


def smoothed_map_states(
    draws: PosteriorDraws,
    y,
    lam_upper: float = np.pi,
    kappa_init: float = settings.kappa_init,
) -> np.ndarray:
    """
    Smoothed states E[alpha_t | y] of the model evaluated at the MaP draw.

    Returns an array (T, p) in the specification's state order.
    """
    model = build_model(draws.spec, map_estimate(draws), kappa_init=kappa_init, lam_upper=lam_upper)
    return kalman_smoother(model, kalman_filter(model, y)).means


@dataclass
class EffectDraws:
    """Per-draw Phillips-curve effects with their HPD intervals."""

    frame: pd.DataFrame
    hpd: Dict[str, Tuple[float, float]]

    def at(self, k: int) -> DerivedEffects:
        return DerivedEffects(**{col: float(self.frame[col].iloc[k]) for col in self.frame.columns})


def derived_effects(
    draws: PosteriorDraws, level: float = settings.hpd_level, with_hpd: bool = True
) -> EffectDraws:
    """Level/change effects and inflation loadings of every kept draw."""
    if not draws.spec.is_bivariate:
        raise StructuralError(f"{draws.spec_label} has no Phillips-curve block")
    theta0, theta1 = draws.column("theta0"), draws.column("theta1")
    rho, lam = draws.column("rho"), draws.column("lam")
    phi1 = 2.0 * rho * np.cos(lam)
    phi2 = -rho ** 2
    frame = pd.DataFrame({
        "level_effect": theta0 * (phi1 + phi2) + theta1,
        "change_effect": theta0 * phi2,
        "gap_loading": theta0 * phi1 + theta1,
        "lagged_gap_loading": theta0 * phi2,
    })
    hpd = {}
    if not with_hpd:
        return EffectDraws(frame=frame, hpd=hpd)
    if draws.n_keep >= MIN_HPD_DRAWS:
        hpd = {name: hpd_interval(frame[name], level) for name in frame.columns}
    else:
        logger.warning(f"Only {draws.n_keep} draws, skipping HPD intervals of derived effects")
    return EffectDraws(frame=frame, hpd=hpd)


def summarize_vector(name: str, values: np.ndarray, map_value: float, level: float) -> SummaryRow:
    """Mean, std, MaP, HPD and Geweke for one column of draws."""
    lower = upper = z = np.nan
    if values.size >= MIN_HPD_DRAWS:
        lower, upper = hpd_interval(values, level)
    if values.size >= MIN_GEWEKE_DRAWS:
        try:
            z = geweke_z(values)
        except DegenerateChainError:
            logger.warning(f"{name}: chain is constant, Geweke statistic undefined")
    return SummaryRow(
        name=name,
        mean=float(values.mean()),
        std=float(values.std(ddof=1)) if values.size > 1 else np.nan,
        map=float(map_value),
        hpd_lower=lower,
        hpd_upper=upper,
        geweke_z=z,
    )


def posterior_summary(
    draws: PosteriorDraws, level: float = settings.hpd_level, include_period: bool = True
) -> List[SummaryRow]:
    """Summary rows for every parameter, plus derived rows."""
    if draws.n_keep == 0:
        raise StructuralError("cannot summarize an empty set of draws")
    if draws.n_keep < MIN_HPD_DRAWS:
        logger.warning(f"Only {draws.n_keep} kept draws, HPD and Geweke columns left empty")
    k = map_index(draws)
    rows = [
        summarize_vector(name, draws.draws[:, j], draws.draws[k, j], level)
        for j, name in enumerate(draws.names)
    ]
    if include_period:
        period = 2.0 * np.pi / draws.column("lam")
        rows.append(summarize_vector("period", period, period[k], level))
    if draws.spec.is_bivariate:
        effects = derived_effects(draws, level, with_hpd=False).frame
        for key, label in EFFECT_LABELS.items():
            values = effects[key].to_numpy()
            rows.append(summarize_vector(label, values, values[k], level))
    return rows


def summary_frame(rows: Sequence[SummaryRow]) -> pd.DataFrame:
    return pd.DataFrame([row.to_dict() for row in rows], columns=SUMMARY_COLUMNS)


def credible_bands(paths: np.ndarray, level: float = settings.hpd_level) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-period HPD bands of sampled paths (n_draws, T).

    Below the HPD minimum draw count, equal-tailed quantiles are used instead.
    """
    paths = np.asarray(paths, dtype=float)
    if paths.shape[0] >= MIN_HPD_DRAWS:
        bands = np.array([hpd_interval(paths[:, t], level) for t in range(paths.shape[1])])
        return bands[:, 0], bands[:, 1]
    if paths.shape[0] == 0:
        raise StructuralError("no paths to summarize")
    tail = 0.5 * (1.0 - level)
    return np.quantile(paths, tail, axis=0), np.quantile(paths, 1.0 - tail, axis=0)


def hp_filter(series, smoothing: float = settings.hp_smoothing) -> np.ndarray:
    """
    Hodrick-Prescott trend.

    Solves (I + smoothing * D'D) mu = y where D takes second differences; the
    system is pentadiagonal and handled by a banded solver.
    """
    y = np.asarray(series, dtype=float).ravel()
    n = y.size
    if n < 5:
        raise StructuralError(f"HP filter needs at least 5 observations, got {n}")
    if smoothing <= 0:
        raise DomainError(f"smoothing must be positive, got {smoothing}")

    main = np.full(n, 6.0)
    main[[0, -1]] = 1.0
    main[[1, -2]] = 5.0
    off1 = np.full(n - 1, -4.0)
    off1[[0, -1]] = -2.0
    off2 = np.ones(n - 2)

    banded = np.zeros((5, n))
    banded[0, 2:] = smoothing * off2
    banded[1, 1:] = smoothing * off1
    banded[2] = 1.0 + smoothing * main
    banded[3, :-1] = smoothing * off1
    banded[4, :-2] = smoothing * off2
    try:
        return linalg.solve_banded((2, 2), banded, y)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"HP system is singular: {exc}")


class TurningPointKind(str, Enum):
    PEAK = "peak"
    TROUGH = "trough"


@dataclass(frozen=True)
class TurningPoint:
    index: int
    kind: TurningPointKind
    value: float

    def to_dict(self) -> Dict[str, object]:
        return {"index": self.index, "kind": self.kind.value, "value": self.value}


def _enforce_alternation(points: List[TurningPoint]) -> List[TurningPoint]:
    result: List[TurningPoint] = []
    for point in points:
        if result and result[-1].kind is point.kind:
            keep_new = (
                point.value > result[-1].value
                if point.kind is TurningPointKind.PEAK
                else point.value < result[-1].value
            )
            if keep_new:
                result[-1] = point
        else:
            result.append(point)
    return result


def turning_points(cycle, min_separation: int = 2) -> List[TurningPoint]:
    """
    Alternating peaks and troughs of a cycle path.

    A peak (trough) is a strict local maximum (minimum) that is also the
    extreme of the surrounding +/- min_separation window. Phases shorter than
    min_separation are removed as pairs.
    """
    x = np.asarray(cycle, dtype=float).ravel()
    n = x.size
    if n < 5:
        raise StructuralError(f"turning points need at least 5 observations, got {n}")
    w = max(1, int(min_separation))

    points: List[TurningPoint] = []
    for i in range(w, n - w):
        window = x[i - w: i + w + 1]
        if x[i] > x[i - 1] and x[i] > x[i + 1] and x[i] == window.max():
            points.append(TurningPoint(i, TurningPointKind.PEAK, float(x[i])))
        elif x[i] < x[i - 1] and x[i] < x[i + 1] and x[i] == window.min():
            points.append(TurningPoint(i, TurningPointKind.TROUGH, float(x[i])))

    points = _enforce_alternation(points)
    while True:
        short = next(
            (j for j in range(len(points) - 1) if points[j + 1].index - points[j].index < w),
            None,
        )
        if short is None:
            break
        del points[short: short + 2]
        points = _enforce_alternation(points)
    return points


def cycle_correlation(first, second) -> float:
    """Pearson correlation of two cycle paths of equal length."""
    a = np.asarray(first, dtype=float).ravel()
    b = np.asarray(second, dtype=float).ravel()
    if a.size != b.size:
        raise StructuralError(f"cycle lengths differ: {a.size} vs {b.size}")
    if a.size < 2:
        raise StructuralError("need at least two periods to correlate")
    return float(np.corrcoef(a, b)[0, 1])
