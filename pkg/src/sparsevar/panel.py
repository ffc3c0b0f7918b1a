"""Date-indexed panel container, core transforms and per-series summary statistics."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np


class PanelError(ValueError):
    """Raised on invalid panel construction or transform input."""


@dataclass(frozen=True)
class TimePanel:
    """T x K matrix of named daily series.

    Row t holds the observation for ``dates[t]``; column k is the series
    ``names[k]``. Values are stored read-only so panels can be shared freely.
    """

    dates: tuple[date, ...]
    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 2:
            raise PanelError(f"values must be 2-D, got shape {arr.shape}")
        if arr.shape[0] != len(self.dates):
            raise PanelError(
                f"{arr.shape[0]} rows but {len(self.dates)} dates"
            )
        if arr.shape[1] != len(self.names):
            raise PanelError(
                f"{arr.shape[1]} columns but {len(self.names)} names"
            )
        if len(set(self.names)) != len(self.names):
            dupes = sorted({n for n in self.names if self.names.count(n) > 1})
            raise PanelError(f"duplicate series names: {dupes}")
        for prev, nxt in zip(self.dates, self.dates[1:]):
            if nxt <= prev:
                raise PanelError(f"dates not strictly increasing at {nxt}")
        if not np.all(np.isfinite(arr)):
            t, k = map(int, np.argwhere(~np.isfinite(arr))[0])
            raise PanelError(
                f"non-finite value in series {self.names[k]!r} on {self.dates[t]}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def n_series(self) -> int:
        return self.values.shape[1]

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise PanelError(f"unknown series {name!r}") from None

    def position(self, d: date) -> int:
        # dates are sorted; binary search keeps lookups cheap on long panels
        lo, hi = 0, len(self.dates)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.dates[mid] < d:
                lo = mid + 1
            else:
                hi = mid
        if lo < len(self.dates) and self.dates[lo] == d:
            return lo
        raise PanelError(f"date {d} not in panel")

    def slice_rows(self, start: int, stop: int) -> "TimePanel":
        return TimePanel(self.dates[start:stop], self.names, self.values[start:stop])


@dataclass(frozen=True)
class StandardizationStats:
    """Per-column means and population standard deviations used to standardize."""

    means: np.ndarray
    sds: np.ndarray

    def __post_init__(self):
        means = np.atleast_1d(np.asarray(self.means, dtype=float))
        sds = np.atleast_1d(np.asarray(self.sds, dtype=float))
        if means.shape != sds.shape or means.ndim != 1:
            raise PanelError("means and sds must be 1-D vectors of equal length")
        if np.any(sds <= 0):
            raise PanelError("standard deviations must be strictly positive")
        means.setflags(write=False)
        sds.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sds", sds)

    @property
    def n_series(self) -> int:
        return self.means.shape[0]

    def transform(self, values: np.ndarray) -> np.ndarray:
        """Map raw rows (last axis = series) into standardized units."""
        return (np.asarray(values, dtype=float) - self.means) / self.sds

    def inverse(self, values: np.ndarray) -> np.ndarray:
        """Map standardized rows back to raw units."""
        return np.asarray(values, dtype=float) * self.sds + self.means


@dataclass(frozen=True)
class LagEmbedding:
    """Stacked-lag regression layout for a VAR(p).

    Column tau of Z stacks [y_{tau+p-1}; ...; y_{tau}] (lag-1 block first) and
    the matching column of Y is y_{tau+p}, so Y = A Z + U with A = [A_1 ... A_p].
    """

    Y: np.ndarray  # K x (T - p)
    Z: np.ndarray  # (K p) x (T - p)
    p: int
    names: tuple[str, ...] = ()
    target_dates: tuple[date, ...] = ()

    @property
    def n_series(self) -> int:
        return self.Y.shape[0]

    @property
    def n_cols(self) -> int:
        return self.Y.shape[1]

    def regressor_names(self) -> list[str]:
        """Row labels of Z, lag-major: name.l1 ... for lag 1 first."""
        names = self.names or tuple(f"x{k}" for k in range(self.n_series))
        return [f"{n}.l{lag}" for lag in range(1, self.p + 1) for n in names]


@dataclass(frozen=True)
class SummaryReport:
    """Per-series distribution summary plus unit-root statistic."""

    names: tuple[str, ...]
    mean: np.ndarray
    median: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray
    value_range: np.ndarray
    skewness: np.ndarray
    kurtosis: np.ndarray
    adf: np.ndarray

    def rows(self):
        for k, name in enumerate(self.names):
            yield {
                "series": name,
                "mean": float(self.mean[k]),
                "median": float(self.median[k]),
                "min": float(self.minimum[k]),
                "max": float(self.maximum[k]),
                "range": float(self.value_range[k]),
                "skew": float(self.skewness[k]),
                "kurtosis": float(self.kurtosis[k]),
                "adf": float(self.adf[k]),
            }


def log_returns(prices: TimePanel) -> TimePanel:
    """Log returns ln(P_t / P_{t-1}); output is dated on the later day."""
    if prices.n_obs < 2:
        raise PanelError("need at least two rows to compute returns")
    vals = prices.values
    if np.any(vals <= 0):
        t, k = map(int, np.argwhere(vals <= 0)[0])
        raise PanelError(
            f"non-positive price in series {prices.names[k]!r} on {prices.dates[t]}"
        )
    rets = np.diff(np.log(vals), axis=0)
    return TimePanel(prices.dates[1:], prices.names, rets)


def standardize(panel: TimePanel) -> tuple[TimePanel, StandardizationStats]:
    """Center and scale each column to mean 0, population sd 1."""
    means = panel.values.mean(axis=0)
    sds = panel.values.std(axis=0)  # population (1/T) convention
    if np.any(sds == 0):
        k = int(np.flatnonzero(sds == 0)[0])
        raise PanelError(f"series {panel.names[k]!r} has zero variance")
    stats = StandardizationStats(means, sds)
    return TimePanel(panel.dates, panel.names, stats.transform(panel.values)), stats


def destandardize(panel: TimePanel, stats: StandardizationStats) -> TimePanel:
    """Invert :func:`standardize` using the recorded statistics."""
    if stats.n_series != panel.n_series:
        raise PanelError(
            f"stats cover {stats.n_series} series, panel has {panel.n_series}"
        )
    return TimePanel(panel.dates, panel.names, stats.inverse(panel.values))


def lag_embed(panel: TimePanel, p: int) -> LagEmbedding:
    """Build the Y = A Z + U layout with p stacked lags."""
    if p < 1:
        raise PanelError(f"lag order must be >= 1, got {p}")
    if p >= panel.n_obs:
        raise PanelError(f"lag order {p} >= sample length {panel.n_obs}")
    vals = panel.values
    T, K = vals.shape
    Y = vals[p:].T.copy()
    Z = np.empty((K * p, T - p))
    for lag in range(1, p + 1):
        Z[(lag - 1) * K: lag * K, :] = vals[p - lag: T - lag].T
    Y.setflags(write=False)
    Z.setflags(write=False)
    return LagEmbedding(Y=Y, Z=Z, p=p, names=panel.names, target_dates=panel.dates[p:])


def adf_stat(y: np.ndarray, lags: int = 1, constant: bool = True) -> float:
    """Augmented Dickey-Fuller t-statistic on the lagged-level coefficient.

    Regression: dy_t on [const?] + y_{t-1} + dy_{t-1} ... dy_{t-lags}.
    """
    y = np.asarray(y, dtype=float)
    if lags < 0:
        raise PanelError("augmentation lag count must be >= 0")
    dy = np.diff(y)
    n = len(dy) - lags
    n_params = (1 if constant else 0) + 1 + lags
    if n <= n_params + 1:
        raise PanelError(
            f"series too short for requested lags: {len(y)} obs, {lags} lags"
        )
    cols = []
    if constant:
        cols.append(np.ones(n))
    cols.append(y[lags:-1])
    for i in range(1, lags + 1):
        cols.append(dy[lags - i: len(dy) - i])
    X = np.column_stack(cols)
    z = dy[lags:]
    beta, _, _, _ = np.linalg.lstsq(X, z, rcond=None)
    resid = z - X @ beta
    s2 = resid @ resid / (n - X.shape[1])
    xtx_inv = np.linalg.inv(X.T @ X)
    level = 1 if constant else 0
    return float(beta[level] / np.sqrt(s2 * xtx_inv[level, level]))


def summary_stats(
    panel: TimePanel,
    adf_lags: int = 1,
    excess_kurtosis: bool = True,
    adf_constant: bool = True,
) -> SummaryReport:
    """Moments, range and ADF statistic per series.

    Kurtosis is excess (raw minus 3) by default; set ``excess_kurtosis=False``
    for the raw fourth standardized moment.
    """
    if panel.n_obs < 20:
        raise PanelError("need at least 20 observations for the ADF statistic")
    v = panel.values
    mean = v.mean(axis=0)
    centered = v - mean
    m2 = (centered**2).mean(axis=0)
    if np.any(m2 == 0):
        k = int(np.flatnonzero(m2 == 0)[0])
        raise PanelError(f"series {panel.names[k]!r} has zero variance")
    m3 = (centered**3).mean(axis=0)
    m4 = (centered**4).mean(axis=0)
    skew = m3 / m2**1.5
    kurt = m4 / m2**2
    if excess_kurtosis:
        kurt = kurt - 3.0
    minimum = v.min(axis=0)
    maximum = v.max(axis=0)
    adf = np.array(
        [adf_stat(v[:, k], lags=adf_lags, constant=adf_constant) for k in range(panel.n_series)]
    )
    return SummaryReport(
        names=panel.names,
        mean=mean,
        median=np.median(v, axis=0),
        minimum=minimum,
        maximum=maximum,
        value_range=maximum - minimum,
        skewness=skew,
        kurtosis=kurt,
        adf=adf,
    )


def _format_number(x: float) -> str:
    return "%.17g" % x


def write_panel_csv(panel: TimePanel, path) -> None:
    """Write a panel as ``date,<name1>,...`` with 17-significant-digit values."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", *panel.names])
        for t, d in enumerate(panel.dates):
            writer.writerow([d.isoformat(), *(_format_number(x) for x in panel.values[t])])


def read_panel_csv(path) -> TimePanel:
    """Load a ``date,...`` CSV, rejecting gaps in the daily calendar."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelError(f"{path}: empty file") from None
        if not header or header[0].strip() != "date":
            raise PanelError(f"{path}: first column must be 'date'")
        names = [h.strip() for h in header[1:]]
        if not names:
            raise PanelError(f"{path}: no series columns")
        dates: list[date] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names) + 1:
                raise PanelError(f"{path}:{lineno}: expected {len(names) + 1} fields")
            try:
                d = date.fromisoformat(row[0].strip())
            except ValueError:
                raise PanelError(f"{path}:{lineno}: bad date {row[0]!r}") from None
            try:
                vals = [float(x) for x in row[1:]]
            except ValueError:
                raise PanelError(f"{path}:{lineno}: non-numeric value") from None
            dates.append(d)
            rows.append(vals)
    if not rows:
        raise PanelError(f"{path}: no data rows")
    for prev, nxt in zip(dates, dates[1:]):
        if nxt != prev + timedelta(days=1):
            raise PanelError(f"{path}: missing dates between {prev} and {nxt}")
    return TimePanel(tuple(dates), tuple(names), np.array(rows, dtype=float))
