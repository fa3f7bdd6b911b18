"""Right-censored survival data containers, time grids, and CSV I/O."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MetricError, ShapeError


@dataclass
class SurvivalDataset:
    """Feature matrix with observed times and event indicators.

    Each row is one individual: features, the observed (possibly censored)
    time, and the event indicator (1 = event, 0 = censored).
    """

    features: np.ndarray  # (n, p)
    time: np.ndarray  # (n,)
    event: np.ndarray  # (n,) in {0, 1}
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.time = np.asarray(self.time, dtype=np.float64)
        self.event = np.asarray(self.event, dtype=np.int64)
        if self.features.ndim != 2:
            raise ShapeError(f"features must be 2-D, got {self.features.shape}")
        n = self.features.shape[0]
        if self.time.shape != (n,) or self.event.shape != (n,):
            raise ShapeError("features, time and event must have equal length")
        if not np.all(np.isfinite(self.time)) or np.any(self.time < 0):
            raise ShapeError("times must be finite and nonnegative")
        if not np.all((self.event == 0) | (self.event == 1)):
            raise ShapeError("event indicators must be 0 or 1")
        if not self.feature_names:
            self.feature_names = [f"x{j + 1}" for j in range(self.features.shape[1])]
        if len(self.feature_names) != self.features.shape[1]:
            raise ShapeError("feature_names length must equal feature count")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def n_events(self) -> int:
        return int(self.event.sum())

    def subset(self, idx) -> "SurvivalDataset":
        idx = np.asarray(idx)
        return SurvivalDataset(
            self.features[idx], self.time[idx], self.event[idx], list(self.feature_names)
        )


@dataclass
class TimeGrid:
    """Strictly increasing, nonempty evaluation time points."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 1 or self.points.size == 0:
            raise ShapeError("grid must be a nonempty 1-D array")
        if np.any(self.points < 0) or not np.all(np.isfinite(self.points)):
            raise ShapeError("grid points must be finite and nonnegative")
        if np.any(np.diff(self.points) <= 0):
            raise ShapeError("grid points must be strictly increasing")

    def __len__(self) -> int:
        return self.points.size

    def __iter__(self):
        return iter(self.points)


def evaluation_grid(data: SurvivalDataset, size: int) -> TimeGrid:
    """Grid of unique training event times, thinned to at most ``size`` points.

    Thinning keeps equidistant quantiles of the sorted unique event times, so
    the grid always spans [min event time, max event time].
    """
    if size < 2:
        raise ValueError(f"grid size must be >= 2, got {size}")
    times = np.unique(data.time[data.event == 1])
    if times.size == 0:
        raise MetricError("no events: cannot build an evaluation grid")
    if times.size > size:
        idx = np.unique(np.round(np.linspace(0, times.size - 1, size)).astype(int))
        times = times[idx]
    return TimeGrid(times)


def train_test_split(
    data: SurvivalDataset, test_n: int, seed: int
) -> tuple[SurvivalDataset, SurvivalDataset]:
    """Disjoint, reproducible split with ``test_n`` rows held out."""
    if not 0 < test_n < data.n:
        raise ValueError(f"test_n must be in (0, {data.n}), got {test_n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n)
    return data.subset(np.sort(perm[test_n:])), data.subset(np.sort(perm[:test_n]))


def save_csv(data: SurvivalDataset, path) -> None:
    """Write the dataset as ``time,event,x1..xp`` with full float precision."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("time,event," + ",".join(data.feature_names) + "\n")
        for i in range(data.n):
            row = [f"{data.time[i]:.17g}", str(int(data.event[i]))]
            row.extend(f"{v:.17g}" for v in data.features[i])
            fh.write(",".join(row) + "\n")


def load_csv(path) -> SurvivalDataset:
    """Read a dataset written by :func:`save_csv` (header row required)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["time", "event"]:
            raise ValueError(f"{path}: expected header starting with 'time,event'")
        names = header[2:]
        times, events, rows = [], [], []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            times.append(float(parts[0]))
            events.append(int(parts[1]))
            rows.append([float(v) for v in parts[2:]])
    return SurvivalDataset(np.array(rows), np.array(times), np.array(events), names)
