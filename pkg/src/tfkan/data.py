"""CSV ingestion, chronological splitting, sliding windows, and synthetic series.

Datasets are normalized with statistics fitted on the training split only,
split boundaries are contiguous and chronological, and windows never
straddle a split boundary, so no test information can leak into training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .training import MinMaxScaler

__all__ = [
    "SPLITS",
    "read_csv_values",
    "save_csv",
    "SeriesDataset",
    "load_csv",
    "TOY_FUNCTIONS",
    "toy_function",
    "gen_toy",
    "gen_periodic",
]

SPLITS = ("train", "val", "test")


def _parse_cell(cell: str, line_no: int, col_no: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ValueError(
            f"cannot parse numeric value {cell!r} at line {line_no}, column {col_no}"
        ) from None
    if not np.isfinite(value):
        raise ValueError(
            f"non-finite value {cell!r} at line {line_no}, column {col_no}"
        )
    return value


def read_csv_values(path: str) -> tuple[list[str], np.ndarray]:
    """Read a headered CSV into (column names, [T, N] float array).

    A leading timestamp column is auto-detected (its first data cell fails
    numeric parsing) and dropped.  Cells that do not parse as finite
    numbers raise with their line and column.
    """
    with open(path) as fh:
        rows = [line.rstrip("\n") for line in fh]
    rows = [r for r in rows if r.strip()]
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header row and at least one data row")
    header = rows[0].split(",")
    first = rows[1].split(",")
    drop_first = False
    if header:
        try:
            float(first[0])
        except ValueError:
            drop_first = True
    names = [h.strip() for h in header[1:]] if drop_first else [h.strip() for h in header]
    if not names:
        raise ValueError(f"{path}: no numeric columns found")

    start_col = 1 if drop_first else 0
    values = np.empty((len(rows) - 1, len(names)))
    for i, row in enumerate(rows[1:]):
        cells = row.split(",")
        if len(cells) != len(header):
            raise ValueError(
                f"{path}: line {i + 2} has {len(cells)} cells, expected {len(header)}"
            )
        for j, cell in enumerate(cells[start_col:]):
            values[i, j] = _parse_cell(cell.strip(), i + 2, start_col + j + 1)
    return names, values


def save_csv(path: str, names: list[str], values: np.ndarray) -> None:
    """Write values with full float precision so a reload is exact."""
    values = np.asarray(values)
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for row in values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _split_bounds(total: int, ratios: tuple[int, int, int]) -> dict[str, range]:
    whole = sum(ratios)
    train_len = total * ratios[0] // whole
    val_len = total * ratios[1] // whole
    test_len = total - train_len - val_len
    return {
        "train": range(0, train_len),
        "val": range(train_len, train_len + val_len),
        "test": range(train_len + val_len, train_len + val_len + test_len),
    }


@dataclass
class SeriesDataset:
    """Normalized multivariate series with chronological splits and windows."""

    values: np.ndarray  # [T, N], normalized
    names: list[str]
    scaler: MinMaxScaler
    lookback: int
    horizon: int
    splits: dict[str, range]

    @classmethod
    def from_raw(
        cls,
        raw: np.ndarray,
        names: list[str],
        lookback: int,
        horizon: int,
        ratios: tuple[int, int, int] = (7, 2, 1),
    ) -> "SeriesDataset":
        raw = np.asarray(raw, dtype=np.float64)
        if raw.ndim != 2:
            raise ValueError(f"series values must be [T, N], got shape {raw.shape}")
        splits = _split_bounds(raw.shape[0], ratios)
        need = lookback + horizon
        for split, rng in splits.items():
            if len(rng) < need:
                raise ValueError(
                    f"{split} split has {len(rng)} rows; "
                    f"needs at least lookback + horizon = {need}"
                )
        scaler = MinMaxScaler().fit(raw[splits["train"].start : splits["train"].stop])
        return cls(scaler.transform(raw), list(names), scaler, lookback, horizon, splits)

    @classmethod
    def with_scaler(
        cls,
        raw: np.ndarray,
        names: list[str],
        scaler: MinMaxScaler,
        lookback: int,
        horizon: int,
        ratios: tuple[int, int, int] = (7, 2, 1),
    ) -> "SeriesDataset":
        """Split and window raw values normalized by an existing scaler.

        Used when evaluating a checkpoint: the training-time statistics
        travel with the model instead of being refitted.
        """
        built = cls.from_raw(raw, names, lookback, horizon, ratios)
        built.scaler = scaler
        built.values = scaler.transform(np.asarray(raw, dtype=np.float64))
        return built

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    def window_count(self, split: str) -> int:
        return max(0, len(self.splits[split]) - self.lookback - self.horizon + 1)

    def window(self, split: str, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Window ``i`` of a split: inputs [N, L] and targets [N, tau]."""
        count = self.window_count(split)
        if not 0 <= i < count:
            raise ValueError(f"window {i} out of range for {split} ({count} windows)")
        start = self.splits[split].start + i
        mid = start + self.lookback
        x = self.values[start:mid].T
        y = self.values[mid : mid + self.horizon].T
        return np.ascontiguousarray(x), np.ascontiguousarray(y)

    def batch(self, split: str, indices) -> tuple[np.ndarray, np.ndarray]:
        """Stack windows into [B, N, L] inputs and [B, N, tau] targets."""
        xs, ys = zip(*(self.window(split, int(i)) for i in indices))
        return np.stack(xs), np.stack(ys)


def load_csv(
    path: str,
    lookback: int,
    horizon: int,
    ratios: tuple[int, int, int] = (7, 2, 1),
) -> SeriesDataset:
    names, values = read_csv_values(path)
    return SeriesDataset.from_raw(values, names, lookback, horizon, ratios)


# ---------------------------------------------------------------------------
# synthetic generators

TOY_FUNCTIONS = ("F1", "F2", "F3", "F4")


def toy_function(fid: str, x: np.ndarray) -> np.ndarray:
    """Closed-form toy regression targets on [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    two_pi = 2.0 * np.pi
    if fid == "F1":
        return np.sin(two_pi * x) + 0.5 * np.cos(2 * two_pi * x)
    if fid == "F2":
        return np.sin(2 * two_pi * x) + 0.3 * np.cos(4 * two_pi * x)
    if fid == "F3":
        return np.sin(two_pi * x) + np.cos(3 * two_pi * x) + 0.3 * np.cos(5 * two_pi * x)
    if fid == "F4":
        return np.sin(two_pi * x) + np.sin(2 * two_pi * x + np.pi / 3.0) + np.cos(
            3 * two_pi * x
        )
    raise ValueError(f"unknown toy function {fid!r}; choose from {TOY_FUNCTIONS}")


def gen_toy(
    fid: str,
    count: int,
    noise: float = 0.0,
    seed: int = 42,
    spacing: str = "equispaced",
) -> tuple[np.ndarray, np.ndarray]:
    """Sample (x, f(x)) pairs on [0, 1]; targets are exact when noise is 0."""
    if count < 1:
        raise ValueError(f"sample count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    if spacing == "equispaced":
        x = np.linspace(0.0, 1.0, count)
    elif spacing == "uniform":
        x = np.sort(rng.uniform(0.0, 1.0, count))
    else:
        raise ValueError(f"unknown spacing {spacing!r}")
    y = toy_function(fid, x)
    if noise:
        y = y + rng.normal(0.0, noise, size=count)
    return x, y


_PERIOD_POOL = (8, 12, 16, 24, 32, 48, 64, 96)


def gen_periodic(
    n_channels: int,
    length: int,
    periods: list[float] | None = None,
    trend: float = 0.0,
    noise: float = 0.0,
    seed: int = 42,
) -> tuple[list[str], np.ndarray]:
    """Seeded multivariate series of summed sinusoids with mixed periodicities.

    Each channel sums sinusoids at either the explicit ``periods`` or 2-3
    distinct periods drawn from a fixed pool, plus a linear trend scaled by
    ``trend`` and Gaussian noise with standard deviation ``noise``.  Same
    seed, same data.
    """
    rng = np.random.default_rng(seed)
    pool = [p for p in (_PERIOD_POOL if periods is None else periods)]
    if length <= max(pool):
        raise ValueError(f"length {length} must exceed the largest period {max(pool)}")
    t = np.arange(length, dtype=np.float64)
    values = np.empty((length, n_channels))
    for ch in range(n_channels):
        if periods is None:
            k = int(rng.integers(2, 4))
            chosen = rng.choice(pool, size=min(k, len(pool)), replace=False)
        else:
            chosen = pool
        series = np.zeros(length)
        for p in chosen:
            amp = rng.uniform(0.5, 1.5)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            # Modulo keeps integer periods bit-exactly periodic.
            series += amp * np.sin(2.0 * np.pi * np.mod(t, p) / p + phase)
        slope = trend * rng.uniform(0.5, 1.0) * (1 if ch % 2 == 0 else -1)
        series += slope * t / max(length - 1, 1)
        if noise:
            series += rng.normal(0.0, noise, size=length)
        values[:, ch] = series
    names = [f"ch{c + 1}" for c in range(n_channels)]
    return names, values
