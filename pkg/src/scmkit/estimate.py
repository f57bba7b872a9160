"""Datasets, empirical joints, plug-in estimates and bootstrap intervals."""

from __future__ import annotations

import csv
import io
import os
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import IO, Iterable, Mapping

import numpy as np

from .expr import ConditioningOnZero, Estimand, JointTable, eval_estimand

__all__ = [
    "MISSING_TOKEN",
    "Dataset",
    "Estimate",
    "DataError",
    "MissingDataPresent",
    "TooManyDegenerateResamples",
    "load_table",
    "empirical_joint",
    "plug_in",
    "bootstrap_interval",
]

MISSING_TOKEN = "NA"


class DataError(ValueError):
    """Malformed data file or dataset."""


class MissingDataPresent(DataError):
    """The operation needs complete data; route through recoverability first."""


class TooManyDegenerateResamples(ArithmeticError):
    """Too large a share of bootstrap resamples hit an empty stratum."""


@dataclass(frozen=True)
class Dataset:
    """Rectangular categorical data; ``None`` cells are missing marks."""

    columns: tuple[str, ...]
    rows: tuple[tuple[str | None, ...], ...]

    def __post_init__(self):
        if len(set(self.columns)) != len(self.columns):
            raise DataError("duplicate column names")
        if not self.rows:
            raise DataError("dataset needs at least one row")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.columns):
                raise DataError(
                    f"row {i + 1} has {len(row)} cells, expected {len(self.columns)}"
                )
            for cell in row:
                if cell == "":
                    raise DataError(f"row {i + 1} has an empty cell")

    @property
    def n(self) -> int:
        return len(self.rows)

    @cached_property
    def domains(self) -> dict[str, tuple[str, ...]]:
        """Sorted distinct non-missing tokens per column."""
        seen: dict[str, set[str]] = {c: set() for c in self.columns}
        for row in self.rows:
            for c, cell in zip(self.columns, row):
                if cell is not None:
                    seen[c].add(cell)
        return {c: tuple(sorted(vals)) for c, vals in seen.items()}

    @cached_property
    def has_missing(self) -> bool:
        return any(cell is None for row in self.rows for cell in row)

    def column_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise DataError(f"no column named {name}") from None

    def select(self, names: Iterable[str]) -> "Dataset":
        idx = [self.column_index(c) for c in names]
        return Dataset(
            tuple(self.columns[i] for i in idx),
            tuple(tuple(row[i] for i in idx) for row in self.rows),
        )


def load_table(source: str | os.PathLike | IO[str]) -> Dataset:
    """Read comma-separated data with a header row; ``NA`` marks missing."""
    if hasattr(source, "read"):
        return _read_csv(source)  # type: ignore[arg-type]
    with open(source, "r", encoding="utf-8", newline="") as fh:
        return _read_csv(fh)


def _read_csv(fh: IO[str]) -> Dataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty file") from None
    columns = tuple(h.strip() for h in header)
    if any(not c for c in columns):
        raise DataError("empty column name in header")
    if len(set(columns)) != len(columns):
        raise DataError("duplicate header names")
    rows: list[tuple[str | None, ...]] = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(columns):
            raise DataError(
                f"line {lineno}: row has {len(rec)} cells, expected {len(columns)}"
            )
        rows.append(
            tuple(
                None if cell.strip() == MISSING_TOKEN else cell.strip()
                for cell in rec
            )
        )
    if not rows:
        raise DataError("no data rows")
    return Dataset(columns, tuple(rows))


@dataclass(frozen=True)
class Estimate:
    value: float
    n: int
    interval: tuple[float, float, float] | None = None  # (low, high, level)

    def __post_init__(self):
        if self.interval is not None:
            low, high, level = self.interval
            if not low <= self.value <= high:
                raise DataError("interval does not contain the point estimate")
            if not 0 < level < 1:
                raise DataError("confidence level must be in (0, 1)")


def empirical_joint(d: Dataset) -> JointTable:
    """Relative frequencies over complete rows; refuses missing data."""
    if d.has_missing:
        raise MissingDataPresent(
            "dataset contains missing cells; run recoverability analysis instead"
        )
    counts = Counter(d.rows)
    n = d.n
    mass = {key: c / n for key, c in counts.items()}
    return JointTable(d.columns, d.domains, mass)


def plug_in(
    e: Estimand, d: Dataset, binding: Mapping[str, str] | None = None
) -> Estimate:
    """Evaluate the estimand on the empirical joint of the data."""
    value = eval_estimand(e, empirical_joint(d), binding)
    return Estimate(value=value, n=d.n)


def bootstrap_interval(
    e: Estimand,
    d: Dataset,
    binding: Mapping[str, str] | None = None,
    B: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> Estimate:
    """Percentile bootstrap over row resamples.

    Replicate RNG streams are derived from (seed, replicate index), so the
    interval does not depend on execution order.  Resamples that hit an empty
    stratum are dropped; more than 10% of them dropped is an error.
    """
    if B < 100:
        raise DataError(f"B={B} is too small; need at least 100 resamples")
    if not 0 < level < 1:
        raise DataError("confidence level must be in (0, 1)")
    point = plug_in(e, d, binding)

    counts = Counter(d.rows)
    keys = sorted(counts)
    weights = np.array([counts[k] for k in keys], dtype=float)
    pvals = weights / weights.sum()
    n = d.n
    domains = d.domains

    values: list[float] = []
    dropped = 0
    for rep in range(B):
        rng = np.random.default_rng([seed, rep])
        draw = rng.multinomial(n, pvals)
        mass = {
            key: cnt / n for key, cnt in zip(keys, draw) if cnt > 0
        }
        table = JointTable(d.columns, domains, mass)
        try:
            values.append(eval_estimand(e, table, binding))
        except ConditioningOnZero:
            dropped += 1
    if dropped > 0.10 * B:
        raise TooManyDegenerateResamples(
            f"{dropped} of {B} resamples hit an empty stratum"
        )
    lo_q = (1.0 - level) / 2.0
    lo, hi = np.quantile(values, [lo_q, 1.0 - lo_q])
    # widen if needed so the interval always contains the point estimate
    lo = min(float(lo), point.value)
    hi = max(float(hi), point.value)
    return Estimate(value=point.value, n=n, interval=(lo, hi, level))
