"""Count datasets, CSV loading, dummy coding and the augmented binary form.

A count observation ``Y_i = r`` is expanded into ``r + 1`` binary records
``(1, 1, ..., 1, 0)``: one per category ``s = 0..r`` recording whether the
count moved past ``s``.  Fitting the transition model is then ordinary
binary regression on those records.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

DATA_ENV_VAR = "TRANSCOUNT_DATA"
BUNDLED = ("quine", "nmes_males", "boating")


class DataError(ValueError):
    """Invalid input data (bad outcome, unknown level, missing column)."""


@dataclass(frozen=True)
class ColumnEncoding:
    """How one raw CSV column turns into design-matrix columns."""

    name: str
    kind: str = "numeric"
    levels: tuple[str, ...] = ()
    reference: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("numeric", "categorical"):
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.levels:
                raise DataError(f"column {self.name!r}: categorical without levels")
            ref = self.levels[0] if self.reference is None else self.reference
            if ref not in self.levels:
                raise DataError(f"column {self.name!r}: reference {ref!r} not a level")
            object.__setattr__(self, "reference", ref)

    @property
    def encoded_names(self) -> list[str]:
        if self.kind == "numeric":
            return [self.name]
        return [f"{self.name}:{lev}" for lev in self.levels if lev != self.reference]

    def encode(self, values: Sequence[str], first_row: int = 1) -> np.ndarray:
        """Encode raw string values; returns an ``(n, k)`` float block."""
        if self.kind == "numeric":
            out = np.empty((len(values), 1))
            for i, v in enumerate(values):
                try:
                    out[i, 0] = float(v)
                except ValueError:
                    raise DataError(
                        f"row {first_row + i}: column {self.name!r} value {v!r} is not numeric"
                    ) from None
            return out
        kept = [lev for lev in self.levels if lev != self.reference]
        index = {lev: j for j, lev in enumerate(kept)}
        out = np.zeros((len(values), len(kept)))
        for i, v in enumerate(values):
            v = v.strip()
            if v == self.reference:
                continue
            if v not in index:
                raise DataError(
                    f"row {first_row + i}: unknown level {v!r} for column {self.name!r}"
                )
            out[i, index[v]] = 1.0
        return out

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"name": self.name, "kind": self.kind}
        if self.kind == "categorical":
            d["levels"] = list(self.levels)
            d["reference"] = self.reference
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ColumnEncoding":
        return cls(d["name"], d.get("kind", "numeric"), tuple(d.get("levels", ())), d.get("reference"))


@dataclass(frozen=True)
class CountDataset:
    """Observed counts with an encoded covariate matrix (no intercept column)."""

    outcomes: np.ndarray
    covariates: np.ndarray
    column_names: tuple[str, ...]
    encoder_meta: tuple[ColumnEncoding, ...] = ()
    outcome_name: str = "y"

    def __post_init__(self) -> None:
        y = np.asarray(self.outcomes)
        if y.ndim != 1:
            raise DataError("outcomes must be one-dimensional")
        if y.size and (not np.all(np.isfinite(y.astype(float))) or np.any(y != np.round(y))):
            bad = int(np.flatnonzero(~np.isfinite(y.astype(float)) | (y != np.round(y)))[0])
            raise DataError(f"row {bad + 1}: outcome is not an integer")
        y = y.astype(np.int64)
        if np.any(y < 0):
            bad = int(np.flatnonzero(y < 0)[0])
            raise DataError(f"row {bad + 1}: negative outcome {y[bad]}")
        x = np.asarray(self.covariates, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != y.size:
            raise DataError("covariates and outcomes differ in length")
        if not np.all(np.isfinite(x)):
            raise DataError("covariates contain missing or non-finite values")
        names = tuple(self.column_names)
        if len(names) != x.shape[1]:
            raise DataError("column_names does not match covariate width")
        if len(set(names)) != len(names):
            raise DataError("column names are not unique")
        y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "outcomes", y)
        object.__setattr__(self, "covariates", x)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "encoder_meta", tuple(self.encoder_meta))

    @property
    def n(self) -> int:
        return int(self.outcomes.size)

    @property
    def p(self) -> int:
        return int(self.covariates.shape[1])

    def take(self, indices: Iterable[int]) -> "CountDataset":
        idx = np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices, dtype=np.int64)
        return CountDataset(
            self.outcomes[idx], self.covariates[idx], self.column_names, self.encoder_meta, self.outcome_name
        )

    def encode_rows(self, rows: Sequence[Mapping[str, str]]) -> np.ndarray:
        """Encode raw records with this dataset's encoders (for prediction)."""
        if not self.encoder_meta:
            raise DataError("dataset carries no encoder metadata")
        return encode_records(self.encoder_meta, rows)


def encode_records(meta: Sequence[ColumnEncoding], rows: Sequence[Mapping[str, str]]) -> np.ndarray:
    blocks = []
    for enc in meta:
        try:
            values = [r[enc.name] for r in rows]
        except KeyError:
            raise DataError(f"missing column {enc.name!r}") from None
        blocks.append(enc.encode(values))
    if not blocks:
        return np.zeros((len(rows), 0))
    return np.hstack(blocks)


def _infer_encoding(name: str, values: Sequence[str]) -> ColumnEncoding:
    try:
        for v in values:
            float(v)
    except ValueError:
        return ColumnEncoding(name, "categorical", tuple(sorted(set(v.strip() for v in values))))
    return ColumnEncoding(name, "numeric")


def read_schema(path: str | os.PathLike) -> dict[str, Any]:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _schema_sidecar(path: Path) -> Path:
    return path.with_name(path.stem + ".schema.json")


def resolve_data_path(name: str | os.PathLike) -> Path:
    """Find a CSV by path, then in ``$TRANSCOUNT_DATA``, then among bundled data."""
    p = Path(name)
    if p.exists():
        return p
    candidates = [p.name, p.name + ".csv"] if p.suffix != ".csv" else [p.name]
    env = os.environ.get(DATA_ENV_VAR)
    if env:
        for c in candidates:
            if (Path(env) / c).exists():
                return Path(env) / c
    base = resources.files("transcount") / "data"
    for c in candidates:
        ref = base / c
        if ref.is_file():
            return Path(str(ref))
    raise DataError(f"data file {str(name)!r} not found")


def load_csv(
    path: str | os.PathLike,
    outcome_column: str | None = None,
    schema: Mapping[str, Any] | str | os.PathLike | None = None,
) -> CountDataset:
    """Load a count dataset from CSV.

    ``schema`` maps column names to ``{"kind": "numeric"}`` or
    ``{"kind": "categorical", "levels": [...], "reference": ...}`` under a
    ``"columns"`` key, and may name the ``"outcome"``.  When omitted, a
    ``<stem>.schema.json`` sidecar is used if present, otherwise kinds are
    inferred (non-numeric columns become categorical, first sorted level as
    reference).  Only columns listed in the schema are used as covariates.
    Rows with a missing field are dropped with a warning.
    """
    path = resolve_data_path(path)
    if schema is None and _schema_sidecar(path).exists():
        schema = _schema_sidecar(path)
    if isinstance(schema, (str, os.PathLike)):
        schema = read_schema(schema)
    schema = dict(schema or {})
    outcome_column = outcome_column or schema.get("outcome")
    if outcome_column is None:
        raise DataError("no outcome column given")

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        rows = list(reader)
    if outcome_column not in header:
        raise DataError(f"outcome column {outcome_column!r} not found in {path.name}")

    kept, dropped = [], 0
    for row in rows:
        if any(v is None or v.strip() == "" for v in row.values()):
            dropped += 1
            continue
        kept.append(row)
    if dropped:
        logger.warning("dropped %d rows with missing values from %s", dropped, path.name)

    y = np.empty(len(kept), dtype=np.int64)
    for i, row in enumerate(kept):
        raw = row[outcome_column].strip()
        try:
            val = float(raw)
        except ValueError:
            raise DataError(f"row {i + 1}: outcome {raw!r} is not a number") from None
        if not math.isfinite(val) or val != int(val):
            raise DataError(f"row {i + 1}: outcome {raw!r} is not an integer")
        if val < 0:
            raise DataError(f"row {i + 1}: negative outcome {raw}")
        y[i] = int(val)

    declared = schema.get("columns")
    if declared is not None:
        meta = []
        for name, d in declared.items():
            if name not in header:
                raise DataError(f"schema column {name!r} not found in {path.name}")
            meta.append(ColumnEncoding(name, d.get("kind", "numeric"),
                                       tuple(str(v) for v in d.get("levels", ())),
                                       None if d.get("reference") is None else str(d["reference"])))
    else:
        meta = [_infer_encoding(c, [r[c] for r in kept]) for c in header if c != outcome_column]

    for enc in meta:
        if enc.kind == "categorical":
            for i, row in enumerate(kept):
                if row[enc.name].strip() not in enc.levels:
                    raise DataError(f"row {i + 1}: unknown level {row[enc.name]!r} for column {enc.name!r}")
    x = encode_records(meta, kept)
    names = [nm for enc in meta for nm in enc.encoded_names]
    return CountDataset(y, x, tuple(names), tuple(meta), outcome_column)


def load_dataset(name: str) -> CountDataset:
    """Load one of the bundled datasets (``quine``, ``nmes_males``, ``boating``)."""
    if name not in BUNDLED:
        raise DataError(f"unknown bundled dataset {name!r}; choose from {BUNDLED}")
    return load_csv(resolve_data_path(name + ".csv"))


@dataclass(frozen=True)
class AugmentedDataset:
    """Long-format binary transition records.

    Row ``k`` belongs to observation ``obs_index[k]`` at category
    ``category[k]``; ``transition[k]`` is 1 if the count moved past that
    category.  ``covariates`` is the source matrix, shared, indexed by
    ``obs_index`` when needed.
    """

    obs_index: np.ndarray
    category: np.ndarray
    transition: np.ndarray
    covariates: np.ndarray | None = field(default=None, repr=False)

    @property
    def total_rows(self) -> int:
        return int(self.obs_index.size)

    def design_rows(self) -> np.ndarray:
        """Materialise the covariate row of every record (a copy)."""
        if self.covariates is None:
            raise DataError("augmented dataset built without covariates")
        return self.covariates[self.obs_index]


def augment(data: CountDataset, include_covariates: bool = True) -> AugmentedDataset:
    y = data.outcomes
    counts = y + 1
    obs = np.repeat(np.arange(data.n), counts)
    starts = np.cumsum(counts) - counts
    cat = np.arange(int(counts.sum())) - np.repeat(starts, counts)
    trans = (cat < y[obs]).astype(np.int8)
    return AugmentedDataset(obs, cat, trans, data.covariates if include_covariates else None)


@dataclass(frozen=True)
class SubsampleSplit:
    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: int
    fraction: float


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def subsample(n: int, fraction: float = 2 / 3, seed: int = 0, train_size: int | None = None) -> SubsampleSplit:
    """Split ``0..n-1`` into train/test without replacement.

    ``train_size`` overrides ``fraction`` (used where a study fixes the
    training size explicitly).
    """
    if n < 2:
        raise DataError("need at least two observations to split")
    if not 0.0 < fraction < 1.0:
        raise DataError(f"fraction must lie in (0, 1), got {fraction}")
    size = round_half_up(fraction * n) if train_size is None else int(train_size)
    if not 1 <= size < n:
        raise DataError(f"train size {size} invalid for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return SubsampleSplit(np.sort(perm[:size]), np.sort(perm[size:]), int(seed), float(fraction))


def max_observed(data: CountDataset) -> int:
    if data.n == 0:
        raise DataError("empty dataset")
    return int(data.outcomes.max())
