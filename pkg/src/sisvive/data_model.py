"""Observed data container, preprocessing transforms, and CSV ingestion.

The estimators in this package assume centered outcome/exposure vectors and
unit-norm instrument columns; ``preprocess`` performs exactly that transform
(optionally residualizing on exogenous covariates first) and records the
applied scaling so direct-effect estimates can be mapped back to the raw
instrument units.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    DuplicateRoleError,
    MissingValueError,
    NonNumericCellError,
    RankDeficiencyError,
    UnknownColumnError,
    ZeroVarianceError,
)

MEAN_TOL = 1e-10
NORM_TOL = 1e-10
ZERO_VARIANCE_TOL = 1e-12


@dataclass
class ColumnRoles:
    """Assignment of CSV columns to model roles."""

    outcome: str
    exposure: str
    instruments: list[str]
    covariates: list[str] | None = None

    def all_columns(self) -> list[str]:
        cols = [self.outcome, self.exposure, *self.instruments]
        if self.covariates:
            cols.extend(self.covariates)
        return cols


@dataclass
class Dataset:
    """Outcome vector, exposure vector, instrument matrix, optional covariates.

    Immutable by convention after construction: consumers never write into the
    arrays, so concurrent reads are safe.
    """

    y: np.ndarray
    d: np.ndarray
    z: np.ndarray
    x: np.ndarray | None = None
    column_names: list[str] = field(default_factory=list)
    preprocessed: bool = False

    def __post_init__(self) -> None:
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        self.d = np.asarray(self.d, dtype=float).reshape(-1)
        self.z = np.atleast_2d(np.asarray(self.z, dtype=float))
        if self.z.shape[0] != self.y.shape[0]:
            self.z = self.z.T
        if self.x is not None:
            self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
            if self.x.shape[0] != self.y.shape[0]:
                self.x = self.x.T
        if not self.column_names:
            self.column_names = [f"z{j + 1}" for j in range(self.z.shape[1])]
        if len({self.y.shape[0], self.d.shape[0], self.z.shape[0]}) != 1:
            raise DataError("y, d, and z must share the same number of rows")
        if len(self.column_names) != self.z.shape[1]:
            raise DataError("column_names length must match the instrument count")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def n_instruments(self) -> int:
        return self.z.shape[1]

    def take_rows(self, rows: np.ndarray) -> "Dataset":
        """Row subset sharing this dataset's scale (used for CV folds)."""
        return Dataset(
            y=self.y[rows],
            d=self.d[rows],
            z=self.z[rows, :],
            x=None if self.x is None else self.x[rows, :],
            column_names=list(self.column_names),
            preprocessed=self.preprocessed,
        )


@dataclass
class ScalingRecord:
    """Per-instrument norms/means applied during preprocessing.

    ``z_norms[j]`` is the Euclidean norm of instrument j after
    centering/residualization; dividing a unit-scale direct effect by it
    recovers the effect per raw instrument unit.
    """

    z_means: np.ndarray
    z_norms: np.ndarray
    y_mean: float
    d_mean: float

    def __post_init__(self) -> None:
        self.z_means = np.asarray(self.z_means, dtype=float)
        self.z_norms = np.asarray(self.z_norms, dtype=float)
        if np.any(self.z_norms <= 0):
            raise DataError("all recorded instrument norms must be strictly positive")

    def alpha_to_raw(self, alpha_unit: np.ndarray) -> np.ndarray:
        """Map direct effects from the unit-norm scale to raw instrument units."""
        return np.asarray(alpha_unit, dtype=float) / self.z_norms


def load_csv(path: str | Path, roles: ColumnRoles) -> Dataset:
    """Read a headered CSV and assemble a raw (unpreprocessed) Dataset.

    Column order of the instruments follows ``roles.instruments``. Missing
    values and non-numeric cells in any assigned column are rejected.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")

    wanted = roles.all_columns()
    if len(set(wanted)) != len(wanted):
        seen: set[str] = set()
        dup = next(c for c in wanted if c in seen or seen.add(c))  # type: ignore[func-returns-value]
        raise DuplicateRoleError(f"column {dup!r} assigned to more than one role")

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        for col in wanted:
            if col not in header:
                raise UnknownColumnError(f"column {col!r} not found in {path.name} header")
        idx = {col: header.index(col) for col in wanted}

        columns: dict[str, list[float]] = {col: [] for col in wanted}
        for row_number, row in enumerate(reader, start=2):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            for col in wanted:
                cell = row[idx[col]].strip() if idx[col] < len(row) else ""
                if cell == "":
                    raise MissingValueError(
                        f"missing value in column {col!r} at row {row_number}"
                    )
                try:
                    columns[col].append(float(cell))
                except ValueError:
                    raise NonNumericCellError(
                        f"non-numeric cell {cell!r} in column {col!r} at row {row_number}"
                    ) from None

    y = np.array(columns[roles.outcome])
    d = np.array(columns[roles.exposure])
    z = np.column_stack([columns[c] for c in roles.instruments])
    x = (
        np.column_stack([columns[c] for c in roles.covariates])
        if roles.covariates
        else None
    )
    return Dataset(y=y, d=d, z=z, x=x, column_names=list(roles.instruments))


def _residualize_on(x: np.ndarray, *vectors: np.ndarray) -> list[np.ndarray]:
    """Residuals of each vector after least squares on [1, x]."""
    n = vectors[0].shape[0]
    design = np.column_stack([np.ones(n), x])
    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        raise RankDeficiencyError(
            f"covariate matrix (with intercept) has rank {rank} < {design.shape[1]}"
        )
    coef, *_ = np.linalg.lstsq(design, np.column_stack(vectors), rcond=None)
    fitted = design @ coef
    stacked = np.column_stack(vectors) - fitted
    return [stacked[:, k] for k in range(stacked.shape[1])]


def preprocess(ds: Dataset) -> tuple[Dataset, ScalingRecord]:
    """Center (or residualize on covariates), then unit-norm scale instruments.

    Residualization happens first, then each instrument column is scaled to
    Euclidean norm one. Raises if a covariate matrix is rank deficient or an
    instrument has no variation left after centering.
    """
    if ds.preprocessed:
        raise DataError("dataset is already preprocessed")

    y_mean = float(ds.y.mean())
    d_mean = float(ds.d.mean())
    z_means = ds.z.mean(axis=0)

    if ds.x is not None:
        parts = _residualize_on(ds.x, ds.y, ds.d, *[ds.z[:, j] for j in range(ds.z.shape[1])])
        y_c, d_c = parts[0], parts[1]
        z_c = np.column_stack(parts[2:])
    else:
        y_c = ds.y - y_mean
        d_c = ds.d - d_mean
        z_c = ds.z - z_means

    norms = np.linalg.norm(z_c, axis=0)
    for j, nrm in enumerate(norms):
        if nrm < ZERO_VARIANCE_TOL:
            raise ZeroVarianceError(
                f"instrument {ds.column_names[j]!r} has no variation after centering"
            )
    z_scaled = z_c / norms

    out = Dataset(
        y=y_c,
        d=d_c,
        z=z_scaled,
        x=None,
        column_names=list(ds.column_names),
        preprocessed=True,
    )
    _check_preprocessed(out)
    record = ScalingRecord(z_means=z_means, z_norms=norms, y_mean=y_mean, d_mean=d_mean)
    return out, record


def _check_preprocessed(ds: Dataset) -> None:
    n, l = ds.z.shape
    if n < l + 2:
        raise DataError(f"need at least {l + 2} rows for {l} instruments, got {n}")
    if abs(ds.y.mean()) > MEAN_TOL or abs(ds.d.mean()) > MEAN_TOL:
        raise DataError("y and d must have mean zero after preprocessing")
    if np.any(np.abs(ds.z.mean(axis=0)) > MEAN_TOL):
        raise DataError("instrument columns must have mean zero after preprocessing")
    if np.any(np.abs(np.linalg.norm(ds.z, axis=0) - 1.0) > NORM_TOL):
        raise DataError("instrument columns must have unit norm after preprocessing")
    svals = np.linalg.svd(ds.z, compute_uv=False)
    rank_tol = n * np.finfo(float).eps * svals[0]
    if svals[-1] <= rank_tol:
        raise RankDeficiencyError(
            f"instrument matrix is rank deficient (rank {int(np.sum(svals > rank_tol))} < {l})"
        )


__all__ = [
    "ColumnRoles",
    "Dataset",
    "ScalingRecord",
    "load_csv",
    "preprocess",
]
