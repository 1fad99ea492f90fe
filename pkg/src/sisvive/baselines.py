"""OLS, naive TSLS, and oracle TSLS comparators.

TSLS is computed by projection: partial out any controlled (declared-invalid)
instrument columns, project the exposure onto the remaining instrument space,
and take the resulting dot-product ratio.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data_model import Dataset
from .errors import DegenerateExposureError, RankDeficiencyError
from .projections import DEGENERATE_EXPOSURE_TOL, hat_d, projector_for


@dataclass
class BaselineFit:
    method: str
    beta_hat: float
    controlled_set: tuple[int, ...] = field(default_factory=tuple)


def ols_fit(ds: Dataset) -> BaselineFit:
    """Coefficient on the exposure in least squares of the outcome on (Z, D)."""
    design = np.column_stack([ds.z, ds.d])
    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        raise RankDeficiencyError(
            f"(Z, D) design has rank {rank} < {design.shape[1]}"
        )
    coef, *_ = np.linalg.lstsq(design, ds.y, rcond=None)
    return BaselineFit(method="ols", beta_hat=float(coef[-1]))


def tsls_fit(ds: Dataset, invalid: tuple[int, ...] | list[int] = ()) -> BaselineFit:
    """TSLS treating the listed instruments as covariates; empty list is naive TSLS."""
    invalid = tuple(sorted({int(j) for j in invalid}))
    l = ds.n_instruments
    if any(j < 0 or j >= l for j in invalid):
        raise ValueError(f"invalid-instrument indices out of range [0, {l})")
    valid = [j for j in range(l) if j not in invalid]
    if not valid:
        raise ValueError("cannot control for every instrument; none left to identify")

    if not invalid:
        dhat = hat_d(ds)
        beta = float(dhat @ ds.y / (dhat @ dhat))
        return BaselineFit(method="tsls_naive", beta_hat=beta)

    pw = projector_for(ds.z[:, invalid])
    y_w = pw.apply_complement(ds.y)
    d_w = pw.apply_complement(ds.d)
    zv_w = pw.apply_complement(ds.z[:, valid])
    pzv = projector_for(zv_w)
    dtilde = pzv.apply(d_w)
    if np.linalg.norm(dtilde) < DEGENERATE_EXPOSURE_TOL:
        raise DegenerateExposureError(
            "exposure carries no signal from the non-controlled instruments"
        )
    beta = float(dtilde @ y_w / (dtilde @ d_w))
    return BaselineFit(method="tsls_oracle", beta_hat=beta, controlled_set=invalid)


__all__ = ["BaselineFit", "ols_fit", "tsls_fit"]
