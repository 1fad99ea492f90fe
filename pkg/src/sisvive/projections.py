"""Orthogonal projection operators onto instrument and fitted-exposure spaces.

Projectors are stored as an orthonormal basis Q of the target column space and
applied as two matrix-vector products, never materialized as n-by-n matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import Dataset
from .errors import DegenerateExposureError, RankDeficiencyError

DEGENERATE_EXPOSURE_TOL = 1e-10


@dataclass
class Projector:
    """Orthogonal projection onto the span of an orthonormal basis Q (n x r)."""

    q: np.ndarray
    r: int

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Project v (vector or column-stacked matrix) onto the subspace."""
        return self.q @ (self.q.T @ v)

    def apply_complement(self, v: np.ndarray) -> np.ndarray:
        """Project v onto the orthogonal complement of the subspace."""
        return v - self.apply(v)


def projector_for(m: np.ndarray) -> Projector:
    """Projector onto the column space of a full-column-rank matrix."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    n, k = m.shape
    u, svals, _ = np.linalg.svd(m, full_matrices=False)
    rank_tol = n * np.finfo(float).eps * (svals[0] if svals.size else 0.0)
    rank = int(np.sum(svals > rank_tol))
    if rank < k:
        raise RankDeficiencyError(f"matrix has rank {rank} < {k} columns")
    return Projector(q=u[:, :k], r=k)


def hat_d(ds: Dataset, pz: Projector | None = None) -> np.ndarray:
    """Fitted exposure: the projection of the exposure onto the instrument space."""
    if pz is None:
        pz = projector_for(ds.z)
    dhat = pz.apply(ds.d)
    if np.linalg.norm(dhat) < DEGENERATE_EXPOSURE_TOL:
        raise DegenerateExposureError(
            "fitted exposure is numerically zero; instruments carry no exposure signal"
        )
    return dhat


__all__ = ["Projector", "projector_for", "hat_d", "DEGENERATE_EXPOSURE_TOL"]
