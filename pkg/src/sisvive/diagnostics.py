"""Instrument-quality constants, sparsity bounds, and validity tests.

Covers the mutual-incoherence constants and the sparsity bound they imply,
exhaustive small-scale restricted-isometry constants, first-stage strength,
the finite-sample error bound (simulation mode, where the structural error is
known), and the Sargan overidentification test.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb, inf, sqrt

import numpy as np
from scipy import stats

from .data_model import Dataset
from .errors import BoundInapplicableError, DegenerateExposureError, JustIdentifiedError
from .projections import hat_d, projector_for

RIP_MAX_COLUMNS = 20


@dataclass
class MipDiagnostics:
    """Mutual-incoherence constants and the sparsity bound they imply."""

    mu: float
    rho: float
    s_max: float


@dataclass
class RipDiagnostics:
    """Exhaustive restricted-isometry constants of order k."""

    k: int
    delta_plus: float
    delta_minus: float
    matrix_tag: str = "Z"


@dataclass
class StrengthDiagnostics:
    """First-stage F statistic and the scaled concentration estimate."""

    first_stage_f: float
    concentration_scaled: float


@dataclass
class SarganResult:
    """Overidentification test from TSLS residuals."""

    statistic: float
    df: int
    p_value: float


def mip_constants(ds: Dataset) -> MipDiagnostics:
    """Max pairwise instrument correlation and max instrument-exposure correlation."""
    gram = ds.z.T @ ds.z
    l = gram.shape[0]
    off = np.abs(gram - np.diag(np.diag(gram)))
    mu = float(off.max()) if l > 1 else 0.0
    dhat = hat_d(ds)
    rho = float(np.max(np.abs(dhat @ ds.z)) / np.linalg.norm(dhat))
    term_mu = 1.0 / (12.0 * mu) if mu > 0 else inf
    term_rho = 1.0 / (10.0 * rho**2) if rho > 0 else inf
    return MipDiagnostics(mu=mu, rho=rho, s_max=min(term_mu, term_rho))


def corollary2_error_bound(
    ds: Dataset, s: int, lam: float, epsilon: np.ndarray
) -> float:
    """Finite-sample bound on the effect-estimate error under incoherence.

    Requires the sparsity to satisfy the incoherence condition and the true
    structural error (simulation mode); the bound is valid whenever the
    penalty is at least the theory value.
    """
    epsilon = np.asarray(epsilon, dtype=float).reshape(-1)
    if epsilon.shape[0] != ds.n:
        raise ValueError(f"error vector has length {epsilon.shape[0]}, expected {ds.n}")
    mip = mip_constants(ds)
    if not s < mip.s_max:
        raise BoundInapplicableError(
            f"sparsity s={s} is not below the incoherence limit {mip.s_max:.3g}; "
            "the bound cannot be used to characterize the estimator here"
        )
    dhat = hat_d(ds)
    dhat_norm = float(np.linalg.norm(dhat))
    denom = 1.0 - s * (5.0 * mip.rho**2 + 6.0 * mip.mu)
    first = abs(float(dhat @ epsilon)) / dhat_norm**2
    second = (4.0 * sqrt(105.0) / 9.0) * lam * s * mip.rho / (dhat_norm * denom)
    return first + second


def rip_constants(m: np.ndarray, k: int, matrix_tag: str = "Z") -> RipDiagnostics:
    """Exact order-k restricted-isometry constants by support enumeration.

    Cost grows as C(L, k); refused beyond L=20 columns.
    """
    m = np.asarray(m, dtype=float)
    l = m.shape[1]
    if not 1 <= k <= l:
        raise ValueError(f"order k must be in [1, {l}], got {k}")
    if l > RIP_MAX_COLUMNS:
        raise ValueError(
            f"exact restricted-isometry constants need {comb(l, k)} support "
            f"enumerations; refusing beyond {RIP_MAX_COLUMNS} columns"
        )
    delta_plus = -inf
    delta_minus = inf
    for support in combinations(range(l), k):
        sub = m[:, support]
        eigs = np.linalg.eigvalsh(sub.T @ sub)
        delta_minus = min(delta_minus, float(eigs[0]))
        delta_plus = max(delta_plus, float(eigs[-1]))
    return RipDiagnostics(
        k=k, delta_plus=delta_plus, delta_minus=max(delta_minus, 0.0), matrix_tag=matrix_tag
    )


def strength(ds: Dataset) -> StrengthDiagnostics:
    """First-stage F of the exposure on the instruments, on centered data."""
    dhat = hat_d(ds)
    n, l = ds.z.shape
    rss = float(np.linalg.norm(ds.d - dhat) ** 2)
    fit = float(np.linalg.norm(dhat) ** 2)
    if rss <= n * np.finfo(float).eps * max(fit, 1.0):
        return StrengthDiagnostics(first_stage_f=inf, concentration_scaled=inf)
    sigma2 = rss / (n - l)
    f_stat = (fit / l) / sigma2
    return StrengthDiagnostics(first_stage_f=f_stat, concentration_scaled=fit / sigma2 / l)


def sargan_test(ds: Dataset, beta_hat: float) -> SarganResult:
    """Overidentification test on the residual at a given effect estimate."""
    n, l = ds.z.shape
    if l < 2:
        raise JustIdentifiedError(
            "overidentification test undefined with a single instrument"
        )
    e = ds.y - ds.d * beta_hat
    ete = float(e @ e)
    if ete <= 0:
        raise DegenerateExposureError("residual vector is identically zero")
    pz = projector_for(ds.z)
    stat = n * float(e @ pz.apply(e)) / ete
    return SarganResult(
        statistic=stat, df=l - 1, p_value=float(stats.chi2.sf(stat, l - 1))
    )


__all__ = [
    "MipDiagnostics",
    "RipDiagnostics",
    "StrengthDiagnostics",
    "SarganResult",
    "mip_constants",
    "corollary2_error_bound",
    "rip_constants",
    "strength",
    "sargan_test",
]
