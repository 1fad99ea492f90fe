"""Uniqueness check for the causal effect under a bound on invalid instruments.

Given reduced-form instrument-to-exposure and instrument-to-outcome
coefficients, the causal effect is uniquely determined iff every candidate
subset of L-U+1 instruments with internally consistent effect ratios implies
the same effect. With at most 50% invalid instruments (U <= L/2) uniqueness
holds automatically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb, inf

import numpy as np

from .data_model import Dataset
from .errors import (
    InconsistentValidSetError,
    IrrelevantInstrumentError,
    RankDeficiencyError,
)

DEFAULT_RATIO_TOL = 1e-6
MAX_ENUMERATED_SETS = 200_000


@dataclass
class ReducedForm:
    """Instrument-to-exposure and instrument-to-outcome linear coefficients."""

    gamma: np.ndarray
    big_gamma: np.ndarray
    source: str = "given"

    def __post_init__(self) -> None:
        self.gamma = np.asarray(self.gamma, dtype=float).reshape(-1)
        self.big_gamma = np.asarray(self.big_gamma, dtype=float).reshape(-1)
        if self.gamma.shape != self.big_gamma.shape:
            raise ValueError("reduced-form vectors must have equal length")


@dataclass
class IdentificationReport:
    """Candidate instrument subsets and the uniqueness verdict."""

    u: int
    sets: list[tuple[tuple[int, ...], float]]
    identified: bool
    beta_candidates: list[float]
    tolerance: float
    boundary_distance: float = field(default=inf)


def reduced_form(ds: Dataset) -> ReducedForm:
    """Least-squares reduced-form coefficients from a preprocessed dataset."""
    ztz = ds.z.T @ ds.z
    try:
        gamma = np.linalg.solve(ztz, ds.z.T @ ds.d)
        big_gamma = np.linalg.solve(ztz, ds.z.T @ ds.y)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError("instrument Gram matrix is singular") from exc
    scale = max(1.0, float(np.linalg.norm(ds.z.T @ ds.d)), float(np.linalg.norm(ds.z.T @ ds.y)))
    if (
        np.linalg.norm(ztz @ gamma - ds.z.T @ ds.d) > 1e-8 * scale
        or np.linalg.norm(ztz @ big_gamma - ds.z.T @ ds.y) > 1e-8 * scale
    ):
        raise RankDeficiencyError("reduced-form normal equations solved inaccurately")
    return ReducedForm(gamma=gamma, big_gamma=big_gamma, source="estimated")


def _ratio_clusters(ratios: np.ndarray, tol: float) -> list[list[int]]:
    """Single-linkage clusters of the effect ratios with gap threshold tol."""
    order = np.argsort(ratios, kind="stable")
    clusters: list[list[int]] = [[int(order[0])]]
    for prev, cur in zip(order[:-1], order[1:]):
        if ratios[cur] - ratios[prev] <= tol:
            clusters[-1].append(int(cur))
        else:
            clusters.append([int(cur)])
    return clusters


def check_consistency_criterion(
    rf: ReducedForm, u: int, tol: float = DEFAULT_RATIO_TOL
) -> IdentificationReport:
    """Decide uniqueness of the causal effect given at most u-1 invalid instruments.

    Effect ratios are clustered with a gap tolerance; every cluster with at
    least L-u+1 members contributes candidate subsets (all subsets of that
    size) sharing the cluster's common ratio. The effect is identified iff at
    most one cluster reaches that size. The report also carries the gap
    between the two largest clusters as a distance to the identification
    boundary.
    """
    l = rf.gamma.shape[0]
    if not 1 <= u <= l:
        raise ValueError(f"invalid-count bound must be in [1, {l}], got {u}")
    weak = [j for j in range(l) if abs(rf.gamma[j]) <= tol]
    if weak:
        raise IrrelevantInstrumentError(
            f"instruments {weak} have (numerically) zero exposure association; "
            "exclude them before checking identification"
        )

    ratios = rf.big_gamma / rf.gamma
    clusters = _ratio_clusters(ratios, tol)
    set_size = l - u + 1

    qualifying = [c for c in clusters if len(c) >= set_size]
    total = sum(comb(len(c), set_size) for c in qualifying)
    if total > MAX_ENUMERATED_SETS:
        raise ValueError(
            f"{total} candidate subsets exceed the enumeration limit "
            f"({MAX_ENUMERATED_SETS}); reduce u or the instrument count"
        )

    sets: list[tuple[tuple[int, ...], float]] = []
    beta_candidates: list[float] = []
    for cluster in qualifying:
        members = sorted(cluster)
        beta_candidates.append(float(np.mean(ratios[members])))
        for subset in combinations(members, set_size):
            sets.append((subset, float(np.mean(ratios[list(subset)]))))

    by_size = sorted(clusters, key=len, reverse=True)
    if len(by_size) >= 2:
        a = ratios[by_size[0]]
        b = ratios[by_size[1]]
        boundary = float(np.min(np.abs(a[:, None] - b[None, :])))
    else:
        boundary = inf

    return IdentificationReport(
        u=u,
        sets=sets,
        identified=len(qualifying) <= 1,
        beta_candidates=beta_candidates,
        tolerance=tol,
        boundary_distance=boundary,
    )


def beta_given_valid_set(
    rf: ReducedForm, valid: list[int] | tuple[int, ...], tol: float = DEFAULT_RATIO_TOL
) -> float:
    """Common effect ratio implied by a declared set of valid instruments."""
    valid = sorted(int(j) for j in valid)
    if not valid:
        raise ValueError("valid set must be non-empty")
    weak = [j for j in valid if abs(rf.gamma[j]) <= tol]
    if weak:
        raise IrrelevantInstrumentError(
            f"instruments {weak} have (numerically) zero exposure association"
        )
    ratios = rf.big_gamma[valid] / rf.gamma[valid]
    spread = float(ratios.max() - ratios.min())
    if spread > tol:
        raise InconsistentValidSetError(
            f"declared-valid instruments imply conflicting ratios (spread {spread:.3g})"
        )
    return float(ratios.mean())


__all__ = [
    "ReducedForm",
    "IdentificationReport",
    "reduced_form",
    "check_consistency_criterion",
    "beta_given_valid_set",
    "DEFAULT_RATIO_TOL",
]
