"""Homotopy solver for the transformed penalized problem.

The two-step reduction turns the penalized moment estimator into a standard
lasso with response P_{dhat-perp} P_Z y and design P_{dhat-perp} Z. This
module computes the full solution path in the penalty parameter: between
events (a variable entering or leaving the active set) the coefficients are
affine in the penalty, so the path is stored as a sequence of knots and
recovered anywhere by linear interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import Dataset
from .errors import PathologicalPathError, RankDeficiencyError
from .projections import Projector, hat_d, projector_for

FROZEN_COLUMN_TOL = 1e-12
KNOT_SAFETY_FACTOR = 10


@dataclass
class LassoProblem:
    """Design and response of the transformed problem."""

    design: np.ndarray
    response: np.ndarray


@dataclass
class LassoPath:
    """Piecewise-linear coefficient path, stored at its knots.

    ``knots`` is strictly decreasing, starting at the smallest penalty with an
    all-zero solution. ``coefs[i]`` holds the coefficients at ``knots[i]``;
    ``active_sets[i]`` the support there.
    """

    knots: np.ndarray
    coefs: np.ndarray
    active_sets: list[tuple[int, ...]]

    @property
    def lambda_max(self) -> float:
        return float(self.knots[0])


def build_problem(ds: Dataset, pz: Projector | None = None) -> LassoProblem:
    """Transformed design/response for a preprocessed dataset."""
    if pz is None:
        pz = projector_for(ds.z)
    dh = hat_d(ds, pz)
    u = dh / np.linalg.norm(dh)
    design = ds.z - np.outer(u, u @ ds.z)
    pzy = pz.apply(ds.y)
    response = pzy - u * (u @ pzy)
    return LassoProblem(design=design, response=response)


def lambda_max(p: LassoProblem) -> float:
    """Smallest penalty at which the all-zero solution is optimal."""
    return float(np.max(np.abs(p.design.T @ p.response), initial=0.0))


def fit_path(p: LassoProblem) -> LassoPath:
    """Run the homotopy from the all-zero solution down to a zero penalty.

    Variables enter when their absolute residual correlation reaches the
    penalty from below (ties broken toward the lower column index) and leave
    when a coefficient crosses zero; columns with numerically zero norm are
    frozen at zero throughout.
    """
    x = p.design
    y = p.response
    n, n_cols = x.shape

    col_norms = np.linalg.norm(x, axis=0)
    frozen = col_norms < FROZEN_COLUMN_TOL
    cap = min(n - 1, n_cols)
    max_knots = KNOT_SAFETY_FACTOR * max(n_cols, 1)

    c0 = x.T @ y
    c0[frozen] = 0.0
    lam_top = float(np.max(np.abs(c0), initial=0.0))

    knots = [lam_top]
    coefs = [np.zeros(n_cols)]
    actives: list[tuple[int, ...]] = [()]
    if lam_top == 0.0:
        return LassoPath(np.array(knots), np.array(coefs), actives)

    tie_tol = 1e-12 * lam_top

    active: list[int] = []
    signs: dict[int, float] = {}

    # First entry: lowest index among the columns attaining the top correlation.
    j0 = int(np.flatnonzero(np.abs(c0) >= lam_top - tie_tol)[0])
    active.append(j0)
    signs[j0] = float(np.sign(c0[j0]))

    lam_cur = lam_top
    while True:
        if len(knots) > max_knots:
            raise PathologicalPathError(
                f"homotopy exceeded {max_knots} knots; path appears to be cycling"
            )

        xa = x[:, active]
        gram = xa.T @ xa
        s_vec = np.array([signs[j] for j in active])
        try:
            alpha0 = np.linalg.solve(gram, xa.T @ y)
            w = np.linalg.solve(gram, s_vec)
        except np.linalg.LinAlgError as exc:
            raise RankDeficiencyError(
                "active-set Gram matrix is singular along the path"
            ) from exc

        resid0 = y - xa @ alpha0
        xw = xa @ w
        b = x.T @ resid0
        a = x.T @ xw

        # Entry events: accept a boundary touch only when the correlation
        # would exceed the shrinking boundary just below it (positive
        # denominator); this skips just-dropped variables and duplicates.
        best_entry_lam = 0.0
        entry_j = -1
        entry_sign = 0.0
        active_mask = np.zeros(n_cols, dtype=bool)
        active_mask[active] = True
        for j in range(n_cols):
            if frozen[j] or active_mask[j]:
                continue
            for denom, cand, sgn in (
                (1.0 - a[j], b[j], 1.0),
                (1.0 + a[j], -b[j], -1.0),
            ):
                if denom <= tie_tol:
                    continue
                lam_e = cand / denom
                if lam_e <= tie_tol or lam_e > lam_cur + tie_tol:
                    continue
                lam_e = min(lam_e, lam_cur)
                # Strict improvement wins; a tie keeps the lower column index
                # (j iterates in ascending order, so first touch stands).
                if lam_e > best_entry_lam + tie_tol:
                    best_entry_lam, entry_j, entry_sign = lam_e, j, sgn

        # Drop events: active coefficient reaching zero strictly inside the segment.
        best_drop_lam = 0.0
        drop_pos = -1
        for pos, j in enumerate(active):
            if abs(w[pos]) < 1e-300:
                continue
            lam_d = alpha0[pos] / w[pos]
            if lam_d <= tie_tol or lam_d >= lam_cur * (1.0 - 1e-10):
                continue
            if lam_d > best_drop_lam:
                best_drop_lam, drop_pos = lam_d, pos

        if len(active) >= cap:
            best_entry_lam, entry_j = 0.0, -1

        lam_next = max(best_entry_lam, best_drop_lam)
        alpha_next = np.zeros(n_cols)
        alpha_next[active] = alpha0 - lam_next * w

        is_drop = drop_pos >= 0 and best_drop_lam >= best_entry_lam - tie_tol
        if is_drop:
            alpha_next[active[drop_pos]] = 0.0

        support = tuple(int(j) for j in np.flatnonzero(alpha_next))
        if lam_next < lam_cur - tie_tol:
            knots.append(lam_next)
            coefs.append(alpha_next)
            actives.append(support)
        else:
            # Same-penalty event (simultaneous entries): update the set only.
            coefs[-1] = alpha_next
            actives[-1] = support

        if lam_next <= tie_tol:
            break

        if is_drop:
            dropped = active.pop(drop_pos)
            del signs[dropped]
            if not active:
                # Unreachable in exact arithmetic (an empty support is only
                # optimal at the top of the path); stop defensively.
                break
        elif entry_j >= 0:
            active.append(entry_j)
            signs[entry_j] = entry_sign
        else:
            break

        lam_cur = lam_next
        if len(active) >= cap and not is_drop:
            # Size cap reached: record the knot and stop the descent here.
            break

    return LassoPath(np.array(knots), np.array(coefs), actives)


def solve_at(path: LassoPath, lam: float) -> np.ndarray:
    """Coefficients at an arbitrary penalty by exact interpolation of the path."""
    if lam < 0:
        raise ValueError("penalty must be nonnegative")
    knots = path.knots
    if lam >= knots[0]:
        return np.zeros(path.coefs.shape[1])
    if lam <= knots[-1]:
        return path.coefs[-1].copy()
    # knots is strictly decreasing; locate the bracketing segment.
    idx = int(np.searchsorted(-knots, -lam, side="left"))
    hi, lo = knots[idx - 1], knots[idx]
    t = (hi - lam) / (hi - lo)
    return (1.0 - t) * path.coefs[idx - 1] + t * path.coefs[idx]


__all__ = [
    "LassoProblem",
    "LassoPath",
    "build_problem",
    "lambda_max",
    "fit_path",
    "solve_at",
]
