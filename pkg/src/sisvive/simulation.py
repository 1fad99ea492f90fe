"""Monte Carlo harness: data generation, estimator grids, and error summaries.

Datasets follow a two-equation linear design: instruments are multivariate
normal with unit variances and a configurable correlation structure, the
exposure loads on the instruments with strength calibrated to a target scaled
concentration parameter, and outcome/exposure errors are bivariate normal
with unit variances and configurable correlation (endogeneity). The first s
instruments carry direct effects on the outcome (the invalid ones).
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import ols_fit, tsls_fit
from .data_model import Dataset, preprocess
from .errors import InfeasibleConfigError, SisviveError
from .estimator import DEFAULT_SE_RULE, estimate, estimate_at_lambda, theory_lambda

STRENGTH_TARGETS = {"strong": 100.0, "weak": 10.0}
CORR_STRUCTURES = ("all_pairs", "within_groups", "between_groups")
RELATIVE_PATTERNS = ("equal", "variable", "stronger_invalid", "stronger_valid")
METHODS = ("sisvive_cv", "sisvive_theory", "tsls_naive", "tsls_oracle", "ols")

WORKERS_ENV = "SISVIVE_WORKERS"


@dataclass
class SimulationConfig:
    """One simulation cell; invalid instruments occupy the first s positions."""

    n: int = 2000
    l: int = 10
    s: int = 3
    beta_star: float = 1.0
    alpha_magnitude: float = 1.0
    endogeneity: float = 0.8
    corr_structure: str = "all_pairs"
    mu: float = 0.0
    strength: str = "strong"
    relative: str = "equal"
    pi_star: float = 0.0
    gamma0_star: float = 0.0
    seed: int = 0
    cv_folds: int = 10
    se_rule: str = DEFAULT_SE_RULE

    def __post_init__(self) -> None:
        if not 0 <= self.s <= self.l:
            raise InfeasibleConfigError(f"s={self.s} must lie in [0, {self.l}]")
        if abs(self.endogeneity) >= 1:
            raise InfeasibleConfigError("error covariance must be positive definite (|endogeneity| < 1)")
        if self.corr_structure not in CORR_STRUCTURES:
            raise InfeasibleConfigError(f"unknown correlation structure {self.corr_structure!r}")
        if self.relative not in RELATIVE_PATTERNS:
            raise InfeasibleConfigError(f"unknown relative-strength pattern {self.relative!r}")
        if self.strength not in STRENGTH_TARGETS:
            raise InfeasibleConfigError(f"unknown strength class {self.strength!r}")


@dataclass
class TruthRecord:
    """Ground truth of one generated replication."""

    alpha_star: np.ndarray
    beta_star: float
    gamma_star: np.ndarray
    epsilon: np.ndarray
    xi: np.ndarray
    invalid_set: tuple[int, ...]


@dataclass
class SimulationSummary:
    """Per-cell error metrics over replications."""

    median_abs_error: dict[str, float]
    prop_correct_valid: float
    prop_correct_invalid: float
    n_reps: int
    n_failed: int
    mean_lambda_cv: float
    mean_lambda_theory: float
    failures: list[str] = field(default_factory=list)


def instrument_covariance(cfg: SimulationConfig) -> np.ndarray:
    """Unit-diagonal covariance with the configured pairwise structure."""
    l, s, mu = cfg.l, cfg.s, cfg.mu
    sigma = np.eye(l)
    if mu == 0.0:
        return sigma
    invalid = np.arange(l) < s
    for i in range(l):
        for j in range(i + 1, l):
            same_group = invalid[i] == invalid[j]
            if cfg.corr_structure == "all_pairs":
                val = mu
            elif cfg.corr_structure == "within_groups":
                val = mu if same_group else 0.0
            else:
                val = mu if not same_group else 0.0
            sigma[i, j] = sigma[j, i] = val
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise InfeasibleConfigError(
            f"instrument covariance is not positive definite "
            f"(structure={cfg.corr_structure}, mu={mu}, l={l}, s={s})"
        ) from None
    return sigma


def _relative_pattern(cfg: SimulationConfig) -> np.ndarray:
    l, s = cfg.l, cfg.s
    if cfg.relative == "equal":
        return np.ones(l)
    if cfg.relative == "variable":
        return np.where(np.arange(l) % 2 == 0, 2.0, 1.0)
    if cfg.relative == "stronger_invalid":
        if s == 0:
            raise InfeasibleConfigError("stronger_invalid needs at least one invalid instrument")
        return np.where(np.arange(l) < s, 2.0, 1.0)
    if s == l:
        raise InfeasibleConfigError("stronger_valid needs at least one valid instrument")
    return np.where(np.arange(l) < s, 1.0, 2.0)


def calibrate_gamma(cfg: SimulationConfig) -> np.ndarray:
    """Instrument-to-exposure coefficients realizing the strength target.

    The pattern fixes relative magnitudes; the common scale is chosen so the
    population concentration parameter equals l times the class target
    (100 strong, 10 weak) with unit exposure-error variance.
    """
    pattern = _relative_pattern(cfg)
    sigma = instrument_covariance(cfg)
    target = STRENGTH_TARGETS[cfg.strength] * cfg.l
    quad = float(pattern @ sigma @ pattern)
    return pattern * np.sqrt(target / (cfg.n * quad))


def generate_dataset(
    cfg: SimulationConfig, rng: np.random.Generator | None = None
) -> tuple[Dataset, TruthRecord]:
    """Draw one raw dataset from the two-equation design."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    sigma_z = instrument_covariance(cfg)
    gamma = calibrate_gamma(cfg)
    alpha = np.zeros(cfg.l)
    alpha[: cfg.s] = cfg.alpha_magnitude

    z = rng.multivariate_normal(np.zeros(cfg.l), sigma_z, size=cfg.n, method="cholesky")
    err_cov = np.array([[1.0, cfg.endogeneity], [cfg.endogeneity, 1.0]])
    errs = rng.multivariate_normal(np.zeros(2), err_cov, size=cfg.n, method="cholesky")
    epsilon, xi = errs[:, 0], errs[:, 1]

    d = cfg.gamma0_star + z @ gamma + xi
    y = cfg.pi_star + z @ alpha + d * cfg.beta_star + epsilon
    ds = Dataset(y=y, d=d, z=z)
    truth = TruthRecord(
        alpha_star=alpha,
        beta_star=cfg.beta_star,
        gamma_star=gamma,
        epsilon=epsilon,
        xi=xi,
        invalid_set=tuple(range(cfg.s)),
    )
    return ds, truth


def _run_replication(cfg: SimulationConfig, rep: int) -> dict:
    """One replication: all five methods on one draw. Returns metric dict."""
    rng = np.random.default_rng(cfg.seed + rep)
    raw, truth = generate_dataset(cfg, rng)
    ds, _ = preprocess(raw)

    out: dict[str, float] = {}
    fit_cv, report = estimate(ds, k=cfg.cv_folds, seed=cfg.seed + rep, se_rule=cfg.se_rule)
    out["err_sisvive_cv"] = abs(fit_cv.beta_hat - truth.beta_star)
    out["lambda_cv"] = report.chosen_lambda

    lam_theory = theory_lambda(ds, truth.epsilon)
    fit_theory = estimate_at_lambda(ds, lam_theory)
    out["err_sisvive_theory"] = abs(fit_theory.beta_hat - truth.beta_star)
    out["lambda_theory"] = lam_theory

    out["err_tsls_naive"] = abs(tsls_fit(ds).beta_hat - truth.beta_star)
    out["err_tsls_oracle"] = abs(
        tsls_fit(ds, truth.invalid_set).beta_hat - truth.beta_star
    )
    out["err_ols"] = abs(ols_fit(ds).beta_hat - truth.beta_star)

    selected = set(fit_cv.invalid_set)
    true_invalid = set(truth.invalid_set)
    true_valid = set(range(cfg.l)) - true_invalid
    out["prop_invalid"] = (
        len(selected & true_invalid) / len(true_invalid) if true_invalid else 1.0
    )
    out["prop_valid"] = (
        len(true_valid - selected) / len(true_valid) if true_valid else 1.0
    )
    return out


def _replication_task(args: tuple[SimulationConfig, int]) -> tuple[int, dict | str]:
    cfg, rep = args
    try:
        return rep, _run_replication(cfg, rep)
    except SisviveError as exc:
        return rep, f"replication {rep}: {exc}"


def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_cell(cfg: SimulationConfig, reps: int) -> SimulationSummary:
    """Run one cell; failed replications are logged and excluded from medians."""
    if reps < 1:
        raise ValueError("need at least one replication")
    tasks = [(cfg, r) for r in range(reps)]
    workers = _worker_count()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw_results = list(pool.map(_replication_task, tasks, chunksize=1))
    else:
        raw_results = [_replication_task(t) for t in tasks]
    # Deterministic merge by replication index regardless of completion order.
    raw_results.sort(key=lambda item: item[0])

    records = [res for _, res in raw_results if isinstance(res, dict)]
    failures = [res for _, res in raw_results if isinstance(res, str)]

    def med(key: str) -> float:
        return float(np.median([r[key] for r in records])) if records else float("nan")

    def mean(key: str) -> float:
        return float(np.mean([r[key] for r in records])) if records else float("nan")

    return SimulationSummary(
        median_abs_error={m: med(f"err_{m}") for m in METHODS},
        prop_correct_valid=mean("prop_valid"),
        prop_correct_invalid=mean("prop_invalid"),
        n_reps=len(records),
        n_failed=len(failures),
        mean_lambda_cv=mean("lambda_cv"),
        mean_lambda_theory=mean("lambda_theory"),
        failures=failures[:20],
    )


SWEEP_AXES = ("endogeneity", "s", "mu")


def run_grid(
    base: SimulationConfig, axis: str, values: list, reps: int
) -> list[tuple[SimulationConfig, SimulationSummary]]:
    """One summary per value of the swept axis."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    results = []
    for value in values:
        cfg = replace(base, **{axis: type(getattr(base, axis))(value)})
        results.append((cfg, run_cell(cfg, reps)))
    return results


def grid_to_csv(
    results: list[tuple[SimulationConfig, SimulationSummary]],
    axis: str,
    reps: int,
    path: str | Path,
) -> None:
    """Emit a long-format table: one row per (cell, metric)."""
    cfg_keys = [
        "n", "l", "s", "beta_star", "alpha_magnitude", "endogeneity",
        "corr_structure", "mu", "strength", "relative", "seed",
    ]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["axis", "axis_value", *cfg_keys, "reps", "metric", "value"])
        for cfg, summary in results:
            cfg_dict = asdict(cfg)
            prefix = [axis, repr(cfg_dict[axis]), *[cfg_dict[k] for k in cfg_keys], reps]
            metrics: dict[str, float] = {
                f"median_abs_error_{m}": summary.median_abs_error[m] for m in METHODS
            }
            metrics.update(
                prop_correct_valid=summary.prop_correct_valid,
                prop_correct_invalid=summary.prop_correct_invalid,
                mean_lambda_cv=summary.mean_lambda_cv,
                mean_lambda_theory=summary.mean_lambda_theory,
                n_reps=summary.n_reps,
                n_failed=summary.n_failed,
            )
            for metric, value in metrics.items():
                writer.writerow([*prefix, metric, repr(float(value))])


__all__ = [
    "SimulationConfig",
    "TruthRecord",
    "SimulationSummary",
    "METHODS",
    "instrument_covariance",
    "calibrate_gamma",
    "generate_dataset",
    "run_cell",
    "run_grid",
    "grid_to_csv",
]
