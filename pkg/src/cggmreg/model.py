"""Conditional Gaussian graphical model: data containers, likelihood, objective.

The model parametrizes the multivariate regression Y = X B + E,
E ~ N(0, R), through the blocks (Omega_xy, Omega_yy) of the joint
precision matrix, with R = Omega_yy^{-1} and B = -Omega_xy R.  The
negative conditional log-likelihood is jointly convex in
(Omega_xy, Omega_yy), which is what makes the alternating solver in
:mod:`cggmreg.solver` converge to the global optimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg


class NumericalError(RuntimeError):
    """Raised when a required factorization or solve fails (e.g. non-SPD input)."""


@dataclass(frozen=True)
class DataSet:
    """Predictor matrix x (n, p) and response matrix y (n, q).

    Standardization metadata is recorded so that fitted coefficients and
    predictions can be mapped back to the original scale.
    """

    x: np.ndarray
    y: np.ndarray
    centered: bool = False
    x_mean: np.ndarray | None = None
    y_mean: np.ndarray | None = None
    y_scale: np.ndarray | None = None
    x_scale: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2 or y.ndim != 2:
            raise ValueError("x and y must be 2-d arrays")
        if x.shape[0] != y.shape[0]:
            raise ValueError(
                f"x has {x.shape[0]} rows but y has {y.shape[0]} rows"
            )
        if x.shape[0] < 1:
            raise ValueError("need at least one sample")
        if not np.isfinite(x).all() or not np.isfinite(y).all():
            raise ValueError("x or y contains NaN or Inf entries")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def q(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True)
class SuffStats:
    """Empirical covariance blocks S_xx = X'X/n, S_yy = Y'Y/n, S_xy = X'Y/n."""

    s_xx: np.ndarray
    s_yy: np.ndarray
    s_xy: np.ndarray
    n: int

    @property
    def p(self) -> int:
        return self.s_xx.shape[0]

    @property
    def q(self) -> int:
        return self.s_yy.shape[0]


@dataclass(frozen=True)
class PenaltyPair:
    """Sparsity weight lambda1 and structure weight lambda2, both >= 0."""

    lambda1: float
    lambda2: float

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")


@dataclass
class CggmFit:
    """Result of one penalized fit.

    omega_xy holds the direct effects (sparse support), omega_yy the SPD
    response precision.  r and b are the derived regression-scale
    parameters: r = omega_yy^{-1}, b = -omega_xy @ r.
    """

    omega_xy: np.ndarray
    omega_yy: np.ndarray
    r: np.ndarray
    b: np.ndarray
    lambda1: float
    lambda2: float
    objective_value: float
    n_outer_iters: int
    converged: bool
    objective_history: list[float] = field(default_factory=list)

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.omega_xy))


def _column_check_centered(m: np.ndarray, label: str) -> None:
    means = m.mean(axis=0)
    scales = m.std(axis=0) + 1.0
    bad = np.abs(means) > 1e-8 * scales
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise ValueError(
            f"{label} column {j} is not centered (mean={means[j]:.3g}); "
            "standardize the data first"
        )


def compute_suff_stats(data: DataSet) -> SuffStats:
    """Empirical covariance blocks of a centered dataset.

    Raises ValueError if the data is not centered or contains
    non-finite entries.
    """
    _column_check_centered(data.x, "x")
    _column_check_centered(data.y, "y")
    n = data.n
    return SuffStats(
        s_xx=data.x.T @ data.x / n,
        s_yy=data.y.T @ data.y / n,
        s_xy=data.x.T @ data.y / n,
        n=n,
    )


def standardize(data: DataSet, scale_x: bool = False) -> DataSet:
    """Center x columns; center y columns and scale them to unit variance.

    Predictors are centered but not scaled by default (0/1 markers and
    count matrices keep their natural scale); pass scale_x=True to scale
    them as well.  Scale factors use the sample standard deviation
    (ddof=1) and are recorded on the returned dataset so predictions can
    be mapped back.
    """
    if data.n < 2:
        raise ValueError("standardization needs at least 2 samples")
    x_mean = data.x.mean(axis=0)
    y_mean = data.y.mean(axis=0)
    y_scale = data.y.std(axis=0, ddof=1)
    zero = np.flatnonzero(y_scale == 0)
    if zero.size:
        raise ValueError(f"y column {int(zero[0])} has zero variance")
    x = data.x - x_mean
    x_scale = None
    if scale_x:
        x_scale = data.x.std(axis=0, ddof=1)
        zero = np.flatnonzero(x_scale == 0)
        if zero.size:
            raise ValueError(f"x column {int(zero[0])} has zero variance")
        x = x / x_scale
    y = (data.y - y_mean) / y_scale
    return DataSet(
        x=x, y=y, centered=True,
        x_mean=x_mean, y_mean=y_mean, y_scale=y_scale, x_scale=x_scale,
    )


def unstandardize(data: DataSet) -> DataSet:
    """Invert :func:`standardize`, restoring the original scales."""
    x = data.x
    if data.x_scale is not None:
        x = x * data.x_scale
    if data.x_mean is not None:
        x = x + data.x_mean
    y = data.y
    if data.y_scale is not None:
        y = y * data.y_scale
    if data.y_mean is not None:
        y = y + data.y_mean
    return DataSet(x=x, y=y, centered=False)


def apply_standardization(data: DataSet, ref: DataSet) -> DataSet:
    """Standardize ``data`` with the means/scales recorded on ``ref``.

    Used for held-out folds: the transformation is learned on the
    training part only.
    """
    if ref.x_mean is None or ref.y_mean is None or ref.y_scale is None:
        raise ValueError("reference dataset carries no standardization metadata")
    x = data.x - ref.x_mean
    if ref.x_scale is not None:
        x = x / ref.x_scale
    y = (data.y - ref.y_mean) / ref.y_scale
    return replace(
        data, x=x, y=y, centered=True,
        x_mean=ref.x_mean, y_mean=ref.y_mean,
        y_scale=ref.y_scale, x_scale=ref.x_scale,
    )


def rescale_coefficients(b: np.ndarray, ref: DataSet):
    """Map coefficients fit on standardized data back to original units.

    Returns (b_orig, intercept) such that predictions on raw inputs are
    x_new @ b_orig + intercept.
    """
    if ref.y_scale is None or ref.y_mean is None or ref.x_mean is None:
        raise ValueError("reference dataset carries no standardization metadata")
    b_orig = np.asarray(b, dtype=float)
    if ref.x_scale is not None:
        b_orig = b_orig / ref.x_scale[:, None]
    b_orig = b_orig * ref.y_scale[None, :]
    intercept = ref.y_mean - ref.x_mean @ b_orig
    return b_orig, intercept


def spd_cholesky(m: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor, raising NumericalError when m is not SPD."""
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{what} is not symmetric positive definite") from exc


def spd_inverse(m: np.ndarray, what: str = "matrix") -> np.ndarray:
    c = spd_cholesky(m, what)
    inv = scipy.linalg.cho_solve((c, True), np.eye(m.shape[0]))
    return 0.5 * (inv + inv.T)


def neg_log_likelihood(omega_xy: np.ndarray, omega_yy: np.ndarray,
                       stats: SuffStats) -> float:
    """Per-sample negative conditional log-likelihood, constant dropped.

    Returns (1/2) [ -log|Omega_yy| + tr(S_yy Omega_yy)
                    + 2 tr(S_xy Omega_yx) + tr(Omega_yx S_xx Omega_xy Omega_yy^{-1}) ].
    """
    c = spd_cholesky(omega_yy, "omega_yy")
    logdet = 2.0 * np.sum(np.log(np.diag(c)))
    cross = 2.0 * np.sum(stats.s_xy * omega_xy)
    m = omega_xy.T @ stats.s_xx @ omega_xy
    quad = np.trace(scipy.linalg.cho_solve((c, True), m))
    return 0.5 * (-logdet + np.sum(stats.s_yy * omega_yy) + cross + quad)


def objective(omega_xy: np.ndarray, omega_yy: np.ndarray, stats: SuffStats,
              structure: np.ndarray, pen: PenaltyPair) -> float:
    """Penalized criterion: likelihood + structure trace term + l1 term."""
    p, q = omega_xy.shape
    if structure.shape != (p, p):
        raise ValueError(
            f"structure matrix is {structure.shape}, expected ({p}, {p})"
        )
    value = neg_log_likelihood(omega_xy, omega_yy, stats)
    if pen.lambda2 > 0:
        c = spd_cholesky(omega_yy, "omega_yy")
        m = omega_xy.T @ (structure @ omega_xy)
        value += 0.5 * pen.lambda2 * np.trace(scipy.linalg.cho_solve((c, True), m))
    if pen.lambda1 > 0:
        value += pen.lambda1 * np.abs(omega_xy).sum()
    return float(value)


def to_regression(omega_xy: np.ndarray, omega_yy: np.ndarray):
    """Map (Omega_xy, Omega_yy) to regression parameters (B, R).

    R = Omega_yy^{-1} via SPD solve, B = -Omega_xy @ R.  B and Omega_xy
    share the same sparsity pattern whenever R has no exact zero
    cancellations (always in the q=1 case).
    """
    r = spd_inverse(omega_yy, "omega_yy")
    return -omega_xy @ r, r


def predict(b: np.ndarray, x_new: np.ndarray) -> np.ndarray:
    """Predicted responses X_new @ B."""
    x_new = np.asarray(x_new, dtype=float)
    if x_new.shape[1] != b.shape[0]:
        raise ValueError(
            f"x_new has {x_new.shape[1]} columns but b has {b.shape[0]} rows"
        )
    return x_new @ b
