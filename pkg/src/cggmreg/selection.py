"""Degrees of freedom, information criteria and K-fold cross-validation."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import (
    CggmFit,
    DataSet,
    NumericalError,
    SuffStats,
    apply_standardization,
    neg_log_likelihood,
    predict,
    standardize,
)
from .structure import StructureMatrix


def active_set(omega_xy: np.ndarray) -> list[tuple[int, int]]:
    """Nonzero entries of omega_xy as (row, col) pairs in column-major order."""
    p = omega_xy.shape[0]
    cols, rows = np.nonzero(omega_xy.T)
    return list(zip(rows.tolist(), cols.tolist()))


def degrees_of_freedom(fit: CggmFit, stats: SuffStats,
                       structure: StructureMatrix, lambda2: float) -> float:
    """Unbiased degrees-of-freedom estimate of a fit.

    df = |A| - lambda2 * tr[ (R kron L)_AA ((R kron (S_xx + lambda2 L))_AA)^{-1} ]
    where A indexes the nonzero entries of vec(omega_xy).  Only the
    |A| x |A| submatrices are formed.
    """
    act = active_set(fit.omega_xy)
    card = len(act)
    if card == 0 or lambda2 == 0.0:
        return float(card)
    lmat = structure.dense()
    rows = np.array([j for j, _ in act])
    cols = np.array([k for _, k in act])
    r_sub = fit.r[np.ix_(cols, cols)]
    l_sub = lmat[np.ix_(rows, rows)]
    h_sub = (stats.s_xx + lambda2 * lmat)[np.ix_(rows, rows)]
    m1 = r_sub * l_sub  # (R kron L) restricted to A: entrywise products
    m2 = r_sub * h_sub
    try:
        trace = np.trace(np.linalg.solve(m2, m1))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"singular active-set submatrix at lambda1={fit.lambda1:.4g}, "
            f"lambda2={lambda2:.4g}"
        ) from exc
    return float(card - lambda2 * trace)


def log_likelihood(fit: CggmFit, stats: SuffStats) -> float:
    """log L up to the dropped constant (n times the per-sample value)."""
    return -stats.n * neg_log_likelihood(fit.omega_xy, fit.omega_yy, stats)


def information_criterion(fit: CggmFit, stats: SuffStats,
                          structure: StructureMatrix, lambda2: float,
                          kind: str = "bic") -> float:
    """-2 log L + pen * df with pen = 2 (aic) or log n (bic)."""
    if kind not in ("aic", "bic"):
        raise ValueError(f"kind must be 'aic' or 'bic', got {kind!r}")
    pen = 2.0 if kind == "aic" else float(np.log(stats.n))
    df = degrees_of_freedom(fit, stats, structure, lambda2)
    return -2.0 * log_likelihood(fit, stats) + pen * df


@dataclass
class CvReport:
    """Cross-validation summary over the penalty grid.

    pe_mean[i1, i2] is the mean squared prediction error accumulated
    across folds at (lambda1_values[i1], lambda2_values[i2]); pe_se is
    its standard error over samples.
    """

    fold_assignment: np.ndarray
    grid: "PenaltyGrid"
    pe_mean: np.ndarray
    pe_se: np.ndarray
    best_pair: tuple[float, float]
    best_index: tuple[int, int]


def make_folds(n: int, k: int, seed: int) -> np.ndarray:
    """Seeded balanced fold assignment: uniform shuffle then round-robin."""
    rng = np.random.default_rng(seed)
    assignment = np.empty(n, dtype=int)
    assignment[rng.permutation(n)] = np.arange(n) % k
    return assignment


def cross_validate(data: DataSet, structure: StructureMatrix,
                   grid: "PenaltyGrid", k: int = 5, seed: int = 0,
                   opts: "SolverOptions | None" = None,
                   n_threads: int = 1) -> CvReport:
    """K-fold cross-validation of the prediction error over the grid.

    Each training fold is re-standardized; its means/scales are applied
    to the held-out fold so there is no leakage.  At the argmin, ties
    break toward larger lambda1 then larger lambda2.
    """
    from .solver import SolverOptions, fit_path

    if opts is None:
        opts = SolverOptions()
    n = data.n
    if k < 2 or n < k:
        raise ValueError(f"need 2 <= K <= n, got K={k}, n={n}")
    assignment = make_folds(n, k, seed)
    n1 = len(grid.lambda1_values)
    n2 = len(grid.lambda2_values)

    def run_fold(fold):
        train_idx = np.flatnonzero(assignment != fold)
        test_idx = np.flatnonzero(assignment == fold)
        if train_idx.size < data.q:
            raise NumericalError(
                f"fold {fold}: training size {train_idx.size} < q={data.q}"
            )
        train = standardize(DataSet(data.x[train_idx], data.y[train_idx]))
        held = apply_standardization(
            DataSet(data.x[test_idx], data.y[test_idx]), train)
        path = fit_path(train, structure, grid, opts)
        sq = np.empty((test_idx.size, n1, n2))
        for i2 in range(n2):
            for i1 in range(n1):
                yhat = predict(path.cell(i1, i2).fit.b, held.x)
                sq[:, i1, i2] = ((yhat - held.y) ** 2).sum(axis=1)
        return test_idx, sq

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(run_fold, range(k)))
    else:
        results = [run_fold(fold) for fold in range(k)]

    contrib = np.empty((n, n1, n2))
    for test_idx, sq in results:
        contrib[test_idx] = sq
    pe_mean = contrib.mean(axis=0)
    pe_se = contrib.std(axis=0, ddof=1) / np.sqrt(n)
    # ties break toward larger lambda1 (smaller i1) then larger lambda2
    ties = np.argwhere(pe_mean == pe_mean.min())
    b1, b2 = min(
        (tuple(t) for t in ties),
        key=lambda t: (t[0], -grid.lambda2_values[t[1]]),
    )
    return CvReport(
        fold_assignment=assignment,
        grid=grid,
        pe_mean=pe_mean,
        pe_se=pe_se,
        best_pair=(float(grid.lambda1_values[b1]), float(grid.lambda2_values[b2])),
        best_index=(int(b1), int(b2)),
    )
