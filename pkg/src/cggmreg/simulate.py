"""Synthetic data generation and evaluation metrics.

All draws are deterministic functions of the seed.  The generator is
numpy's PCG64 seeded through SeedSequence; each matrix gets its own
spawned substream so adding a field never perturbs earlier draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DataSet


@dataclass(frozen=True)
class SimSpec:
    """Settings for one synthetic scenario.

    coef selects the direct-effect generator: "random" places
    support_size entries drawn from {-1, +1} uniformly at random (or in
    contiguous blocks when block_placement is set); "bump" uses the
    two-bump piecewise-quadratic vector (q must be 1).  tau controls the
    Toeplitz response correlation; for q=1 the noise variance is sigma2.
    """

    p: int
    q: int
    n_train: int
    n_test: int
    coef: str = "random"
    support_size: int = 0
    tau: float = 0.0
    sigma2: float = 1.0
    seed: int = 0
    block_placement: bool = False

    def __post_init__(self):
        if min(self.p, self.q, self.n_train, self.n_test) < 1:
            raise ValueError("dimensions must be positive")
        if not abs(self.tau) < 1:
            raise ValueError(f"need |tau| < 1, got {self.tau}")
        if self.coef not in ("random", "bump"):
            raise ValueError(f"unknown coefficient generator {self.coef!r}")
        if self.coef == "bump" and self.q != 1:
            raise ValueError("bump coefficients require q = 1")
        if self.support_size > self.p * self.q:
            raise ValueError("support_size exceeds p*q")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")


@dataclass(frozen=True)
class GroundTruth:
    """True parameters of a simulated scenario, with b = -omega_xy @ r."""

    omega_xy: np.ndarray
    r: np.ndarray
    b: np.ndarray


def toeplitz_cov(q: int, tau: float) -> np.ndarray:
    """Toeplitz correlation matrix R[i, j] = tau^|i-j| (SPD for |tau| < 1)."""
    if not abs(tau) < 1:
        raise ValueError(f"need |tau| < 1, got {tau}")
    idx = np.arange(q)
    return float(tau) ** np.abs(idx[:, None] - idx[None, :]) if tau != 0 \
        else np.eye(q)


def bump_coefficients(p: int = 100) -> np.ndarray:
    """Sparse vector with two smooth quadratic bumps, one per sign.

    For p = 100 (the reference size): entries 21..39 (1-based) carry
    -((30-j)^2 - 100)/200, entries 61..80 carry ((70-j)^2 - 100)/200,
    all others are 0.  Other p values place the scaled analogue of the
    same bumps at proportional positions.
    """
    omega = np.zeros(p)
    scale = p / 100.0
    j = np.arange(1, p + 1)  # 1-based positions as in the reference formula
    lo1, hi1 = int(round(21 * scale)), int(round(39 * scale))
    lo2, hi2 = int(round(61 * scale)), int(round(80 * scale))
    c1, c2 = 30 * scale, 70 * scale
    width = 100 * scale ** 2
    m1 = (j >= lo1) & (j <= hi1)
    m2 = (j >= lo2) & (j <= hi2)
    omega[m1] = -((c1 - j[m1]) ** 2 - width) / (2 * width)
    omega[m2] = ((c2 - j[m2]) ** 2 - width) / (2 * width)
    return omega


def swap_coefficients(omega: np.ndarray, seed: int) -> np.ndarray:
    """Seeded uniform permutation of the entries (value multiset preserved)."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return np.asarray(omega)[rng.permutation(len(omega))]


def gen_dataset(spec: SimSpec) -> tuple[DataSet, DataSet, GroundTruth]:
    """Draw (train, test, truth) for a scenario.

    X rows are i.i.d. standard Gaussian; noise rows are z @ C' with
    R = C C' lower triangular.  Substream order: support, values,
    x_train, x_test, noise_train, noise_test.
    """
    streams = np.random.SeedSequence(spec.seed).spawn(6)
    rngs = [np.random.default_rng(s) for s in streams]
    rng_support, rng_values, rng_xtr, rng_xte, rng_etr, rng_ete = rngs

    if spec.coef == "bump":
        omega_xy = bump_coefficients(spec.p).reshape(spec.p, 1)
    else:
        omega_xy = np.zeros((spec.p, spec.q))
        if spec.support_size > 0:
            if spec.block_placement:
                # one contiguous run of rows per response, lengths as equal
                # as possible
                sizes = np.full(spec.q, spec.support_size // spec.q)
                sizes[: spec.support_size % spec.q] += 1
                flat = []
                for k, size in enumerate(sizes):
                    if size == 0:
                        continue
                    start = int(rng_support.integers(0, spec.p - size + 1))
                    flat.extend((start + off) * spec.q + k
                                for off in range(size))
                idx = np.array(sorted(flat))
                rows, cols = idx // spec.q, idx % spec.q
            else:
                flat = rng_support.choice(spec.p * spec.q, spec.support_size,
                                          replace=False)
                rows, cols = np.unravel_index(np.sort(flat),
                                              (spec.p, spec.q))
            signs = rng_values.integers(0, 2, size=len(rows)) * 2.0 - 1.0
            omega_xy[rows, cols] = signs

    r = np.array([[spec.sigma2]]) if spec.q == 1 else toeplitz_cov(spec.q, spec.tau)
    b = -omega_xy @ r
    chol_r = np.linalg.cholesky(r)

    def draw(rng_x, rng_e, n):
        x = rng_x.standard_normal((n, spec.p))
        e = rng_e.standard_normal((n, spec.q)) @ chol_r.T
        return DataSet(x=x, y=x @ b + e)

    train = draw(rng_xtr, rng_etr, spec.n_train)
    test = draw(rng_xte, rng_ete, spec.n_test)
    return train, test, GroundTruth(omega_xy=omega_xy, r=r, b=b)


def prediction_error(b_hat: np.ndarray, test: DataSet) -> float:
    """Mean squared prediction error (1/n) sum_i ||x_i' B - y_i||^2."""
    resid = test.x @ b_hat - test.y
    return float((resid ** 2).sum() / test.n)


def coefficient_mse(b_hat: np.ndarray, b_true: np.ndarray) -> float:
    """Mean of squared entrywise differences."""
    b_hat = np.asarray(b_hat)
    b_true = np.asarray(b_true)
    if b_hat.shape != b_true.shape:
        raise ValueError(f"shape mismatch {b_hat.shape} vs {b_true.shape}")
    return float(((b_hat - b_true) ** 2).mean())
