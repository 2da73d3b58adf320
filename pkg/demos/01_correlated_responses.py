"""Why model the response covariance at all?

We simulate a multivariate regression whose five responses share strongly
correlated noise (Toeplitz, tau = 0.9), then compare two strategies on a
held-out test set:

  * five separate single-response sparse fits, which ignore the
    correlation entirely;
  * one joint fit that estimates the direct effects together with the
    response precision matrix.

With correlated noise, part of each response's variation is explained by
the other responses, and the joint fit exploits that.  Rerun with
tau = 0.1 to watch the advantage vanish.
"""

import numpy as np

import cggmreg as cg

TAU = 0.9

spec = cg.SimSpec(p=40, q=5, n_train=50, n_test=1000, support_size=25,
                  tau=TAU, seed=0)
train, test, truth = cg.gen_dataset(spec)
print(f"simulated p={spec.p}, q={spec.q}, n={spec.n_train}, tau={TAU}")


def tuned_prediction_error(train_k, test_k, seed):
    data = cg.standardize(train_k)
    stats = cg.compute_suff_stats(data)
    grid = cg.default_grid(stats, n_lambda1=25, lambda2_values=(0.0,))
    struct = cg.identity_structure(train_k.p)
    report = cg.cross_validate(train_k, struct, grid, k=5, seed=seed)
    i1, _ = report.best_index
    fit = cg.fit_from_stats(stats, struct,
                            cg.PenaltyPair(grid.lambda1_values[i1], 0.0))
    b, intercept = cg.rescale_coefficients(fit.b, data)
    resid = test_k.x @ b + intercept - test_k.y
    return float((resid ** 2).sum() / test_k.n)


joint_pe = tuned_prediction_error(train, test, seed=0)
print(f"joint fit, 5-fold CV tuned:        PE = {joint_pe:6.2f}")

split_pe = 0.0
for k in range(spec.q):
    split_pe += tuned_prediction_error(
        cg.DataSet(x=train.x, y=train.y[:, k:k + 1]),
        cg.DataSet(x=test.x, y=test.y[:, k:k + 1]),
        seed=10 + k)
print(f"five independent fits, CV tuned:   PE = {split_pe:6.2f}")
print(f"relative improvement: {100 * (1 - joint_pe / split_pe):.1f}%")
