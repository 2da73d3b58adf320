"""Choosing the penalties: paths, information criteria and CV.

A single fit needs a (lambda1, lambda2) pair.  This script walks the
usual workflow: sweep a grid with warm starts, inspect the path table,
then pick the pair either by BIC (fast, no refitting) or by 5-fold
cross-validation (slower, usually better for prediction).
"""

import numpy as np

import cggmreg as cg

spec = cg.SimSpec(p=30, q=3, n_train=80, n_test=500, support_size=12,
                  tau=0.6, seed=3)
train, test, truth = cg.gen_dataset(spec)
data = cg.standardize(train)
stats = cg.compute_suff_stats(data)
struct = cg.identity_structure(spec.p)

grid = cg.default_grid(stats, n_lambda1=20, lambda2_values=(0.0, 0.1))
path = cg.fit_path_from_stats(stats, struct, grid)

print("lambda1    lambda2  support     df      AIC      BIC")
for cell in path.cells[::4]:
    print(f"{cell.lambda1:8.4f}  {cell.lambda2:8.2f}  "
          f"{cell.fit.support_size:7d}  {cell.df:5.1f}  "
          f"{cell.aic:8.1f} {cell.bic:8.1f}")

best_bic = min(path.cells, key=lambda c: c.bic)
print(f"\nBIC pick: lambda1={best_bic.lambda1:.4f}, "
      f"lambda2={best_bic.lambda2}, support={best_bic.fit.support_size} "
      f"(true support {np.count_nonzero(truth.omega_xy)})")

report = cg.cross_validate(train, struct, grid, k=5, seed=0)
lam1, lam2 = report.best_pair
print(f"CV pick:  lambda1={lam1:.4f}, lambda2={lam2}, "
      f"pe={report.pe_mean[report.best_index]:.3f} "
      f"(+/- {report.pe_se[report.best_index]:.3f})")

for name, pair in (("BIC", (best_bic.lambda1, best_bic.lambda2)),
                   ("CV", report.best_pair)):
    fit = cg.fit_from_stats(stats, struct, cg.PenaltyPair(*pair))
    b, intercept = cg.rescale_coefficients(fit.b, data)
    pe = float((((test.x @ b + intercept) - test.y) ** 2).sum() / test.n)
    hits = np.count_nonzero(fit.omega_xy[truth.omega_xy != 0])
    print(f"{name:>3} refit: test PE {pe:6.2f}, "
          f"recovered {hits}/{np.count_nonzero(truth.omega_xy)} "
          f"true direct effects, support {fit.support_size}")
