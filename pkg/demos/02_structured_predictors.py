"""Encoding predictor smoothness through the structure matrix.

The simulated coefficient vector has two smooth bumps over adjacent
predictors, the kind of profile that shows up in spectrometry or along a
genome.  The chain-graph Laplacian L rewards solutions whose neighboring
coefficients agree, so turning the structure penalty on (lambda2 > 0)
should recover the bumps far more accurately than the plain l1 fit
(lambda2 = 0), which fits each coordinate on its own.
"""

import numpy as np

import cggmreg as cg

spec = cg.SimSpec(p=100, q=1, n_train=120, n_test=1000, coef="bump",
                  sigma2=5.0, seed=1)
train, test, truth = cg.gen_dataset(spec)
struct = cg.chain_laplacian(spec.p)
data = cg.standardize(train)
stats = cg.compute_suff_stats(data)


def tuned_fit(lambda2_values, seed=0):
    grid = cg.default_grid(stats, n_lambda1=25,
                           lambda2_values=lambda2_values)
    report = cg.cross_validate(train, struct, grid, k=5, seed=seed)
    i1, i2 = report.best_index
    pair = cg.PenaltyPair(grid.lambda1_values[i1], grid.lambda2_values[i2])
    fit = cg.fit_from_stats(stats, struct, pair)
    b, intercept = cg.rescale_coefficients(fit.b, data)
    mse = cg.coefficient_mse(b, truth.b)
    pe = float((((test.x @ b + intercept) - test.y) ** 2).sum() / test.n)
    return pair, b, mse, pe


pair0, b0, mse0, pe0 = tuned_fit((0.0,))
print(f"no structure   (lambda1={pair0.lambda1:.3f})"
      f"  coef MSE {mse0:.4f}  PE {pe0:.2f}")

pair1, b1, mse1, pe1 = tuned_fit((0.01, 0.1, 1.0))
print(f"chain Laplacian (lambda1={pair1.lambda1:.3f},"
      f" lambda2={pair1.lambda2})  coef MSE {mse1:.4f}  PE {pe1:.2f}")

print(f"\ncoefficient error shrinks by {100 * (1 - mse1 / mse0):.0f}%")

# a crude terminal sketch of the recovered profiles around the first bump
print("\ntrue vs fitted coefficients, predictors 18..42:")
for j in range(17, 42):
    bar = lambda v: "#" * int(round(abs(v) * 8))
    print(f"  x{j + 1:<3d} true {truth.b[j, 0]:+8.3f} {bar(truth.b[j, 0]):<22}"
          f" fit {b1[j, 0]:+8.3f} {bar(b1[j, 0])}")
