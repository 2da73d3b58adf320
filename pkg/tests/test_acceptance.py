"""End-to-end acceptance gate.

Each test prints a single PASS/FAIL line (bypassing output capture) and
asserts the corresponding property at its stated tolerance.  Reference
values come from the independent implementations in oracles.py, never
from the package itself.
"""

import functools
import subprocess
import sys
import time

import numpy as np
import pytest

import cggmreg as cg

import oracles as orc


def report(num, name, ok, detail=""):
    line = f"[criterion {num:2d}] {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line


def random_problem(seed, p_max=30, q_max=5):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(2, p_max + 1))
    q = int(rng.integers(1, q_max + 1))
    n = int(rng.integers(q + 5, max(q + 6, 3 * p)))
    x = rng.standard_normal((n, p))
    b = np.zeros((p, q))
    k = min(p, 3)
    b[rng.choice(p, k, replace=False), :] = rng.standard_normal((k, q))
    y = x @ b + rng.standard_normal((n, q))
    data = cg.standardize(cg.DataSet(x=x, y=y))
    return data, cg.compute_suff_stats(data), rng


def test_criterion_01_optimizer_correctness():
    # warm the jit kernel outside the timed section
    data, stats, _ = random_problem(999)
    cg.fit(data, cg.identity_structure(data.p), cg.PenaltyPair(0.2, 0.1))

    start = time.perf_counter()
    worst_kkt = 0.0
    for seed in range(50):
        data, stats, rng = random_problem(seed)
        struct = (cg.chain_laplacian(data.p) if seed % 2
                  else cg.identity_structure(data.p))
        lam1 = float(rng.uniform(0.05, 0.6)) * cg.lambda1_max(stats)
        pen = cg.PenaltyPair(lam1, [0.0, 0.1, 1.0][seed % 3])
        f = cg.fit(data, struct, pen)
        hist = np.asarray(f.objective_history)
        assert np.all(np.diff(hist) <= 1e-12), f"objective rose at seed {seed}"
        worst_kkt = max(worst_kkt,
                        cg.kkt_residual(f, stats, struct, pen))
    elapsed = time.perf_counter() - start
    ok = worst_kkt <= 1e-5 and elapsed < 60.0
    report(1, "optimizer monotone + stationary on 50 random fits", ok,
           f"worst kkt {worst_kkt:.2e}, {elapsed:.1f}s")


def test_criterion_02_covariance_update_exactness():
    worst_stat = 0.0
    worst_eta = 0.0
    for seed in range(100):
        data, stats, rng = random_problem(seed + 200, p_max=15, q_max=5)
        lam2 = float(rng.choice([0.0, 0.05, 0.5, 2.0]))
        lmat = (cg.chain_laplacian(stats.p) if seed % 2
                else cg.identity_structure(stats.p))
        omega_xy = rng.standard_normal((stats.p, stats.q))
        omega_xy *= rng.random(omega_xy.shape) < 0.6
        omega_yy, _ = cg.update_covariance(omega_xy, stats, lmat.dense(),
                                           lam2)
        nmat = omega_xy.T @ (stats.s_xx + lam2 * lmat.dense()) @ omega_xy
        resid = omega_yy @ stats.s_yy @ omega_yy - omega_yy - nmat
        rel = np.linalg.norm(resid) / max(1.0, np.linalg.norm(nmat))
        worst_stat = max(worst_stat, rel)
        eig = cg.covariance_eigen(omega_xy, stats, lmat, lam2)
        worst_eta = max(worst_eta,
                        np.abs(eig.eta ** 2 - eig.eta - eig.zeta).max())
    ok = worst_stat <= 1e-8 and worst_eta <= 1e-10
    report(2, "closed-form covariance update stationarity on 100 draws", ok,
           f"stationarity {worst_stat:.2e}, eta identity {worst_eta:.2e}")


def test_criterion_03_small_instance_oracle_equivalence():
    worst_obj = 0.0
    worst_par = 0.0
    opts = cg.SolverOptions(outer_tol=1e-12, max_outer=2000)
    for seed in range(10):
        rng = np.random.default_rng(seed + 40)
        n = 40
        x = rng.standard_normal((n, 2))
        y = rng.standard_normal((n, 2)) + x @ rng.standard_normal((2, 2)) * 0.7
        data = cg.standardize(cg.DataSet(x=x, y=y))
        stats = cg.compute_suff_stats(data)
        lmat = (cg.chain_laplacian(2) if seed % 2
                else cg.identity_structure(2))
        lam1 = 0.3 * cg.lambda1_max(stats)
        lam2 = [0.0, 0.3, 1.0][seed % 3]
        f = cg.fit(data, lmat, cg.PenaltyPair(lam1, lam2), opts)
        oxy, oyy, val = orc.prox_grad_fit(stats.s_xx, stats.s_yy, stats.s_xy,
                                          lmat.dense(), lam1, lam2)
        worst_obj = max(worst_obj, abs(f.objective_value - val))
        worst_par = max(worst_par, np.abs(f.omega_xy - oxy).max(),
                        np.abs(f.omega_yy - oyy).max())
    ok = worst_obj <= 1e-4 and worst_par <= 1e-3
    report(3, "joint first-order oracle agreement (p=q=2, 10 seeds)", ok,
           f"obj diff {worst_obj:.2e}, param diff {worst_par:.2e}")


def test_criterion_04_univariate_reduction():
    worst_coef = 0.0
    supports_equal = True
    opts = cg.SolverOptions(outer_tol=1e-13, max_outer=3000)
    for seed in range(10):
        rng = np.random.default_rng(seed + 70)
        n, p = 60, 15
        x = rng.standard_normal((n, p))
        beta = np.zeros(p)
        beta[rng.choice(p, 4, replace=False)] = rng.standard_normal(4) * 1.5
        y = (x @ beta + rng.standard_normal(n)).reshape(-1, 1)
        data = cg.standardize(cg.DataSet(x=x, y=y))
        stats = cg.compute_suff_stats(data)
        lam1 = float(rng.uniform(0.1, 0.4)) * cg.lambda1_max(stats)
        f = cg.fit(data, cg.identity_structure(p), cg.PenaltyPair(lam1, 0.0),
                   opts)
        beta_ref, sigma2_ref = orc.univariate_alternating(data.x, data.y,
                                                          lam1)
        b_hat = f.b.ravel()
        supports_equal &= (set(np.flatnonzero(b_hat))
                           == set(np.flatnonzero(beta_ref)))
        worst_coef = max(worst_coef, np.abs(b_hat - beta_ref).max(),
                         abs(f.r[0, 0] - sigma2_ref))
    ok = supports_equal and worst_coef <= 1e-4
    report(4, "single-response reduction matches alternating oracle", ok,
           f"supports equal {supports_equal}, coef diff {worst_coef:.2e}")


def test_criterion_05_degrees_of_freedom():
    # without structure penalty, df is exactly the support cardinality
    data, stats, _ = random_problem(321, p_max=10, q_max=3)
    struct = cg.chain_laplacian(data.p)
    grid = cg.PenaltyGrid(
        np.geomspace(cg.lambda1_max(stats), 0.01 * cg.lambda1_max(stats), 20),
        np.array([0.0]))
    path = cg.fit_path_from_stats(stats, struct, grid)
    exact = all(cell.df == float(cell.fit.support_size)
                for cell in path.cells)

    # with structure penalty, compare against materialized Kronecker df
    worst = 0.0
    for seed in range(8):
        data, stats, rng = random_problem(seed + 500, p_max=4, q_max=4)
        struct = cg.chain_laplacian(data.p)
        lam2 = float(rng.choice([0.05, 0.3, 1.0]))
        f = cg.fit(data, struct, cg.PenaltyPair(0.05, lam2))
        df = cg.degrees_of_freedom(f, stats, struct, lam2)
        ref = orc.kron_df(f.omega_xy, f.r, stats.s_xx, struct.dense(), lam2)
        worst = max(worst, abs(df - ref))
    ok = exact and worst <= 1e-10
    report(5, "df cardinality reduction + Kronecker oracle", ok,
           f"lambda2=0 exact {exact}, lambda2>0 diff {worst:.2e}")


def test_criterion_06_hamming_recursion():
    start = time.perf_counter()
    all_equal = True
    for k in range(1, 6):
        for ell in range(k + 1):
            ours = cg.hamming_adjacency(k, ell).toarray()
            ref = orc.hamming_bruteforce(k, ell)
            all_equal &= bool(np.array_equal(ours, ref))
    elapsed = time.perf_counter() - start
    ok = all_equal and elapsed < 10.0
    report(6, "motif neighborhood recursion vs brute force (k <= 5)", ok,
           f"equal {all_equal}, {elapsed:.1f}s")


def test_criterion_07_genetic_precision_inverse(tmp_path):
    rho = 0.98
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed + 900)
        n_chrom = int(rng.integers(1, 4))
        sizes = rng.multinomial(int(rng.integers(n_chrom, 13)) - n_chrom,
                                np.ones(n_chrom) / n_chrom) + 1
        positions = [np.cumsum(rng.uniform(0.2, 10.0, size=s))
                     for s in sizes]
        lines = ["marker,chromosome,position_cM"]
        for c, pos in enumerate(positions):
            lines += [f"m{c}_{i},chr{c},{v}" for i, v in enumerate(pos)]
        mapfile = tmp_path / f"map{seed}.csv"
        mapfile.write_text("\n".join(lines) + "\n")
        gmap = cg.read_genetic_map(mapfile, rho=rho)
        lmat = cg.genetic_precision(gmap).dense()
        corr = orc.map_correlation(positions, rho)
        worst = max(worst,
                    np.abs(lmat @ corr - np.eye(corr.shape[0])).max())
    ok = worst <= 1e-8
    report(7, "map precision inverts marker correlation (20 maps)", ok,
           f"max |L corr - I| = {worst:.2e}")


# ----------------------------------------------------------------------
# simulation studies (criteria 8, 9, 10)


def _tuned_scores(train, test, truth, struct, lambda2_values, seed):
    """CV-tune on the grid, refit, return (coef mse, prediction error)."""
    data = cg.standardize(train)
    stats = cg.compute_suff_stats(data)
    grid = cg.default_grid(stats, n_lambda1=20, lambda2_values=lambda2_values)
    rep = cg.cross_validate(train, struct, grid, k=5, seed=seed)
    i1, i2 = rep.best_index
    f = cg.fit_from_stats(stats, struct,
                          cg.PenaltyPair(grid.lambda1_values[i1],
                                         grid.lambda2_values[i2]))
    b0, c0 = cg.rescale_coefficients(f.b, data)
    mse = cg.coefficient_mse(b0, truth.b)
    pe = float((((test.x @ b0 + c0) - test.y) ** 2).sum() / test.n)
    return mse, pe


def _swap_scenario(train, test, truth, rep):
    omega = cg.swap_coefficients(truth.omega_xy.ravel(), seed=rep)
    omega = omega.reshape(-1, 1)
    b_sw = -omega * truth.r[0, 0]
    e_tr = train.y - train.x @ truth.b
    e_te = test.y - test.x @ truth.b
    return (cg.DataSet(x=train.x, y=train.x @ b_sw + e_tr),
            cg.DataSet(x=test.x, y=test.x @ b_sw + e_te),
            cg.GroundTruth(omega_xy=omega, r=truth.r, b=b_sw))


@functools.lru_cache(maxsize=1)
def _bump_study(n_reps=20):
    """Structured vs unstructured fits on the two-bump scenario.

    Returns per-replicate (mse, pe) arrays for four arms: baseline and
    structured on the original coefficients, then both again after a
    seeded swap of the coefficient entries (same inputs and noise), plus
    the wall time of the unswapped portion.
    """
    struct = cg.chain_laplacian(100)
    arms = {key: [] for key in ("base", "struct", "base_sw", "struct_sw")}
    start = time.perf_counter()
    for rep in range(n_reps):
        spec = cg.SimSpec(p=100, q=1, n_train=120, n_test=1000, coef="bump",
                          sigma2=5.0, seed=rep)
        train, test, truth = cg.gen_dataset(spec)
        arms["base"].append(_tuned_scores(train, test, truth, struct,
                                          (0.0,), rep))
        arms["struct"].append(_tuned_scores(train, test, truth, struct,
                                            (0.01, 0.1, 1.0), rep))
    unswapped_time = time.perf_counter() - start
    for rep in range(n_reps):
        spec = cg.SimSpec(p=100, q=1, n_train=120, n_test=1000, coef="bump",
                          sigma2=5.0, seed=rep)
        train, test, truth = _swap_scenario(*cg.gen_dataset(spec), rep)
        arms["base_sw"].append(_tuned_scores(train, test, truth, struct,
                                             (0.0,), rep))
        arms["struct_sw"].append(_tuned_scores(train, test, truth, struct,
                                               (0.01, 0.1, 1.0), rep))
    return ({key: np.array(val) for key, val in arms.items()},
            unswapped_time)


def test_criterion_08_structure_gain():
    arms, elapsed = _bump_study()
    mse_ratio = arms["struct"][:, 0].mean() / arms["base"][:, 0].mean()
    pe_ratio = arms["struct"][:, 1].mean() / arms["base"][:, 1].mean()
    ok = mse_ratio <= 0.5 and pe_ratio <= 0.85 and elapsed < 600.0
    report(8, "chain-structured fit halves coefficient error (20 reps)", ok,
           f"mse ratio {mse_ratio:.3f}, pe ratio {pe_ratio:.3f}, "
           f"{elapsed:.0f}s")


def test_criterion_10_swapped_prior_robustness():
    arms, _ = _bump_study()
    ratio = arms["struct_sw"][:, 0].mean() / arms["base_sw"][:, 0].mean()
    ok = ratio <= 1.25
    report(10, "mismatched prior degrades gracefully (20 reps)", ok,
           f"swapped mse ratio {ratio:.3f}")


def _path_prediction_errors(train, test):
    """Test-set prediction error along the l1 path (l2 fixed at 0)."""
    data = cg.standardize(train)
    stats = cg.compute_suff_stats(data)
    struct = cg.identity_structure(train.p)
    grid = cg.default_grid(stats, n_lambda1=25, lambda2_values=(0.0,))
    path = cg.fit_path_from_stats(stats, struct, grid)
    pes = []
    for cell in path.cells:
        b0, c0 = cg.rescale_coefficients(cell.fit.b, data)
        pes.append(float((((test.x @ b0 + c0) - test.y) ** 2).sum()
                         / test.n))
    return np.array(pes)


@functools.lru_cache(maxsize=1)
def _correlation_study(n_reps=20):
    """Joint fit vs per-response fits at high and low noise correlation.

    Both arms report the best prediction error reachable on their l1
    path, which isolates the value of modelling the residual covariance
    from penalty-selection noise.  The per-response arm shares one grid
    index across the responses, matching the joint arm's single l1
    value across all coefficient entries.
    """
    results = {}
    start = time.perf_counter()
    for tau in (0.9, 0.1):
        joint_pe = []
        split_pe = []
        for rep in range(n_reps):
            spec = cg.SimSpec(p=40, q=5, n_train=50, n_test=1000,
                              support_size=25, tau=tau, seed=rep)
            train, test, truth = cg.gen_dataset(spec)
            joint_pe.append(_path_prediction_errors(train, test).min())
            curves = [
                _path_prediction_errors(
                    cg.DataSet(x=train.x, y=train.y[:, k:k + 1]),
                    cg.DataSet(x=test.x, y=test.y[:, k:k + 1]))
                for k in range(5)]
            split_pe.append(np.sum(curves, axis=0).min())
        results[tau] = (np.array(joint_pe), np.array(split_pe))
    return results, time.perf_counter() - start


def test_criterion_09_covariance_gain():
    results, elapsed = _correlation_study()
    joint_hi, split_hi = results[0.9]
    joint_lo, split_lo = results[0.1]
    diff_hi = split_hi - joint_hi
    diff_lo = split_lo - joint_lo
    se_hi = np.std(diff_hi, ddof=1) / np.sqrt(len(diff_hi))
    se_lo = np.std(diff_lo, ddof=1) / np.sqrt(len(diff_lo))
    gap_hi = np.median(diff_hi)
    gap_lo = np.median(diff_lo)
    ok = (np.median(joint_hi) < np.median(split_hi)
          and gap_hi > se_hi and abs(gap_lo) <= 2 * se_lo
          and elapsed < 600.0)
    report(9, "joint covariance helps iff responses correlate (20 reps)", ok,
           f"tau=0.9 paired gap {gap_hi:.2f} (se {se_hi:.2f}), "
           f"tau=0.1 paired gap {gap_lo:.2f} (se {se_lo:.2f}), {elapsed:.0f}s")


# ----------------------------------------------------------------------
# CLI determinism


def _run_cli(args, cwd):
    proc = subprocess.run([sys.executable, "-m", "cggmreg.cli"] + args,
                          cwd=cwd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


def test_criterion_11_cli_determinism(tmp_path):
    sim_args = ["simulate", "--p", "10", "--q", "2", "--n-train", "30",
                "--n-test", "20", "--support-size", "5", "--tau", "0.5",
                "--seed", "9"]
    _run_cli(sim_args + ["--out", "sim"], tmp_path)
    _run_cli(sim_args + ["--out", "sim2"], tmp_path)
    data_args = ["--x", "sim/X_train.csv", "--y", "sim/Y_train.csv"]
    for threads in ("1", "4"):
        _run_cli(["path"] + data_args
                 + ["--grid-l1", "6:0.05", "--grid-l2", "0,0.5",
                    "--threads", threads, "--out", f"path{threads}"],
                 tmp_path)
        _run_cli(["cv"] + data_args
                 + ["--grid-l1", "5:0.1", "--grid-l2", "0,0.5",
                    "--folds", "3", "--seed", "4", "--threads", threads,
                    "--out", f"cv{threads}"], tmp_path)
    identical = True
    for name in ("X_train.csv", "Y_train.csv", "X_test.csv", "Y_test.csv",
                 "omega_xy_true.csv"):
        identical &= ((tmp_path / "sim" / name).read_bytes()
                      == (tmp_path / "sim2" / name).read_bytes())
    identical &= ((tmp_path / "path1" / "path.csv").read_bytes()
                  == (tmp_path / "path4" / "path.csv").read_bytes())
    for name in ("cv.csv", "best_pair.json"):
        identical &= ((tmp_path / "cv1" / name).read_bytes()
                      == (tmp_path / "cv4" / name).read_bytes())
    report(11, "cli runs byte-identical across repeats and thread counts",
           identical)
