"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
complete.  The full-scale reproduction (criterion 9) runs last and writes
its CSV to ``artifacts/figure_sweep_d1000.csv`` for the plotting component.

Known red: criterion 5 requires the d=100 excess-risk median at n=d to
exceed the n=d/2 median by a factor of 10, but the peak median at this
dimension is about 2.1 (roughly 2.1 * sigma^2 * d) against 0.51 at n=50, a
ratio near 4 for every seed; the factor-10 requirement only becomes true
around d >= 250.  The test states the requirement faithfully and fails.
The d=1000 run (criterion 9) passes the same shape check with ratio ~38.
"""

import csv
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from ddlab.estimator import GdConfig, gd_fit, min_norm_fit
from ddlab.harness import (
    SweepConfig,
    default_n_grid,
    explicit_gram_trace,
    run_conditioning_demo,
    run_sweep,
    run_trace_growth,
)
from ddlab.linalg import svd, trace_increment_factors
from ddlab.randgen import ModelSpec, RngState, mix_seed, sample_gaussian_matrix
from ddlab.risk import monte_carlo_risk, theory_overparam, theory_underparam

BASE_SEED = 1
ARTIFACTS = Path(__file__).resolve().parent.parent / "artifacts"


def report(criterion: int, passed: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion:>2} {'PASS' if passed else 'FAIL'}: {detail}")


def rel_err(got: float, want: float) -> float:
    return abs(got - want) / abs(want)


@pytest.fixture(scope="module")
def critical_peak_run():
    """Shared run for criteria 5 and 6: d=100, sigma=0.1, 500 trials."""
    spec = ModelSpec(d=100, sigma=0.1)
    return {
        n: monte_carlo_risk(spec, n, trials=500, base_seed=BASE_SEED, threads=2)
        for n in (50, 100, 150)
    }


def test_criterion_01_trace_update_identity():
    """Exact one-sample trace update over 1000 random instances in < 10 s."""
    start = time.perf_counter()
    worst = 0.0
    for i in range(1000):
        rng = RngState(mix_seed(BASE_SEED, 0xACC1, i))
        u = rng.uniforms(2)
        d = 3 + int(u[0] * 38)          # d in 3..40
        n = 2 + int(u[1] * (d - 2))     # n in 2..d-1
        X = sample_gaussian_matrix(rng, n, d)
        x = rng.normals(d)
        formula = trace_increment_factors(svd(X), x)
        measured = explicit_gram_trace(np.vstack([X, x])) - explicit_gram_trace(X)
        worst = max(worst, abs(measured - formula) / abs(formula))
    elapsed = time.perf_counter() - start
    passed = worst <= 1e-8 and elapsed < 10.0
    report(1, passed, f"worst rel err {worst:.3e} (<=1e-8), {elapsed:.1f}s (<10s)")
    assert worst <= 1e-8
    assert elapsed < 10.0


def test_criterion_02_overparameterized_theory():
    """d=200, 1000 trials: excess/bias within 5%, var_A within 10% of theory."""
    spec = ModelSpec(d=200, sigma=0.1, beta_norm=1.0)
    failures = []
    details = []
    for gamma in (0.1, 0.25, 0.5, 0.75, 0.9):
        n = round(gamma * 200)
        s = monte_carlo_risk(spec, n, trials=1000, base_seed=BASE_SEED, threads=2)
        point = theory_overparam(gamma, 1.0, 0.1)
        checks = [
            ("excess", rel_err(s.excess_mean, point.excess), 0.05),
            ("bias", rel_err(s.bias_sq, point.bias_sq), 0.05),
            ("var_A", rel_err(s.var_A, gamma * (1 - gamma)), 0.10),
        ]
        for name, err, tol in checks:
            details.append(f"g={gamma} {name} {err:.2%}")
            if err > tol:
                failures.append(f"g={gamma} {name} off by {err:.2%} (tol {tol:.0%})")
    report(2, not failures, "; ".join(failures) if failures else "all gammas within bands")
    assert not failures, failures


def test_criterion_03_underparameterized_theory():
    """d=100, n in {150, 200, 400}, 1000 trials: excess within 10% of theory."""
    spec = ModelSpec(d=100, sigma=0.1)
    start = time.perf_counter()
    failures = []
    for n in (150, 200, 400):
        s = monte_carlo_risk(spec, n, trials=1000, base_seed=BASE_SEED, threads=2)
        want = theory_underparam(n / 100, 0.1).excess
        err = rel_err(s.excess_mean, want)
        if err > 0.10:
            failures.append(f"n={n} off by {err:.2%}")
    elapsed = time.perf_counter() - start
    passed = not failures and elapsed < 60.0
    report(3, passed, f"{elapsed:.1f}s (<60s); " + ("; ".join(failures) or "within 10%"))
    assert not failures, failures
    assert elapsed < 60.0


def test_criterion_04_trace_convergence():
    """d=200, n=100, 200 trials: mean trace within 5% of 1.0 and of 100/101."""
    rows = run_trace_growth(d=200, n_max=100, trials=200, base_seed=BASE_SEED, threads=2)
    at_hundred = rows[-1]
    assert at_hundred.n == 100
    err_limit = rel_err(at_hundred.trace_mean, 1.0)
    err_recursion = rel_err(at_hundred.trace_mean, 100 / 101)
    passed = err_limit <= 0.05 and err_recursion <= 0.05
    report(
        4,
        passed,
        f"mean trace {at_hundred.trace_mean:.5f}: vs limit {err_limit:.2%}, "
        f"vs recursion {err_recursion:.2%} (both <=5%)",
    )
    assert err_limit <= 0.05
    assert err_recursion <= 0.05


def test_criterion_05_peak_at_criticality(critical_peak_run):
    """d=100, 500 trials: median at n=100 must be 10x both neighbors.

    Known red (see module docstring): the n=50 side peaks near ratio 4.
    """
    med = {n: critical_peak_run[n].excess_median for n in (50, 100, 150)}
    ratio_low = med[100] / med[50]
    ratio_high = med[100] / med[150]
    passed = ratio_low >= 10.0 and ratio_high >= 10.0
    report(
        5,
        passed,
        f"medians {med[50]:.3f}/{med[100]:.3f}/{med[150]:.4f}; "
        f"ratios {ratio_low:.1f}x and {ratio_high:.1f}x (need >=10x)",
    )
    assert ratio_low >= 10.0, f"peak-to-left ratio {ratio_low:.2f} < 10"
    assert ratio_high >= 10.0, f"peak-to-right ratio {ratio_high:.2f} < 10"


def test_criterion_06_more_data_hurts(critical_peak_run):
    """In the same run, the n=100 median exceeds the n=50 median."""
    med50 = critical_peak_run[50].excess_median
    med100 = critical_peak_run[100].excess_median
    passed = med100 > med50
    report(6, passed, f"median rises {med50:.3f} -> {med100:.3f} as n doubles")
    assert med100 > med50


def test_criterion_07_gd_equivalence():
    """100 instances, gamma <= 0.9 or >= 1.1, tol 1e-12: gap <= 1e-6, confined."""
    worst_gap = 0.0
    worst_leak_ratio = 0.0
    for i in range(100):
        rng = RngState(mix_seed(BASE_SEED, 0xACC7, i))
        u = rng.uniforms(3)
        d = 20 + int(u[0] * 41)  # 20..60
        if u[1] < 0.5:
            gamma = 0.2 + u[2] * 0.7   # 0.2..0.9
        else:
            gamma = 1.1 + u[2] * 0.9   # 1.1..2.0
        n = max(2, round(gamma * d))
        X = sample_gaussian_matrix(rng, n, d)
        beta = rng.normals(d)
        y = X @ beta + 0.1 * rng.normals(n)

        f = svd(X)
        keep = f.s > f.cutoff
        Vk = f.V[:, keep]
        leaks = []

        def confinement(step, b, Vk=Vk, leaks=leaks):
            residual = b - Vk @ (Vk.T @ b)
            leaks.append((np.linalg.norm(residual), np.linalg.norm(b)))

        direct = min_norm_fit(X, y)
        iterative = gd_fit(
            X, y, GdConfig(max_steps=5_000_000, tolerance=1e-12),
            on_iterate=confinement, callback_every=100,
        )
        gap = np.linalg.norm(iterative.beta_hat - direct.beta_hat) / np.linalg.norm(
            direct.beta_hat
        )
        worst_gap = max(worst_gap, gap)
        for leak, scale in leaks:
            if scale > 0:
                worst_leak_ratio = max(worst_leak_ratio, leak / scale)
    passed = worst_gap <= 1e-6 and worst_leak_ratio <= 1e-8
    report(
        7,
        passed,
        f"worst rel gap {worst_gap:.3e} (<=1e-6); "
        f"worst iterate leak {worst_leak_ratio:.3e} (<=1e-8)",
    )
    assert worst_gap <= 1e-6
    assert worst_leak_ratio <= 1e-8


def test_criterion_08_conditioning_demo():
    """d in {10, 100, 1000}: exact pre-spectrum; witness bound holds exactly."""
    failures = []
    for d in (10, 100, 1000):
        rep = run_conditioning_demo(d, seed=BASE_SEED)
        if not rep.pre_all_equal_d:
            failures.append(f"d={d}: pre-matrix spectrum not exactly d")
        if not rep.sigma_min_after <= rep.bound:
            failures.append(f"d={d}: sigma_min {rep.sigma_min_after!r} > bound {rep.bound!r}")
    report(8, not failures, "; ".join(failures) or "exact spectrum and bound at all d")
    assert not failures, failures


def test_criterion_10_determinism_across_threads(tmp_path):
    """Rerunning acceptance commands with different thread counts is byte-stable."""

    def numeric_columns(path):
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
        header, body = rows[0], rows[1:]
        drop = header.index("wall_time_ms") if "wall_time_ms" in header else None
        return [
            [cell for i, cell in enumerate(row) if i != drop]
            for row in body
        ]

    sweeps = []
    for threads in (1, 2, 4):
        out = str(tmp_path / f"sweep_t{threads}.csv")
        run_sweep(
            SweepConfig(
                d=100, n_grid=(50, 100, 150), trials=500, base_seed=BASE_SEED,
                output_path=out, sigma=0.1, threads=threads,
            )
        )
        sweeps.append(numeric_columns(out))
    growths = []
    for threads in (1, 3):
        out = str(tmp_path / f"growth_t{threads}.csv")
        run_trace_growth(
            d=60, n_max=30, trials=50, base_seed=BASE_SEED,
            output_path=out, threads=threads,
        )
        growths.append(numeric_columns(out))

    sweep_stable = sweeps[0] == sweeps[1] == sweeps[2]
    growth_stable = growths[0] == growths[1]
    passed = sweep_stable and growth_stable
    report(
        10,
        passed,
        f"sweep columns stable across threads: {sweep_stable}; "
        f"trace-growth stable: {growth_stable}",
    )
    assert sweep_stable
    assert growth_stable


def test_criterion_09_full_figure_reproduction():
    """d=1000, 50 trials, default grid: within the hour, right shape, on theory."""
    ARTIFACTS.mkdir(exist_ok=True)
    out = str(ARTIFACTS / "figure_sweep_d1000.csv")
    cfg = SweepConfig(
        d=1000,
        n_grid=tuple(default_n_grid(1000)),
        trials=50,
        base_seed=BASE_SEED,
        output_path=out,
        sigma=0.1,
        beta_norm=1.0,
        threads="auto",
    )
    start = time.perf_counter()
    rows = run_sweep(cfg)
    elapsed = time.perf_counter() - start

    failures = []
    if elapsed >= 3600.0:
        failures.append(f"took {elapsed:.0f}s (>= 3600s)")
    errored = [row.n for row in rows if row.error]
    if errored:
        failures.append(f"rows with errors: {errored}")

    med = {row.n: row.summary.excess_median for row in rows if row.summary}
    ratio_low = med[1000] / med[500]
    ratio_high = med[1000] / med[1500]
    if ratio_low < 10.0 or ratio_high < 10.0:
        failures.append(f"peak ratios {ratio_low:.1f}x/{ratio_high:.1f}x below 10x")
    if not med[1000] > med[500]:
        failures.append("median did not rise from n=d/2 to n=d")

    off_theory = []
    for row in rows:
        if row.summary is None or row.theory is None:
            continue
        gamma = row.gamma
        if 0.9 <= gamma <= 1.1:
            continue  # the divergence neighborhood is excluded
        err = rel_err(row.summary.excess_mean, row.theory.excess)
        if err > 0.05:
            off_theory.append(f"n={row.n} excess off {err:.2%}")
    if off_theory:
        failures.append("theory mismatches: " + "; ".join(off_theory))

    passed = not failures
    report(
        9,
        passed,
        f"{elapsed:.0f}s on {os.cpu_count()} cores; peak ratios "
        f"{ratio_low:.1f}x/{ratio_high:.1f}x; "
        + ("; ".join(failures) if failures else "excess curve on theory away from the peak"),
    )
    assert not failures, failures
