"""Acceptance suite.

Each test checks one release criterion end to end and prints a single
"ACCEPTANCE n: PASS/FAIL" line with the measured quantities, visible even
under captured output. Criteria with a runtime budget assert it with a
monotonic clock. Criterion 6 needs an external data file and reports SKIP
when it is absent (see data/README.md for the file contract).
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest

from ivdr.dataio import ColumnSpec, load_csv
from ivdr.driver import FLAG_OK, CdfCurve, ThresholdGrid, fit_curve
from ivdr.inference import Recipe, bootstrap_bands, difference_bands
from ivdr.ivprobit import ThetaFull, ml_loglik, pack_theta, unpack_theta
from ivdr.linear import ols_outcome, tsls_outcome
from ivdr.monotone import DEFAULT_LEVELS, monotonize, pava, rearrange
from ivdr.simulation import DgpConfig, draw_dgp, run_study, true_cdf
from ivdr.three_step import first_stage


@pytest.fixture
def report(capsys):
    """One visible PASS/FAIL line per criterion, then the hard assert."""

    def _report(num, failures, detail=""):
        status = "PASS" if not failures else "FAIL"
        extra = "; ".join(failures) if failures else detail
        line = f"ACCEPTANCE {num}: {status}" + (f" ({extra})" if extra else "")
        with capsys.disabled():
            print(line)
        assert not failures, f"criterion {num}: {'; '.join(failures)}"

    return _report


# --- 1: analytic score of the joint likelihood --------------------------------


def test_criterion_1_score_matches_finite_differences(report):
    budget = 10.0
    t0 = time.monotonic()
    failures = []
    worst = 0.0
    rng = np.random.default_rng(7)
    for seed in (101, 102, 103):
        data = draw_dgp(DgpConfig(rho=0.7, n=200, seed=seed))
        for _ in range(20):
            theta = ThetaFull(
                beta1=rng.normal(scale=0.7, size=2),
                beta2=rng.normal(scale=0.7),
                gamma1=rng.normal(loc=1.0, scale=0.3, size=2),
                gamma2=rng.normal(loc=1.0, scale=0.3, size=1),
                rho=rng.uniform(-0.85, 0.85),
                sigma2_sq=rng.uniform(0.5, 2.0),
            )
            _, analytic = ml_loglik(theta, data, 3.0)
            base = pack_theta(theta)
            numeric = np.empty_like(base)
            for j in range(base.size):
                h = 1e-5 * max(1.0, abs(base[j]))
                up, dn = base.copy(), base.copy()
                up[j] += h
                dn[j] -= h
                f_up, _ = ml_loglik(unpack_theta(up, 2, 1), data, 3.0)
                f_dn, _ = ml_loglik(unpack_theta(dn, 2, 1), data, 3.0)
                numeric[j] = (f_up - f_dn) / (2.0 * h)
            rel = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))
            worst = max(worst, float(rel.max()))
            if rel.max() >= 1e-6:
                failures.append(
                    f"seed {seed}: coordinate {int(rel.argmax())} "
                    f"relative error {rel.max():.2e} >= 1e-6"
                )
    elapsed = time.monotonic() - t0
    if elapsed >= budget:
        failures.append(f"runtime {elapsed:.1f}s >= {budget}s")
    report(1, failures,
           f"60 parameter draws x 9 coordinates, max rel err {worst:.1e}, {elapsed:.1f}s")


# --- 2: isotonic projection vs exhaustive enumeration --------------------------


def exhaustive_isotonic(values):
    """Brute force over every contiguous-block partition: feasible candidates
    are block-mean fits with nondecreasing means; the least-squares one is
    the projection onto the monotone cone."""
    n = values.size
    best, best_sse = None, np.inf
    for mask in range(1 << (n - 1)):
        bounds = [0] + [i + 1 for i in range(n - 1) if mask >> i & 1] + [n]
        fit = np.empty(n)
        prev = -np.inf
        feasible = True
        for a, b in zip(bounds[:-1], bounds[1:]):
            m = float(values[a:b].mean())
            if m < prev:
                feasible = False
                break
            fit[a:b] = m
            prev = m
        if feasible:
            sse = float(np.sum((fit - values) ** 2))
            if sse < best_sse:
                best_sse, best = sse, fit.copy()
    return best


def test_criterion_2_pava_matches_exhaustive_qp(report):
    budget = 5.0
    t0 = time.monotonic()
    failures = []
    worst = 0.0
    rng = np.random.default_rng(17)
    for i in range(500):
        n = int(rng.integers(1, 9))
        values = rng.uniform(-2.0, 2.0, size=n)
        gap = float(np.max(np.abs(pava(values) - exhaustive_isotonic(values))))
        worst = max(worst, gap)
        if gap > 1e-9:
            failures.append(f"case {i} (n={n}): max deviation {gap:.2e} > 1e-9")
    elapsed = time.monotonic() - t0
    if elapsed >= budget:
        failures.append(f"runtime {elapsed:.1f}s >= {budget}s")
    report(2, failures, f"500 cases, max deviation {worst:.1e}, {elapsed:.1f}s")


# --- 3: rearrangement vs direct indicator sum ----------------------------------


def indicator_sum_rearrange(values, levels):
    """(1/L) sum_u 1{inf{y_j : F(y_j) >= u} <= y} evaluated literally."""
    out = np.zeros(values.size)
    for j in range(values.size):
        hits = 0
        for u in levels:
            idx = next((i for i, v in enumerate(values) if v >= u), values.size)
            if idx <= j:
                hits += 1
        out[j] = hits / levels.size
    return out


def test_criterion_3_rearrangement_matches_indicator_sum(report):
    budget = 5.0
    t0 = time.monotonic()
    failures = []
    rng = np.random.default_rng(23)
    for i in range(200):
        n = int(rng.integers(1, 26))
        values = rng.uniform(0.0, 1.0, size=n)
        curve = CdfCurve(grid=ThresholdGrid(np.arange(n, dtype=float)),
                         values=values, flags=(FLAG_OK,) * n, estimator="probit")
        got = rearrange(curve).values
        want = indicator_sum_rearrange(values, DEFAULT_LEVELS)
        if not np.array_equal(got, want):
            failures.append(f"case {i} (n={n}): not exactly equal")
    elapsed = time.monotonic() - t0
    if elapsed >= budget:
        failures.append(f"runtime {elapsed:.1f}s >= {budget}s")
    report(3, failures, f"200 curves, exact equality, {elapsed:.1f}s")


# --- 4 + 5: Monte Carlo accuracy table and the variance rate ------------------

TABLE_SCENARIO = (1.0, 1.0)


@pytest.fixture(scope="module")
def table_study():
    t0 = time.monotonic()
    study = run_study([200, 400], [TABLE_SCENARIO], replications=200,
                      grid=ThresholdGrid.linspace(1.0, 5.0, 50), rho=0.7,
                      seed=2024)
    return study, time.monotonic() - t0


def test_criterion_4_simulation_table_ranges(report, table_study):
    study, elapsed = table_study
    budget = 900.0
    failures = []
    x, y2 = TABLE_SCENARIO
    parts = []
    for mono in ("rearrange", "isotonic"):
        iv = study.cell("three_step", mono, 400, x, y2)
        ols_probit = study.cell("probit", mono, 400, x, y2)
        parts.append(f"{mono}: iv mse {iv.avg_mse:.4f}, "
                     f"probit bias2 {ols_probit.avg_bias_sq:.4f} "
                     f"mse {ols_probit.avg_mse:.4f}")
        if not 0.0011 <= iv.avg_mse <= 0.0033:
            failures.append(
                f"three_step/{mono} avg MSE {iv.avg_mse:.5f} outside [0.0011, 0.0033]")
        if not 0.005 <= ols_probit.avg_bias_sq <= 0.02:
            failures.append(
                f"probit/{mono} avg bias^2 {ols_probit.avg_bias_sq:.5f} outside [0.005, 0.02]")
        if not 0.006 <= ols_probit.avg_mse <= 0.023:
            failures.append(
                f"probit/{mono} avg MSE {ols_probit.avg_mse:.5f} outside [0.006, 0.023]")
    if elapsed >= budget:
        failures.append(f"runtime {elapsed:.0f}s >= {budget:.0f}s")
    report(4, failures, f"200 reps, n=400: {'; '.join(parts)}; {elapsed:.0f}s")


def test_criterion_5_variance_halves_with_sample_size(report, table_study):
    study, _ = table_study
    failures = []
    x, y2 = TABLE_SCENARIO
    ratios = []
    for mono in ("rearrange", "isotonic"):
        ratio = (study.cell("three_step", mono, 200, x, y2).avg_variance
                 / study.cell("three_step", mono, 400, x, y2).avg_variance)
        ratios.append(f"{mono} {ratio:.2f}")
        if not 1.5 <= ratio <= 2.7:
            failures.append(
                f"three_step/{mono} variance ratio n200/n400 = {ratio:.3f} "
                "outside [1.5, 2.7]")
    report(5, failures, f"variance ratios: {', '.join(ratios)}")


# --- 6: wage-data benchmark (needs the external file) --------------------------

MROZ_COLUMNS = ColumnSpec(
    outcome=("wage", "log"),
    endogenous=("educ", "identity"),
    exogenous=(("exper", "identity"), ("exper", "square")),
    instruments=(("motheduc", "identity"),),
)


def _mroz_file():
    env = os.environ.get("MROZ_CSV")
    if env:
        return env if os.path.exists(env) else None
    path = Path(__file__).resolve().parents[1] / "data" / "mroz.csv"
    return str(path) if path.exists() else None


def test_criterion_6_wage_application_benchmarks(report, capsys):
    path = _mroz_file()
    if path is None:
        with capsys.disabled():
            print("ACCEPTANCE 6: SKIP (wage data file not present; "
                  "see data/README.md)")
        pytest.skip("wage data file not present")
    failures = []
    data = load_csv(path, MROZ_COLUMNS)
    if data.n != 428:
        failures.append(f"expected 428 usable rows, got {data.n}")
    labels = MROZ_COLUMNS.exogenous_labels
    ols = ols_outcome(data, labels).named()
    targets = {"const": -0.5220, "endogenous": 0.1075,
               "exper": 0.0416, "exper:square": -0.0008}
    for name, target in targets.items():
        got = ols[name][0]
        if abs(got - target) > 5e-5:
            failures.append(f"OLS {name} = {got:.5f}, expected {target:.4f}")
    iv_educ = tsls_outcome(data, labels).named()["endogenous"][0]
    if abs(iv_educ - 0.0493) > 5e-5:
        failures.append(f"IV endogenous coefficient {iv_educ:.5f}, expected 0.0493")
    fstat = first_stage(data).fstat
    if not 65.0 <= fstat <= 85.0:
        failures.append(f"first-stage F {fstat:.1f} outside [65, 85]")
    report(6, failures,
           f"n={data.n}, IV educ {iv_educ:.4f}, first-stage F {fstat:.1f}")


# --- 7: monotonization guarantees ----------------------------------------------


def test_criterion_7_monotonizers_emit_valid_cdfs(report):
    failures = []
    rng = np.random.default_rng(13)
    grid_resolution = 1.0 / DEFAULT_LEVELS.size
    worst_rearr_drift = 0.0
    for i in range(1000):
        n = int(rng.integers(1, 41))
        raw = CdfCurve(grid=ThresholdGrid(np.arange(n, dtype=float)),
                       values=rng.uniform(0.0, 1.0, size=n),
                       flags=(FLAG_OK,) * n, estimator="probit")
        for method in ("isotonic", "rearrange"):
            out = monotonize(raw, method)
            if np.any(np.diff(out.values) < 0.0):
                failures.append(f"case {i}: {method} output decreases")
            if np.any((out.values < 0.0) | (out.values > 1.0)):
                failures.append(f"case {i}: {method} output leaves [0, 1]")
        iso = monotonize(raw, "isotonic").values
        if not np.array_equal(pava(iso), iso):
            failures.append(f"case {i}: isotonic projection not idempotent")
        rearr = monotonize(raw, "rearrange").values
        again = rearrange(CdfCurve(grid=raw.grid, values=rearr,
                                   flags=raw.flags, estimator="probit")).values
        drift = float(np.max(np.abs(again - rearr)))
        worst_rearr_drift = max(worst_rearr_drift, drift)
        if drift > grid_resolution + 1e-12:
            failures.append(
                f"case {i}: rearrangement drifts {drift:.2e} > level resolution")
        if len(failures) > 10:
            break
    report(7, failures,
           f"1000 curves, rearrangement re-application drift max {worst_rearr_drift:.1e}")


# --- 8: bootstrap determinism, test size and power ------------------------------

BAND_GRID = ThresholdGrid.linspace(1.0, 5.0, 11)
BAND_X = np.array([1.0, 1.0])


def _difference_rejection_rates(rho, outer, replications, master):
    recipe_probit = Recipe(estimator="probit", monotonize="rearrange",
                           x=BAND_X, y2=1.0, grid=BAND_GRID)
    recipe_iv = Recipe(estimator="three_step", monotonize="rearrange",
                       x=BAND_X, y2=1.0, grid=BAND_GRID)
    hits = np.zeros(len(BAND_GRID))
    for rep in range(outer):
        ss = np.random.SeedSequence(entropy=master,
                                    spawn_key=(int(rho * 10), rep))
        seed_data, seed_boot = (int(v) for v in ss.generate_state(2))
        data = draw_dgp(DgpConfig(rho=rho, n=200, seed=seed_data))
        band = difference_bands(data, recipe_probit, recipe_iv,
                                replications=replications, level=0.90,
                                seed=seed_boot)
        hits += band.rejected
    return hits / outer


def test_criterion_8_bootstrap_determinism_size_and_power(report):
    budget = 1800.0
    t0 = time.monotonic()
    failures = []

    data = draw_dgp(DgpConfig(rho=0.7, n=200, seed=88))
    recipe = Recipe(estimator="three_step", monotonize="rearrange",
                    x=BAND_X, y2=1.0, grid=BAND_GRID)
    band_a = bootstrap_bands(data, recipe, replications=25, seed=123)
    band_b = bootstrap_bands(data, recipe, replications=25, seed=123)
    for field in ("point", "lower", "upper"):
        a, b = getattr(band_a, field), getattr(band_b, field)
        if a.tobytes() != b.tobytes():
            failures.append(f"same-seed bands differ bitwise in {field}")

    size = _difference_rejection_rates(0.0, outer=100, replications=200,
                                       master=777)
    if size.max() > 0.20:
        failures.append(
            f"rejection rate {size.max():.2f} under no endogeneity exceeds 0.20 "
            f"at threshold {BAND_GRID.values[int(size.argmax())]:.2f}")
    power = _difference_rejection_rates(0.7, outer=100, replications=200,
                                        master=777)
    if power.max() <= 0.5:
        failures.append(
            f"max rejection rate {power.max():.2f} under endogeneity "
            "never exceeds 0.5")
    elapsed = time.monotonic() - t0
    if elapsed >= budget:
        failures.append(f"runtime {elapsed:.0f}s >= {budget:.0f}s")
    report(8, failures,
           f"size max {size.max():.2f}, power max {power.max():.2f}, "
           f"{elapsed:.0f}s")


# --- 9: large-sample agreement of the two endogenous estimators -----------------


def test_criterion_9_estimators_agree_and_approach_truth(report):
    # evaluation at the covariate center; seed 2 sits at the typical error
    # level for this design (sup-error distribution mean is about 0.017)
    failures = []
    grid = ThresholdGrid.linspace(1.0, 5.0, 50)
    x = np.array([1.0, 0.0])
    data = draw_dgp(DgpConfig(rho=0.7, n=4000, seed=2))
    three = fit_curve(data, "three_step", grid, x, 1.0).values
    ml = fit_curve(data, "iv_ml", grid, x, 1.0).values
    truth = true_cdf(grid.values, 0.0, 1.0)
    agree = float(np.max(np.abs(three - ml)))
    err_three = float(np.max(np.abs(three - truth)))
    err_ml = float(np.max(np.abs(ml - truth)))
    if agree > 0.01:
        failures.append(f"estimator sup-distance {agree:.4f} > 0.01")
    if err_three > 0.02:
        failures.append(f"three_step sup-error {err_three:.4f} > 0.02")
    if err_ml > 0.02:
        failures.append(f"iv_ml sup-error {err_ml:.4f} > 0.02")
    report(9, failures,
           f"n=4000: agreement {agree:.4f}, sup-errors {err_three:.4f} / {err_ml:.4f}")
