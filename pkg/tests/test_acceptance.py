"""Acceptance suite: one check per criterion, each reporting PASS or FAIL.

Run under pytest (the summary is printed at the end of the session) or
directly with ``python3 tests/test_acceptance.py``.
"""

import json
import math
import tempfile
import time
from itertools import product
from pathlib import Path

import numpy as np
import pytest

from mortstat.cli import cmd_analyze
from mortstat.cox import CovariateSpec, cox_fit, partial_loglik_and_gradient
from mortstat.media import incorrect_proportion, read_counts_csv
from mortstat.simulation import DeathRecord, SimConfig, bias_experiment, england_indicators
from mortstat.stats import fit_lognormal, ks_one_sample, ks_two_sample
from mortstat.survival import Cohort, Subject, kaplan_meier

DATA = Path(__file__).resolve().parent.parent / "data"

# criterion number -> (verdict, detail); filled in as checks run
RESULTS: dict[int, tuple[str, str]] = {}


def record(n, ok, detail, soft=None):
    verdict = "PASS" if ok else "FAIL"
    if ok and soft:
        detail = f"{detail}; SOFT-MISS {soft}"
    RESULTS[n] = (verdict, detail)
    print(f"{verdict} criterion {n}: {detail}")
    return ok


def _analyze_report():
    with tempfile.TemporaryDirectory() as tmp:
        start = time.perf_counter()
        cmd_analyze([DATA / "uk.csv", DATA / "usa.csv"], tmp)
        elapsed = time.perf_counter() - start
        report = json.loads((Path(tmp) / "report.json").read_text())
    return report, elapsed


def _proportions():
    uk = [incorrect_proportion(p) for p in read_counts_csv(DATA / "uk.csv")]
    usa = [incorrect_proportion(p) for p in read_counts_csv(DATA / "usa.csv")]
    return uk, usa


# ----------------------------------------------------------------------------


def check_tables():
    report, elapsed = _analyze_report()
    uk, usa = report["countries"]["UK"], report["countries"]["USA"]
    pp = 0.01  # one percentage point as a proportion
    ok = (
        abs(uk["macro_average"] - 0.894) <= 0.05 * pp
        and abs(usa["macro_average"] - 0.988) <= 0.05 * pp
        and abs(uk["macro_sample_std"] - 0.090) <= 0.1 * pp
        and abs(usa["macro_sample_std"] - 0.018) <= 0.1 * pp
        and elapsed < 1.0
    )
    return record(
        1, ok,
        f"macro UK {100 * uk['macro_average']:.3f}% USA {100 * usa['macro_average']:.3f}%, "
        f"std UK {100 * uk['macro_sample_std']:.3f}% USA {100 * usa['macro_sample_std']:.3f}%, "
        f"runtime {elapsed:.3f}s",
    )


def check_pooled():
    report, _ = _analyze_report()
    uk, usa = report["countries"]["UK"]["pooled"], report["countries"]["USA"]["pooled"]
    ok = abs(uk - 0.910) <= 0.0005 and abs(usa - 0.993) <= 0.0005
    return record(2, ok, f"pooled UK {100 * uk:.3f}% USA {100 * usa:.3f}%")


def check_pearson():
    report, _ = _analyze_report()
    uk = report["countries"]["UK"]["pearson_total_incorrect"]
    usa = report["countries"]["USA"]["pearson_total_incorrect"]
    ok = round(uk, 3) == 0.998 and round(usa, 3) == 1.000
    log_uk = report["countries"]["UK"]["pearson_log_total_incorrect"]
    return record(
        3, ok,
        f"rho(total, incorrect) UK {uk:.5f} -> {uk:.3f} (target 0.998), USA {usa:.5f} -> {usa:.3f}; "
        f"on log counts UK gives {log_uk:.3f}",
    )


def _ecdf_sup_distance(a, b):
    a, b = np.sort(a), np.sort(b)
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def check_two_sample():
    uk, usa = _proportions()
    res = ks_two_sample(uk, usa)
    oracle = _ecdf_sup_distance(uk, usa)
    ok = abs(res.statistic - oracle) <= 1e-12 and res.p_value < 0.01
    soft_ok = abs(res.p_value - 0.0058) <= 0.005
    return record(
        4, ok,
        f"D={res.statistic:.6f} (oracle {oracle:.6f}), p={res.p_value:.6f} ({res.method}); "
        f"soft target 0.0058+-0.005 {'met' if soft_ok else 'missed'}",
        soft=None if soft_ok else f"p={res.p_value:.4f}",
    )


def check_one_sample():
    from scipy.stats import lognorm

    targets = {"UK": 0.0197, "USA": 0.0078}
    ok = True
    soft_miss = []
    parts = []
    for country, props in zip(targets, _proportions()):
        params = fit_lognormal(props)
        res = ks_one_sample(props, params, params_estimated=True)
        xs = np.sort(props)
        n = len(xs)
        cdf = lognorm.cdf(xs, s=params.sigma, scale=math.exp(params.mu))
        oracle = max(np.max(np.arange(1, n + 1) / n - cdf), np.max(cdf - np.arange(n) / n))
        ok &= abs(res.statistic - oracle) <= 1e-12
        if abs(res.p_value - targets[country]) > 0.01:
            soft_miss.append(f"{country} p={res.p_value:.4f} vs {targets[country]}")
        parts.append(f"{country} D={res.statistic:.6f} (oracle {float(oracle):.6f}) p={res.p_value:.4f}")
    return record(5, ok, "; ".join(parts), soft=", ".join(soft_miss) or None)


def check_km_exhaustive():
    cases = 0
    mismatches = 0
    for n in range(1, 7):
        for times in product(range(n), repeat=n):
            cohort = Cohort(tuple(Subject(str(i), float(t), True) for i, t in enumerate(times)))
            curve = kaplan_meier(cohort)
            for t in range(-1, n + 1):
                if curve.at(t) != sum(1 for x in times if x > t) / n:
                    mismatches += 1
            cases += 1
    return record(6, mismatches == 0, f"{cases} cohorts, {mismatches} mismatches against the empirical survival function")


def _cohort(times, events, x):
    x = np.asarray(x, dtype=float).reshape(len(times), -1)
    return Cohort(tuple(Subject(str(i), float(t), bool(e), tuple(x[i])) for i, (t, e) in enumerate(zip(times, events))))


def _grid_loglik(times, events, x, w):
    # direct loop evaluation of the Breslow partial likelihood for one covariate
    total = 0.0
    for i in range(len(times)):
        if events[i]:
            denom = sum(math.exp(w * x[j]) for j in range(len(times)) if times[j] >= times[i])
            total += w * x[i] - math.log(denom)
    return total


def check_cox():
    start = time.perf_counter()
    # (a) gradient vs central differences on 100 random instances
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(100):
        n, p = int(rng.integers(4, 15)), int(rng.integers(1, 4))
        times = rng.integers(1, 8, size=n).astype(float)
        events = rng.random(n) < 0.7
        events[0] = True
        x = rng.normal(size=(n, p))
        w = rng.normal(scale=0.5, size=p)
        c = _cohort(times, events, x)
        _, grad = partial_loglik_and_gradient(c, w)
        fd = np.zeros(p)
        h = 1e-5
        for k in range(p):
            e = np.zeros(p)
            e[k] = h
            fd[k] = (partial_loglik_and_gradient(c, w + e)[0] - partial_loglik_and_gradient(c, w - e)[0]) / (2 * h)
        scale = max(np.linalg.norm(fd), 1e-12)
        worst = max(worst, float(np.linalg.norm(np.array(grad) - fd) / scale))
    grad_ok = worst <= 1e-6

    # (b) grid-search oracle on 6-subject, one binary covariate, no ties
    grid_err = 0.0
    for times, events, x in [
        ([1, 2, 3, 4, 5, 6], [1, 1, 0, 1, 1, 1], [1, 0, 1, 1, 0, 0]),
        ([3, 1, 6, 2, 5, 4], [1, 1, 1, 0, 1, 1], [0, 1, 1, 0, 0, 1]),
        ([2, 4, 6, 1, 3, 5], [1, 0, 1, 1, 1, 1], [1, 1, 0, 0, 1, 0]),
    ]:
        grid = np.round(np.arange(-100_000, 100_001) * 1e-4, 4)
        coarse = grid[::100]
        best_coarse = coarse[int(np.argmax([_grid_loglik(times, events, x, w) for w in coarse]))]
        fine = grid[np.abs(grid - best_coarse) <= 0.01 + 1e-9]
        best = fine[int(np.argmax([_grid_loglik(times, events, x, w) for w in fine]))]
        fit = cox_fit(_cohort(times, events, x))
        grid_err = max(grid_err, abs(fit.coefficients[0] - best))
    grid_ok = grid_err <= 1e-3

    # (c) recovery of beta=0.7; seeds 0..99 fixed up front, never reseeded
    covered = 0
    for seed in range(100):
        r = np.random.Generator(np.random.MT19937(seed))
        n = 2000
        x = (r.random(n) < 0.5).astype(float)
        t = r.exponential(1.0 / np.exp(0.7 * x))
        event = t <= 2.0
        t = np.minimum(t, 2.0)
        fit = cox_fit(_cohort(t, event, x), CovariateSpec(("x",)))
        covered += abs(fit.coefficients[0] - 0.7) <= 2 * fit.standard_errors[0]
    elapsed = time.perf_counter() - start
    ok = grad_ok and grid_ok and covered >= 95 and elapsed < 60
    return record(
        7, ok,
        f"worst FD relative error {worst:.2e}, grid-oracle error {grid_err:.2e}, "
        f"beta=0.7 within 2 SE in {covered}/100, runtime {elapsed:.1f}s",
    )


def check_bias():
    start = time.perf_counter()
    milder = SimConfig(n_positive=1000, n_negative=1000, hazard_ratio_true=1.5,
                       asymptomatic_fraction=0.4, asymptomatic_hazard_multiplier=0.2, seed=0)
    null = SimConfig(n_positive=1000, n_negative=1000, hazard_ratio_true=1.0,
                     asymptomatic_fraction=0.4, asymptomatic_hazard_multiplier=1.0, seed=0)
    a = bias_experiment(milder, 200)
    b = bias_experiment(null, 200)
    elapsed = time.perf_counter() - start
    ok = a.mean_inflation > 0 and abs(b.mean_inflation) < 2 * b.inflation_se and elapsed < 60
    return record(
        8, ok,
        f"multiplier 0.2: inflation {a.mean_inflation:+.4f} (SE {a.inflation_se:.4f}); "
        f"multiplier 1: inflation {b.mean_inflation:+.4f} (SE {b.inflation_se:.4f}); runtime {elapsed:.1f}s",
    )


def check_indicators():
    fixtures = [
        ("gap 28", [DeathRecord(28.0, 0.0, False)], (1, 1, 1)),
        ("gap 30", [DeathRecord(30.0, 0.0, False)], (1, 0, 1)),
        ("gap 60", [DeathRecord(60.0, 0.0, False)], (1, 0, 1)),
        ("certificate only", [DeathRecord(45.0, None, True)], (0, 0, 1)),
        ("empty", [], (0, 0, 0)),
    ]
    got = {name: england_indicators(recs) for name, recs, _ in fixtures}
    ok = all(got[name] == want for name, _, want in fixtures)
    return record(9, ok, ", ".join(f"{name} -> {got[name]}" for name, _, _ in fixtures))


CHECKS = {
    1: check_tables,
    2: check_pooled,
    3: check_pearson,
    4: check_two_sample,
    5: check_one_sample,
    6: check_km_exhaustive,
    7: check_cox,
    8: check_bias,
    9: check_indicators,
}


@pytest.mark.parametrize("criterion", sorted(CHECKS))
def test_criterion(criterion):
    assert CHECKS[criterion](), RESULTS[criterion][1]


if __name__ == "__main__":
    for fn in CHECKS.values():
        fn()
