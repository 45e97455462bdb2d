"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with the measured quantity next to its gate.

Dataset protocol for the benchmark-table reproductions: features are
min-max scaled to [0, 1] per column before ingestion (scaling is left to
the user pipeline by design, and unscaled Wine distances are dominated by
a single feature). The Seeds dataset has no offline copy in this
environment; its leg runs whenever tests/data/seeds.csv exists and skips
otherwise.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest

import mssa
from mssa import Kernel
from mssa.calibration import _replicate_labels, default_calibration_point
from mssa.cli import main as cli_main
from mssa.kernels import kernel_evaluate
from mssa.neighbors import NeighborIndex
from mssa.synthetic import bayes_label_batch, class_posteriors, log_posterior_scores

SEEDS_CSV = Path(__file__).parent / "data" / "seeds.csv"


def record(criterion: str, passed: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} ({detail})")
    assert passed, f"criterion {criterion}: {detail}"


def minmax(x: np.ndarray) -> np.ndarray:
    return (x - x.min(axis=0)) / (x.max(axis=0) - x.min(axis=0))


def pipeline_loo_error(features: np.ndarray, labels: np.ndarray, tmp_path: Path,
                       tag: str, threads: int = 1) -> float:
    """Run the full CLI pipeline (calibrate, pick c, leave-one-out) on a
    scaled copy of a dataset and return the reported error rate."""
    ds = mssa.LabeledDataset(minmax(features), labels, int(labels.max()) + 1)
    csv_path = tmp_path / f"{tag}.csv"
    mssa.emit_csv(ds, csv_path, mssa.DatasetSchema(label_column="label"))
    out = tmp_path / f"{tag}.json"
    code = cli_main([
        "evaluate", "--data", str(csv_path), "--seed", "0", "--delta", "0.1",
        "--kernel", "rect", "--threads", str(threads), "--out", str(out),
    ])
    assert code == 0
    return json.loads(out.read_text())["report"]["error_rate"]


class TestCriterion1BenchmarkTables:
    """Desk-scale reproduction of the reference benchmark errors."""

    def test_iris(self, tmp_path):
        from sklearn.datasets import load_iris
        raw = load_iris()
        err = pipeline_loo_error(raw.data, raw.target, tmp_path, "iris")
        record("1-iris", err <= 0.05, f"LOO error {err:.4f} <= 0.05")

    def test_wine(self, tmp_path):
        from sklearn.datasets import load_wine
        raw = load_wine()
        err = pipeline_loo_error(raw.data, raw.target, tmp_path, "wine")
        record("1-wine", err <= 0.06, f"LOO error {err:.4f} <= 0.06")

    def test_seeds(self, tmp_path):
        if not SEEDS_CSV.exists():
            pytest.skip(
                "no offline copy of the UCI wheat-kernels (Seeds) dataset; "
                f"place it at {SEEDS_CSV} as CSV with a 'label' column "
                "(210 rows, 7 numeric features) to enable this leg"
            )
        ds = mssa.ingest_csv(SEEDS_CSV, mssa.DatasetSchema(label_column="label"))
        err = pipeline_loo_error(ds.features, ds.labels, tmp_path, "seeds")
        record("1-seeds", err <= 0.10, f"LOO error {err:.4f} <= 0.10")


def test_criterion_2_beats_best_fixed_scale():
    """On each synthetic experiment the aggregated classifier must come
    within 2 points of the best fixed neighbor count (5 seeds each)."""
    worst = -1.0
    for exp_id in (1, 2, 3):
        exp = mssa.builtin_experiment(exp_id)
        for seed in range(100, 105):
            data = mssa.sample_mixture(exp.model, 500, seed=seed)
            config = mssa.CalibrationConfig(delta=0.1, n_mc=1000, seed=seed)
            _, sel = mssa.calibrate(data, exp.grid, exp.kernel, config)
            sweep = mssa.knn_sweep(data, exp.grid, exp.kernel)
            gap = sel.loo_report.error_rate - min(r.error_rate for r in sweep)
            worst = max(worst, gap)
    record("2", worst <= 0.02, f"worst MSSA-minus-best-k gap {worst * 100:+.2f}pp <= 2pp")


def test_criterion_3_excess_risk_shrinks_with_n():
    """Average excess risk over the Monte-Carlo optimal baseline must
    strictly decrease from n=250 to n=1000 (10 seeds, one shared 1e5-draw
    test set scoring both the baseline and every classifier)."""
    exp = mssa.builtin_experiment(1)
    test = mssa.sample_mixture(exp.model, 100_000, seed=424242)
    baseline = float(np.mean(bayes_label_batch(exp.model, test.features) != test.labels))

    mean_excess = {}
    for n in (250, 1000):
        excesses = []
        for seed in range(1000, 1010):
            train = mssa.sample_mixture(exp.model, n, seed=seed)
            config = mssa.CalibrationConfig(delta=0.1, n_mc=1000, seed=seed)
            _, sel = mssa.calibrate(train, exp.grid, exp.kernel, config)
            pred, _ = mssa.predict_batch(test.features, train, exp.grid, exp.kernel, sel.z)
            excesses.append(float(np.mean(pred != test.labels)) - baseline)
        mean_excess[n] = float(np.mean(excesses))
    record(
        "3",
        mean_excess[1000] < mean_excess[250],
        f"mean excess risk {mean_excess[250]:.5f} (n=250) -> "
        f"{mean_excess[1000]:.5f} (n=1000), strictly decreasing",
    )


def test_criterion_4_propagation_property():
    """With thresholds calibrated at delta=0.1, fresh pure-noise replicates
    may reject at some stage in at most 0.1 + 3 sqrt(0.1*0.9/2000) of runs."""
    delta = 0.1
    exp = mssa.builtin_experiment(1)
    data = mssa.sample_mixture(exp.model, 500, seed=7)
    point = default_calibration_point(data.features)
    z = mssa.propagation_calibrate(
        data.features, point, exp.grid, exp.kernel,
        mssa.CalibrationConfig(delta=delta, n_mc=1000, seed=7),
    )

    nb = NeighborIndex(data.features).query(point, exp.grid.counts[-1])
    weights, masses = [], []
    for n_k in exp.grid.counts:
        dist = nb.distances[:n_k]
        h = dist[n_k - 1]
        w = np.ones(n_k) if h == 0 else kernel_evaluate(exp.kernel, dist / h)
        weights.append(w)
        masses.append(float(w.sum()))

    n_fresh = 2000
    rejects = 0
    for r in range(n_fresh):
        y = _replicate_labels(888, r, data.n)[nb.indices]
        thetas = [
            mssa.truncate_phi(float((weights[k] * y[: exp.grid.counts[k]]).sum() / masses[k]), 2)
            for k in range(exp.grid.k_scales)
        ]
        current, rejected = thetas[0], False
        for k in range(1, exp.grid.k_scales):
            if masses[k] * mssa.bernoulli_kl(thetas[k], current) <= z.z[k]:
                current = thetas[k]
            else:
                rejected = True
        rejects += rejected
    freq = rejects / n_fresh
    cap = delta + 3 * math.sqrt(delta * (1 - delta) / n_fresh)
    record("4", freq <= cap, f"fresh-noise rejection frequency {freq:.4f} <= {cap:.4f}")


def test_criterion_5_divergence_sandwich():
    """(3/M) (a-b)^2 <= KL(a,b) <= M^2 (a-b)^2: 1e4 random triples, zero
    violations."""
    rng = np.random.default_rng(42)
    violations = 0
    for _ in range(10_000):
        m = int(rng.integers(2, 11))
        lo = 1 / (2 * m)
        a, b = rng.uniform(lo, 1 - lo, 2)
        kl = mssa.bernoulli_kl(a, b)
        gap2 = (a - b) ** 2
        violations += not (3 / m * gap2 - 1e-12 <= kl <= m**2 * gap2 + 1e-12)
    record("5", violations == 0, f"{violations} sandwich violations in 10000 triples")


def test_criterion_6_truncation_gap():
    """eta_top - eta_m <= 2 (phi(eta_top) - phi(eta_m)): 1e4 random
    probability vectors, zero violations."""
    rng = np.random.default_rng(42)
    violations = 0
    for _ in range(10_000):
        m = int(rng.integers(2, 11))
        eta = rng.dirichlet(np.full(m, rng.uniform(0.2, 3.0)))
        theta = mssa.truncate_phi(eta, m)
        top = int(np.argmax(eta))
        for cls in range(m):
            if cls != top and eta[top] - eta[cls] > 2 * (theta[top] - theta[cls]) + 1e-12:
                violations += 1
    record("6", violations == 0, f"{violations} gap violations in 10000 vectors")


class TestCriterion7OracleEquivalences:
    def test_a_single_scale_equals_weighted_knn(self):
        """Aggregation with K=1 equals a from-scratch weighted k-NN plug-in
        on 1000 random instances."""
        rng = np.random.default_rng(2024)
        mismatches = 0
        for _ in range(1000):
            n, d, m = int(rng.integers(4, 40)), int(rng.integers(1, 4)), int(rng.integers(2, 5))
            kernel = list(Kernel)[int(rng.integers(0, 3))]
            feats = rng.standard_normal((n, d))
            labels = rng.integers(0, m, n)
            ds = mssa.LabeledDataset(feats, labels, m)
            k = int(rng.integers(1, n + 1))
            x = rng.standard_normal(d)
            got, _ = mssa.predict_batch(
                x, ds, mssa.ScaleGrid.from_counts([k]), kernel,
                mssa.CriticalValues(np.array([0.0])),
            )
            d2 = np.sum((feats - x) ** 2, axis=1)
            order = sorted(range(n), key=lambda i: (d2[i], i))[:k]
            dist = np.sqrt(d2[order])
            h = dist[-1]
            t = dist / h if h > 0 else np.zeros(k)
            if kernel is Kernel.RECTANGULAR:
                w = np.ones(k)
            elif kernel is Kernel.EPANECHNIKOV_LIKE:
                w = 1 - t**2 / 2
            else:
                w = np.exp(-(t**2) / 2)
            frac = np.array([w[labels[order] == cls].sum() for cls in range(m)])
            mismatches += int(got[0]) != int(np.argmax(frac))
        record("7a", mismatches == 0, f"{mismatches} label mismatches in 1000 instances")

    def test_b_neighbor_queries_equal_brute_force(self):
        """Index queries equal a (distance, index) sort on 1000 random
        instances with n <= 200, d <= 5."""
        rng = np.random.default_rng(2025)
        mismatches = 0
        for _ in range(1000):
            n, d = int(rng.integers(1, 201)), int(rng.integers(1, 6))
            feats = rng.standard_normal((n, d))
            x = rng.standard_normal(d)
            k = int(rng.integers(1, n + 1))
            got = mssa.NeighborIndex(feats).query(x, k)
            d2 = np.sum((feats - x) ** 2, axis=1)
            want = sorted(range(n), key=lambda i: (d2[i], i))[:k]
            if got.indices.tolist() != want or not np.array_equal(
                got.distances, np.sqrt(d2[want])
            ):
                mismatches += 1
        record("7b", mismatches == 0, f"{mismatches} query mismatches in 1000 instances")

    def test_c_loo_equals_brute_force_knn(self):
        """Singleton-grid leave-one-out equals a from-scratch LOO k-NN on
        100 random instances with n <= 60."""
        rng = np.random.default_rng(2026)
        mismatches = 0
        for _ in range(100):
            n, m = int(rng.integers(5, 61)), int(rng.integers(2, 4))
            k = int(rng.integers(1, n))
            feats = rng.standard_normal((n, 2))
            labels = rng.integers(0, m, n)
            ds = mssa.LabeledDataset(feats, labels, m)
            report = mssa.loo_error(
                ds, mssa.ScaleGrid.from_counts([k]), Kernel.RECTANGULAR,
                mssa.CriticalValues(np.array([0.0])),
            )
            mistakes = 0
            for i in range(n):
                d2 = np.sum((feats - feats[i]) ** 2, axis=1)
                order = sorted((j for j in range(n) if j != i), key=lambda j: (d2[j], j))[:k]
                frac = np.bincount(labels[order], minlength=m)
                mistakes += int(np.argmax(frac)) != labels[i]
            mismatches += report.error_rate != pytest.approx(mistakes / n)
        record("7c", mismatches == 0, f"{mismatches} LOO mismatches in 100 instances")


def test_criterion_8_pointwise_bound_coverage():
    """Empirical coverage of the pointwise error bound at a known-density
    point: at most 14.5% of 200 seeded retrainings may exceed it.

    Every constant is derived by an independent oracle at test time: the
    density and conditional class probability analytically, the smoothness
    constant by finite differences on a dense grid, and the minimal-mass
    constant by polar quadrature of the mixture over balls up to r0 = 1.
    Retrainings use n = 2000 so the bound sits below the trivial deviation
    ceiling (at n = 500 it does not, and the check would be vacuous).
    """
    from scipy.special import logsumexp

    exp = mssa.builtin_experiment(1)
    model = exp.model
    x0 = np.array([0.0, -1.0])  # a class center, far from decision boundaries

    def density(pts):
        return np.exp(logsumexp(log_posterior_scores(model, pts), axis=1))

    p_x0 = float(density(x0[None])[0])
    eta0 = float(class_posteriors(model, x0[None])[0, 0])

    gx = np.linspace(-4, 4, 401)
    gy = np.linspace(-5, 4, 451)
    grid_x, grid_y = np.meshgrid(gx, gy)
    pts = np.column_stack([grid_x.ravel(), grid_y.ravel()])
    eta_field = class_posteriors(model, pts)[:, 0].reshape(grid_x.shape)
    dy, dx = np.gradient(eta_field, gy, gx)
    smoothness = float(np.sqrt(dx**2 + dy**2).max())

    def ball_mass(r, n_rad=400, n_ang=512):
        rad = (np.arange(n_rad) + 0.5) * (r / n_rad)
        ang = (np.arange(n_ang) + 0.5) * (2 * np.pi / n_ang)
        rr, aa = np.meshgrid(rad, ang)
        disk = np.column_stack(
            [(x0[0] + rr * np.cos(aa)).ravel(), (x0[1] + rr * np.sin(aa)).ravel()]
        )
        dens = density(disk).reshape(rr.shape)
        return float((dens * rr).sum() * (r / n_rad) * (2 * np.pi / n_ang))

    r0 = 1.0
    kappa = min(ball_mass(r) / (p_x0 * r**2) for r in np.linspace(0.05, r0, 20))

    n_train, k = 2000, 34
    bound = mssa.knn_error_bound(
        k=k, n=n_train, delta=0.1, holder_const=smoothness, holder_alpha=1.0,
        kappa=kappa, density_at_x=p_x0, d=2, r0=r0,
    )
    assert bound.in_validity_regime
    assert bound.value < max(eta0, 1 - eta0)  # non-vacuous

    failures = 0
    grid1 = mssa.ScaleGrid.from_counts([k])
    for seed in range(200):
        ds = mssa.sample_mixture(model, n_train, seed=20_000 + seed)
        est = mssa.estimate_stack(
            x0, ds, grid1, Kernel.RECTANGULAR, mssa.build_index(ds)
        )
        failures += abs(float(est.eta_tilde[0, 0]) - eta0) > bound.value
    rate = failures / 200
    record(
        "8", rate <= 0.145,
        f"bound {bound.value:.3f} exceeded in {rate:.3f} of 200 retrainings <= 0.145",
    )


def test_criterion_9_concentration_of_weighted_fractions():
    """For fixed kernel weights and resampled labels, the exceedance
    frequency of |fraction - mean| > t stays within 1.2x the Hoeffding
    envelope 2 exp(-2 N t^2) at t in {0.05, 0.1, 0.2}."""
    rng = np.random.default_rng(777)
    feats = np.sort(rng.uniform(-1, 1, size=150))[:, None]
    nb = mssa.build_index(feats).query(np.array([0.0]), 150)
    w = mssa.scale_weights(nb, 150, Kernel.GAUSSIAN_LIKE)
    total = w.sum()

    positions = feats[nb.indices, 0]
    eta_i = 0.5 + 0.2 * np.sin(2 * positions)
    eta_bar = float((w * eta_i).sum() / total)

    draws = (rng.random((10_000, 150)) < eta_i[None, :]).astype(float)
    dev = np.abs(draws @ w / total - eta_bar)
    results = []
    ok = True
    for t in (0.05, 0.1, 0.2):
        freq = float(np.mean(dev > t))
        cap = 1.2 * 2.0 * math.exp(-2.0 * total * t * t)
        ok &= freq <= cap
        results.append(f"t={t}: {freq:.5f} <= {cap:.5f}")
    record("9", ok, "; ".join(results))


def test_criterion_10_byte_identical_reruns(tmp_path):
    """The same pipeline with the same seed gives byte-identical reports
    for any thread count, and across repeat invocations."""
    data_csv = tmp_path / "exp.csv"
    assert cli_main(["generate", "--experiment", "1", "--n", "300", "--seed", "5",
                     "--out", str(data_csv)]) == 0
    outs = []
    for tag, threads in (("a", 1), ("b", 4), ("c", 1)):
        out = tmp_path / f"{tag}.json"
        assert cli_main(["evaluate", "--data", str(data_csv), "--seed", "5",
                         "--threads", str(threads), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    record("10", outs[0] == outs[1] == outs[2],
           "three reruns (threads 1/4/1) byte-identical")
