"""Acceptance criteria, one test each, at their stated tolerances and time budgets.

Every test records a PASS/FAIL/SKIP line that pytest prints in an
"acceptance criteria" section at the end of the run.
"""

import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from clams.ambiguity import clams_score, entropy_ambiguity
from clams.bench import rank_stability
from clams.core import GaussianComponent, Scatterplot
from clams.datagen import (
    SceneSpec,
    blob_scene,
    generate_scene,
    generate_training_set,
    highdim_mixture,
    ingest_clustme,
    write_training_csv,
)
from clams.evm import adjusted_mutual_info, adjusted_rand, homogeneity_completeness_v, spearman_rho
from clams.features import pair_features
from clams.gmm import GmmFitConfig, decompose
from clams.io import write_points_csv
from clams.reducer import NEIGHBORHOOD_F1, TOY_EMBEDDER, HighDimDataset, ReducerConfig, optimize
from clams.separability import TrainConfig, ablate, cross_validate, save_model, train


class Checks:
    """Named sub-checks of one criterion; all are evaluated before anything is asserted."""

    def __init__(self, number, log):
        self.number, self.log, self.items = number, log, []
        self.start = time.perf_counter()

    def add(self, name, ok, detail=""):
        self.items.append((name, bool(ok), detail))

    def elapsed(self):
        return time.perf_counter() - self.start

    def finish(self, budget_s=None, extra_s=0.0):
        if budget_s is not None:
            t = self.elapsed() + extra_s
            self.add("runtime", t < budget_s, f"{t:.1f}s < {budget_s}s")
        failed = [f"{n} ({d})" for n, ok, d in self.items if not ok]
        summary = "; ".join(f"{n}: {d}" for n, _, d in self.items if d)
        self.log(self.number, "FAIL" if failed else "PASS", summary)
        assert not failed, "failed: " + ", ".join(failed)


SETUP_SECONDS = {}


@pytest.fixture(scope="module")
def surrogate_data():
    t = time.perf_counter()
    data = generate_training_set(5000, mc_samples=2000, seed=0)
    SETUP_SECONDS["data"] = time.perf_counter() - t
    return data


@pytest.fixture(scope="module")
def trained(surrogate_data):
    t = time.perf_counter()
    model = train(surrogate_data, TrainConfig(), with_cv=False)
    SETUP_SECONDS["train"] = time.perf_counter() - t
    return model


def test_c01_entropy(acceptance_log):
    c = Checks(1, acceptance_log)
    s = np.random.default_rng(0).uniform(0.0, 1.0, 1_000_000)
    worst = float(np.max(np.abs(entropy_ambiguity(s) - entropy_ambiguity(1.0 - s))))
    c.add("symmetry", worst <= 1e-12, f"max |A(s)-A(1-s)| = {worst:.1e}")
    c.add("A(0)=A(1)=0", entropy_ambiguity(0.0) == 0.0 and entropy_ambiguity(1.0) == 0.0)
    c.add("A(0.5)=1", entropy_ambiguity(0.5) == 1.0)
    c.finish(1.0)


def _nearest_match(found, truth):
    found = list(found)
    worst = 0.0
    for t in truth:
        d = [float(np.linalg.norm(np.asarray(f) - t)) for f in found]
        j = int(np.argmin(d))
        worst = max(worst, d[j])
        found.pop(j)
    return worst


def test_c02_gmm_model_selection(acceptance_log):
    c = Checks(2, acceptance_log)
    corners = [(0, 0), (20, 0), (0, 20), (20, 20)]
    hits, worst = 0, 0.0
    for seed in range(50):
        plot, labels = generate_scene(blob_scene(corners, 1.0, 250, seed=seed))
        dec = decompose(plot, GmmFitConfig(seed=seed))
        if dec.k_opt == 4:
            hits += 1
            means = [plot.points[labels.labels == j].mean(axis=0) for j in range(4)]
            worst = max(worst, _nearest_match([g.center for g in dec.components], means))
    c.add("K_opt=4 rate", hits >= 48, f"{hits}/50")
    c.add("center error", worst <= 0.2, f"max {worst:.3f}")
    c.finish(120)


def test_c03_feature_oracles(acceptance_log):
    c = Checks(3, acceptance_log)
    tol = 1e-9
    same = GaussianComponent((2.0, -1.0), 1.5, 0.7, 0.4, 120)
    f = pair_features(same, same)
    c.add("identity", all(abs(v) <= tol for v in f.values()))
    # DSR of an identical pair is 0 / (2 * size): finite because the denominator is positive
    c.add("dsr denominator", f.dsr == 0.0 and math.isfinite(f.dsr))
    a = GaussianComponent((0, 0), 1, 1, 0, 100)
    b = GaussianComponent((3, 4), 1, 1, 0, 100)
    f = pair_features(a, b)
    c.add("3-4-5 DC", f.dc == 5.0, f"dc={f.dc}")
    c.add("3-4-5 DSR", abs(f.dsr - 5 / (2 * math.sqrt(2))) <= tol)
    c.add("3-4-5 others zero", (f.dd, f.sd, f.ed, f.ac) == (0.0, 0.0, 0.0, 0.0))
    worst = 0.0
    rng = np.random.default_rng(3)
    for _ in range(200):
        g = [
            GaussianComponent(tuple(rng.uniform(-9, 9, 2)), m, m * rng.uniform(0.1, 1), rng.uniform(0, math.pi),
                              rng.uniform(10, 500))
            for m in rng.uniform(0.2, 3, 2)
        ]
        k = rng.uniform(0.2, 5)
        sc = [GaussianComponent((x.center[0] * k, x.center[1] * k), x.major_sd * k, x.minor_sd * k, x.angle, x.soft_count)
              for x in g]
        f0, f1 = pair_features(*g), pair_features(*sc)
        errs = [
            abs(f1.dc - k * f0.dc), abs(f1.sd - k * f0.sd), abs(f1.dd - f0.dd / k**2) * k**2,
            abs(f1.dsr - f0.dsr), abs(f1.ed - f0.ed), abs(f1.ac - f0.ac),
        ]
        worst = max(worst, max(errs))
        if pair_features(g[1], g[0]).values() != f0.values():
            worst = math.inf
    c.add("scaling laws + symmetry", worst <= tol, f"max err {worst:.1e}")
    c.finish(1.0)


def test_c04_synthetic_regressor(acceptance_log, surrogate_data, trained):
    c = Checks(4, acceptance_log)
    r2 = cross_validate(surrogate_data, TrainConfig(cv_folds=5))
    c.add("5-fold CV R2", r2 >= 0.8, f"R2 = {r2:.4f}")
    d = np.linspace(0.0, 5.0, 20)
    s = trained.predict_many([
        pair_features(GaussianComponent((0, 0), 1, 1, 0, 250), GaussianComponent((x, 0), 1, 1, 0, 250)) for x in d
    ])
    rho = spearman_rho(d, s)
    c.add("monotone separation", rho >= 0.9, f"rho = {rho:.4f}")
    # pair generation and the final fit ran in fixtures; they count toward the budget
    c.finish(180, SETUP_SECONDS.get("data", 0.0) + SETUP_SECONDS.get("train", 0.0))


def test_c05_clustme_regressor(acceptance_log):
    params, scores = os.environ.get("CLAMS_CLUSTME_PARAMS"), os.environ.get("CLAMS_CLUSTME_SCORES")
    if not (params and scores and Path(params).is_file() and Path(scores).is_file()):
        reason = "human-labelled export not available (set CLAMS_CLUSTME_PARAMS and CLAMS_CLUSTME_SCORES)"
        acceptance_log(5, "SKIP", reason)
        pytest.skip(reason)
    c = Checks(5, acceptance_log)
    rows = ablate(ingest_clustme(params, scores), TrainConfig())
    full = rows[0].r2
    singles = {r.removed[0]: r.change for r in rows if len(r.removed) == 1}
    pairs = {r.removed: r.change for r in rows if len(r.removed) == 2}
    c.add("full R2", abs(full - 0.9106) <= 0.03, f"R2 = {full:.4f}")
    c.add("DSR largest single drop", singles["dsr"] < 0 and singles["dsr"] == min(singles.values()),
          f"dsr {singles['dsr']:+.2f}%")
    c.add("DD non-negative", singles["dd"] >= 0, f"dd {singles['dd']:+.2f}%")
    c.add("{DC,DSR} largest pair drop", pairs[("dc", "dsr")] == min(pairs.values()), f"{pairs[('dc', 'dsr')]:+.2f}%")
    c.finish()


def test_c06_directionality(acceptance_log, trained):
    c = Checks(6, acceptance_log)
    wins = 0
    for seed in range(20):
        scores = []
        for spacing in (20.0, 2.0):
            plot, _ = generate_scene(blob_scene([(0, 0), (spacing, 0), (2 * spacing, 0)], 1.0, 500, seed=seed))
            scores.append(clams_score(plot, trained, GmmFitConfig(seed=seed)).score)
        wins += scores[0] < scores[1]
    c.add("separated < overlapping", wins >= 19, f"{wins}/20")
    c.finish(120)


def test_c07_evm_suite(acceptance_log):
    c = Checks(7, acceptance_log)
    ari = adjusted_rand([0, 0, 1, 1], [0, 1, 0, 1])
    c.add("ARI([0,0,1,1],[0,1,0,1]) = -1/3", ari == -1.0 / 3.0, f"ARI = {ari!r}")
    p = [0, 0, 0, 1, 1, 2, 2, 2, 2]
    ident = (adjusted_rand(p, p), adjusted_mutual_info(p, p), homogeneity_completeness_v(p, p)[2])
    c.add("identity = 1", all(abs(v - 1) <= 1e-9 for v in ident))
    rng = np.random.default_rng(0)
    mean_abs = float(np.mean([abs(adjusted_rand(rng.integers(0, 3, 100), rng.integers(0, 3, 100))) for _ in range(100)]))
    c.add("random partitions", mean_abs <= 0.05, f"mean |ARI| = {mean_abs:.4f}")
    rho = spearman_rho([1, 2, 3, 4, 5], [1, 3, 2, 5, 4])
    c.add("spearman 0.8", rho == 0.8, f"rho = {rho!r}")
    c.finish(10)


def test_c08_ambreducer(acceptance_log, trained):
    c = Checks(8, acceptance_log)
    cfg = ReducerConfig(tau=0.05, budget_phase1=40, budget_phase2=80, seed=0)
    non_increasing = strict = within_tau = 0
    for i in range(10):
        dim, n = (3, 5)[i % 2], 500 + 150 * i
        Z = HighDimDataset(highdim_mixture(n, dim, k=6, separation=3.0, seed=i))
        rep = optimize(Z, TOY_EMBEDDER, NEIGHBORHOOD_F1, trained, cfg).report
        non_increasing += rep["clams_final"] <= rep["clams_intermediate"]
        strict += rep["clams_final"] < rep["clams_intermediate"]
        within_tau += abs(rep["accuracy_final"] - rep["accuracy_intermediate"]) <= cfg.tau
    c.add("final <= intermediate", non_increasing == 10, f"{non_increasing}/10")
    c.add("strict reduction", strict >= 8, f"{strict}/10")
    c.add("accuracy drift <= tau", within_tau == 10, f"{within_tau}/10")
    c.finish(600)


def _line_scene(seed, spacing):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(5, 7))
    a = rng.uniform(0, math.pi)
    centers = tuple((i * spacing * math.cos(a), i * spacing * math.sin(a)) for i in range(k))
    spec = SceneSpec(k, sd_range=(1.0, 1.0), ellipticity_range=(0.5, 1.0), count_range=(60, 80), seed=seed,
                     centers=centers)
    plot, _ = generate_scene(spec)
    return Scatterplot(plot.points, id=f"line-{spacing}-{seed}")


def test_c09_benchmark_stability(acceptance_log, trained):
    c = Checks(9, acceptance_log)
    low = [_line_scene(s, 15.0) for s in range(10)]
    high = [_line_scene(s, 1.5) for s in range(10)]
    amb_low = np.mean([clams_score(p, trained, GmmFitConfig(seed=0)).score for p in low])
    amb_high = np.mean([clams_score(p, trained, GmmFitConfig(seed=0)).score for p in high])
    c.add("CLAMS orders the sets", amb_low < amb_high, f"CLAMS {amb_low:.3f} < {amb_high:.3f}")
    for metric in ("silhouette", "ch"):
        r_low = rank_stability(low, metric=metric, budget=20, seed=0).mean_rho
        r_high = rank_stability(high, metric=metric, budget=20, seed=0).mean_rho
        c.add(f"{metric} stability", r_low > r_high, f"{metric} rho {r_low:.3f} > {r_high:.3f}")
    c.finish(900)


def test_c10_scalability(acceptance_log, trained):
    c = Checks(10, acceptance_log)
    cfg = GmmFitConfig(k_max=10)
    times = {}
    for n in (10_000, 100_000):
        plot, _ = generate_scene(SceneSpec(k=5, count_range=(n // 5, n // 5), seed=3))
        t = time.perf_counter()
        clams_score(plot, trained, cfg)
        times[n] = time.perf_counter() - t
    ratio = times[100_000] / times[10_000]
    c.add("time ratio", ratio <= 20, f"{times[10_000]:.2f}s -> {times[100_000]:.2f}s, ratio {ratio:.1f}")
    c.add("absolute", times[100_000] < 60)
    c.finish()


def _cli(args, cwd):
    out = subprocess.run([sys.executable, "-m", "clams.cli", *map(str, args)], cwd=cwd, capture_output=True)
    assert out.returncode == 0, out.stderr.decode()
    return out.stdout


def _snapshot(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_c11_cli_determinism(acceptance_log, tmp_path, trained):
    c = Checks(11, acceptance_log)
    shared = tmp_path / "shared"
    shared.mkdir()
    save_model(trained, shared / "model.json")
    plots = shared / "plots"
    plots.mkdir()
    for i in range(3):
        plot, _ = generate_scene(blob_scene([(0, 0), (5, 0), (0, 5)], 1.0, 80, seed=i))
        write_points_csv(plot.points, plots / f"p{i}.csv")
    (shared / "manifest.csv").write_text("path,group\n" + "".join(f"plots/p{i}.csv,a\n" for i in range(3)))
    gt = shared / "gt" / "p0"
    gt.mkdir(parents=True)
    for j, lab in enumerate(([0, 0, 1, 1, 2], [0, 1, 1, 1, 2], [2, 2, 0, 0, 1])):
        (gt / f"o{j}.csv").write_text("label\n" + "".join(f"{v}\n" for v in lab))
    write_training_csv(generate_training_set(40, mc_samples=200, seed=1), shared / "train.csv")
    np.savetxt(shared / "hd.csv", highdim_mixture(200, 3, 3, seed=2), delimiter=",")

    commands = {
        "score": ["score", shared / "plots", "--model", shared / "model.json", "--k-max", "6", "--svg", "svg"],
        "train": ["train", "--data", shared / "train.csv", "--n-trees", "20", "--model-out", "m.json"],
        "ablate": ["ablate", "--data", shared / "train.csv", "--n-trees", "5", "--cv-folds", "2", "--csv", "a.csv"],
        "generate": ["generate", "scenes", "--n", "2", "--out", "gen"],
        "ground-truth": ["ground-truth", shared / "gt", "--ranking", "rank.csv"],
        "bench": ["bench", shared / "manifest.csv", "--budget", "4", "--model", shared / "model.json",
                  "--ranking", "rank.csv"],
        "reduce": ["reduce", shared / "hd.csv", "--model", shared / "model.json", "--budget1", "3", "--budget2", "4",
                   "--out-dir", "emb"],
    }
    for name, args in commands.items():
        runs = []
        for rep in range(2):
            cwd = tmp_path / f"{name}-{rep}"
            cwd.mkdir()
            stdout = _cli([*args, "--seed", "7"], cwd)
            runs.append((stdout, _snapshot(cwd)))
        c.add(name, runs[0] == runs[1] and runs[0][0].strip() != b"")
    c.add("subcommands", True, f"{sum(ok for _, ok, _ in c.items)}/{len(commands)} byte-identical")
    c.finish()
