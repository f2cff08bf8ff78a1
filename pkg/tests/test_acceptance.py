"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`. The heavy end-to-end
criteria (7 and 10) train real models with default settings and are shared
through session fixtures; criterion 11 rebuilds them from scratch to check
byte-level determinism.
"""

import hashlib
import itertools
import json
import time
from pathlib import Path

import numpy as np
import pytest

import walkgen as wg
from walkgen.cli import main as cli_main
from walkgen.degrees import perturb_degrees
from walkgen.infer import SolveOptions
from walkgen.metrics import METRICS, relative_error, statistic, wasserstein1
from walkgen.model import (ModelConfig, _backward_batch, _forward_batch,
                           forward, init_model)
from walkgen.rwt import BinningStats
from walkgen.samplers import sample_sbm, sample_with_degrees
from walkgen.trajectories import TrajectorySystem, build_diagnostic_system, ending_vector

from conftest import random_connected_graph


def announce(criterion, detail):
    print(f"ACCEPTANCE {criterion} PASS: {detail}")


def run_cli(args):
    rc = cli_main([str(a) for a in args])
    assert rc == 0, f"command failed ({rc}): {args}"


def dir_digest(root):
    """Stable digest of every file under a directory tree."""
    digest = hashlib.sha256()
    for path in sorted(Path(root).rglob("*")):
        if path.is_file():
            digest.update(str(path.relative_to(root)).encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


# ---------------------------------------------------------------- criterion 1

def test_criterion_01_spectral_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    for case in range(50):
        n = int(rng.integers(8, 51))
        g = random_connected_graph(n, 0.3, 10_000 + case)
        alpha = 0.5 if case % 2 == 0 else 0.9
        summary = wg.spectral_check(g, alpha)
        assert abs(summary.lambda_max - 1.0) <= 1e-8
        reference = np.sqrt((1 - alpha) * g.degrees + alpha)
        reference /= np.linalg.norm(reference)
        assert abs(summary.top_eigvec @ reference) >= 1 - 1e-8
        assert summary.lambda_min > -1.0
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"spectral suite took {elapsed:.1f}s"
    announce(1, f"50 graphs, lambda_max=1 +-1e-8, eigvec cosine >= 1-1e-8, "
                f"lambda_min > -1 in {elapsed:.1f}s")


# ---------------------------------------------------------------- criterion 2

def test_criterion_02_walk_limit_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    for case in range(50):
        n = int(rng.integers(8, 81))
        g = random_connected_graph(n, 0.25, 20_000 + case)
        alpha = 0.5 if case % 2 == 0 else 0.9
        for fn in wg.start_function_set():
            traj = wg.build_rwt(g, fn, alpha, 500)
            w = ending_vector(g.degrees, fn, alpha)
            residuals = np.linalg.norm(traj.vectors - w, axis=1)
            assert residuals[-1] <= 1e-6
            # non-increasing up to float noise at the convergence plateau
            assert np.diff(residuals).max() <= 1e-12
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"walk-limit suite took {elapsed:.1f}s"
    announce(2, f"50 graphs x 4 start functions: ||L^500 v - w|| <= 1e-6, "
                f"monotone residuals, {elapsed:.1f}s")


# ---------------------------------------------------------------- criterion 3

def build_recovery_runs(root):
    root = Path(root)
    rng = np.random.default_rng(303)
    results = []
    for case in range(20):
        n = int(rng.integers(5, 11))
        g = random_connected_graph(n, 0.45, 30_000 + case)
        graph_path = root / f"instance{case:02d}.txt"
        wg.save_edge_list(g, graph_path)
        for solver in ("exact", "convex"):
            out = root / f"recover{case:02d}_{solver}.json"
            run_cli(["--seed", 40_000 + case, "recover", "--graph", graph_path,
                     "--n-starts", n, "--solver", solver,
                     "--exact-n-limit", 12, "--out", out])
            results.append((case, solver, json.loads(out.read_text())))
    return results


@pytest.fixture(scope="session")
def recovery_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("c3")
    start = time.perf_counter()
    results = build_recovery_runs(root)
    return root, results, time.perf_counter() - start


def test_criterion_03_exact_recovery(recovery_runs):
    _, results, elapsed = recovery_runs
    exact_hits = sum(1 for _, solver, doc in results
                     if solver == "exact" and doc["hamming_distance"] == 0)
    convex_hits = sum(1 for _, solver, doc in results
                      if solver == "convex" and doc["hamming_distance"] == 0)
    assert exact_hits == 20, f"exact solver recovered {exact_hits}/20"
    assert convex_hits >= 19, f"convex+rounding recovered {convex_hits}/20"
    assert elapsed < 120.0, f"recovery suite took {elapsed:.1f}s"
    announce(3, f"exact {exact_hits}/20, convex+rounding {convex_hits}/20, "
                f"{elapsed:.1f}s")


# ---------------------------------------------------------------- criterion 4

def ordering_instances():
    for case in range(10):
        rng = np.random.default_rng(800 + case)
        n = int(rng.integers(7, 10))
        g = random_connected_graph(n, 0.45, 800 + case)
        base = build_diagnostic_system(g, n_starts=2 * n, alpha=0.9, steps=1,
                                       seed=case)
        target = perturb_degrees(g, 0.25, seed=case + 77)
        yield TrajectorySystem(inputs=base.inputs, outputs=base.outputs,
                               degrees=target, alpha=base.alpha,
                               steps=base.steps, exponents=base.exponents)


def test_criterion_04_solver_ordering():
    strict = 0
    for case, system in enumerate(ordering_instances()):
        obj_exact = wg.residual_objective(wg.solve_exact(system), system)
        weighted = wg.solve_convex(system, SolveOptions())
        rounded = wg.round_weighted(weighted, system.degrees).graph
        obj_convex = wg.residual_objective(rounded, system)
        random_graph = sample_with_degrees(system.degrees, seed=case + 1)
        obj_random = wg.residual_objective(random_graph, system)
        assert obj_exact <= obj_convex + 1e-9, f"instance {case}: exact above convex"
        assert obj_convex <= obj_random + 1e-9, f"instance {case}: convex above random"
        if obj_exact < obj_convex - 1e-9:
            strict += 1
    assert strict >= 3, f"exact beat convex strictly on only {strict}/10"
    announce(4, f"exact <= convex+rounded <= random on 10/10, strict on {strict}")


# ---------------------------------------------------------------- criterion 5

def test_criterion_05_brute_force_equivalence():
    for case in range(10):
        g = random_connected_graph(6, 0.5, 50_000 + case)
        system = build_diagnostic_system(g, n_starts=2, alpha=0.9, steps=1,
                                         seed=case)
        got = wg.residual_objective(wg.solve_exact(system), system)
        pairs = [(u, v) for u in range(6) for v in range(u + 1, 6)]
        best = np.inf
        for bits in itertools.product((0, 1), repeat=len(pairs)):
            deg = np.zeros(6, dtype=int)
            for bit, (u, v) in zip(bits, pairs):
                if bit:
                    deg[u] += 1
                    deg[v] += 1
            if not np.array_equal(deg, g.degrees):
                continue
            h = wg.Graph(6, [p for bit, p in zip(bits, pairs) if bit])
            best = min(best, wg.residual_objective(h, system))
        assert got == best, f"instance {case}: {got} != brute {best}"
    announce(5, "exact solver equals exhaustive enumeration on 10/10 instances")


# ---------------------------------------------------------------- criterion 6

def test_criterion_06_model_correctness():
    config = ModelConfig(dim=4, n_layers=1, n_heads=2, ffn_dim=6, n_bins=5,
                         n_functions=2, max_step=3, seed=7)
    params = init_model(config)
    rng = np.random.default_rng(606)
    values = rng.uniform(0.5, 1.5, (2, 3))
    bins = rng.integers(0, 5, (2, 3))
    eids = np.array([0, 1])
    steps = np.array([1, 3])
    targets = rng.uniform(0.5, 1.5, (2, 3))
    preds, cache = _forward_batch(params, values, bins, eids, steps, want_cache=True)
    grads = _backward_batch(params, cache, 2.0 * (preds - targets) / preds.size)

    def loss():
        p, _ = _forward_batch(params, values, bins, eids, steps)
        return float(((p - targets) ** 2).mean())

    h = 1e-4
    worst = 0.0
    for name, arr in params.tensors.items():
        numeric = np.zeros_like(arr)
        flat, nflat = arr.ravel(), numeric.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss()
            flat[i] = orig - h
            down = loss()
            flat[i] = orig
            nflat[i] = (up - down) / (2 * h)
        scale = max(np.abs(numeric).max(), np.abs(grads[name]).max(), 1e-12)
        rel = np.abs(numeric - grads[name]).max() / scale
        worst = max(worst, rel)
        assert rel <= 1e-4, f"gradient mismatch in {name}: {rel:.2e}"

    stats = BinningStats(mean=1.0, std=0.5, bins_per_sigma=1.0, bin_lo=-2, bin_hi=2)
    wide = init_model(ModelConfig(dim=16, n_layers=2, n_heads=4, ffn_dim=24,
                                  n_bins=5, n_functions=2, max_step=4, seed=1))
    max_dev = 0.0
    for _ in range(100):
        n = int(rng.integers(3, 30))
        v = rng.uniform(0.2, 1.8, n)
        perm = rng.permutation(n)
        base = forward(wide, v, 0, 2, stats)
        permuted = forward(wide, v[perm], 0, 2, stats)
        max_dev = max(max_dev, float(np.abs(permuted - base[perm]).max()))
    assert max_dev <= 1e-5

    out30 = forward(wide, rng.uniform(0.5, 1.5, 30), 1, 2, stats)
    out50 = forward(wide, rng.uniform(0.5, 1.5, 50), 1, 2, stats)
    assert out30.shape == (30,) and np.isfinite(out30).all()
    assert out50.shape == (50,) and np.isfinite(out50).all()
    announce(6, f"gradcheck worst rel err {worst:.1e}, equivariance max dev "
                f"{max_dev:.1e}, variable-length forward ok")


# -------------------------------------------------------- criteria 7, 10, 11

def build_training_run(root):
    """Criterion 7 artifacts: corpus of 20 SBM graphs (n ~ 40) and a model
    trained with default settings."""
    root = Path(root)
    corpus = root / "corpus"
    corpus.mkdir()
    for i in range(20):
        g = sample_sbm(40, (0.6, 0.4), 0.5, 0.1, seed=70_000 + i)
        wg.save_edge_list(g, corpus / f"g{i:04d}.txt")
    run_cli(["--seed", 7, "train", "--corpus", corpus, "--out", root / "model"])
    return json.loads((root / "model" / "train_report.json").read_text())


@pytest.fixture(scope="session")
def training_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("c7")
    start = time.perf_counter()
    report = build_training_run(root)
    return root, report, time.perf_counter() - start


def test_criterion_07_training_sanity(training_run):
    _, report, elapsed = training_run
    initial = report["initial_holdout_mse"]
    best = report["best_holdout_mse"]
    assert best <= 0.5 * initial, f"held-out MSE {best} vs initial {initial}"
    assert elapsed <= 600.0, f"training took {elapsed:.0f}s"
    announce(7, f"held-out MSE {best:.4f} <= 0.5 x initial {initial:.4f}, "
                f"{elapsed:.0f}s")


def build_end_to_end_run(root):
    """Criterion 10 artifacts: train on 20 two-block SBM graphs with
    n in [40, 60], generate 10 graphs, evaluate against 10 fresh test
    graphs."""
    root = Path(root)
    corpus = root / "corpus"
    test_dir = root / "test"
    corpus.mkdir()
    test_dir.mkdir()
    for i in range(20):
        n = int(np.random.default_rng(3000 + i).integers(40, 61))
        wg.save_edge_list(sample_sbm(n, (0.6, 0.4), 0.5, 0.1, seed=3000 + i),
                          corpus / f"g{i:04d}.txt")
    for i in range(10):
        n = int(np.random.default_rng(4000 + i).integers(40, 61))
        wg.save_edge_list(sample_sbm(n, (0.6, 0.4), 0.5, 0.1, seed=4000 + i),
                          test_dir / f"g{i:04d}.txt")
    run_cli(["--seed", 0, "train", "--corpus", corpus, "--out", root / "model"])
    run_cli(["--seed", 7, "generate", "--checkpoint", root / "model" / "checkpoint.json",
             "--count", 10, "--degree-source", f"perturb:{corpus}",
             "--out", root / "gen"])
    run_cli(["--seed", 3, "eval", "--gen", root / "gen", "--test", test_dir,
             "--metrics", "degree,cut", "--out", root / "eval"])
    manifest = json.loads((root / "gen" / "manifest.json").read_text())
    report = json.loads((root / "eval" / "report.json").read_text())
    return manifest, report


@pytest.fixture(scope="session")
def end_to_end_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("c10")
    start = time.perf_counter()
    manifest, report = build_end_to_end_run(root)
    return root, manifest, report, time.perf_counter() - start


def test_criterion_10_end_to_end_gate(end_to_end_run):
    _, manifest, report, elapsed = end_to_end_run
    failures = [r for r in manifest["graphs"] if r["error"] is not None]
    assert not failures, f"generation failures: {failures}"
    degree_error = report["metrics"]["degree"]
    cut_error = report["metrics"]["cut"]
    connected = sum(r["connected"] for r in manifest["graphs"])
    assert degree_error <= 0.3, f"degree relative error {degree_error:.3f}"
    assert cut_error <= 0.5, f"cut relative error {cut_error:.3f}"
    assert connected >= 8, f"only {connected}/10 generated graphs connected"
    assert elapsed <= 1200.0, f"end-to-end run took {elapsed:.0f}s"
    announce(10, f"degree err {degree_error:.3f} <= 0.3, cut err {cut_error:.3f} "
                 f"<= 0.5, {connected}/10 connected, {elapsed:.0f}s")


def rerun_in_place(root, builder):
    """Digest a finished artifact tree, rebuild it from scratch at the same
    path (so every command sees byte-identical arguments), and digest again.
    """
    import shutil

    before = dir_digest(root)
    shutil.rmtree(root)
    Path(root).mkdir()
    builder(root)
    return before, dir_digest(root)


def test_criterion_11_determinism(recovery_runs, training_run, end_to_end_run):
    before, after = rerun_in_place(recovery_runs[0], build_recovery_runs)
    assert before == after, "criterion-3 outputs differ between runs"

    before, after = rerun_in_place(training_run[0], build_training_run)
    assert before == after, "criterion-7 outputs differ between runs"

    before, after = rerun_in_place(end_to_end_run[0], build_end_to_end_run)
    assert before == after, "criterion-10 outputs differ between runs"
    announce(11, "criteria 3, 7, 10 reproduce byte-identical output trees")


# ---------------------------------------------------------------- criterion 8

def test_criterion_08_metric_oracles():
    bridged = wg.Graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])
    from walkgen.metrics import _modularity, effective_resistances
    side = np.array([True, True, True, False, False, False])
    assert _modularity(bridged, side) == pytest.approx(5 / 14, abs=1e-9)

    p3 = wg.Graph(3, [(0, 1), (1, 2)])
    assert effective_resistances(p3, [(0, 2)])[0] == pytest.approx(2.0, abs=1e-9)

    triangle = wg.Graph(3, [(0, 1), (1, 2), (0, 2)])
    assert np.allclose(statistic(triangle, "clustering").values, 1.0)

    ring = wg.Graph(10, [(i, (i + 1) % 10) for i in range(10)])
    assert np.abs(statistic(ring, "pagerank").values - 0.1).max() <= 1e-9

    assert wasserstein1([0, 1], [1, 2]) == 1.0

    from walkgen.metrics import orbit_counts
    rng = np.random.default_rng(808)
    for case in range(20):
        n = int(rng.integers(6, 31))
        g = random_connected_graph(n, 0.3, 80_000 + case)
        counts = orbit_counts(g)
        brute = sum(1 for a, b, c in itertools.combinations(range(n), 3)
                    if g.has_edge(a, b) and g.has_edge(b, c) and g.has_edge(a, c))
        assert counts[:, 3].sum() == 3 * brute
    announce(8, "modularity 5/14, series resistance 2.0, clustering, pagerank, "
                "W1 and orbit census oracles all pass")


# ---------------------------------------------------------------- criterion 9

def test_criterion_09_self_consistency():
    graphs = [sample_sbm(20, (0.5, 0.5), 0.6, 0.2, seed=90_000 + i)
              for i in range(10)]
    for metric in METRICS:
        assert relative_error(graphs, graphs, metric, seed=9) == 0.0
        doubled = relative_error(graphs + graphs, graphs, metric, seed=9)
        assert doubled <= 1e-12, f"{metric}: duplicated-set error {doubled}"
    announce(9, f"relative error 0 for all {len(METRICS)} metrics on "
                "identical and duplicated sets")
