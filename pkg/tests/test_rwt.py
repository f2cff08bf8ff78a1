import json

import numpy as np
import pytest

from conftest import random_connected_graph
from walkgen.errors import DegenerateDataError
from walkgen.graphs import Graph, relabel
from walkgen.operator import smoothed_operator
from walkgen.rwt import (BinningStats, StartFunction, bin_vector, binning_stats,
                         build_rwt, build_training_set, dump_trajectory,
                         start_function_set, starting_vector)
from walkgen.samplers import sample_sbm
from walkgen.trajectories import ending_vector


def test_starting_vector_uniform_for_regular(triangle):
    for beta in (1, -1, 2, -2):
        v = starting_vector(triangle.degrees, StartFunction(beta))
        assert np.allclose(v, 1.0, atol=1e-14)


def test_starting_vector_path3_values(path3):
    v = starting_vector(path3.degrees, StartFunction(1))
    assert np.allclose(v, [0.75, 1.5, 0.75], atol=1e-14)
    v = starting_vector(path3.degrees, StartFunction(-1))
    assert np.allclose(v, [1.2, 0.6, 1.2], atol=1e-14)


def test_starting_vector_normalization_property():
    for seed in range(20):
        g = random_connected_graph(25, 0.25, seed)
        for fn in start_function_set():
            v = starting_vector(g.degrees, fn)
            assert v.min() > 0
            assert abs(v.sum() - g.n) < 1e-10


def test_starting_vector_rejects_zero_degree():
    with pytest.raises(ValueError):
        starting_vector(np.array([0, 2, 1]), StartFunction(1))


def test_build_rwt_regular_fixed_point(triangle):
    traj = build_rwt(triangle, StartFunction(1), 0.9, 10)
    assert traj.vectors.shape == (11, 3)
    assert np.abs(traj.vectors - 1.0).max() < 1e-13


def test_build_rwt_one_step_hand_matvec(path3):
    # one application of the operator to (0.75, 1.5, 0.75) at alpha=0.9,
    # worked out entrywise from the definition
    traj = build_rwt(path3, StartFunction(1), 0.9, 1)
    s = 0.1 / np.sqrt(1.1)
    expect = np.array([0.9 * 0.75 + s * 1.5,
                       2 * s * 0.75 + (0.9 / 1.1) * 1.5,
                       0.9 * 0.75 + s * 1.5])
    assert np.abs(traj.vectors[1] - expect).max() < 1e-14


def test_build_rwt_er_stays_near_ones():
    # large homogeneous graphs keep the walk hovering near the all-ones
    # vector; the 0.65 bound was calibrated over these exact seeds, and the
    # walk must also contract toward the limit
    for seed in range(20):
        g = random_connected_graph(200, 0.2, 300 + seed)
        traj = build_rwt(g, StartFunction(1), 0.9, 10)
        assert np.abs(traj.vectors - 1.0).max() < 0.65
        start_dev = np.abs(traj.vectors[0] - 1.0).max()
        end_dev = np.abs(traj.vectors[-1] - 1.0).max()
        assert end_dev < start_dev


def test_build_rwt_step_identity():
    g = random_connected_graph(30, 0.25, 1)
    op = smoothed_operator(g, 0.9)
    traj = build_rwt(g, StartFunction(2), 0.9, 12)
    for j in range(traj.steps):
        assert np.abs(traj.vectors[j + 1] - op.apply(traj.vectors[j])).max() <= 1e-12


def test_build_rwt_warns_on_disconnected():
    g = Graph(4, [(0, 1), (2, 3)])
    with pytest.warns(UserWarning, match="disconnected"):
        build_rwt(g, StartFunction(1), 0.9, 2)


def test_build_rwt_monotone_convergence_to_ending_vector():
    for seed in range(10):
        g = random_connected_graph(20, 0.3, 40 + seed)
        for fn in start_function_set():
            traj = build_rwt(g, fn, 0.9, 60)
            w = ending_vector(g.degrees, fn, 0.9)
            residuals = np.linalg.norm(traj.vectors - w, axis=1)
            assert np.all(np.diff(residuals) <= 1e-12)


def test_build_rwt_permutation_equivariance():
    rng = np.random.default_rng(8)
    for seed in range(10):
        g = random_connected_graph(18, 0.3, 80 + seed)
        perm = rng.permutation(g.n)
        h = relabel(g, perm)
        for fn in (StartFunction(1), StartFunction(-2)):
            tg = build_rwt(g, fn, 0.9, 6).vectors
            th = build_rwt(h, fn, 0.9, 6).vectors
            assert np.abs(th[:, perm] - tg).max() < 1e-12


def test_build_training_set_counts():
    graphs = [sample_sbm(20, (0.5, 0.5), 0.6, 0.2, seed=s) for s in range(3)]
    fns = start_function_set()
    pairs = build_training_set(graphs, fns, 0.9, 10)
    assert len(pairs) == 3 * 4 * 10
    assert {p.step for p in pairs} == set(range(1, 11))
    assert {p.exponent_id for p in pairs} == {0, 1, 2, 3}


def test_build_training_set_single():
    g = sample_sbm(15, (1.0,), 0.5, 0.5, seed=0)
    pairs = build_training_set([g], [StartFunction(1)], 0.9, 1)
    assert len(pairs) == 1


def test_training_pairs_are_operator_steps():
    graphs = [random_connected_graph(22, 0.3, 60 + s) for s in range(2)]
    pairs = build_training_set(graphs, start_function_set(), 0.9, 5)
    ops = {g.n + 1000 * i: smoothed_operator(g, 0.9) for i, g in enumerate(graphs)}
    for p in pairs:
        # recover which graph produced it via vector length (both are 22 here,
        # so check against both and accept either)
        ok = any(np.abs(op.apply(p.target) - p.inputs).max() <= 1e-12
                 for op in ops.values())
        assert ok


def test_binning_stats_formula():
    # hand-set mean 1, std 1: B(1.5) with scale 3 is floor(1.5) = 1
    stats = BinningStats(mean=1.0, std=1.0, bins_per_sigma=3.0, bin_lo=-5, bin_hi=5)
    assert bin_vector(np.array([1.5]), stats)[0] == 1


def test_binning_floor_arithmetic():
    stats = BinningStats(mean=0.0, std=1.0, bins_per_sigma=3.0, bin_lo=-10, bin_hi=10)
    out = bin_vector(np.array([0.5, -0.4]), stats)
    assert list(out) == [1, -2]


def test_binning_clamps_out_of_range():
    stats = BinningStats(mean=0.0, std=1.0, bins_per_sigma=1.0, bin_lo=-2, bin_hi=2)
    out = bin_vector(np.array([10.0, -10.0, 0.0]), stats)
    assert list(out) == [2, -2, 0]


def test_binning_stats_cover_training_entries():
    graphs = [sample_sbm(20, (0.5, 0.5), 0.6, 0.2, seed=s) for s in range(2)]
    pairs = build_training_set(graphs, start_function_set(), 0.9, 6)
    stats = binning_stats(pairs, 3.0)
    assert stats.std > 0
    for p in pairs:
        raw = np.floor(3.0 * (p.inputs - stats.mean) / stats.std)
        assert raw.min() >= stats.bin_lo and raw.max() <= stats.bin_hi


def test_binning_degenerate_error(triangle):
    # all trajectory entries on a regular graph equal 1 -> zero variance
    pairs = build_training_set([triangle], [StartFunction(1)], 0.9, 3)
    with pytest.raises(DegenerateDataError):
        binning_stats(pairs, 3.0)


def test_dump_trajectory_format(tmp_path, path3):
    traj = build_rwt(path3, StartFunction(1), 0.9, 2)
    out = tmp_path / "traj.json"
    dump_trajectory(traj, out)
    doc = json.loads(out.read_text())
    assert set(doc) == {"graph_id", "exponent", "alpha", "steps", "vectors"}
    assert len(doc["vectors"]) == 3
