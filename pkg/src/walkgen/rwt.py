"""Deterministic random-walk trajectories and the supervised training set.

A trajectory tracks a node-indexed vector through repeated applications of
the smoothed operator: the ordered sequence ``v, Lv, ..., L^k v``. The
training set pairs each vector with its successor so a model can learn to
run the walk backwards.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError
from .graphs import Graph, is_connected
from .operator import SmoothedOperator

DEFAULT_EXPONENTS = (1, -1, 2, -2)


@dataclass(frozen=True)
class StartFunction:
    """Power-law weighting of degrees, f(d) = d ** exponent."""

    exponent: int

    def values(self, degrees):
        d = np.asarray(degrees, dtype=float)
        if np.any(d < 1):
            raise ValueError("start functions are defined for degrees >= 1 only")
        return d ** self.exponent


def start_function_set(exponents=DEFAULT_EXPONENTS):
    return [StartFunction(int(b)) for b in exponents]


def starting_vector(degrees, fn: StartFunction):
    """Initial vector with entries n * f(d_i) / sum_j f(d_j); sums to n."""
    weights = fn.values(degrees)
    return len(weights) * weights / weights.sum()


@dataclass(frozen=True)
class Trajectory:
    graph_id: str
    exponent: int
    alpha: float
    vectors: np.ndarray  # shape (steps + 1, n); row j is L^j v

    @property
    def steps(self):
        return self.vectors.shape[0] - 1


def build_rwt(g: Graph, fn: StartFunction, alpha: float, steps: int,
              graph_id: str = "") -> Trajectory:
    """Run the walk ``steps`` times from the start vector defined by ``fn``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if not is_connected(g):
        warnings.warn("building a trajectory on a disconnected graph; "
                      "the walk limit is only defined per component")
    op = SmoothedOperator(g, alpha)
    vectors = np.empty((steps + 1, g.n))
    vectors[0] = starting_vector(g.degrees, fn)
    for j in range(steps):
        vectors[j + 1] = op.apply(vectors[j])
    vectors.setflags(write=False)
    return Trajectory(graph_id=graph_id, exponent=fn.exponent, alpha=alpha, vectors=vectors)


@dataclass(frozen=True)
class TrainingPair:
    """One reverse-prediction example: predict ``target`` from ``inputs``.

    ``inputs`` is the walk vector one step after ``target``; ``step`` is the
    input's position in the trajectory (1-based).
    """

    inputs: np.ndarray
    target: np.ndarray
    exponent_id: int
    step: int
    n: int


def build_training_set(graphs, fns, alpha, steps):
    """All consecutive-vector pairs over graphs x start functions.

    Yields len(graphs) * len(fns) * steps pairs; each trajectory of
    ``steps + 1`` vectors contributes pairs with input step 1..steps.
    """
    if not graphs or not fns:
        raise ValueError("need at least one graph and one start function")
    pairs = []
    for gi, g in enumerate(graphs):
        for fi, fn in enumerate(fns):
            traj = build_rwt(g, fn, alpha, steps, graph_id=str(gi))
            for j in range(steps):
                pairs.append(TrainingPair(inputs=traj.vectors[j + 1],
                                          target=traj.vectors[j],
                                          exponent_id=fi,
                                          step=j + 1,
                                          n=g.n))
    return pairs


@dataclass(frozen=True)
class BinningStats:
    """Discretization of vector entries: floor(scale * (x - mean) / std).

    ``bin_lo``/``bin_hi`` bound the bins seen in training; entries outside
    that range clamp to the nearest boundary bin so the embedding table
    stays total at generation time.
    """

    mean: float
    std: float
    bins_per_sigma: float
    bin_lo: int
    bin_hi: int

    @property
    def n_bins(self):
        return self.bin_hi - self.bin_lo + 1


def binning_stats(pairs, bins_per_sigma=3.0) -> BinningStats:
    """Fit bin statistics over every entry of every vector in ``pairs``."""
    if not pairs:
        raise ValueError("cannot fit binning stats on an empty training set")
    entries = np.concatenate([p.inputs for p in pairs] + [p.target for p in pairs])
    mean = float(entries.mean())
    std = float(entries.std())
    if std <= 1e-14 * max(1.0, abs(mean)):
        raise DegenerateDataError("training entries are (numerically) constant; binning undefined")
    raw = np.floor(bins_per_sigma * (entries - mean) / std).astype(np.int64)
    return BinningStats(mean=mean, std=std, bins_per_sigma=float(bins_per_sigma),
                        bin_lo=int(raw.min()), bin_hi=int(raw.max()))


def bin_vector(v, stats: BinningStats):
    """Elementwise bin index of ``v``, clamped into the training range."""
    raw = np.floor(stats.bins_per_sigma * (np.asarray(v, dtype=float) - stats.mean) / stats.std)
    return np.clip(raw, stats.bin_lo, stats.bin_hi).astype(np.int64)


def bin_index(v, stats: BinningStats):
    """Clamped bins shifted to 0-based table indices in [0, n_bins)."""
    return bin_vector(v, stats) - stats.bin_lo


def dump_trajectory(traj: Trajectory, path) -> None:
    """Debug dump: one JSON document per trajectory."""
    doc = {
        "graph_id": traj.graph_id,
        "exponent": traj.exponent,
        "alpha": traj.alpha,
        "steps": traj.steps,
        "vectors": [row.tolist() for row in traj.vectors],
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")
