"""Generated walk trajectories: ending vectors and reverse rollouts.

The forward walk converges to a closed-form limit that depends only on the
degree sequence, so generation starts from that limit and rolls the learned
reverse predictor backwards. Consecutive generated vectors are stacked into
a linear system that constrains the unknown operator of the target graph:
``inputs @ L = outputs`` row for row.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import RolloutError
from .graphs import Graph
from .model import CheckpointBundle, forward
from .operator import SmoothedOperator
from .rwt import StartFunction, build_rwt, start_function_set


def smoothed(degrees, alpha):
    return (1.0 - alpha) * np.asarray(degrees, dtype=float) + alpha


def ending_vector(degrees, fn: StartFunction, alpha):
    """Limit of the forward walk started from ``fn``'s starting vector.

    Only the degrees matter: the limit is proportional to sqrt of the
    smoothed degrees, scaled so it is the projection of the starting vector
    onto the operator's top eigenvector.
    """
    d = np.asarray(degrees, dtype=np.int64)
    if np.any(d < 1):
        raise ValueError("ending vector needs all degrees >= 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    dp = smoothed(d, alpha)
    root = np.sqrt(dp)
    weights = fn.values(d)
    scale = len(d) * (weights @ root) / (weights.sum() * dp.sum())
    return scale * root


@dataclass(frozen=True)
class TrajectorySystem:
    """Paired consecutive vectors from generated (or diagnostic) walks.

    Row r of ``outputs`` is the walk successor of row r of ``inputs``; both
    matrices have one row per (trajectory, step) and n columns.
    """

    inputs: np.ndarray
    outputs: np.ndarray
    degrees: np.ndarray
    alpha: float
    steps: int
    exponents: tuple

    def __post_init__(self):
        if self.inputs.shape != self.outputs.shape:
            raise ValueError("inputs and outputs must have identical shapes")
        if self.inputs.shape[1] != len(self.degrees):
            raise ValueError("system width must match the degree sequence length")

    @property
    def n(self):
        return len(self.degrees)


def rollout_system(predict, degrees, alpha, steps, exponents) -> TrajectorySystem:
    """Roll a reverse predictor back from the ending vector, once per
    start-function exponent.

    ``predict(v, exponent_id, step)`` must return the predicted predecessor
    of ``v``. Each rollout contributes steps-1 consecutive pairs.
    """
    if steps < 2:
        raise ValueError("need steps >= 2 to form at least one pair")
    d = np.asarray(degrees, dtype=np.int64)
    fns = start_function_set(exponents)
    inputs, outputs = [], []
    for fid, fn in enumerate(fns):
        vectors = {steps: ending_vector(d, fn, alpha)}
        for j in range(1, steps):
            step = steps - j + 1
            nxt = predict(vectors[step], fid, step)
            if not np.all(np.isfinite(nxt)):
                raise RolloutError(
                    f"non-finite prediction at exponent={fn.exponent} step={step}")
            vectors[steps - j] = nxt
        for j in range(1, steps):
            inputs.append(vectors[j])
            outputs.append(vectors[j + 1])
    return TrajectorySystem(inputs=np.array(inputs), outputs=np.array(outputs),
                            degrees=d, alpha=float(alpha), steps=int(steps),
                            exponents=tuple(int(fn.exponent) for fn in fns))


def generate_trajectories(bundle: CheckpointBundle, degrees, seed=0) -> TrajectorySystem:
    """Generate the trajectory system for one new graph.

    The rollout itself is deterministic; ``seed`` is accepted for interface
    symmetry with the samplers and reserved for stochastic variants.
    """
    del seed
    predict = lambda v, fid, step: forward(bundle.params, v, fid, step, bundle.stats)
    return rollout_system(predict, degrees, bundle.alpha, bundle.steps, bundle.exponents)


def build_diagnostic_system(g: Graph, n_starts, alpha, steps, seed=0) -> TrajectorySystem:
    """True forward walks from random positive starting vectors.

    Bypasses any learned model: every consecutive pair in the system is an
    exact application of the graph's own operator, so solvers can be tested
    for exact recovery. With at least n sufficiently random starting
    vectors the system pins the operator down uniquely.
    """
    rng = np.random.default_rng(seed)
    op = SmoothedOperator(g, alpha)
    inputs, outputs = [], []
    for _ in range(n_starts):
        v = rng.uniform(0.5, 1.5, size=g.n)
        v *= g.n / v.sum()
        for _ in range(steps):
            nxt = op.apply(v)
            inputs.append(v)
            outputs.append(nxt)
            v = nxt
    return TrajectorySystem(inputs=np.array(inputs), outputs=np.array(outputs),
                            degrees=g.degrees.copy(), alpha=float(alpha), steps=int(steps),
                            exponents=())


def forward_system(g: Graph, fns, alpha, steps) -> TrajectorySystem:
    """System made of the graph's own trajectories for the given start
    functions; useful as a solver fixture with a known answer."""
    inputs, outputs = [], []
    for fn in fns:
        traj = build_rwt(g, fn, alpha, steps)
        for j in range(steps):
            inputs.append(traj.vectors[j])
            outputs.append(traj.vectors[j + 1])
    return TrajectorySystem(inputs=np.array(inputs), outputs=np.array(outputs),
                            degrees=g.degrees.copy(), alpha=float(alpha), steps=int(steps),
                            exponents=tuple(int(fn.exponent) for fn in fns))


def dump_system(system: TrajectorySystem, path) -> None:
    """Debug dump of a trajectory system as one JSON document."""
    doc = {
        "degrees": system.degrees.tolist(),
        "alpha": system.alpha,
        "steps": system.steps,
        "exponents": list(system.exponents),
        "inputs": [row.tolist() for row in system.inputs],
        "outputs": [row.tolist() for row in system.outputs],
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")
