"""Realistic degree-sequence generation for new graphs.

Sequences either come from perturbing an observed graph's degrees or from a
parametric model (power law by maximum likelihood, lognormal by log-moment
matching) fitted to a corpus. Every emitted sequence is repaired to have an
even sum, entries in [1, n-1], and to satisfy the Erdos-Gallai condition,
because graph inference imposes the degrees as a hard constraint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, GenerationError
from .graphs import Graph, erdos_gallai_graphical

DEGREE_FAMILIES = ("empirical-perturbed", "power-law", "lognormal")


def _repair_sequence(d, n, rng, parity_pool=None):
    """Clamp, fix parity, and decrement until Erdos-Gallai holds.

    ``parity_pool``: candidate node indices for the +/-1 parity fix
    (defaults to all nodes). Gives up after n repair iterations.
    """
    d = np.clip(np.asarray(d, dtype=np.int64), 1, n - 1)
    if d.sum() % 2 != 0:
        pool = np.asarray(parity_pool if parity_pool is not None and len(parity_pool) else range(n))
        node = int(pool[rng.integers(len(pool))])
        if d[node] >= n - 1:
            d[node] -= 1
        elif d[node] <= 1:
            d[node] += 1
        else:
            d[node] += 1 if rng.random() < 0.5 else -1
    for _ in range(n):
        if erdos_gallai_graphical(d):
            return d
        # shave the two largest entries; keeps the sum even
        for _ in range(2):
            top = int(np.argmax(d))
            if d[top] > 1:
                d[top] -= 1
    if erdos_gallai_graphical(d):
        return d
    raise GenerationError(f"could not repair degree sequence into a graphical one: {d.tolist()}")


def perturb_degrees(g: Graph, flip_fraction=0.1, seed=0):
    """Resample a fraction of node degrees from the graph's own multiset.

    The output keeps the empirical profile but is a novel sequence; it is
    always graphical.
    """
    if not 0.0 <= flip_fraction <= 1.0:
        raise ValueError(f"flip_fraction must be in [0, 1], got {flip_fraction}")
    rng = np.random.default_rng(seed)
    d = g.degrees.copy()
    n_flip = int(np.ceil(flip_fraction * g.n))
    if n_flip == 0:
        return d
    chosen = rng.choice(g.n, size=n_flip, replace=False)
    multiset = g.degrees
    d[chosen] = multiset[rng.integers(0, g.n, size=n_flip)]
    return _repair_sequence(d, g.n, rng, parity_pool=chosen)


@dataclass(frozen=True)
class DegreeModel:
    """Fitted degree-distribution model.

    family: one of DEGREE_FAMILIES
    params: fitted parameters (exponent/x_min or log_mean/log_std)
    source_degrees: pooled degree multiset of the corpus
    """

    family: str
    params: dict
    source_degrees: np.ndarray


def fit_degree_model(graphs, family="empirical-perturbed") -> DegreeModel:
    if family not in DEGREE_FAMILIES:
        raise ValueError(f"unknown degree family {family!r}; options: {DEGREE_FAMILIES}")
    if not graphs:
        raise ValueError("cannot fit a degree model on an empty corpus")
    pooled = np.concatenate([g.degrees for g in graphs]).astype(np.int64)

    if family == "empirical-perturbed":
        params = {}
    elif family == "power-law":
        if pooled.min() == pooled.max():
            raise DegenerateDataError(
                "all corpus degrees are equal; a power law cannot be fitted "
                "(use the empirical-perturbed family instead)")
        x_min = int(pooled.min())
        # discrete MLE with the standard half-step correction
        exponent = 1.0 + len(pooled) / np.log(pooled / (x_min - 0.5)).sum()
        params = {"exponent": float(exponent), "x_min": x_min}
    else:  # lognormal
        logs = np.log(pooled.astype(float))
        params = {"log_mean": float(logs.mean()), "log_std": float(logs.std())}
    return DegreeModel(family=family, params=params, source_degrees=pooled)


def sample_degrees(model: DegreeModel, n, seed=0):
    """Draw a graphical degree sequence of length ``n`` from the model."""
    rng = np.random.default_rng(seed)
    if model.family == "empirical-perturbed":
        d = model.source_degrees[rng.integers(0, len(model.source_degrees), size=n)]
    elif model.family == "power-law":
        exponent, x_min = model.params["exponent"], model.params["x_min"]
        support = np.arange(x_min, n)
        pmf = support.astype(float) ** (-exponent)
        pmf /= pmf.sum()
        d = rng.choice(support, size=n, p=pmf)
    else:
        d = np.rint(np.exp(model.params["log_mean"]
                           + model.params["log_std"] * rng.standard_normal(n)))
    return _repair_sequence(d, n, rng)
