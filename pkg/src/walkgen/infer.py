"""Recover a graph from a trajectory system.

The fit of a candidate adjacency A to a system (V_in, V_out) is the
entrywise L1 norm of

    X = V_in @ D'^{-1/2} ((1-alpha) A + alpha I) D'^{-1/2} - V_out,

where D' holds the smoothed target degrees. Small instances are solved to
global optimality by branch-and-bound over the upper triangle; larger ones
by a box-projected first-order method on the Huber-smoothed objective with
a quadratic degree penalty, followed by degree-aware threshold rounding.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleDegreesError, SolverScopeError
from .graphs import Graph, connected_components, erdos_gallai_graphical, is_connected
from .trajectories import TrajectorySystem, smoothed


@dataclass(frozen=True)
class WeightedAdjacency:
    """Symmetric relaxed adjacency with entries in [0, 1] and zero diagonal."""

    matrix: np.ndarray

    def __post_init__(self):
        a = self.matrix
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        if np.abs(a - a.T).max() > 1e-12:
            raise ValueError("matrix must be symmetric")
        if np.abs(np.diag(a)).max() > 0:
            raise ValueError("matrix must have a zero diagonal")
        if a.min() < -1e-12 or a.max() > 1 + 1e-12:
            raise ValueError("entries must lie in [0, 1]")

    @property
    def n(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 4000
    learning_rate: float = 0.05
    degree_penalty: float = 30.0
    huber_delta: float = 1e-3
    tolerance: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        for name in ("max_iters", "learning_rate", "huber_delta", "tolerance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.degree_penalty < 0:
            raise ValueError("degree_penalty must be non-negative")


@dataclass(frozen=True)
class RoundingResult:
    graph: Graph
    a_star: float
    b_star: float
    degree_error: float  # mean relative degree deviation at the chosen thresholds


def _as_matrix(adjacency, n):
    if isinstance(adjacency, Graph):
        if adjacency.n != n:
            raise ValueError(f"graph has {adjacency.n} nodes, system expects {n}")
        return adjacency.adjacency_matrix()
    if isinstance(adjacency, WeightedAdjacency):
        a = adjacency.matrix
    else:
        a = np.asarray(adjacency, dtype=float)
    if a.shape != (n, n):
        raise ValueError(f"adjacency shape {a.shape} does not match system size {n}")
    return a


def residual_objective(adjacency, system: TrajectorySystem) -> float:
    """Entrywise L1 residual of the system at the given adjacency.

    The degree scaling always comes from the system's target degrees, even
    if the candidate's realized degrees differ.
    """
    n = system.n
    a = _as_matrix(adjacency, n)
    dp = smoothed(system.degrees, system.alpha)
    inv_root = 1.0 / np.sqrt(dp)
    conj = np.outer(inv_root, inv_root)
    op = conj * ((1.0 - system.alpha) * a + system.alpha * np.eye(n))
    return float(np.abs(system.inputs @ op - system.outputs).sum())


def _lstsq_upper_triangle(system: TrajectorySystem, max_iters=None):
    """Least-squares fit of the system over symmetric zero-diagonal
    adjacencies, by conjugate gradient on the normal equations.

    The symmetry coupling between columns is what makes this solution much
    closer to a real graph than per-column pseudo-inverses, so it is the
    natural warm start for the box-constrained solve.
    """
    n = system.n
    alpha = system.alpha
    dp = smoothed(system.degrees, alpha)
    inv_root = 1.0 / np.sqrt(dp)
    w = system.inputs * inv_root
    y = system.outputs - alpha * (system.inputs / dp)
    iu = np.triu_indices(n, k=1)

    def apply(vec):
        a = np.zeros((n, n))
        a[iu] = vec
        a += a.T
        return (1.0 - alpha) * (w @ a) * inv_root[None, :]

    def apply_t(resid):
        g = (1.0 - alpha) * (w.T @ (resid * inv_root[None, :]))
        g = g + g.T
        return g[iu]

    if max_iters is None:
        max_iters = 20 * n
    b = apply_t(y)
    x = np.zeros(iu[0].size)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    b_norm = np.sqrt(rs)
    for _ in range(max_iters):
        if np.sqrt(rs) <= 1e-10 * max(b_norm, 1e-30):
            break
        ap = apply_t(apply(p))
        denom = float(p @ ap)
        if denom <= 0:
            break
        step = rs / denom
        x += step * p
        r -= step * ap
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x, iu


def solve_convex(system: TrajectorySystem, opts: SolveOptions = SolveOptions(),
                 telemetry_path=None) -> WeightedAdjacency:
    """Box-projected first-order descent on the smoothed residual.

    Works on the upper-triangle parameterization (symmetry and zero trace
    hold by construction); target degrees enter as a quadratic penalty.
    The solve warm-starts from the symmetric least-squares fit and anneals
    the Huber width and penalty weight toward their configured values, then
    finishes on the configured objective with backtracking steps, so the
    objective is non-increasing across accepted iterates; the best iterate
    under the configured objective is returned.
    """
    n = system.n
    if n < 2:
        raise ValueError("need at least two nodes")
    degrees = system.degrees.astype(float)
    dp = smoothed(system.degrees, system.alpha)
    inv_root = 1.0 / np.sqrt(dp)
    conj = np.outer(inv_root, inv_root)
    v_in, v_out = system.inputs, system.outputs
    base = system.alpha * (v_in * (1.0 / dp)) - v_out  # contribution of the diagonal
    coef = (1.0 - system.alpha) * conj

    x, iu = _lstsq_upper_triangle(system)
    x = np.clip(x, 0.0, 1.0)

    def unpack(vec):
        a = np.zeros((n, n))
        a[iu] = vec
        return a + a.T

    def objective_grad(vec, delta, penalty):
        a = unpack(vec)
        resid = v_in @ (coef * a) + base
        ax = np.abs(resid)
        fit = float(np.where(ax <= delta, resid * resid / (2.0 * delta),
                             ax - delta / 2.0).sum())
        gmat = coef * (v_in.T @ np.clip(resid / delta, -1.0, 1.0))
        row_err = a.sum(axis=1) - degrees
        pen = float(penalty * (row_err @ row_err))
        gpen = 2.0 * penalty * (row_err[:, None] + row_err[None, :])
        grad_full = gmat + gmat.T + gpen
        return fit + pen, grad_full[iu]

    # annealing schedule ending exactly at the configured objective
    deltas = sorted({max(opts.huber_delta, 1e-2), max(opts.huber_delta, 1e-3),
                     opts.huber_delta}, reverse=True)
    phases = [(d, opts.degree_penalty * (0.3 if i + 1 < len(deltas) else 1.0))
              for i, d in enumerate(deltas)]
    warm_iters = opts.max_iters // (2 * max(len(phases) - 1, 1)) if len(phases) > 1 else 0
    final_iters = opts.max_iters - warm_iters * (len(phases) - 1)

    telemetry = open(telemetry_path, "w", encoding="ascii") if telemetry_path else None
    try:
        best_x, best_obj = None, np.inf
        lr = opts.learning_rate
        for phase, (delta, penalty) in enumerate(phases):
            is_final = phase == len(phases) - 1
            budget = final_iters if is_final else warm_iters
            obj, grad = objective_grad(x, delta, penalty)
            if is_final:
                best_x, best_obj = x.copy(), obj
            for it in range(budget):
                accepted = False
                for _ in range(50):
                    cand = np.clip(x - lr * grad, 0.0, 1.0)
                    cand_obj, cand_grad = objective_grad(cand, delta, penalty)
                    if cand_obj <= obj and np.isfinite(cand_obj):
                        accepted = True
                        break
                    lr *= 0.5
                    if lr < 1e-16:
                        break
                if not accepted:
                    break
                rel_change = abs(obj - cand_obj) / max(abs(obj), 1e-30)
                x, obj, grad = cand, cand_obj, cand_grad
                lr *= 1.2
                if is_final and obj < best_obj:
                    best_obj, best_x = obj, x.copy()
                if telemetry is not None:
                    a = unpack(x)
                    viol = float(np.abs(a.sum(axis=1) - degrees).sum())
                    telemetry.write(json.dumps({"iter": it, "phase": phase,
                                                "objective": obj,
                                                "degree_violation": viol}) + "\n")
                if rel_change < opts.tolerance:
                    break
        if best_x is None:
            best_x = x
    finally:
        if telemetry is not None:
            telemetry.close()
    return WeightedAdjacency(matrix=unpack(best_x))


def round_weighted(weighted: WeightedAdjacency, degrees) -> RoundingResult:
    """Threshold a relaxed adjacency so node degrees come out right.

    Grid-searches a base threshold and a log-degree tilt; scores each
    candidate by the mean relative row-degree error of the raw (possibly
    asymmetric) indicator. The returned graph keeps edge (i, j) only when
    the indicator fires in both directions, which restores symmetry. Ties
    break toward the smaller base threshold, then the smaller tilt.
    """
    d = np.asarray(degrees, dtype=np.int64)
    if np.any(d < 1):
        raise ValueError("degrees must be >= 1")
    a = weighted.matrix
    n = a.shape[0]
    if np.abs(a).max() == 0.0:
        return RoundingResult(graph=Graph(n, []), a_star=0.0, b_star=0.0, degree_error=1.0)

    log_d = np.log(d.astype(float))
    offdiag = ~np.eye(n, dtype=bool)
    best = (np.inf, 0.0, 0.0)
    for base in np.linspace(a.min(), a.max(), 50):
        for tilt in np.linspace(-0.5, 0.5, 21):
            fired = (a > (base + tilt * log_d)[:, None]) & offdiag
            err = float(np.abs(fired.sum(axis=1) / d - 1.0).mean())
            if err < best[0]:
                best = (err, float(base), float(tilt))
    err, a_star, b_star = best
    fired = (a > (a_star + b_star * log_d)[:, None]) & offdiag
    keep = fired & fired.T
    ui, uj = np.nonzero(np.triu(keep, 1))
    graph = Graph(n, list(zip(ui.tolist(), uj.tolist())))
    return RoundingResult(graph=graph, a_star=a_star, b_star=b_star, degree_error=err)


def solve_exact(system: TrajectorySystem, n_limit: int = 12) -> Graph:
    """Globally optimal graph for the L1 residual, by branch-and-bound.

    Upper-triangle entries are decided in row-major order. Pruning uses
    (a) per-node degree feasibility against the remaining undecided slots,
    (b) the accumulated exact residual of columns that are fully decided,
    and (c) an admissible bound on the current column: with the trajectory
    inputs positive, the undecided entries of a column can only add mass,
    so per system row the reachable residual values form an interval whose
    closest-to-zero point lower-bounds the eventual cost. A least-squares
    hint orders the value choices so good incumbents appear early.
    """
    n = system.n
    if n > n_limit:
        raise SolverScopeError(
            f"exact solver capped at n={n_limit} (got n={n}); use solve_convex")
    d = system.degrees.astype(np.int64)
    if not erdos_gallai_graphical(d):
        raise InfeasibleDegreesError(f"degree sequence {d.tolist()} is not graphical")

    alpha = system.alpha
    dp = smoothed(d, alpha)
    inv_root = 1.0 / np.sqrt(dp)
    w_scaled = system.inputs * inv_root  # column j pre-scaled by D'^{-1/2}
    const = alpha * (system.inputs / dp) - system.outputs
    col_fac = (1.0 - alpha) * inv_root
    rows = w_scaled.shape[0]
    positive_inputs = bool(np.all(w_scaled > 0))

    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]

    # prefix sums of each row's suffix, sorted: smallest/largest k-sums of
    # W over the still-undecided tail {s..n-1} in O(1) per query
    suffix_prefix = np.zeros((rows, n + 1, n + 1))
    for s in range(n + 1):
        tail = np.sort(w_scaled[:, s:], axis=1)
        suffix_prefix[:, s, 1:n - s + 1] = np.cumsum(tail, axis=1)

    # least-squares hint: back out a relaxed adjacency from V_in M ~ V_out
    m_hat, *_ = np.linalg.lstsq(system.inputs, system.outputs, rcond=None)
    a_hat = (np.sqrt(dp)[:, None] * m_hat * np.sqrt(dp)[None, :]
             - alpha * np.eye(n)) / (1.0 - alpha)
    a_hat = 0.5 * (a_hat + a_hat.T)
    hints = [1 if a_hat[u, v] > 0.5 else 0 for u, v in pairs]

    adj = np.zeros((n, n), dtype=bool)
    deg = np.zeros(n, dtype=np.int64)
    rem = np.full(n, n - 1, dtype=np.int64)
    state = {"best_obj": np.inf, "best_edges": None}

    def column_cost(u):
        ones = np.nonzero(adj[:, u])[0]
        resid = const[:, u].copy()
        if ones.size:
            resid += col_fac[u] * w_scaled[:, ones].sum(axis=1)
        return float(np.abs(resid).sum())

    def column_bound(u, s):
        """Admissible lower bound on column u's final cost while its
        entries (u, s..n-1) are still undecided (valid inside row u, where
        those are exactly the undecided slots of node u)."""
        if not positive_inputs:
            return 0.0
        need = int(d[u] - deg[u])
        width = n - s
        partial = const[:, u] + col_fac[u] * (w_scaled * adj[:, u]).sum(axis=1)
        if need <= 0:
            lo = hi = partial
        else:
            low_sum = suffix_prefix[:, s, need]
            high_sum = suffix_prefix[:, s, width] - suffix_prefix[:, s, width - need]
            lo = partial + col_fac[u] * low_sum
            hi = partial + col_fac[u] * high_sum
        closest = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(np.abs(lo), np.abs(hi)))
        return float(closest.sum())

    def search(idx, bound):
        if idx == len(pairs):
            if bound < state["best_obj"]:
                state["best_obj"] = bound
                ui, uj = np.nonzero(np.triu(adj, 1))
                state["best_edges"] = list(zip(ui.tolist(), uj.tolist()))
            return
        u, v = pairs[idx]
        for val in (hints[idx], 1 - hints[idx]):
            du, dv = deg[u] + val, deg[v] + val
            ru, rv = rem[u] - 1, rem[v] - 1
            if du > d[u] or dv > d[v] or du + ru < d[u] or dv + rv < d[v]:
                continue
            adj[u, v] = adj[v, u] = bool(val)
            deg[u], deg[v] = du, dv
            rem[u], rem[v] = ru, rv
            added = 0.0
            if v == n - 1:
                added += column_cost(u)
                if u == n - 2:
                    added += column_cost(n - 1)
                lookahead = 0.0
            else:
                lookahead = max(column_bound(u, v + 1) - 1e-9, 0.0)
            if bound + added + lookahead < state["best_obj"]:
                search(idx + 1, bound + added)
            adj[u, v] = adj[v, u] = False
            deg[u] -= val
            deg[v] -= val
            rem[u] += 1
            rem[v] += 1

    search(0, 0.0)
    if state["best_edges"] is None:
        raise InfeasibleDegreesError("no graph satisfies the degree constraints")
    return Graph(n, state["best_edges"])


def dump_weighted(weighted: WeightedAdjacency, path) -> None:
    """Debug dump of a relaxed adjacency: upper triangle in row-major order."""
    n = weighted.n
    iu = np.triu_indices(n, k=1)
    doc = {"n": n, "upper_triangle": weighted.matrix[iu].tolist()}
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def repair_connectivity(g: Graph, seed=0) -> Graph:
    """Join components with degree-preserving double-edge swaps.

    Picks an edge from two different components and rewires across them,
    which merges the components without touching any degree. Gives up
    after 10n failed attempts and returns the input unchanged (with a
    warning), since some degree sequences admit no connected realization.
    """
    if is_connected(g):
        return g
    rng = np.random.default_rng(seed)
    edge_set = set(g.edges)
    attempts = 10 * g.n
    current = g
    for _ in range(attempts):
        labels = connected_components(current)
        if labels.max() == 0:
            return current
        by_comp = {}
        for e in edge_set:
            by_comp.setdefault(labels[e[0]], []).append(e)
        comps = sorted(by_comp)
        if len(comps) < 2:
            break
        ca, cb = rng.choice(comps, size=2, replace=False)
        ea = by_comp[ca][rng.integers(len(by_comp[ca]))]
        eb = by_comp[cb][rng.integers(len(by_comp[cb]))]
        a, b = ea
        c, dd = eb
        if rng.random() < 0.5:
            c, dd = dd, c
        e1 = (min(a, c), max(a, c))
        e2 = (min(b, dd), max(b, dd))
        if e1 in edge_set or e2 in edge_set:
            continue
        edge_set.discard(ea)
        edge_set.discard(eb)
        edge_set.add(e1)
        edge_set.add(e2)
        current = Graph(g.n, sorted(edge_set))
        if is_connected(current):
            return current
    warnings.warn("connectivity repair failed; returning the graph unchanged")
    return g
