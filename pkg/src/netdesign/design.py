"""Treatment assignment strategies.

``optimize_assignment`` is a simulated-annealing search over 0/1 vectors. It
accepts any callable objective; a :class:`~netdesign.risk.RiskObjective` is
recognized and evaluated incrementally, which is what makes searches on a few
hundred nodes cheap.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.linalg import eigh

from .models import NormalParams
from .risk import Assignment, RiskObjective

BRUTE_FORCE_MAX_N = 20


@dataclass(frozen=True)
class OptimizerConfig:
    """Annealing schedule. ``max_iters=None`` means ``200 * n`` per restart and
    ``init_temperature=None`` means the objective at the random start."""

    max_iters: int | None = None
    n_restarts: int = 5
    init_temperature: float | None = None
    cooling_rate: float = 0.995
    move_mix: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be positive")
        if self.init_temperature is not None and not self.init_temperature > 0:
            raise ValueError("init_temperature must be positive")
        if not 0 < self.cooling_rate < 1:
            raise ValueError("cooling_rate must lie in (0, 1)")
        if not 0 <= self.move_mix <= 1:
            raise ValueError("move_mix must lie in [0, 1]")

    def to_dict(self):
        return {
            "max_iters": self.max_iters,
            "n_restarts": self.n_restarts,
            "init_temperature": self.init_temperature,
            "cooling_rate": self.cooling_rate,
            "move_mix": self.move_mix,
            "seed": self.seed,
        }


@dataclass
class DesignResult:
    assignment: Assignment
    objective: float
    trace: list = field(default_factory=list)
    gamma: np.ndarray | None = None


@dataclass(frozen=True)
class PointPriorGrid:
    params_list: tuple
    weights: tuple

    def __post_init__(self):
        params = tuple(self.params_list)
        weights = tuple(float(w) for w in self.weights)
        if not params:
            raise ValueError("point-prior grid needs at least one parameter set")
        if len(weights) != len(params):
            raise ValueError("one weight per parameter set is required")
        if any(w < 0 for w in weights) or not any(w > 0 for w in weights):
            raise ValueError("weights must be non-negative with at least one positive")
        object.__setattr__(self, "params_list", params)
        object.__setattr__(self, "weights", weights)


# ---------------------------------------------------------------- baselines


def _balanced_z(n, rng):
    z = np.zeros(n, dtype=np.int8)
    z[rng.choice(n, n // 2, replace=False)] = 1
    return z


def randomized_balanced(n, rng):
    """Uniform draw among assignments with ``floor(n/2)`` treated units."""
    if n < 2:
        raise ValueError(f"need at least 2 units, got {n}")
    return Assignment(_balanced_z(n, rng))


def spectral_clusters(net, k, rng):
    """Cluster labels from the symmetric normalized Laplacian embedding.

    Nodes are embedded with the ``k`` eigenvectors of smallest eigenvalue and
    grouped with k-means (k-means++ seeding, 10 restarts). Isolated nodes are
    pinned to the origin of the embedding.
    """
    from sklearn.cluster import KMeans

    k = int(k)
    if k < 2 or k > net.n / 2:
        raise ValueError(f"k_clusters must satisfy 2 <= k <= n/2, got k={k}, n={net.n}")
    adj = net.adjacency.astype(float)
    deg = adj.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    inv_sqrt[deg > 0] = 1.0 / np.sqrt(deg[deg > 0])
    lap = np.eye(net.n) - inv_sqrt[:, None] * adj * inv_sqrt[None, :]
    _, vecs = eigh(lap, subset_by_index=[0, k - 1])
    emb = vecs.copy()
    emb[deg == 0] = 0.0
    seed = int(rng.integers(2**31 - 1))
    with warnings.catch_warnings():
        # fewer distinct embedding points than clusters is legitimate here
        warnings.simplefilter("ignore")
        km = KMeans(n_clusters=k, init="k-means++", n_init=10, random_state=seed)
        labels = km.fit_predict(emb)
    return labels.astype(np.int64)


def stratified_assignment(labels, rng):
    """Balanced randomization inside each stratum.

    Odd strata give their extra unit to treatment or control by a fair coin.
    Degenerate outcomes (only possible with singleton strata) are redrawn.
    """
    labels = np.asarray(labels)
    n = len(labels)
    strata = [np.flatnonzero(labels == c) for c in np.unique(labels)]
    while True:
        z = np.zeros(n, dtype=np.int8)
        for members in strata:
            size = len(members)
            n_treat = size // 2 + (size % 2) * int(rng.integers(2))
            z[rng.choice(members, n_treat, replace=False)] = 1
        if 0 < z.sum() < n:
            return Assignment(z)


def stratified_spectral(net, k_clusters, rng):
    return stratified_assignment(spectral_clusters(net, k_clusters, rng), rng)


# ---------------------------------------------------------------- annealing


@njit(cache=True)
def _risk_value(n, n1, quad, row_t, size_t, var_t, coefs):
    bias_coef, net_coef, gram_total, size_total, var_total = coefs
    n0 = n - n1
    delta = size_t / n1 - (size_total - size_t) / n0
    q = (
        quad / (n1 * n1)
        + (gram_total - 2.0 * row_t + quad) / (n0 * n0)
        - 2.0 * (row_t - quad) / (n1 * n0)
    )
    d = var_t / (n1 * n1) + (var_total - var_t) / (n0 * n0)
    return bias_coef * delta * delta + net_coef * q + d


@njit(cache=True)
def _anneal_kernel(gram, rows, sizes, dvar, coefs, z, temp, mix, cool, draws):
    """Annealing on the running sums ``z'Gz``, ``r'z``, ``N'z`` and ``d'z``.

    ``z`` is modified in place. A negative ``temp`` starts at the objective
    of ``z``. Returns the best vector and the (iteration, best) trace.
    """
    n = z.shape[0]
    treated = np.empty(n, np.int64)
    control = np.empty(n, np.int64)
    pos = np.empty(n, np.int64)
    n1 = 0
    n0 = 0
    for v in range(n):
        if z[v] == 1:
            treated[n1] = v
            pos[v] = n1
            n1 += 1
        else:
            control[n0] = v
            pos[v] = n0
            n0 += 1
    g = np.zeros(n)
    row_t = 0.0
    size_t = 0.0
    var_t = 0.0
    for v in range(n):
        if z[v] == 1:
            for u in range(n):
                g[u] += gram[u, v]
            row_t += rows[v]
            size_t += sizes[v]
            var_t += dvar[v]
    quad = 0.0
    for v in range(n):
        if z[v] == 1:
            quad += g[v]

    cur = _risk_value(n, n1, quad, row_t, size_t, var_t, coefs)
    if temp < 0.0:
        temp = cur
    best = cur
    best_z = z.copy()
    trace_it = [0]
    trace_val = [best]
    for it in range(draws.shape[0]):
        u0 = draws[it, 0]
        u1 = draws[it, 1]
        u2 = draws[it, 2]
        u3 = draws[it, 3]
        swap = u0 < mix
        i = -1
        j = -1
        k = -1
        if swap:
            i = treated[int(u1 * n1)]
            j = control[int(u2 * n0)]
            nq = quad - 2.0 * g[i] + gram[i, i] + 2.0 * g[j] + gram[j, j] - 2.0 * gram[i, j]
            nr = row_t - rows[i] + rows[j]
            ns = size_t - sizes[i] + sizes[j]
            nv = var_t - dvar[i] + dvar[j]
            nn1 = n1
        else:
            k = int(u1 * n)
            if z[k] == 1:
                if n1 == 1:
                    temp *= cool
                    continue
                nq = quad - 2.0 * g[k] + gram[k, k]
                nr = row_t - rows[k]
                ns = size_t - sizes[k]
                nv = var_t - dvar[k]
                nn1 = n1 - 1
            else:
                if n0 == 1:
                    temp *= cool
                    continue
                nq = quad + 2.0 * g[k] + gram[k, k]
                nr = row_t + rows[k]
                ns = size_t + sizes[k]
                nv = var_t + dvar[k]
                nn1 = n1 + 1
        cand = _risk_value(n, nn1, nq, nr, ns, nv, coefs)
        diff = cand - cur
        if diff <= 0.0 or (temp > 0.0 and u3 < math.exp(-diff / temp)):
            if swap:
                ia = pos[i]
                ib = pos[j]
                treated[ia] = j
                control[ib] = i
                pos[j] = ia
                pos[i] = ib
                z[i] = 0
                z[j] = 1
                for u in range(n):
                    g[u] += gram[u, j] - gram[u, i]
            elif z[k] == 1:
                ia = pos[k]
                n1 -= 1
                last = treated[n1]
                treated[ia] = last
                pos[last] = ia
                control[n0] = k
                pos[k] = n0
                n0 += 1
                z[k] = 0
                for u in range(n):
                    g[u] -= gram[u, k]
            else:
                ia = pos[k]
                n0 -= 1
                last = control[n0]
                control[ia] = last
                pos[last] = ia
                treated[n1] = k
                pos[k] = n1
                n1 += 1
                z[k] = 1
                for u in range(n):
                    g[u] += gram[u, k]
            quad = nq
            row_t = nr
            size_t = ns
            var_t = nv
            cur = cand
            if cur < best:
                best = cur
                best_z[:] = z
                trace_it.append(it + 1)
                trace_val.append(best)
        temp *= cool
    return best_z, trace_it, trace_val


def _anneal_risk(obj, n, iters, temp0, cfg, rng):
    z = _balanced_z(n, rng)
    draws = rng.random((iters, 4))
    coefs = np.array(
        [obj.bias_coef, obj.net_coef, obj.gram_total, obj.size_total, obj.var_total]
    )
    best_z, its, vals = _anneal_kernel(
        obj.gram, obj.row_sums, obj.sizes, obj.unit_var, coefs, z,
        -1.0 if temp0 is None else float(temp0), cfg.move_mix, cfg.cooling_rate, draws,
    )
    return best_z, list(zip(list(its), list(vals)))


def _anneal_generic(objective, n, iters, temp0, cfg, rng):
    z = _balanced_z(n, rng)
    cur = float(objective(Assignment(z)))
    temp = temp0 if temp0 is not None else cur
    best, best_z = cur, z.copy()
    trace = [(0, best)]
    draws = rng.random((iters, 4))
    for it in range(iters):
        u0, u1, u2, u3 = draws[it]
        n1 = int(z.sum())
        cand_z = z.copy()
        if u0 < cfg.move_mix:
            treated = np.flatnonzero(z)
            control = np.flatnonzero(z == 0)
            cand_z[treated[int(u1 * len(treated))]] = 0
            cand_z[control[int(u2 * len(control))]] = 1
        else:
            k = int(u1 * n)
            if (z[k] and n1 == 1) or (not z[k] and n1 == n - 1):
                temp *= cfg.cooling_rate
                continue
            cand_z[k] = 1 - z[k]
        cand = float(objective(Assignment(cand_z)))
        diff = cand - cur
        if diff <= 0.0 or (temp > 0.0 and u3 < math.exp(-diff / temp)):
            z, cur = cand_z, cand
            if cur < best:
                best, best_z = cur, z.copy()
                trace.append((it + 1, best))
        temp *= cfg.cooling_rate
    return best_z, trace


def optimize_assignment(objective, n, cfg=None):
    """Minimize ``objective`` over non-degenerate assignments of ``n`` units.

    Runs ``cfg.n_restarts`` independent annealing chains from random balanced
    starts, mixing treated/control swaps with single flips, and returns the
    best assignment by ``(objective, z)``. The trace holds the running best
    across chains against a global iteration count.
    """
    cfg = cfg or OptimizerConfig()
    if n < 2:
        raise ValueError("need at least 2 units")
    iters = cfg.max_iters if cfg.max_iters is not None else 200 * n
    fast = isinstance(objective, RiskObjective)
    if fast and objective.net.n != n:
        raise ValueError("objective network size does not match n")
    run = _anneal_risk if fast else _anneal_generic
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.n_restarts)

    candidates = []
    trace = []
    running = math.inf
    for r, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        z, chain_trace = run(objective, n, iters, cfg.init_temperature, cfg, rng)
        a = Assignment(z)
        candidates.append((float(objective(a)), a.key(), a))
        for it, val in chain_trace:
            if val < running:
                running = val
                trace.append((r * iters + it, val))
    value, _, best = min(candidates, key=lambda c: (c[0], c[1]))
    if trace and value < trace[-1][1]:
        trace.append((cfg.n_restarts * iters, value))
    return DesignResult(assignment=best, objective=value, trace=trace)


def _enumerate(n, start, stop):
    codes = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def brute_force(objective, n, chunk=1 << 16):
    """Exact minimum over all ``2**n - 2`` non-degenerate assignments.

    Ties go to the smallest binary encoding of ``z`` with ``z[0]`` as the most
    significant bit.
    """
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force is capped at n={BRUTE_FORCE_MAX_N}, got n={n}")
    if n < 2:
        raise ValueError("need at least 2 units")
    last = (1 << n) - 1
    best_val, best_code = math.inf, None
    if isinstance(objective, RiskObjective):
        for start in range(1, last, chunk):
            stop = min(start + chunk, last)
            vals = objective.batch(_enumerate(n, start, stop))
            idx = int(np.argmin(vals))
            if vals[idx] < best_val:
                best_val, best_code = float(vals[idx]), start + idx
    else:
        for code in range(1, last):
            val = float(objective(Assignment(_enumerate(n, code, code + 1)[0])))
            if val < best_val:
                best_val, best_code = val, code
    a = Assignment(_enumerate(n, best_code, best_code + 1)[0])
    return DesignResult(assignment=a, objective=float(objective(a)))


def point_prior_design(grid, net, cfg=None):
    """Design from a finite set of parameter points.

    Each point's MSE is minimized separately (all searches share ``cfg``),
    every resulting design is scored under every point, and the design with
    the smallest prior-weighted loss wins. ``objective`` is that loss with
    weights normalized to sum to one; ``gamma[i, j]`` is the MSE of design i
    under point j.
    """
    cfg = cfg or OptimizerConfig()
    objectives = [RiskObjective.normal(p, net) for p in grid.params_list]
    designs = [optimize_assignment(obj, net.n, cfg).assignment for obj in objectives]
    gamma = np.array([[obj(z) for obj in objectives] for z in designs])
    weights = np.asarray(grid.weights) / np.sum(grid.weights)
    losses = gamma @ weights
    win = int(np.argmin(losses))
    trace = [(i, float(loss)) for i, loss in enumerate(losses)]
    return DesignResult(
        assignment=designs[win], objective=float(losses[win]), trace=trace, gamma=gamma
    )


def grid_from_dicts(params, weights=None):
    plist = tuple(NormalParams(float(p["mu"]), float(p["sigma2"]), float(p["gamma2"])) for p in params)
    if weights is None:
        weights = [1.0] * len(plist)
    return PointPriorGrid(plist, tuple(weights))
