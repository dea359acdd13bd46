"""Undirected networks, the closed-neighborhood algebra, and random generators."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

FAMILIES = ("erdos-renyi", "small-world", "power-law", "sbm")

FAMILY_ALIASES = {
    "er": "erdos-renyi",
    "erdos-renyi": "erdos-renyi",
    "sw": "small-world",
    "small-world": "small-world",
    "pl": "power-law",
    "power-law": "power-law",
    "ba": "power-law",
    "sbm": "sbm",
}


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=True)
class Network:
    """Simple undirected graph on nodes ``0..n-1``.

    ``edges`` is a sorted tuple of ``(i, j)`` pairs with ``i < j``. Build it
    through :func:`from_edge_list` rather than directly.
    """

    n: int
    edges: tuple

    @cached_property
    def adjacency(self):
        a = np.zeros((self.n, self.n), dtype=np.int64)
        if self.edges:
            idx = np.asarray(self.edges, dtype=np.int64)
            a[idx[:, 0], idx[:, 1]] = 1
            a[idx[:, 1], idx[:, 0]] = 1
        return _readonly(a)

    @cached_property
    def degrees(self):
        return _readonly(self.adjacency.sum(axis=1))

    @cached_property
    def augmented(self):
        return augmented_adjacency(self)

    @cached_property
    def sizes(self):
        return neighborhood_sizes(self)

    @cached_property
    def gram(self):
        return gram_matrix(self.augmented)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def mean_degree(self):
        return 2.0 * len(self.edges) / self.n


def from_edge_list(n, pairs):
    """Validate and normalize an edge list into a :class:`Network`."""
    n = int(n)
    if n < 2:
        raise ValueError(f"network needs at least 2 nodes, got n={n}")
    norm = set()
    for pair in pairs:
        i, j = (int(v) for v in pair)
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) has an index outside [0, {n})")
        if i == j:
            raise ValueError(f"self-pair ({i}, {i}) supplied; self-loops are implicit")
        norm.add((min(i, j), max(i, j)))
    return Network(n, tuple(sorted(norm)))


def augmented_adjacency(net):
    """Adjacency plus identity, ``A = A* + I``."""
    a = net.adjacency + np.eye(net.n, dtype=np.int64)
    return _readonly(a)


def neighborhood_sizes(net):
    """Closed-neighborhood sizes, ``1 + degree``."""
    return _readonly(net.degrees + 1)


def gram_matrix(adj):
    """``A'A``; entry (i, j) counts the closed neighbors shared by i and j."""
    adj = np.asarray(adj, dtype=np.int64)
    return _readonly(adj.T @ adj)


# ---------------------------------------------------------------- generators


def _rng(seed):
    return np.random.default_rng(seed)


def _from_upper_mask(n, mask):
    i, j = np.nonzero(np.triu(mask, k=1))
    return Network(n, tuple(zip(i.tolist(), j.tolist())))


def gen_erdos_renyi(n, p, seed=None):
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability p must lie in [0, 1], got {p}")
    u = _rng(seed).random((n, n))
    return _from_upper_mask(n, u < p)


def gen_small_world(n, k, beta, seed=None):
    """Ring lattice of even degree ``k`` with each edge rewired w.p. ``beta``.

    Edges are visited in lattice order ``(i, i + s)`` for ``s = 1..k/2``. A
    rewire moves the far endpoint to a uniform node; draws that would create a
    self-loop or a duplicate edge are rejected and the edge is kept.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if k < 0 or k % 2 or k >= n:
        raise ValueError(f"ring degree k must be even with 0 <= k < n, got k={k}, n={n}")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"rewire probability beta must lie in [0, 1], got {beta}")
    rng = _rng(seed)
    nbrs = [set() for _ in range(n)]
    lattice = []
    for s in range(1, k // 2 + 1):
        for i in range(n):
            j = (i + s) % n
            nbrs[i].add(j)
            nbrs[j].add(i)
            lattice.append((i, j))
    for i, j in lattice:
        if rng.random() >= beta:
            continue
        w = int(rng.integers(n))
        if w == i or w in nbrs[i]:
            continue
        nbrs[i].discard(j)
        nbrs[j].discard(i)
        nbrs[i].add(w)
        nbrs[w].add(i)
    pairs = [(i, j) for i in range(n) for j in nbrs[i] if i < j]
    return Network(n, tuple(sorted(pairs)))


def gen_power_law(n, m, seed=None):
    """Preferential attachment: start from an ``m``-clique, each new node
    attaches to ``m`` distinct existing nodes with probability proportional to
    degree."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if n <= m or n < 2:
        raise ValueError(f"n must exceed m (and be >= 2), got n={n}, m={m}")
    rng = _rng(seed)
    deg = np.zeros(n, dtype=np.float64)
    pairs = []
    for i in range(m):
        for j in range(i + 1, m):
            pairs.append((i, j))
    deg[:m] = m - 1
    for v in range(m, n):
        w = deg[:v]
        total = w.sum()
        p = w / total if total > 0 else None
        targets = rng.choice(v, size=m, replace=False, p=p)
        for t in targets.tolist():
            pairs.append((t, v))
            deg[t] += 1
        deg[v] = m
    return Network(n, tuple(sorted(pairs)))


def gen_sbm(block_sizes, link_probs, seed=None):
    """Stochastic blockmodel with consecutive node blocks."""
    sizes = [int(b) for b in block_sizes]
    if not sizes or any(b < 1 for b in sizes):
        raise ValueError(f"block sizes must be positive, got {block_sizes}")
    probs = np.asarray(link_probs, dtype=float)
    k = len(sizes)
    if probs.shape != (k, k):
        raise ValueError(f"link_probs must be {k}x{k}, got shape {probs.shape}")
    if not np.allclose(probs, probs.T):
        raise ValueError("link_probs must be symmetric")
    if np.any(probs < 0) or np.any(probs > 1):
        raise ValueError("link probabilities must lie in [0, 1]")
    n = sum(sizes)
    if n < 2:
        raise ValueError("SBM needs at least 2 nodes")
    block = np.repeat(np.arange(k), sizes)
    pmat = probs[block][:, block]
    u = _rng(seed).random((n, n))
    return _from_upper_mask(n, u < pmat)


DEFAULT_FAMILY_PARAMS = {
    "erdos-renyi": {"mean_degree": 5.0},
    "small-world": {"k": 4, "beta": 0.1},
    "power-law": {"m": 2},
    "sbm": {"n_blocks": 4, "p_in": 0.15, "p_out": 0.01},
}


def generate(family, n, params=None, seed=None):
    """Generate a network by family name with size-relative defaults.

    ``erdos-renyi`` takes ``p`` or ``mean_degree``; ``sbm`` takes either
    ``block_sizes``/``link_probs`` or ``n_blocks``/``p_in``/``p_out`` (equal
    blocks).
    """
    family = FAMILY_ALIASES.get(family, family)
    if family not in FAMILIES:
        raise ValueError(f"unknown network family {family!r}; expected one of {FAMILIES}")
    p = dict(DEFAULT_FAMILY_PARAMS[family])
    if params:
        if family == "erdos-renyi" and "p" in params:
            p.pop("mean_degree", None)
        if family == "sbm" and "block_sizes" in params:
            p = {}
        p.update(params)
    if family == "erdos-renyi":
        prob = p["p"] if "p" in p else p["mean_degree"] / (n - 1)
        return gen_erdos_renyi(n, prob, seed)
    if family == "small-world":
        return gen_small_world(n, int(p["k"]), float(p["beta"]), seed)
    if family == "power-law":
        return gen_power_law(n, int(p["m"]), seed)
    if "block_sizes" in p:
        return gen_sbm(p["block_sizes"], p["link_probs"], seed)
    nb = int(p["n_blocks"])
    if nb < 1 or nb > n:
        raise ValueError(f"n_blocks must lie in [1, n], got {nb}")
    sizes = [n // nb + (1 if b < n % nb else 0) for b in range(nb)]
    probs = np.full((nb, nb), float(p["p_out"]))
    np.fill_diagonal(probs, float(p["p_in"]))
    return gen_sbm(sizes, probs, seed)


# ---------------------------------------------------------------- file I/O


def write_network(net, path):
    """Write the edge-list text format, or JSON when the suffix is ``.json``."""
    path = Path(path)
    if path.suffix == ".json":
        text = json.dumps({"n": net.n, "edges": [list(e) for e in net.edges]}) + "\n"
    else:
        lines = [str(net.n)] + [f"{i} {j}" for i, j in net.edges]
        text = "\n".join(lines) + "\n"
    path.write_text(text)


def read_network(path):
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            obj = json.loads(text)
            return from_edge_list(obj["n"], obj["edges"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValueError(f"{path}: malformed network JSON ({exc})") from exc
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows or len(rows[0]) != 1:
        raise ValueError(f"{path}: first line must hold the node count")
    try:
        n = int(rows[0][0])
        pairs = [(int(r[0]), int(r[1])) for r in rows[1:] if len(r) == 2]
    except ValueError as exc:
        raise ValueError(f"{path}: non-integer entry ({exc})") from exc
    if any(len(r) != 2 for r in rows[1:]):
        raise ValueError(f"{path}: edge lines must hold exactly two indices")
    return from_edge_list(n, pairs)
