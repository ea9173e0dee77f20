"""Simple random walk on a cluster and its visited-site statistics.

Two exact backends feed everything downstream:

* a merged-state sweep over (current vertex, visited bitmask) pairs, deduped
  with numpy sorting at every step; works on any cluster whose radius-n
  chemical ball has at most 60 vertices;
* a direct path enumeration for uniform-degree neighborhoods (the full
  lattice seen from the origin), where every length-n path has the same
  weight and only the visited count varies.

The Monte Carlo estimator runs many chains at once as column-vectorized
trajectories; chains are keyed by (master seed, chain index) so results do
not depend on chunking.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from percwalk.percolation import ClusterGraph

__all__ = [
    "WalkPath",
    "WalkSeries",
    "KilledOperatorReport",
    "BudgetExceededError",
    "simulate_walk",
    "visited_count",
    "exact_visited_distribution",
    "exact_laplace",
    "mc_laplace",
    "mc_visited_samples",
    "confinement_probability",
    "survival_probabilities",
    "killed_operator_report",
]

DEFAULT_BUDGET = 2**28


class BudgetExceededError(RuntimeError):
    """Exact enumeration would need more path extensions than allowed."""

    def __init__(self, needed: float, budget: int):
        self.needed = needed
        self.budget = budget
        super().__init__(
            f"enumeration needs about {needed:.3g} path extensions, budget is {budget}")


@dataclass(frozen=True)
class WalkPath:
    steps: tuple
    seed: int

    def __post_init__(self):
        if len(self.steps) == 0:
            raise ValueError("a walk path has at least its starting point")

    @property
    def length(self) -> int:
        return len(self.steps) - 1


@dataclass
class WalkSeries:
    """Per-n values of a walk functional with provenance and errors."""

    entries: list  # of (n, value, stderr, method)
    alpha: float
    p: float
    d: int
    seed: int

    def __post_init__(self):
        ns = [e[0] for e in self.entries]
        if ns != sorted(set(ns)):
            raise ValueError("entries must have strictly increasing n")
        for n, value, stderr, method in self.entries:
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"value out of [0,1] at n={n}: {value}")
            if method == "exact" and stderr != 0.0:
                raise ValueError("exact entries must have zero standard error")

    def to_csv(self, out: TextIO):
        out.write("n,value,stderr,method,alpha,p,d,seed\n")
        for n, value, stderr, method in self.entries:
            out.write(f"{n},{value!r},{stderr!r},{method},"
                      f"{self.alpha!r},{self.p!r},{self.d},{self.seed}\n")


# ---------------------------------------------------------------------------
# Path sampling
# ---------------------------------------------------------------------------

def simulate_walk(cluster: ClusterGraph, n: int, seed: int) -> WalkPath:
    """One seeded trajectory X_0..X_n starting at the cluster origin."""
    if cluster.is_empty:
        raise ValueError("cannot walk on the empty cluster")
    if cluster.origin is None:
        raise ValueError("cluster has no distinguished origin")
    if cluster.n_vertices == 1:
        if n > 0:
            raise ValueError("the single-vertex cluster admits only n=0")
        return WalkPath((cluster.origin,), seed)
    rng = np.random.Generator(np.random.Philox(key=seed))
    steps = [cluster.origin]
    pos = cluster.origin
    for _ in range(n):
        nbrs = cluster.adjacency[pos]
        pos = nbrs[rng.integers(len(nbrs))]
        steps.append(pos)
    return WalkPath(tuple(steps), seed)


def visited_count(path: WalkPath) -> int:
    """N_n: the number of distinct vertices among X_0..X_n."""
    return len(set(path.steps))


# ---------------------------------------------------------------------------
# Exact enumeration backends
# ---------------------------------------------------------------------------

def _csr(cluster: ClusterGraph) -> tuple[np.ndarray, np.ndarray]:
    deg = cluster.degrees
    indptr = np.concatenate([[0], np.cumsum(deg)])
    indices = np.fromiter((w for nbrs in cluster.adjacency for w in nbrs),
                          dtype=np.int64, count=int(indptr[-1]))
    return indptr.astype(np.int64), indices


def _reachable_ball(cluster: ClusterGraph, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Vertices within chemical distance n of the origin, and their distances."""
    dist = cluster.distances_from_origin()
    keep = np.nonzero((dist >= 0) & (dist <= n))[0]
    return keep, dist[keep]


def _merged_state_distribution(cluster: ClusterGraph, n: int, budget: int) -> dict:
    """Joint law of (N_n, X_n) as {(count, pinned): prob} via bitmask states.

    Only vertices reachable in n steps matter, so the cluster is first cut to
    the chemical ball of radius n; degrees of every vertex the walk can leave
    from are unchanged by the cut.
    """
    keep, dist = _reachable_ball(cluster, n)
    if keep.size > 60:
        raise BudgetExceededError(float("inf"), budget)
    local = -np.ones(cluster.n_vertices, dtype=np.int64)
    local[keep] = np.arange(keep.size)
    deg_full = cluster.degrees  # ambient degrees drive the kernel
    sub_adj = [[int(local[w]) for w in cluster.adjacency[v]] for v in keep]
    deg = deg_full[keep].astype(np.float64)
    indptr = np.concatenate([[0], np.cumsum([len(a) for a in sub_adj])]).astype(np.int64)
    indices = np.fromiter((w for a in sub_adj for w in a), dtype=np.int64,
                          count=int(indptr[-1]))
    origin = int(local[cluster.origin])

    verts = np.array([origin], dtype=np.int64)
    masks = np.array([np.uint64(1) << np.uint64(origin)], dtype=np.uint64)
    probs = np.array([1.0])
    expansions = 0
    for _ in range(n):
        lengths = (indptr[verts + 1] - indptr[verts]).astype(np.int64)
        total = int(lengths.sum())
        expansions += total
        if expansions > budget:
            raise BudgetExceededError(expansions * (n / max(1, _ + 1)), budget)
        starts = np.repeat(indptr[verts], lengths)
        cum = np.cumsum(lengths) - lengths
        offs = np.arange(total, dtype=np.int64) - np.repeat(cum, lengths)
        new_verts = indices[starts + offs]
        new_probs = np.repeat(probs / deg[verts], lengths)
        new_masks = np.repeat(masks, lengths) | (np.uint64(1) << new_verts.astype(np.uint64))
        order = np.lexsort((new_verts, new_masks))
        new_verts, new_masks, new_probs = new_verts[order], new_masks[order], new_probs[order]
        cut = np.nonzero((np.diff(new_masks) != 0) | (np.diff(new_verts) != 0))[0] + 1
        heads = np.concatenate([[0], cut])
        verts = new_verts[heads]
        masks = new_masks[heads]
        probs = np.add.reduceat(new_probs, heads)

    counts = np.bitwise_count(masks).astype(np.int64)
    pinned = verts == origin
    out: dict[tuple[int, bool], float] = {}
    for c, pin, pr in zip(counts.tolist(), pinned.tolist(), probs.tolist()):
        key = (c, pin)
        out[key] = out.get(key, 0.0) + pr
    return out


def _uniform_path_distribution(cluster: ClusterGraph, n: int, budget: int) -> dict:
    """Joint law of (N_n, X_n) by enumerating all equal-weight paths.

    Valid only when every vertex the walk can leave from (distance <= n-1
    from the origin) has the same degree g; then each path has weight g^-n.
    """
    keep, dist = _reachable_ball(cluster, n)
    interior = keep[dist <= n - 1] if n > 0 else keep[:0]
    degs = cluster.degrees
    if n > 0:
        g = int(degs[interior[0]])
        if not np.all(degs[interior] == g):
            raise BudgetExceededError(float("inf"), budget)
    else:
        g = 1
    if g**n > budget:
        raise BudgetExceededError(float(g) ** n, budget)

    nbr = np.full((cluster.n_vertices, max(g, 1)), -1, dtype=np.int32)
    for v in range(cluster.n_vertices):
        nbr[v, : len(cluster.adjacency[v])] = cluster.adjacency[v]
    paths = np.full((1, n + 1), cluster.origin, dtype=np.int32)
    for step in range(1, n + 1):
        cur = paths[:, step - 1]
        paths = np.repeat(paths, g, axis=0)
        paths[:, step] = nbr[cur][:, :g].ravel()
    sorted_rows = np.sort(paths, axis=1)
    distinct = 1 + np.count_nonzero(np.diff(sorted_rows, axis=1), axis=1)
    pinned = paths[:, -1] == cluster.origin
    w = float(g) ** (-n)
    out: dict[tuple[int, bool], float] = {}
    for c, pin in zip(distinct.tolist(), pinned.tolist()):
        key = (c, pin)
        out[key] = out.get(key, 0.0) + w
    return out


def exact_visited_distribution(cluster: ClusterGraph, n: int,
                               budget: int = DEFAULT_BUDGET) -> dict:
    """Exact joint law {(N_n value, X_n == origin): probability}."""
    if cluster.is_empty or cluster.origin is None:
        raise ValueError("need a nonempty cluster with an origin")
    if n < 0:
        raise ValueError("n must be >= 0")
    if cluster.n_vertices == 1:
        return {(1, True): 1.0}
    keep, _ = _reachable_ball(cluster, n)
    if keep.size <= 60:
        return _merged_state_distribution(cluster, n, budget)
    return _uniform_path_distribution(cluster, n, budget)


def exact_laplace(cluster: ClusterGraph, alpha: float, n: int,
                  pinned: bool = False, budget: int = DEFAULT_BUDGET) -> float:
    """E[alpha^{N_n}], optionally restricted to walks returning at time n."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    dist = exact_visited_distribution(cluster, n, budget)
    total = 0.0
    for (count, pin), pr in dist.items():
        if pinned and not pin:
            continue
        total += alpha**count * pr
    return total


# ---------------------------------------------------------------------------
# Monte Carlo estimator
# ---------------------------------------------------------------------------

_CHUNK = 65536


def _mc_trajectories(cluster: ClusterGraph, n_max: int, chunk: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Trajectory block of shape (n_max + 1, chunk), column = one chain."""
    deg = cluster.degrees
    g_max = int(deg.max())
    nbr = np.zeros((cluster.n_vertices, g_max), dtype=np.int32)
    for v in range(cluster.n_vertices):
        k = len(cluster.adjacency[v])
        nbr[v, :k] = cluster.adjacency[v]
    traj = np.empty((n_max + 1, chunk), dtype=np.int32)
    traj[0] = cluster.origin
    u = rng.random((n_max, chunk))
    for step in range(1, n_max + 1):
        cur = traj[step - 1]
        pick = (u[step - 1] * deg[cur]).astype(np.int64)
        traj[step] = nbr[cur, pick]
    return traj


def mc_visited_samples(cluster: ClusterGraph, n_list: Sequence[int],
                       samples: int, seed: int) -> dict:
    """Sampled N_n arrays per n, pooled over chains keyed by (seed, chain)."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if cluster.n_vertices == 1:
        return {n: np.ones(samples, dtype=np.int64) for n in n_list}
    n_max = max(n_list)
    out = {n: [] for n in n_list}
    done = 0
    chain = 0
    while done < samples:
        chunk = min(_CHUNK, samples - done)
        rng = np.random.Generator(np.random.Philox(key=(seed << 64) + chain))
        traj = _mc_trajectories(cluster, n_max, chunk, rng)
        for n in n_list:
            block = np.sort(traj[: n + 1], axis=0)
            out[n].append(1 + np.count_nonzero(np.diff(block, axis=0), axis=0))
        done += chunk
        chain += 1
    return {n: np.concatenate(parts).astype(np.int64) for n, parts in out.items()}


def mc_laplace(cluster: ClusterGraph, alpha: float, n_list: Sequence[int],
               samples: int, seed: int) -> WalkSeries:
    """Monte Carlo estimate of E[alpha^{N_n}] for each n, with standard errors."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    counts = mc_visited_samples(cluster, sorted(set(n_list)), samples, seed)
    entries = []
    for n in sorted(counts):
        c = counts[n]
        if c.min() == c.max():
            # constant sample (n = 0, alpha = 1, forced paths): exact value
            entries.append((n, float(alpha) ** int(c[0]), 0.0, "monte_carlo"))
            continue
        x = alpha ** c.astype(np.float64)
        mean = float(np.mean(x))
        var = float(np.mean(x * x) - mean * mean)
        stderr = float(np.sqrt(max(var, 0.0) / samples))
        entries.append((n, mean, stderr, "monte_carlo"))
    meta = cluster.meta
    return WalkSeries(entries, alpha, meta.get("p", float("nan")),
                      meta.get("d", 0), seed)


def confinement_probability(cluster: ClusterGraph, r: int, n: int,
                            samples: int, seed: int) -> tuple[float, float]:
    """Estimate of P(sup_{i<=n} D(0, X_i) <= r) with its standard error.

    When no n-step walk can leave the ball (n <= r, since the chemical
    distance grows by at most one per step) the value is exactly 1.
    """
    if r < 0 or n < 0:
        raise ValueError("r and n must be >= 0")
    if cluster.n_vertices == 1:
        return 1.0, 0.0
    if n <= r:
        return 1.0, 0.0
    dist = cluster.distances_from_origin()
    if r == 0:
        return 0.0, 0.0  # the first of the n >= 1 steps leaves {0}
    rng_chain = 0
    hits = 0
    done = 0
    while done < samples:
        chunk = min(_CHUNK, samples - done)
        rng = np.random.Generator(np.random.Philox(key=(seed << 64) + rng_chain))
        traj = _mc_trajectories(cluster, n, chunk, rng)
        hits += int(np.count_nonzero(np.all(dist[traj] <= r, axis=0)))
        done += chunk
        rng_chain += 1
    phat = hits / samples
    stderr = float(np.sqrt(phat * (1 - phat) / samples))
    return phat, stderr


# ---------------------------------------------------------------------------
# Killed walk in a chemical ball
# ---------------------------------------------------------------------------

@dataclass
class KilledOperatorReport:
    r: int
    ball_size: int
    half_ball_size: int
    lambda1: float
    paper_bound: float
    rayleigh_h: float
    survival: list  # of (n, probability)

    def __post_init__(self):
        if not 0.0 < self.lambda1 <= 2.0:
            raise ValueError(f"lambda1 out of (0, 2]: {self.lambda1}")
        probs = [p for _, p in self.survival]
        if any(b > a + 1e-12 for a, b in zip(probs, probs[1:])):
            raise ValueError("survival probabilities must be nonincreasing")

    def to_json(self, out: TextIO):
        json.dump({
            "r": self.r,
            "ball_size": self.ball_size,
            "half_ball_size": self.half_ball_size,
            "lambda1": self.lambda1,
            "paper_bound": self.paper_bound,
            "rayleigh_h": self.rayleigh_h,
            "survival": [{"n": n, "p": p} for n, p in self.survival],
        }, out, indent=2)
        out.write("\n")


def _ball_kernel(cluster: ClusterGraph, r: int):
    """Sub-Markovian kernel on the ball D <= r, rows indexed by ball vertices.

    Degrees are the ambient cluster degrees: transitions out of the ball are
    killed, not redistributed.
    """
    dist = cluster.distances_from_origin()
    ball = np.nonzero(dist <= r)[0]
    if ball.size == 0:
        raise ValueError("empty ball")
    local = -np.ones(cluster.n_vertices, dtype=np.int64)
    local[ball] = np.arange(ball.size)
    deg = cluster.degrees.astype(np.float64)
    rows, cols, vals = [], [], []
    for v in ball:
        for w in cluster.adjacency[int(v)]:
            if local[w] >= 0:
                rows.append(int(local[v]))
                cols.append(int(local[w]))
                vals.append(1.0 / deg[v])
    import scipy.sparse as sp
    P = sp.csr_matrix((vals, (rows, cols)), shape=(ball.size, ball.size))
    return ball, local, deg, P


def survival_probabilities(cluster: ClusterGraph, r: int,
                           n_list: Sequence[int]) -> list:
    """Exact P(sigma_r > n) for each n via repeated kernel application."""
    ball, local, _, P = _ball_kernel(cluster, r)
    v = np.zeros(ball.size)
    v[int(local[cluster.origin])] = 1.0
    wanted = sorted(set(int(n) for n in n_list))
    out = []
    step = 0
    for n in wanted:
        while step < n:
            v = P.T @ v
            step += 1
        out.append((n, float(v.sum())))
    return out


def killed_operator_report(cluster: ClusterGraph, r: int,
                           n_list: Sequence[int]) -> KilledOperatorReport:
    """Spectral and survival summary of the walk killed outside D(0,.) <= r."""
    if r < 1:
        raise ValueError("ball radius must be >= 1")
    dist = cluster.distances_from_origin()
    ball, local, deg, P = _ball_kernel(cluster, r)
    if ball.size > 20000:
        raise ValueError(f"ball has {ball.size} vertices, over the eigensolve cap")
    half = int(np.count_nonzero(dist <= r // 2))

    # similarity transform by sqrt(nu) makes the kernel symmetric
    import scipy.sparse as sp
    s = np.sqrt(deg[ball])
    A = sp.diags(s) @ P @ sp.diags(1.0 / s)
    A = (A + A.T) / 2
    if ball.size <= 2000:
        top = float(np.linalg.eigvalsh(A.toarray())[-1])
    else:
        from scipy.sparse.linalg import eigsh
        top = float(eigsh(A, k=1, which="LA", return_eigenvectors=False)[0])
    lambda1 = 1.0 - top

    d = cluster.meta.get("d", cluster.coords.shape[1])
    paper_bound = 8.0 * d * ball.size / (r**2 * half)

    h = np.zeros(cluster.n_vertices)
    in_ball = dist <= r
    h[in_ball] = r - dist[in_ball]
    energy = sum((h[i] - h[j]) ** 2 for i, j in cluster.edges())
    norm = float(np.sum(deg * h * h))
    rayleigh = energy / norm if norm > 0 else float("inf")

    survival = survival_probabilities(cluster, r, n_list)
    return KilledOperatorReport(r, int(ball.size), half, lambda1,
                                paper_bound, rayleigh, survival)
