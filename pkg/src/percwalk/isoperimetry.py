"""Brute-force isoperimetry: boundaries, profiles, Folner search and the
configuration-graph machinery behind the wreath Folner lower bound.

Graphs are plain adjacency lists here so the same code serves percolation
clusters, lamplighter graphs and ad-hoc test graphs.  Subsets are Python int
bitmasks; connected subsets are enumerated by the usual include/exclude
frontier recursion, each subset visited exactly once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, TextIO

import numpy as np

from percwalk.percolation import ClusterGraph
from percwalk.wreath import WreathGraph

__all__ = [
    "SubsetSelection",
    "FolnerProfile",
    "IsoperimetryReport",
    "ConfigurationGraph",
    "boundary_size",
    "profile_f",
    "isoperimetric_beta",
    "folner_function",
    "folner_lower_bound_check",
    "configuration_graph",
    "prune_to_satisfiable",
    "flip_closure_bound_check",
    "lemma_neud_check",
    "iter_connected_subsets",
    "neighbor_masks",
    "mask_boundary",
]

WREATH_FOLNER_C1 = np.log(2) / 9
WREATH_FOLNER_C2 = 1.0 / 1000.0
BRUTE_FORCE_LIMIT = 24


def neighbor_masks(adjacency: Sequence[Sequence[int]]) -> list:
    """Per-vertex neighbor bitmasks (Python ints, arbitrary width)."""
    out = [0] * len(adjacency)
    for v, nbrs in enumerate(adjacency):
        for w in nbrs:
            out[v] |= 1 << w
    return out


def mask_boundary(nbr: Sequence[int], mask: int) -> int:
    """|{(x, y) in E : x in mask, y outside}| for an internal boundary."""
    total = 0
    m = mask
    while m:
        v = (m & -m).bit_length() - 1
        total += (nbr[v] & ~mask).bit_count()
        m &= m - 1
    return total


@dataclass
class SubsetSelection:
    """A vertex subset of a host graph with a declared boundary mode.

    With no supergraph the boundary is internal to the host.  With a
    supergraph and an embedding (host index -> supergraph index) the
    boundary counts supergraph edges leaving the embedded image, which can
    only be larger.
    """

    host: Sequence[Sequence[int]]
    members: frozenset
    super_adjacency: Sequence[Sequence[int]] | None = None
    embed: Sequence[int] | None = None

    def __post_init__(self):
        for v in self.members:
            if not 0 <= v < len(self.host):
                raise ValueError(f"member {v} is not a host vertex")
        if (self.super_adjacency is None) != (self.embed is None):
            raise ValueError("supergraph and embedding must come together")
        if self.embed is not None:
            for v, img in enumerate(self.embed):
                host_nbrs = {self.embed[w] for w in self.host[v]}
                if not host_nbrs <= set(self.super_adjacency[img]):
                    raise ValueError("host is not an induced subgraph under the embedding")


def boundary_size(selection: SubsetSelection) -> int:
    if selection.super_adjacency is None:
        return sum(1 for v in selection.members for w in selection.host[v]
                   if w not in selection.members)
    image = {selection.embed[v] for v in selection.members}
    return sum(1 for v in selection.members
               for w in selection.super_adjacency[selection.embed[v]]
               if w not in image)


def profile_f(x: float, c: float, n: int, gamma: float, d: int) -> float:
    """Two-regime profile: 1 below the volume threshold c n^gamma, else x^(1-1/d)."""
    if c <= 0 or gamma <= 0 or n < 1:
        raise ValueError("need c > 0, gamma > 0, n >= 1")
    if x < c * n**gamma:
        return 1.0
    return float(x) ** (1.0 - 1.0 / d)


# ---------------------------------------------------------------------------
# Connected-subset enumeration
# ---------------------------------------------------------------------------

def iter_connected_subsets(adjacency: Sequence[Sequence[int]],
                           size_cap: int) -> Iterator[int]:
    """All connected induced vertex subsets of size <= size_cap, as bitmasks.

    Each subset is produced exactly once: subsets are rooted at their
    smallest vertex and grown through an include/exclude split of the
    frontier.
    """
    n = len(adjacency)
    nbr = neighbor_masks(adjacency)
    for v in range(n):
        root = 1 << v
        yield root
        if size_cap <= 1:
            continue
        banned0 = root | (root - 1)
        stack = [(root, nbr[v] & ~banned0, banned0)]
        while stack:
            subset, cand, banned = stack.pop()
            if not cand:
                continue
            c = cand & -cand
            rest = cand & ~c
            stack.append((subset, rest, banned | c))
            new_subset = subset | c
            yield new_subset
            if new_subset.bit_count() < size_cap:
                cv = c.bit_length() - 1
                new_banned = banned | c
                stack.append((new_subset, rest | (nbr[cv] & ~new_banned), new_banned))


# ---------------------------------------------------------------------------
# Isoperimetric constant
# ---------------------------------------------------------------------------

@dataclass
class IsoperimetryReport:
    beta: float
    argmin_size: int
    argmin_vertices: list
    c: float
    gamma: float
    n: int
    degenerate: bool = False

    def to_json(self, out: TextIO):
        json.dump({
            "beta": self.beta,
            "argmin_size": self.argmin_size,
            "argmin_vertices": self.argmin_vertices,
            "c": self.c,
            "gamma": self.gamma,
            "n": self.n,
        }, out, indent=2)
        out.write("\n")


def isoperimetric_beta(cluster: ClusterGraph, supergraph: ClusterGraph | None = None,
                       c: float = 1.0, gamma: float = 0.125,
                       size_cap: int = 20, n: int | None = None) -> IsoperimetryReport:
    """min over connected subsets A of |boundary(A)| / f_c(|A|), exhaustively.

    The boundary lives in ``supergraph`` when given (matched by vertex
    coordinates), else inside the cluster itself; in the latter case subsets
    with empty boundary (the whole component) are excluded as degenerate.
    """
    if cluster.is_empty:
        raise ValueError("empty cluster")
    if n is None:
        n = int(cluster.meta.get("n", 1))
    adjacency = cluster.adjacency
    if supergraph is not None:
        embed = [supergraph.index_of(coord) for coord in cluster.coords]
        super_nbr = neighbor_masks(supergraph.adjacency)
        embed_arr = embed
    if cluster.n_vertices == 1:
        return IsoperimetryReport(0.0, 1, [0], c, gamma, n, degenerate=True)

    nbr = neighbor_masks(adjacency)
    best = None
    best_mask = 0
    for mask in iter_connected_subsets(adjacency, size_cap):
        if supergraph is None:
            b = mask_boundary(nbr, mask)
            if b == 0:
                continue  # whole component: excluded as degenerate
        else:
            image = 0
            m = mask
            while m:
                v = (m & -m).bit_length() - 1
                image |= 1 << embed_arr[v]
                m &= m - 1
            b = mask_boundary(super_nbr, image)
        ratio = b / profile_f(mask.bit_count(), c, n, gamma, cluster.coords.shape[1])
        if best is None or ratio < best:
            best = ratio
            best_mask = mask
    if best is None:
        return IsoperimetryReport(0.0, cluster.n_vertices,
                                  list(range(cluster.n_vertices)), c, gamma, n,
                                  degenerate=True)
    verts = [i for i in range(cluster.n_vertices) if best_mask >> i & 1]
    return IsoperimetryReport(float(best), len(verts), verts, c, gamma, n)


# ---------------------------------------------------------------------------
# Folner functions
# ---------------------------------------------------------------------------

@dataclass
class FolnerProfile:
    entries: list  # of (k, value or None, exact flag)
    connected_only: bool
    cap: int

    def to_csv(self, out: TextIO):
        out.write("k,value,exact,connected_only,cap\n")
        for k, value, exact in self.entries:
            out.write(f"{k!r},{'' if value is None else value},"
                      f"{exact},{self.connected_only},{self.cap}\n")


def _folner_connected(adjacency, k: float, size_cap: int) -> int | None:
    nbr = neighbor_masks(adjacency)
    best = None
    for mask in iter_connected_subsets(adjacency, size_cap):
        size = mask.bit_count()
        if best is not None and size >= best:
            continue
        if k * mask_boundary(nbr, mask) <= size:
            best = size
    return best


def _folner_bruteforce_multi(adjacency, k_list: Sequence[float],
                             size_cap: int) -> dict:
    """Exact minima over ALL subsets for several k at once, up to 24 vertices."""
    n = len(adjacency)
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"{n} vertices is past the brute-force limit")
    nbr = [np.uint32(m) for m in neighbor_masks(adjacency)]
    best: dict[float, int | None] = {k: None for k in k_list}
    chunk = 1 << 21
    for start in range(1, 1 << n, chunk):
        masks = np.arange(start, min(start + chunk, 1 << n), dtype=np.uint32)
        sizes = np.bitwise_count(masks).astype(np.int64)
        boundary = np.zeros(masks.size, dtype=np.int64)
        for v in range(n):
            inside = (masks >> np.uint32(v)) & np.uint32(1)
            boundary += inside.astype(np.int64) * \
                np.bitwise_count(nbr[v] & ~masks).astype(np.int64)
        for k in k_list:
            ok = (k * boundary <= sizes) & (sizes <= size_cap)
            if np.any(ok):
                m = int(sizes[ok].min())
                best[k] = m if best[k] is None else min(best[k], m)
    return best


def _folner_bruteforce(adjacency, k: float, size_cap: int) -> int | None:
    return _folner_bruteforce_multi(adjacency, [k], size_cap)[k]


def folner_function(adjacency: Sequence[Sequence[int]], k: float,
                    size_cap: int = 20, connected_only: bool = True) -> tuple:
    """Smallest |U| with |boundary(U)| / |U| <= 1/k, internal boundary.

    Returns (value, exact).  ``value`` is None with ``exact`` False when no
    qualifying set exists within the size cap; a found value is the true
    minimum because any qualifying set contains a qualifying subset of a
    component no larger (so the connected restriction loses nothing) and
    the enumeration under the cap is exhaustive.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    if connected_only:
        value = _folner_connected(adjacency, k, size_cap)
    else:
        value = _folner_bruteforce(adjacency, k, size_cap)
    return value, value is not None


def folner_profile(adjacency, k_list: Sequence[float], size_cap: int = 20,
                   connected_only: bool = True) -> FolnerProfile:
    entries = []
    for k in k_list:
        value, exact = folner_function(adjacency, k, size_cap, connected_only)
        entries.append((k, value, exact))
    return FolnerProfile(entries, connected_only, size_cap)


def folner_lower_bound_check(base: ClusterGraph, k_list: Sequence[float]) -> list:
    """Exact check of Fol_wreath(k) >= exp(C1 Fol_base(C2 k)) per k.

    Both sides are computed exactly: the base by subset brute force, the
    wreath likewise (which caps the base at 4 vertices, 64-vertex wreaths
    being out of brute-force reach).
    """
    wreath = WreathGraph(base)
    if wreath.n_vertices > BRUTE_FORCE_LIMIT:
        raise ValueError("wreath too large for an exact Folner computation")
    wreath_adj = wreath.adjacency_lists()
    k_list = list(k_list)
    wreath_vals = _folner_bruteforce_multi(wreath_adj, k_list, wreath.n_vertices)
    base_vals = _folner_bruteforce_multi(
        base.adjacency, [WREATH_FOLNER_C2 * k for k in k_list], base.n_vertices)
    out = []
    for k in k_list:
        lhs = wreath_vals[k]
        base_val = base_vals[WREATH_FOLNER_C2 * k]
        rhs = float(np.exp(WREATH_FOLNER_C1 * base_val)) if base_val is not None else None
        holds = (lhs is not None and rhs is not None and lhs >= rhs)
        out.append({"k": k, "wreath_folner": lhs, "base_folner": base_val,
                    "rhs": rhs, "holds": holds,
                    "exact": lhs is not None and base_val is not None})
    return out


# ---------------------------------------------------------------------------
# Configuration graphs (the lamp-pattern graph of a wreath subset)
# ---------------------------------------------------------------------------

@dataclass
class ConfigurationGraph:
    """K_U: lamp patterns of a wreath subset, joined by realized single flips.

    ``configs`` lists the distinct bitmasks appearing in U; an edge joins f
    and g when they differ at exactly one site a and both (a, f) and (a, g)
    lie in U.
    """

    wreath: WreathGraph
    subset: frozenset  # of wreath state indices
    configs: list = field(default=None)
    adjacency: list = field(default=None)

    def __post_init__(self):
        if not self.subset:
            raise ValueError("empty wreath subset")
        g = self.wreath
        pairs = [g.state_of(u) for u in sorted(self.subset)]
        self.configs = sorted({f for _, f in pairs})
        pos = {f: i for i, f in enumerate(self.configs)}
        present = set(pairs)
        self.adjacency = [[] for _ in self.configs]
        for i, f in enumerate(self.configs):
            for a in range(g.m):
                fg = f ^ (1 << a)
                if fg > f and (a, f) in present and (a, fg) in present:
                    j = pos[fg]
                    self.adjacency[i].append(j)
                    self.adjacency[j].append(i)
        self._present = present

    @property
    def n_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def degrees(self) -> list:
        return [len(a) for a in self.adjacency]

    def is_good_point(self, state: tuple) -> bool:
        """(x, f) is good when the lamp flip at its own position stays in U."""
        x, f = state
        return (x, f) in self._present and (x, f ^ (1 << x)) in self._present

    def classify(self, b: float) -> dict:
        """S(b)/NS(b) configurations, edge classes, and good/bad points of U."""
        deg = {f: len(self.adjacency[i]) for i, f in enumerate(self.configs)}
        S = {f for f in self.configs if deg[f] >= b}
        NS = set(self.configs) - S
        S_e, NS_e = [], []
        for i, f in enumerate(self.configs):
            for j in self.adjacency[i]:
                if j > i:
                    e = (f, self.configs[j])
                    (S_e if f in S and self.configs[j] in S else NS_e).append(e)
        good = {u for u in self._present if self.is_good_point(u)}
        bad = self._present - good
        S_p = {u for u in self._present if u[1] in S}
        NS_p = self._present - S_p
        return {"S": S, "NS": NS, "S_e": S_e, "NS_e": NS_e,
                "good_points": good, "bad_points": bad,
                "S_p": S_p, "NS_p": NS_p}


def configuration_graph(wreath: WreathGraph, subset: Iterable[int]) -> ConfigurationGraph:
    return ConfigurationGraph(wreath, frozenset(subset))


def prune_to_satisfiable(adjacency: Sequence[Sequence[int]], b: float) -> set:
    """Iteratively erase vertices of degree < b/3; return the surviving set.

    The comparison 3*deg < b is exact (integer times three against the given
    threshold), no rounding.  The result, when nonempty, has min degree
    >= b/3 by construction; under the hypothesis |NS_edges(b)|/|E| < 1/2 it
    is nonempty.
    """
    alive = set(range(len(adjacency)))
    deg = {v: len(adjacency[v]) for v in alive}
    queue = [v for v in alive if 3 * deg[v] < b]
    while queue:
        v = queue.pop()
        if v not in alive:
            continue
        alive.discard(v)
        for w in adjacency[v]:
            if w in alive:
                deg[w] -= 1
                if 3 * deg[w] < b:
                    queue.append(w)
    return alive


def ns_edge_fraction(adjacency: Sequence[Sequence[int]], b: float) -> float:
    """Fraction of edges touching a vertex of degree < b (the pruning gate)."""
    deg = [len(a) for a in adjacency]
    total = 0
    bad = 0
    for v, nbrs in enumerate(adjacency):
        for w in nbrs:
            if v < w:
                total += 1
                if deg[v] < b or deg[w] < b:
                    bad += 1
    if total == 0:
        raise ValueError("graph has no edges")
    return bad / total


def flip_closure_bound_check(family: Iterable[int], n_sites: int, Y: int) -> dict:
    """Premise: every member admits >= Y single-site flips staying inside.

    When the premise holds the family must have at least 2^Y members.
    """
    fam = set(family)
    if not fam:
        raise ValueError("empty family")
    witness = None
    for f in fam:
        flips = sum(1 for x in range(n_sites) if f ^ (1 << x) in fam)
        if flips < Y:
            witness = f
            break
    premise = witness is None
    return {"premise_holds": premise, "witness": witness,
            "bound_holds": premise and len(fam) >= 2**Y,
            "family_size": len(fam), "required": 2**Y}


def lemma_neud_check(wreath: WreathGraph, subset: Iterable[int], k: float,
                     phi_k: int | None = None) -> dict:
    """Bad-point and unsatisfiable-point fractions of a small-boundary subset.

    Precondition: |boundary(U)| / |U| <= 1/(1000 k) in the wreath graph.
    Checks the two displayed fractions: bad points <= 1/(1000 k) of U, and
    points whose configuration has K_U degree < phi(k)/3 at most 1/500 of U,
    where phi is the base Folner function (computed here when not supplied).
    """
    U = frozenset(subset)
    if not U:
        raise ValueError("empty subset")
    adj = wreath.adjacency_lists()
    boundary = sum(1 for u in U for w in adj[u] if w not in U)
    ratio = boundary / len(U)
    if ratio > 1.0 / (1000.0 * k):
        raise ValueError(
            f"subset boundary ratio {ratio:.4g} exceeds 1/(1000k); lemma not applicable")
    if phi_k is None:
        phi_k, exact = folner_function(wreath.base.adjacency, k,
                                       wreath.base.n_vertices,
                                       connected_only=False)
        if phi_k is None:
            raise ValueError("base Folner value not attained; supply phi_k")
    K = configuration_graph(wreath, U)
    cls = K.classify(phi_k / 3.0)
    bad_fraction = len(cls["bad_points"]) / len(U)
    ns_fraction = len(cls["NS_p"]) / len(U)
    return {
        "boundary_ratio": ratio,
        "bad_fraction": bad_fraction,
        "bad_bound": 1.0 / (1000.0 * k),
        "ns_fraction": ns_fraction,
        "ns_bound": 1.0 / 500.0,
        "holds": bad_fraction <= 1.0 / (1000.0 * k) and ns_fraction <= 1.0 / 500.0,
    }
