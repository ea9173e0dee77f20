"""Lattice geometry, Bernoulli bond percolation, clusters and renormalized boxes.

Conventions fixed here and relied on everywhere else:

* The box of radius ``n`` in dimension ``d`` is ``[-n, n]^d``; vertices are
  indexed in lexicographic (C) order of their coordinates.
* Edges of the box graph are keyed canonically by ``(tail, axis)`` where
  ``tail`` is the lexicographically lower endpoint; the edge list is sorted
  by tail index first, axis second.  Sampling draws one uniform per edge in
  this canonical order from a counter-based Philox generator keyed by the
  seed, so a configuration is a pure function of ``(d, n, p, seed)``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

__all__ = [
    "LatticeSpec",
    "BondConfiguration",
    "ClusterGraph",
    "BlockStatus",
    "RenormalizedField",
    "UnreachableVertexError",
    "sample_bond_config",
    "open_adjacency",
    "component_of_origin",
    "largest_cluster",
    "chemical_distance",
    "chemical_ball",
    "volume_growth_ratio",
    "ball_growth_ratio",
    "classify_boxes",
    "cluster_to_text",
    "cluster_from_text",
]


class UnreachableVertexError(ValueError):
    """Raised when a chemical-distance query targets a disconnected vertex."""


@dataclass(frozen=True)
class LatticeSpec:
    """The finite box ``[-n, n]^d`` of the hypercubic lattice, ``d >= 2``."""

    d: int
    n: int

    def __post_init__(self):
        if self.d < 2:
            raise ValueError(f"dimension must be >= 2, got {self.d}")
        if self.n < 0:
            raise ValueError(f"box radius must be >= 0, got {self.n}")

    @property
    def side(self) -> int:
        return 2 * self.n + 1

    @property
    def n_vertices(self) -> int:
        return self.side**self.d

    def vertex_index(self, coords) -> int:
        """Index of a lattice point in the lexicographic vertex order."""
        coords = np.asarray(coords)
        if np.any(np.abs(coords) > self.n):
            raise ValueError(f"{tuple(coords)} outside the box of radius {self.n}")
        shifted = coords + self.n
        return int(np.ravel_multi_index(shifted, (self.side,) * self.d))

    def vertex_coords(self, index: int) -> np.ndarray:
        shifted = np.unravel_index(index, (self.side,) * self.d)
        return np.array(shifted) - self.n

    def all_coords(self) -> np.ndarray:
        """All vertex coordinates, shape (n_vertices, d), in index order."""
        grids = np.meshgrid(*[np.arange(-self.n, self.n + 1)] * self.d, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Canonical edge arrays ``(tails, heads, axes)`` of the box graph."""
        coords = self.all_coords()
        strides = np.array([self.side ** (self.d - 1 - a) for a in range(self.d)])
        tails, heads, axes = [], [], []
        for a in range(self.d):
            valid = np.nonzero(coords[:, a] < self.n)[0]
            tails.append(valid)
            heads.append(valid + strides[a])
            axes.append(np.full(valid.shape, a))
        tails = np.concatenate(tails)
        heads = np.concatenate(heads)
        axes = np.concatenate(axes)
        order = np.lexsort((axes, tails))
        return tails[order], heads[order], axes[order]

    @property
    def n_edges(self) -> int:
        return self.d * self.side ** (self.d - 1) * (self.side - 1)


@dataclass(frozen=True)
class BondConfiguration:
    """A sampled realization: one open/closed flag per edge of the box graph."""

    spec: LatticeSpec
    p: float
    seed: int
    open: np.ndarray

    def __post_init__(self):
        if self.open.shape != (self.spec.n_edges,):
            raise ValueError("open-flag array does not match the edge count")

    def open_fraction(self) -> float:
        return float(np.mean(self.open)) if self.open.size else 0.0

    def with_edge_opened(self, edge_id: int) -> "BondConfiguration":
        """Coupled configuration with one extra open edge (for monotonicity tests)."""
        flags = self.open.copy()
        flags[edge_id] = True
        return BondConfiguration(self.spec, self.p, self.seed, flags)


def sample_bond_config(spec: LatticeSpec, p: float, seed: int) -> BondConfiguration:
    """Keep each edge independently with probability ``p``, seeded and reproducible."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"open probability must lie in (0, 1], got {p}")
    rng = np.random.Generator(np.random.Philox(key=seed))
    u = rng.random(spec.n_edges)
    return BondConfiguration(spec, p, seed, u < p)


def open_adjacency(config: BondConfiguration) -> tuple[np.ndarray, np.ndarray]:
    """CSR adjacency ``(indptr, indices)`` of the open subgraph on all box vertices."""
    tails, heads, _ = config.spec.edges()
    t = tails[config.open]
    h = heads[config.open]
    src = np.concatenate([t, h])
    dst = np.concatenate([h, t])
    order = np.argsort(src, kind="stable")
    src, dst = src[order], dst[order]
    counts = np.bincount(src, minlength=config.spec.n_vertices)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    return indptr, dst


@dataclass
class ClusterGraph:
    """A connected open subgraph with vertex coordinates and a distinguished origin.

    The empty sentinel (``is_empty``) stands for "no cluster at all" so the
    connectivity invariant never needs a special case.  The degenerate
    single-vertex cluster (isolated origin) is a valid non-empty instance.
    """

    coords: np.ndarray
    adjacency: list
    origin: int | None
    meta: dict = field(default_factory=dict)
    _dist: np.ndarray | None = field(default=None, repr=False)
    _index: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.is_empty:
            self.validate()

    @classmethod
    def empty(cls, meta: dict | None = None) -> "ClusterGraph":
        return cls(np.zeros((0, 0), dtype=int), [], None, meta or {})

    @property
    def is_empty(self) -> bool:
        return len(self.adjacency) == 0

    @property
    def n_vertices(self) -> int:
        return len(self.adjacency)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(nbrs) for nbrs in self.adjacency])

    def neighbors(self, i: int) -> Sequence[int]:
        return self.adjacency[i]

    def edges(self) -> Iterable[tuple[int, int]]:
        for i, nbrs in enumerate(self.adjacency):
            for j in nbrs:
                if i < j:
                    yield i, j

    def n_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self.adjacency) // 2

    def index_of(self, coords) -> int:
        if self._index is None:
            self._index = {tuple(c): i for i, c in enumerate(self.coords)}
        return self._index[tuple(coords)]

    def validate(self):
        """Check adjacency symmetry and connectivity; raises on violation."""
        n = self.n_vertices
        for i, nbrs in enumerate(self.adjacency):
            for j in nbrs:
                if i not in self.adjacency[j]:
                    raise ValueError(f"adjacency not symmetric at ({i}, {j})")
        seen = np.zeros(n, dtype=bool)
        queue = deque([0])
        seen[0] = True
        count = 1
        while queue:
            v = queue.popleft()
            for w in self.adjacency[v]:
                if not seen[w]:
                    seen[w] = True
                    count += 1
                    queue.append(w)
        if count != n:
            raise ValueError("cluster graph is not connected")
        if self.origin is not None and not 0 <= self.origin < n:
            raise ValueError("origin index out of range")

    def distances_from_origin(self) -> np.ndarray:
        """Chemical distances D(origin, .) to every cluster vertex (BFS)."""
        if self.origin is None:
            raise ValueError("cluster has no distinguished origin")
        if self._dist is None:
            dist = np.full(self.n_vertices, -1)
            dist[self.origin] = 0
            queue = deque([self.origin])
            while queue:
                v = queue.popleft()
                for w in self.adjacency[v]:
                    if dist[w] < 0:
                        dist[w] = dist[v] + 1
                        queue.append(w)
            self._dist = dist
        return self._dist


def _component(indptr, indices, start: int) -> list[int]:
    seen = {start}
    queue = deque([start])
    out = [start]
    while queue:
        v = queue.popleft()
        for w in indices[indptr[v] : indptr[v + 1]]:
            w = int(w)
            if w not in seen:
                seen.add(w)
                out.append(w)
                queue.append(w)
    return out


def _induced_cluster(config: BondConfiguration, vertex_ids: list[int],
                     origin_id: int | None) -> ClusterGraph:
    spec = config.spec
    indptr, indices = open_adjacency(config)
    ids = sorted(vertex_ids)
    local = {v: i for i, v in enumerate(ids)}
    adjacency = []
    for v in ids:
        adjacency.append(sorted(local[int(w)] for w in indices[indptr[v] : indptr[v + 1]]
                                if int(w) in local))
    coords = np.array([spec.vertex_coords(v) for v in ids])
    origin = local[origin_id] if origin_id is not None else None
    meta = {"d": spec.d, "n": spec.n, "p": config.p, "seed": config.seed}
    return ClusterGraph(coords, adjacency, origin, meta)


def component_of_origin(config: BondConfiguration) -> ClusterGraph:
    """The connected component C_n of the origin in the open subgraph of the box."""
    spec = config.spec
    origin_id = spec.vertex_index(np.zeros(spec.d, dtype=int))
    indptr, indices = open_adjacency(config)
    comp = _component(indptr, indices, origin_id)
    return _induced_cluster(config, comp, origin_id)


def largest_cluster(config: BondConfiguration) -> ClusterGraph:
    """The largest open component L_n; ties broken by smallest minimal vertex.

    Only vertices touching at least one open edge are considered; with no open
    edge at all the empty sentinel is returned.
    """
    spec = config.spec
    indptr, indices = open_adjacency(config)
    degrees = np.diff(indptr)
    todo = np.nonzero(degrees > 0)[0]
    if todo.size == 0:
        return ClusterGraph.empty({"d": spec.d, "n": spec.n,
                                   "p": config.p, "seed": config.seed})
    seen = np.zeros(spec.n_vertices, dtype=bool)
    best = None
    best_key = None
    for start in todo:
        if seen[start]:
            continue
        comp = _component(indptr, indices, int(start))
        seen[comp] = True
        # start is the smallest vertex index of its component because we scan
        # vertex ids in increasing order; index order is lexicographic order.
        key = (-len(comp), tuple(spec.vertex_coords(int(start))))
        if best_key is None or key < best_key:
            best_key = key
            best = comp
    origin_id = spec.vertex_index(np.zeros(spec.d, dtype=int))
    return _induced_cluster(config, best, origin_id if origin_id in set(best) else None)


def chemical_distance(cluster: ClusterGraph, x) -> int:
    """D(0, x): open-path graph distance from the cluster origin to vertex ``x``.

    ``x`` may be a vertex index or a coordinate tuple.  A vertex outside the
    cluster is unreachable by definition.
    """
    if np.isscalar(x):
        idx = int(x)
    else:
        try:
            idx = cluster.index_of(x)
        except KeyError:
            raise UnreachableVertexError(f"{tuple(x)} is not connected to the origin")
    dist = cluster.distances_from_origin()
    if not 0 <= idx < cluster.n_vertices:
        raise UnreachableVertexError(f"vertex {idx} is not in the cluster")
    return int(dist[idx])


def chemical_ball(config: BondConfiguration, r: int) -> ClusterGraph:
    """B_r(C): vertices at chemical distance <= r from the origin.

    Requires ``r <= n`` so that no open path can shortcut through the
    unsampled region outside the box.
    """
    spec = config.spec
    if r < 0:
        raise ValueError("ball radius must be >= 0")
    if r > spec.n:
        raise ValueError(f"ball radius {r} exceeds the sampled box radius {spec.n}")
    origin_id = spec.vertex_index(np.zeros(spec.d, dtype=int))
    indptr, indices = open_adjacency(config)
    dist = {origin_id: 0}
    queue = deque([origin_id])
    while queue:
        v = queue.popleft()
        if dist[v] == r:
            continue
        for w in indices[indptr[v] : indptr[v + 1]]:
            w = int(w)
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    return _induced_cluster(config, list(dist), origin_id)


def volume_growth_ratio(config: BondConfiguration) -> float:
    """|C_n| / n^d, the empirical volume-growth density of the origin cluster."""
    spec = config.spec
    if spec.n < 1:
        raise ValueError("volume growth needs box radius >= 1")
    return component_of_origin(config).n_vertices / spec.n**spec.d


def ball_growth_ratio(config: BondConfiguration, r: int) -> float:
    """|B_r(C)| / r^d for the chemical ball of radius ``r >= 1``."""
    if r < 1:
        raise ValueError("ball growth needs radius >= 1")
    return chemical_ball(config, r).n_vertices / r**config.spec.d


# ---------------------------------------------------------------------------
# Renormalized good/bad box field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockStatus:
    classifiable: bool
    crossing: bool
    edge_event: bool

    @property
    def good(self) -> bool:
        return self.classifiable and self.crossing and self.edge_event


@dataclass
class RenormalizedField:
    """Per-block good/bad flags of the coarse-grained configuration."""

    N: int
    blocks: dict

    def good_fraction(self) -> float:
        flags = [s.good for s in self.blocks.values() if s.classifiable]
        if not flags:
            raise ValueError("no classifiable block in the sampled box")
        return sum(flags) / len(flags)

    def classifiable_blocks(self) -> list:
        return [i for i, s in self.blocks.items() if s.classifiable]


def _subgraph_components(t_all: np.ndarray, h_all: np.ndarray,
                         coords_t: np.ndarray, coords_h: np.ndarray,
                         lo: np.ndarray, hi: np.ndarray) -> tuple[dict, list[list[int]]]:
    """Open components of the subgraph induced on the sub-box [lo, hi]."""
    inside = np.all((coords_t >= lo) & (coords_t <= hi), axis=1) & \
        np.all((coords_h >= lo) & (coords_h <= hi), axis=1)
    t, h = t_all[inside], h_all[inside]
    adj: dict[int, list[int]] = {}
    for a, b in zip(t.tolist(), h.tolist()):
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    comps = []
    seen: set[int] = set()
    for start in sorted(adj):
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    comp.append(w)
                    queue.append(w)
        comps.append(comp)
    return adj, comps


def _crosses_inner_box(spec: LatticeSpec, comp: set[int], adj: dict,
                       coords_all: np.ndarray,
                       lo: np.ndarray, hi: np.ndarray) -> bool:
    """Does the component contain, inside [lo, hi], a face-to-face open path
    for every axis?"""
    members = [v for v in comp
               if np.all((coords_all[v] >= lo) & (coords_all[v] <= hi))]
    if not members:
        return False
    member_set = set(members)
    coords = {v: coords_all[v] for v in members}
    for axis in range(spec.d):
        sources = [v for v in members if coords[v][axis] == lo[axis]]
        targets = {v for v in members if coords[v][axis] == hi[axis]}
        if not sources or not targets:
            return False
        seen = set(sources)
        queue = deque(sources)
        hit = bool(seen & targets)
        while queue and not hit:
            v = queue.popleft()
            for w in adj.get(v, ()):
                if w in member_set and w not in seen:
                    seen.add(w)
                    if w in targets:
                        hit = True
                        break
                    queue.append(w)
        if not hit:
            return False
    return True


def _component_diameter(comp: list[int], adj: dict, cap: int) -> int:
    """Graph diameter of a component; early exit once it exceeds ``cap``."""
    comp_set = set(comp)
    diameter = 0
    for start in comp:
        dist = {start: 0}
        queue = deque([start])
        ecc = 0
        while queue:
            v = queue.popleft()
            for w in adj.get(v, ()):
                if w in comp_set and w not in dist:
                    dist[w] = dist[v] + 1
                    ecc = max(ecc, dist[w])
                    queue.append(w)
        diameter = max(diameter, ecc)
        if diameter > cap:
            return diameter
    return diameter


def classify_boxes(config: BondConfiguration, N: int) -> RenormalizedField:
    """Good/bad flags for the blocks B_i of side 2N+1 tiling the sampled box.

    A block is good when (a) the enlarged box B'_i of radius floor(5N/4)
    contains an open component K joining the opposite faces of B_i inside
    B_i along every axis, with every open path of B'_i longer than N/10
    attached to K, and (b) the designated edge row E_i contains an open
    edge.  Blocks whose enlarged box leaves the sampled region are reported
    unclassifiable rather than guessed.
    """
    if N < 4:
        raise ValueError(f"block scale must be >= 4, got {N}")
    spec = config.spec
    step = 2 * N + 1
    big = (5 * N) // 4
    imax = int(np.ceil((spec.n + N) / step))
    path_cap = N // 10
    blocks: dict[tuple, BlockStatus] = {}
    tails, heads, _ = spec.edges()
    t_open, h_open = tails[config.open], heads[config.open]
    open_set = {(int(t), int(h)) for t, h in zip(t_open, h_open)}
    coords_all = spec.all_coords()
    coords_t = coords_all[t_open]
    coords_h = coords_all[h_open]

    for flat in np.ndindex(*(2 * imax + 1,) * spec.d):
        i = np.array(flat) - imax
        center = step * i
        lo_in, hi_in = center - N, center + N
        if np.any(hi_in < -spec.n) or np.any(lo_in > spec.n):
            continue  # block does not intersect the sampled box
        lo_big, hi_big = center - big, center + big
        if np.any(lo_big < -spec.n) or np.any(hi_big > spec.n):
            blocks[tuple(i)] = BlockStatus(False, False, False)
            continue

        adj, comps = _subgraph_components(t_open, h_open, coords_t, coords_h,
                                          lo_big, hi_big)
        crossing_comps = [c for c in comps
                          if _crosses_inner_box(spec, set(c), adj, coords_all,
                                                lo_in, hi_in)]
        crossing = False
        if len(crossing_comps) == 1:
            k = crossing_comps[0]
            others_short = all(
                _component_diameter(c, adj, path_cap) <= path_cap
                for c in comps if c is not k)
            crossing = others_short

        row = int(np.floor(np.sqrt(N))) + 1
        edge_event = False
        for kk in range(row):
            a = center.copy()
            a[0] += kk
            b = a.copy()
            b[0] += 1
            if np.any(np.abs(a) > spec.n) or np.any(np.abs(b) > spec.n):
                continue
            e = (spec.vertex_index(a), spec.vertex_index(b))
            if (min(e), max(e)) in open_set:
                edge_event = True
                break

        blocks[tuple(i)] = BlockStatus(True, crossing, edge_event)
    return RenormalizedField(N, blocks)


# ---------------------------------------------------------------------------
# Plain-text cluster exchange format
# ---------------------------------------------------------------------------

def cluster_to_text(cluster: ClusterGraph, out: TextIO):
    """Write the plain adjacency format: ``d n p seed``, vertex and edge lines."""
    meta = cluster.meta
    d = meta.get("d", cluster.coords.shape[1] if not cluster.is_empty else 0)
    out.write(f"{d} {meta.get('n', 0)} {meta.get('p', 0)} {meta.get('seed', 0)}\n")
    for i, c in enumerate(cluster.coords):
        out.write(f"{i} " + " ".join(str(int(x)) for x in c) + "\n")
    for i, j in cluster.edges():
        out.write(f"{i} {j}\n")


def cluster_from_text(inp: TextIO) -> ClusterGraph:
    """Read the plain adjacency format written by :func:`cluster_to_text`.

    The origin is the vertex at the coordinate origin when present.
    """
    header = inp.readline().split()
    d, n = int(header[0]), int(header[1])
    p, seed = float(header[2]), int(header[3])
    coords = []
    edges = []
    for line in inp:
        parts = line.split()
        if not parts:
            continue
        if len(parts) == d + 1:
            coords.append([int(x) for x in parts[1:]])
        elif len(parts) == 2:
            edges.append((int(parts[0]), int(parts[1])))
        else:
            raise ValueError(f"malformed line: {line!r}")
    adjacency = [[] for _ in coords]
    for i, j in edges:
        adjacency[i].append(j)
        adjacency[j].append(i)
    adjacency = [sorted(nbrs) for nbrs in adjacency]
    origin = None
    for i, c in enumerate(coords):
        if all(x == 0 for x in c):
            origin = i
            break
    return ClusterGraph(np.array(coords), adjacency, origin,
                        {"d": d, "n": n, "p": p, "seed": seed})
