"""Finite lamplighter graphs: a base cluster wreathed with on/off lamps.

States are pairs (base vertex, lamp bitmask over the base vertices), stored
densely at index ``a * 2^m + f``.  The walk kernel moves along a base edge
and rerandomizes the lamps at both endpoints of the move, with weight
``alpha`` for switching a lamp off and ``1 - alpha`` for on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np
import scipy.sparse as sp

from percwalk.percolation import ClusterGraph
from percwalk.walk import exact_laplace

__all__ = [
    "WreathGraph",
    "LamplighterKernel",
    "build_wreath",
    "reversible_measure",
    "lamplighter_step_distribution",
    "return_probability",
    "verify_identity",
    "check_detailed_balance",
    "position_marginal",
    "lamp_law_given_trajectory",
]

MAX_BASE = 16


@dataclass
class WreathGraph:
    """The wreath product of a base graph with the two-element lamp group."""

    base: ClusterGraph

    def __post_init__(self):
        if self.base.is_empty:
            raise ValueError("base graph must be nonempty")
        if self.base.n_vertices > MAX_BASE:
            raise ValueError(
                f"base has {self.base.n_vertices} vertices, limit is {MAX_BASE}")

    @property
    def m(self) -> int:
        return self.base.n_vertices

    @property
    def n_vertices(self) -> int:
        return self.m * 2**self.m

    def state_index(self, a: int, f: int) -> int:
        return a * 2**self.m + f

    def state_of(self, index: int) -> tuple[int, int]:
        return divmod(index, 2**self.m)

    @property
    def origin_state(self) -> int:
        if self.base.origin is None:
            raise ValueError("base has no distinguished origin")
        return self.state_index(self.base.origin, 0)

    def neighbors(self, index: int) -> list:
        """Wreath edges: flip the lamp at the current position, or move."""
        a, f = self.state_of(index)
        out = [self.state_index(a, f ^ (1 << a))]
        out.extend(self.state_index(b, f) for b in self.base.adjacency[a])
        return out

    def adjacency_lists(self) -> list:
        return [sorted(self.neighbors(i)) for i in range(self.n_vertices)]


def build_wreath(base: ClusterGraph) -> WreathGraph:
    return WreathGraph(base)


@dataclass
class LamplighterKernel:
    """One-step transition matrix of the lamplighter walk at parameter alpha."""

    wreath: WreathGraph
    alpha: float
    matrix: sp.csr_matrix = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.wreath.base.n_edges() == 0:
            raise ValueError("lamplighter kernel needs a base with at least one edge")
        if self.matrix is None:
            self.matrix = self._build()

    def _build(self) -> sp.csr_matrix:
        g = self.wreath
        base = g.base
        m = g.m
        a_w = self.alpha          # lamp ends up off
        b_w = 1.0 - self.alpha    # lamp ends up on
        deg = base.degrees.astype(np.float64)
        rows, cols, vals = [], [], []
        for a in range(m):
            p_move = 1.0 / deg[a]
            for b in base.adjacency[a]:
                for f in range(2**m):
                    src = g.state_index(a, f)
                    cleared = f & ~(1 << a) & ~(1 << b)
                    for x, wx in ((0, a_w), (1, b_w)):
                        for y, wy in ((0, a_w), (1, b_w)):
                            tgt = g.state_index(b, cleared | (x << a) | (y << b))
                            rows.append(src)
                            cols.append(tgt)
                            vals.append(wx * wy * p_move)
        n = g.n_vertices
        mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        mat.sum_duplicates()
        return mat


def reversible_measure(kernel: LamplighterKernel) -> np.ndarray:
    """m(a, f) = nu(a) ((1-alpha)/alpha)^{number of lamps on}."""
    g = kernel.wreath
    deg = np.maximum(g.base.degrees, 1).astype(np.float64)
    ratio = (1.0 - kernel.alpha) / kernel.alpha
    f = np.arange(g.n_vertices) % 2**g.m
    lamps = np.bitwise_count(f.astype(np.uint64)).astype(np.float64)
    nu = deg[np.arange(g.n_vertices) // 2**g.m]
    return nu * ratio**lamps


def lamplighter_step_distribution(kernel: LamplighterKernel, state) -> dict:
    """Outgoing distribution from one state, as {(a, f): mass}."""
    g = kernel.wreath
    if isinstance(state, tuple):
        state = g.state_index(*state)
    row = kernel.matrix.getrow(state)
    return {g.state_of(int(j)): float(v) for j, v in zip(row.indices, row.data)}


def return_probability(kernel: LamplighterKernel, steps: int,
                       allowed: set | None = None) -> float:
    """Exact probability of being back at (origin, all lamps off) after ``steps``.

    With ``allowed`` (a set of base vertex indices), transitions whose target
    has a position or a lit lamp outside the set are killed, mirroring a walk
    stopped on exiting the sub-wreath over those vertices.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    g = kernel.wreath
    v = np.zeros(g.n_vertices)
    v[g.origin_state] = 1.0
    mask = None
    if allowed is not None:
        allowed_bits = 0
        for a in allowed:
            allowed_bits |= 1 << a
        idx = np.arange(g.n_vertices)
        pos_ok = np.isin(idx // 2**g.m, sorted(allowed))
        lamp_ok = ((idx % 2**g.m) & ~allowed_bits) == 0
        mask = pos_ok & lamp_ok
        if not mask[g.origin_state]:
            raise ValueError("origin state outside the allowed sub-wreath")
    for _ in range(steps):
        v = kernel.matrix.T @ v
        if mask is not None:
            v = np.where(mask, v, 0.0)
    return float(v[g.origin_state])


def verify_identity(base: ClusterGraph, alpha: float, n: int) -> tuple:
    """Lamplighter return probability at 2n against the pinned transform.

    Returns (lhs, rhs, |lhs - rhs|) where lhs is the exact return probability
    of the lamplighter walk and rhs = E[alpha^{N_2n} 1{X_2n = origin}].
    Requires n >= 1: at time 0 no lamp has been rerandomized yet, so the two
    sides are 1 and alpha respectively.
    """
    if n < 1:
        raise ValueError("the identity needs at least one step pair (n >= 1)")
    kernel = LamplighterKernel(build_wreath(base), alpha)
    lhs = return_probability(kernel, 2 * n)
    rhs = exact_laplace(base, alpha, 2 * n, pinned=True)
    return lhs, rhs, abs(lhs - rhs)


def check_detailed_balance(kernel: LamplighterKernel) -> float:
    """Max over state pairs of |m(u) p(u,v) - m(v) p(v,u)|."""
    m = reversible_measure(kernel)
    flow = sp.diags(m) @ kernel.matrix
    gap = flow - flow.T
    return float(np.abs(gap.toarray()).max()) if gap.nnz else 0.0


def position_marginal(kernel: LamplighterKernel, steps: int) -> np.ndarray:
    """Distribution of the base position after ``steps`` from the origin state."""
    g = kernel.wreath
    v = np.zeros(g.n_vertices)
    v[g.origin_state] = 1.0
    for _ in range(steps):
        v = kernel.matrix.T @ v
    return v.reshape(g.m, 2**g.m).sum(axis=1)


def lamp_law_given_trajectory(base: ClusterGraph, alpha: float,
                              trajectory: Sequence[int]) -> np.ndarray:
    """Exact law of the lamp configuration after a fixed base trajectory.

    The trajectory must follow base edges.  Returns a vector over all 2^m
    bitmasks.  Useful for checking that lamps at different sites are
    conditionally independent given the path.
    """
    m = base.n_vertices
    for a, b in zip(trajectory, trajectory[1:]):
        if b not in base.adjacency[a]:
            raise ValueError(f"({a}, {b}) is not a base edge")
    dist = np.zeros(2**m)
    dist[0] = 1.0
    a_w, b_w = alpha, 1.0 - alpha
    for a, b in zip(trajectory, trajectory[1:]):
        new = np.zeros_like(dist)
        for f in range(2**m):
            if dist[f] == 0.0:
                continue
            cleared = f & ~(1 << a) & ~(1 << b)
            for x, wx in ((0, a_w), (1, b_w)):
                for y, wy in ((0, a_w), (1, b_w)):
                    new[cleared | (x << a) | (y << b)] += dist[f] * wx * wy
        dist = new
    return dist
