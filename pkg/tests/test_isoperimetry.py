"""Boundaries, profiles, Folner functions, configuration graphs, pruning."""

from __future__ import annotations

import io
import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percwalk import isoperimetry as iso, percolation as perc, wreath as wr
from conftest import boundary_oracle, make_graph


def grid_graph(nx: int, ny: int):
    coords = [(x, y) for x in range(nx) for y in range(ny)]
    index = {c: i for i, c in enumerate(coords)}
    edges = []
    for (x, y), i in index.items():
        for dx, dy in ((1, 0), (0, 1)):
            j = index.get((x + dx, y + dy))
            if j is not None:
                edges.append((i, j))
    return make_graph(coords, edges)


def full_box(n: int):
    config = perc.sample_bond_config(perc.LatticeSpec(2, n), 1.0, 0)
    return perc.component_of_origin(config)


class TestBoundary:
    def test_singleton_in_lattice(self):
        host = full_box(2)
        sel = iso.SubsetSelection(host.adjacency, frozenset({host.origin}))
        assert iso.boundary_size(sel) == 4

    def test_domino_in_lattice(self):
        host = full_box(2)
        pair = {host.origin, host.index_of((1, 0))}
        sel = iso.SubsetSelection(host.adjacency, frozenset(pair))
        assert iso.boundary_size(sel) == 6

    def test_matches_edge_scan(self):
        config = perc.sample_bond_config(perc.LatticeSpec(2, 4), 0.7, 13)
        cluster = perc.component_of_origin(config)
        rng = np.random.Generator(np.random.Philox(key=1))
        for _ in range(20):
            size = int(rng.integers(1, cluster.n_vertices))
            members = frozenset(
                int(v) for v in rng.choice(cluster.n_vertices, size, replace=False))
            sel = iso.SubsetSelection(cluster.adjacency, members)
            assert iso.boundary_size(sel) == boundary_oracle(cluster.adjacency,
                                                             members)

    def test_complement_symmetry(self):
        host = grid_graph(3, 3)
        members = frozenset({0, 1, 4})
        comp = frozenset(range(9)) - members
        a = iso.boundary_size(iso.SubsetSelection(host.adjacency, members))
        b = iso.boundary_size(iso.SubsetSelection(host.adjacency, comp))
        assert a == b

    def test_relative_boundary_not_smaller(self):
        sub = make_graph([(0, 0), (1, 0)], [(0, 1)])
        host = full_box(2)
        embed = [host.index_of(tuple(c)) for c in sub.coords]
        internal = iso.SubsetSelection(sub.adjacency, frozenset({0}))
        relative = iso.SubsetSelection(sub.adjacency, frozenset({0}),
                                       host.adjacency, embed)
        assert iso.boundary_size(relative) >= iso.boundary_size(internal)


class TestProfileF:
    def test_upper_branch(self):
        assert iso.profile_f(16, 1.0, 4, 0.5, 2) == pytest.approx(4.0)

    def test_lower_branch(self):
        assert iso.profile_f(1, 1.0, 16, 0.5, 2) == 1.0

    def test_threshold_attaches_upward(self):
        # threshold c n^gamma = 4 exactly
        assert iso.profile_f(4, 1.0, 16, 0.5, 2) == pytest.approx(2.0)

    def test_domain(self):
        with pytest.raises(ValueError):
            iso.profile_f(4, 0.0, 16, 0.5, 2)


class TestConnectedEnumeration:
    @pytest.mark.parametrize("graph", [grid_graph(2, 2), grid_graph(3, 2),
                                       make_graph([(0, 0), (1, 0), (-1, 0), (0, 1)],
                                                  [(0, 1), (0, 2), (0, 3)])])
    def test_matches_brute_force(self, graph):
        n = graph.n_vertices
        got = sorted(iso.iter_connected_subsets(graph.adjacency, n))
        assert len(got) == len(set(got))

        def connected(mask):
            verts = [v for v in range(n) if mask >> v & 1]
            seen = {verts[0]}
            frontier = [verts[0]]
            while frontier:
                v = frontier.pop()
                for w in graph.adjacency[v]:
                    if mask >> w & 1 and w not in seen:
                        seen.add(w)
                        frontier.append(w)
            return len(seen) == len(verts)

        want = sorted(m for m in range(1, 1 << n) if connected(m))
        assert got == want

    def test_size_cap(self):
        graph = grid_graph(3, 2)
        for mask in iso.iter_connected_subsets(graph.adjacency, 3):
            assert mask.bit_count() <= 3


class TestIsoperimetricBeta:
    def test_degenerate_single_vertex(self):
        lone = perc.ClusterGraph(np.array([[0, 0]]), [[]], 0,
                                 {"d": 2, "n": 1, "p": 1.0, "seed": 0})
        report = iso.isoperimetric_beta(lone)
        assert report.degenerate and report.beta == 0.0

    def test_grid_matches_all_subsets_oracle(self):
        g = grid_graph(3, 3)
        report = iso.isoperimetric_beta(g, None, 1.0, 0.125, 9, 4)
        nbr = iso.neighbor_masks(g.adjacency)
        best = None
        for mask in range(1, (1 << 9) - 1):
            verts = [v for v in range(9) if mask >> v & 1]
            seen = {verts[0]}
            frontier = [verts[0]]
            while frontier:
                v = frontier.pop()
                for w in g.adjacency[v]:
                    if mask >> w & 1 and w not in seen:
                        seen.add(w)
                        frontier.append(w)
            if len(seen) != len(verts):
                continue
            ratio = iso.mask_boundary(nbr, mask) / iso.profile_f(
                len(verts), 1.0, 4, 0.125, 2)
            best = ratio if best is None else min(best, ratio)
        assert report.beta == pytest.approx(best, abs=1e-12)

    def test_isomorphism_invariance(self):
        g = make_graph([(0, 0), (1, 0), (1, 1), (0, 1)],
                       [(0, 1), (1, 2), (2, 3), (3, 0)])
        perm = [2, 0, 3, 1]
        coords2 = [tuple(g.coords[perm[i]]) for i in range(4)]
        edges2 = []
        inv = {perm[i]: i for i in range(4)}
        for i, j in g.edges():
            edges2.append((inv[i], inv[j]))
        g2 = make_graph(coords2, edges2)
        a = iso.isoperimetric_beta(g, None, 1.0, 0.125, 4, 2)
        b = iso.isoperimetric_beta(g2, None, 1.0, 0.125, 4, 2)
        assert a.beta == pytest.approx(b.beta, abs=1e-12)

    def test_json_schema(self):
        report = iso.isoperimetric_beta(grid_graph(2, 2), None, 1.0, 0.125, 4, 2)
        buf = io.StringIO()
        report.to_json(buf)
        data = json.loads(buf.getvalue())
        assert set(data) >= {"beta", "argmin_size", "argmin_vertices",
                             "c", "gamma", "n"}


class TestFolner:
    def test_grid_k1(self):
        value, exact = iso.folner_function(grid_graph(3, 3).adjacency, 1.0, 9)
        assert (value, exact) == (3, True)

    def test_small_k_singleton(self):
        g = grid_graph(3, 3)
        value, exact = iso.folner_function(g.adjacency, 0.25, 9)
        assert (value, exact) == (1, True)

    def test_wreath_connected_equals_unrestricted(self):
        wreath = wr.build_wreath(make_graph([(x, 0) for x in range(3)],
                                            [(0, 1), (1, 2)]))
        adj = wreath.adjacency_lists()
        ks = (0.5, 1.0, 2.0)
        brute = iso._folner_bruteforce_multi(adj, ks, 24)
        for k in ks:
            conn, _ = iso.folner_function(adj, k, 24, connected_only=True)
            assert conn == brute[k]

    def test_monotone_in_k(self):
        adj = grid_graph(3, 3).adjacency
        values = [iso.folner_function(adj, k, 9)[0] for k in (0.5, 1.0, 1.5, 2.0)]
        clean = [v for v in values if v is not None]
        assert clean == sorted(clean)

    def test_connected_restriction_sound_on_small_graphs(self):
        hosts = [grid_graph(2, 2), grid_graph(3, 2), grid_graph(3, 3),
                 make_graph([(0, 0), (1, 0), (-1, 0), (0, 1)],
                            [(0, 1), (0, 2), (0, 3)])]
        for host in hosts:
            n = host.n_vertices
            for k in (0.5, 1.0, 2.0, 3.0):
                conn, _ = iso.folner_function(host.adjacency, k, n, True)
                brute, _ = iso.folner_function(host.adjacency, k, n, False)
                assert conn == brute

    def test_profile_csv_schema(self):
        profile = iso.folner_profile(grid_graph(3, 3).adjacency, [1.0, 2.0], 9)
        buf = io.StringIO()
        profile.to_csv(buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "k,value,exact,connected_only,cap"
        assert len(lines) == 3


class TestFolnerLowerBound:
    def test_three_vertex_bases(self):
        p3 = make_graph([(x, 0) for x in range(3)], [(0, 1), (1, 2)])
        triangle = make_graph([(0, 0), (1, 0), (0, 1)],
                              [(0, 1), (0, 2), (1, 2)])
        for base in (p3, triangle):
            for entry in iso.folner_lower_bound_check(base, [1, 2, 3]):
                assert entry["holds"] and entry["exact"]

    def test_wreath_side_dominates(self, k2):
        report = iso.folner_lower_bound_check(k2, [1.0])
        (entry,) = report
        assert entry["wreath_folner"] >= 2


class TestConfigurationGraph:
    def test_full_wreath_over_k2_is_square(self, k2):
        g = wr.build_wreath(k2)
        K = iso.configuration_graph(g, range(g.n_vertices))
        assert K.configs == [0, 1, 2, 3]
        assert K.n_edges == 4
        assert sorted(K.degrees()) == [2, 2, 2, 2]

    def test_single_element(self, k2):
        g = wr.build_wreath(k2)
        K = iso.configuration_graph(g, {g.state_index(0, 0b10)})
        assert len(K.configs) == 1 and K.n_edges == 0
        cls = K.classify(1)
        assert cls["bad_points"] == {(0, 0b10)}

    def test_remark_edge_count(self, k2):
        g = wr.build_wreath(k2)
        K = iso.configuration_graph(g, range(g.n_vertices))
        assert g.n_vertices == 2 * K.n_edges  # equality: no isolated config
        rng = np.random.Generator(np.random.Philox(key=3))
        for _ in range(20):
            size = int(rng.integers(1, g.n_vertices + 1))
            subset = [int(v) for v in rng.choice(g.n_vertices, size, replace=False)]
            K = iso.configuration_graph(g, subset)
            assert len(subset) >= 2 * K.n_edges


class TestPruning:
    def test_k4_unchanged(self):
        adj = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]]
        assert iso.prune_to_satisfiable(adj, 3) == {0, 1, 2, 3}

    def test_star_hypothesis_fails(self):
        adj = [[1, 2, 3, 4, 5]] + [[0]] * 5
        assert iso.ns_edge_fraction(adj, 3) >= 0.5

    def test_output_min_degree_unconditional(self):
        rng = np.random.Generator(np.random.Philox(key=9))
        checked = 0
        for _ in range(60):
            n = int(rng.integers(5, 14))
            adj = [[] for _ in range(n)]
            for i, j in itertools.combinations(range(n), 2):
                if rng.random() < 0.4:
                    adj[i].append(j)
                    adj[j].append(i)
            b = float(rng.integers(2, 7))
            alive = iso.prune_to_satisfiable(adj, b)
            for v in alive:
                assert 3 * sum(1 for w in adj[v] if w in alive) >= b
            if sum(len(a) for a in adj) and iso.ns_edge_fraction(adj, b) < 0.5:
                assert alive
                checked += 1
        assert checked > 5


class TestFlipClosure:
    def test_full_cube_equality(self):
        result = iso.flip_closure_bound_check(range(16), 4, 4)
        assert result["premise_holds"] and result["bound_holds"]
        assert result["family_size"] == result["required"] == 16

    def test_single_config_vacuous(self):
        result = iso.flip_closure_bound_check({0b101}, 3, 0)
        assert result["premise_holds"] and result["bound_holds"]

    def test_premise_violation_witness(self):
        result = iso.flip_closure_bound_check({0b00, 0b11}, 2, 1)
        assert not result["premise_holds"]
        assert result["witness"] in {0b00, 0b11}


class TestSmallBoundaryLemma:
    def test_whole_wreath_no_boundary(self, k2):
        g = wr.build_wreath(k2)
        report = iso.lemma_neud_check(g, range(g.n_vertices), 2.0)
        assert report["boundary_ratio"] == 0.0
        assert report["bad_fraction"] == 0.0
        assert report["holds"]

    def test_precondition_gate(self, k2):
        g = wr.build_wreath(k2)
        with pytest.raises(ValueError):
            iso.lemma_neud_check(g, {g.origin_state}, 2.0)


@settings(max_examples=30, deadline=None)
@given(mask=st.integers(min_value=1, max_value=(1 << 9) - 1))
def test_boundary_oracle_property(mask):
    g = grid_graph(3, 3)
    members = frozenset(v for v in range(9) if mask >> v & 1)
    sel = iso.SubsetSelection(g.adjacency, members)
    assert iso.boundary_size(sel) == boundary_oracle(g.adjacency, members)
