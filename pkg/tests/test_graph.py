"""Tanner graph sampling tests.

Oracles: hand-computed largest-remainder counts, multiset mirror identities,
and the exact hypergeometric distribution of socket matchings on a 4-variable
graph (chi-square against closed-form category probabilities).
"""
import math

import numpy as np
import pytest
from scipy.stats import chi2

from fss import (
    GraphError,
    degree_census,
    degree_counts,
    dump_graph,
    load_graph,
    make_regular,
    parse_ensemble,
    sample_graph,
)
from fss.seeds import mix


def edge_multiset(pairs):
    return sorted(map(tuple, np.asarray(pairs).tolist()))


def test_sample_36_n12_shapes():
    g = sample_graph(make_regular(3, 6), 12, seed=1)
    assert (g.n, g.m, g.E) == (12, 6, 36)
    assert g.var_deg.tolist() == [3] * 12
    assert g.chk_deg.tolist() == [6] * 6
    # check-side CSR is the mirror image of the variable-side edge list
    var_side = edge_multiset(g.edges())
    chk_side = []
    for c in range(g.m):
        for v in g.chk_adj[g.chk_ptr[c]:g.chk_ptr[c + 1]]:
            chk_side.append((int(v), c))
    assert var_side == sorted(chk_side)


def test_unrealizable_36_n13():
    with pytest.raises(GraphError, match="unrealizable degree sequence"):
        sample_graph(make_regular(3, 6), 13, seed=0)
    with pytest.raises(GraphError, match="39"):
        degree_counts(make_regular(3, 6), 13)


def test_n_below_max_variable_degree():
    with pytest.raises(GraphError, match="maximum variable degree"):
        sample_graph(make_regular(3, 6), 2, seed=0)
    with pytest.raises(GraphError, match=">= 1"):
        degree_counts(make_regular(3, 6), 0)


def test_determinism_and_ensemble_untouched():
    e = make_regular(3, 6)
    lam_before = (e.lam.degrees, e.lam.coeffs)
    rho_before = (e.rho.degrees, e.rho.coeffs)
    a = sample_graph(e, 120, seed=99)
    b = sample_graph(e, 120, seed=99)
    c = sample_graph(e, 120, seed=100)
    assert np.array_equal(a.var_adj, b.var_adj)
    assert np.array_equal(a.chk_adj, b.chk_adj)
    assert not np.array_equal(a.var_adj, c.var_adj)
    assert (e.lam.degrees, e.lam.coeffs) == lam_before
    assert (e.rho.degrees, e.rho.coeffs) == rho_before


def test_census_regular():
    g = sample_graph(make_regular(3, 6), 1024, seed=5)
    var, chk = degree_census(g)
    assert var == {3: 1024}
    assert chk == {6: 512}


def test_census_irregular_matches_largest_remainder():
    # lam(x) = 0.5 x^2 + 0.5 x^3: node fractions 4/7 and 3/7
    e = parse_ensemble("3:0.5,4:0.5/6:1.0")
    n = 70
    g = sample_graph(e, n, seed=11)
    var, chk = degree_census(g)

    # independent largest-remainder recompute
    fracs = e.lam.node_fractions()
    quotas = {d: n * f for d, f in fracs.items()}
    counts = {d: math.floor(q) for d, q in quotas.items()}
    leftover = n - sum(counts.values())
    for d in sorted(quotas, key=lambda d: (-(quotas[d] - counts[d]), d))[:leftover]:
        counts[d] += 1
    assert counts == {3: 40, 4: 30}
    assert var == counts
    E = sum(d * c for d, c in counts.items())
    assert E == 240
    assert chk == {6: 40}
    assert int(g.chk_deg.sum()) == E


def test_check_side_repair_slack():
    # m=56 largest-remainder counts {5:31, 6:25} carry 305 sockets for 306
    # variable sockets; the +-1 repair moves one node from degree 5 to 6
    e = parse_ensemble("3:1.0/5:0.5,6:0.5")
    var, chk = degree_counts(e, 102)
    assert var == {3: 102}
    assert chk == {5: 30, 6: 26}
    assert sum(d * c for d, c in chk.items()) == 306


def test_socket_matching_uniform_chi_square():
    # n=4 (3,6) graph: 12 sockets, 2 checks.  The matching law is fully
    # described by a = (#edges variable v -> check 0), with
    # P(a) = prod_v C(3, a_v) / C(12, 6).
    e = make_regular(3, 6)
    cats = {}
    for a0 in range(4):
        for a1 in range(4):
            for a2 in range(4):
                a3 = 6 - a0 - a1 - a2
                if 0 <= a3 <= 3:
                    key = (a0, a1, a2, a3)
                    cats[key] = (
                        math.comb(3, a0) * math.comb(3, a1)
                        * math.comb(3, a2) * math.comb(3, a3)
                        / math.comb(12, 6))
    assert len(cats) == 44
    assert abs(sum(cats.values()) - 1.0) < 1e-12

    trials = 10_000
    base = 2026_0819
    observed = dict.fromkeys(cats, 0)
    for t in range(trials):
        g = sample_graph(e, 4, seed=mix(base, t))
        key = tuple(int(np.sum(g.var_adj[3 * v:3 * v + 3] == 0))
                    for v in range(4))
        observed[key] += 1

    stat = sum((observed[k] - trials * p) ** 2 / (trials * p)
               for k, p in cats.items())
    assert stat < chi2.ppf(0.99, len(cats) - 1)


def test_dump_load_roundtrip(tmp_path):
    e = parse_ensemble("3:0.5,4:0.5/6:1.0")
    g = sample_graph(e, 70, seed=4242)
    p1 = tmp_path / "g.txt"
    p2 = tmp_path / "g2.txt"
    dump_graph(g, p1)
    h = load_graph(p1)
    assert (h.n, h.m, h.E, h.seed) == (g.n, g.m, g.E, g.seed)
    assert np.array_equal(h.var_deg, g.var_deg)
    assert np.array_equal(h.chk_deg, g.chk_deg)
    assert np.array_equal(h.var_adj, g.var_adj)
    assert edge_multiset(h.edges()) == edge_multiset(g.edges())
    dump_graph(h, p2)
    assert p1.read_bytes() == p2.read_bytes()
    header = p1.read_text().splitlines()[0]
    assert header == "70 40 240 4242"


def test_load_rejects_malformed(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("1 2 3\n")
    with pytest.raises(GraphError, match="header"):
        load_graph(p)
    p.write_text("2 1 2 7\n0 0\n")
    with pytest.raises(GraphError, match="edge lines"):
        load_graph(p)
    p.write_text("2 1 2 7\n0 0\n5 0\n")
    with pytest.raises(GraphError, match="out of range"):
        load_graph(p)
