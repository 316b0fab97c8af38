import math

import numpy as np
import pytest

from udroute.evaluate import (RoutingOutcome, apnsp_accuracy, eta, gf_router,
                              greedy_forwarding, oracle_route, route_policy,
                              run_experiment)
from udroute.features import FeatureKind, FeatureSet
from udroute.graphs import GraphParams, sample_connected_graph
from udroute.nnet import init_model
from udroute.rollout import greedy_walk
from udroute.shortest_paths import SpOracle, euclid, sssp

from oracles import graph_from_coords

RAW2 = FeatureSet(FeatureKind.DIST)


def minus_ud_model():
    m = init_model(2, 0)
    for w in m.weights:
        w[:] = 0.0
    m.weights[0][1, 0] = 1.0
    m.weights[1][0, 0] = 1.0
    m.weights[2][0, 0] = -1.0
    return m


@pytest.fixture(scope="module")
def rand_graph():
    return sample_connected_graph(GraphParams(18, 4.0, 1000.0, 33))


def test_route_direct_hop(rand_graph):
    g = rand_graph
    D = 3
    O = int(g.nbrs[D][0])
    out = route_policy(g, minus_ud_model(), RAW2, O, D)
    assert out.hops == (O, D)
    assert out.delivered
    assert out.length == g.edge_weight(O, D)


def test_route_oracle_lookup_reaches_shortest_length(rand_graph):
    # scoring candidates by true Q* must yield d_p == d_sp on every pair
    g = rand_graph
    oracle = SpOracle(g)
    for D in range(0, g.n, 3):
        sp = oracle.table(D)

        def score_fn(v, cands):
            return -(np.array([g.edge_weight(v, int(u)) for u in cands])
                     + sp.dist[cands])

        for O in range(g.n):
            if O == D:
                continue
            hops = greedy_walk(g, score_fn, O, D)
            length = sum(g.edge_weight(a, b) for a, b in zip(hops, hops[1:]))
            assert hops[-1] == D
            assert length == pytest.approx(sp.dist[O], rel=1e-12)


def test_greedy_forwarding_convex_direct(rand_graph):
    g = rand_graph
    D = 5
    O = int(g.nbrs[D][0])
    out = greedy_forwarding(g, O, D)
    assert out.delivered
    assert out.hops[0] == O and out.hops[-1] == D


def test_greedy_forwarding_trapped_in_void():
    # the decoy (node 2) is nearest to the destination but a dead end
    coords = [(40, 200), (120, 200), (200, 200), (140, 295), (230, 310),
              (310, 280), (350, 200)]
    g = graph_from_coords(coords, radius=100.0)
    from udroute.graphs import is_connected
    assert is_connected(g)
    out = greedy_forwarding(g, 0, 6)
    assert not out.delivered
    assert out.hops == (0, 1, 2)
    assert out.length == math.inf
    sp = sssp(g, 6)
    assert eta(g, sp, out, 0.05) == 0


def test_eta_exact_shortest_is_hit(rand_graph):
    g = rand_graph
    sp = sssp(g, 0)
    out = oracle_route(g, sp, 7)
    assert out.delivered and out.length == sp.dist[7]
    assert eta(g, sp, out, 0.0) == 1
    assert eta(g, sp, out, 0.05) == 1


def test_eta_margin_boundary(rand_graph):
    g = rand_graph
    D = 0
    sp = sssp(g, D)
    O = int(g.nbrs[D][0])          # adjacent: zeta == 1 exactly
    dsp = float(sp.dist[O])
    over = RoutingOutcome(origin=O, dest=D, hops=(O, D), delivered=True,
                          length=1.06 * dsp)
    under = RoutingOutcome(origin=O, dest=D, hops=(O, D), delivered=True,
                           length=1.04 * dsp)
    assert eta(g, sp, over, 0.05) == 0
    assert eta(g, sp, under, 0.05) == 1


def test_eta_matches_recomputation(rand_graph):
    g = rand_graph
    oracle = SpOracle(g)
    model = init_model(2, 6)
    eps = 0.05
    for D in range(0, g.n, 4):
        sp = oracle.table(D)
        for O in range(g.n):
            if O == D:
                continue
            out = route_policy(g, model, RAW2, O, D)
            got = eta(g, sp, out, eps)
            if not out.delivered:
                want = 0
            else:
                dsp = float(sp.dist[O])
                de = euclid(g.coords, O, D)
                want = 1 if out.length / dsp <= (dsp / de) * (1 + eps) else 0
            assert got == want


def test_apnsp_oracle_policy_is_perfect(rand_graph):
    g = rand_graph
    report = apnsp_accuracy(g, lambda sp, O, D: oracle_route(g, sp, O),
                            epsilon=0.05, policy="oracle")
    assert report.accuracy == 1.0


def test_apnsp_matches_hand_enumeration():
    g = sample_connected_graph(GraphParams(6, 4.0, 1000.0, 2))
    oracle = SpOracle(g)
    report = apnsp_accuracy(g, gf_router(g), 0.05, "gf", oracle)
    hits = g.n
    for D in range(g.n):
        sp = oracle.table(D)
        for O in range(g.n):
            if O == D:
                continue
            out = greedy_forwarding(g, O, D)
            if out.delivered:
                dsp = float(sp.dist[O])
                de = euclid(g.coords, O, D)
                if out.length / dsp <= (dsp / de) * 1.05:
                    hits += 1
    assert report.accuracy == hits / 36


def test_walk_length_bounded(rand_graph):
    g = rand_graph
    model = init_model(4, 5)
    fset4 = FeatureSet(FeatureKind.DIST_STRETCH)
    for O in range(g.n):
        for D in range(0, g.n, 5):
            if O == D:
                continue
            out = route_policy(g, model, fset4, O, D)
            assert len(out.hops) <= g.n
            assert len(set(out.hops)) == len(out.hops)


def test_run_experiment_structure_and_determinism():
    model = minus_ud_model()
    a = run_experiment(model, RAW2, sizes=(12,), densities=(4.0,), reps=2,
                       base_seed=5, epsilon=0.05, experiment_id="t")
    b = run_experiment(model, RAW2, sizes=(12,), densities=(4.0,), reps=2,
                       base_seed=5, epsilon=0.05, experiment_id="t")
    assert a.rows == b.rows
    assert len(a.rows) == 4           # 2 reps x 2 policies
    assert len(a.summary) == 2
    policies = {row[4] for row in a.rows}
    assert policies == {"model", "gf"}
    # the -uD model IS greedy forwarding, so the deltas vanish
    for size, density, policy, mean, delta in a.summary:
        if policy == "model":
            assert delta == 0.0


def test_run_experiment_csvs(tmp_path):
    res = run_experiment(minus_ud_model(), RAW2, sizes=(10,), densities=(4.0,),
                         reps=1, base_seed=1, experiment_id="csvtest")
    rows_csv = tmp_path / "rows.csv"
    summary_csv = tmp_path / "summary.csv"
    res.write_csv(rows_csv, "note")
    res.write_summary_csv(summary_csv)
    lines = rows_csv.read_text().splitlines()
    assert lines[0] == "# note"
    assert lines[1].startswith("experiment_id,size,density,rep")
    assert len(lines) == 2 + len(res.rows)
    assert summary_csv.read_text().splitlines()[0].startswith("experiment_id")
