import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import degraded_instances, make_topology, updown_cost_oracle
from pgft_route import (
    INF,
    NoRouteError,
    PgftSpec,
    build_pgft,
    build_routing_tables,
    closer_groups,
    compute_costs_and_dividers,
    compute_downpath_costs,
    dump_tables,
    parse_tables,
    prepare,
    route,
    route_entry,
    trace_path,
)


def cost_to(f, pre, leaf_guid):
    col = f.leaf_col[f.index[leaf_guid]]
    return {g: int(pre.costs[f.index[g], col]) for g in f.guids}


# -- Procedure on the worked examples --------------------------------------------


def test_fig2_costs(fig2):
    t, g = fig2
    f = prepare(t)
    c = cost_to(f, compute_costs_and_dividers(f), g["BR"])
    assert {n: c[g[n]] for n in g} == {"BL": 2, "ML": 3, "TOP": 2, "MC": 1, "MR": 1, "BR": 0}


def test_fig2_naive_condition_keeps_long_path(fig2):
    t, g = fig2
    f = prepare(t)
    c = cost_to(f, compute_costs_and_dividers(f, strict=False), g["BR"])
    assert c[g["BL"]] == 4


def test_fig2_downcosts(fig2):
    t, g = fig2
    f = prepare(t)
    down = compute_downpath_costs(f)
    col = f.leaf_col[f.index[g["BR"]]]
    assert down[f.index[g["TOP"]], col] == 2
    assert down[f.index[g["ML"]], col] == INF
    assert down[f.index[g["BR"]], col] == 0
    np.testing.assert_array_equal(down, compute_costs_and_dividers(f).downcosts)


def test_fig3_dividers(fig3):
    t, g = fig3
    f = prepare(t)
    events = []
    pre = compute_costs_and_dividers(f, trace=lambda *e: events.append(e))
    div = {n: pre.dividers[f.index[g[n]]] for n in g}
    assert (div["M0"], div["M1"], div["M2"]) == (3, 2, 3)
    assert (div["T0"], div["T1"], div["T2"]) == (9, 9, 9)
    tops = {f.index[g[n]]: n for n in ("T0", "T1", "T2")}
    steps = [(tops[s], old, new) for kind, s, old, new in events if s in tops]
    assert steps == [
        ("T0", 1, 6), ("T1", 1, 6),   # M0: 3 x 2
        ("T2", 1, 4),                 # M1: 2 x 2, T1 stays at 6
        ("T0", 6, 9), ("T1", 6, 9), ("T2", 4, 9),  # M2: 3 x 3
    ]


def test_single_leaf():
    t = build_pgft(PgftSpec.parse("1;4;1;1"))
    pre = compute_costs_and_dividers(t)
    assert pre.costs.tolist() == [[0]] and pre.dividers == [1]
    tb = route(t)
    assert tb.port.tolist() == [[0, 1, 2, 3]]
    assert all(tb.is_terminal(0, d) for d in range(4))


def test_fig1_costs_and_dividers(fig1):
    f = prepare(fig1)
    pre = compute_costs_and_dividers(f)
    assert pre.dividers == [1] * 6 + [2] * 6 + [4] * 4
    # leaf diagonal, ascending cost with distance
    assert (pre.costs[f.leaves, np.arange(6)] == 0).all()
    assert pre.costs.max() <= 2 * 3
    assert pre.relaxations <= 2 * len(fig1.links) * f.n_leaves


@pytest.mark.parametrize("spec", ["3;2.2.3;1.2.2;1.2.1", "2;4.4;1.4;1.1", "3;3.2.4;1.3.2;1.2.3", "4;2.2.2.2;1.2.2.2;1.1.2.1"])
def test_divider_matches_level_product(spec):
    s = PgftSpec.parse(spec)
    f = prepare(build_pgft(s))
    pre = compute_costs_and_dividers(f)
    for idx, r in enumerate(f.rank):
        assert pre.dividers[idx] == math.prod(s.w[: r + 1])


def test_cost_oracle_equivalence():
    for seed, _, t in degraded_instances(100):
        f = prepare(t)
        pre = compute_costs_and_dividers(f)
        oracle = updown_cost_oracle(t)
        got = {(f.guids[s], f.guids[l]): int(pre.costs[s, j])
               for s in range(f.n_switches) for j, l in enumerate(f.leaves)}
        want = {k: (INF if v == float("inf") else v) for k, v in oracle.items()}
        assert got == want, seed
        # directed switch-switch links bound the number of relaxations
        assert pre.relaxations <= 2 * len(t.links) * f.n_leaves


def test_threads_match_sequential():
    for seed, _, t in itertools.islice(degraded_instances(100), 0, 100, 7):
        f = prepare(t)
        a = compute_costs_and_dividers(f)
        b = compute_costs_and_dividers(f, threads=4)
        np.testing.assert_array_equal(a.costs, b.costs)
        np.testing.assert_array_equal(a.downcosts, b.downcosts)
        assert a.dividers == b.dividers and a.relaxations == b.relaxations


def test_threads_require_strict(fig1):
    with pytest.raises(ValueError):
        compute_costs_and_dividers(fig1, threads=2, strict=False)


def test_divider_overflow():
    # a 64-deep chain of switches each with two upswitches doubles the divider every level
    names, links = ["L"], []
    prev = ["L"]
    for lvl in range(66):
        cur = [f"a{lvl}", f"b{lvl}"]
        names += cur
        links += [(p, c, 1) for p in prev for c in cur]
        prev = cur
    t, _ = make_topology(names, links, {"L": 1})
    from pgft_route.dmodc import DividerOverflow
    with pytest.raises(DividerOverflow):
        compute_costs_and_dividers(t)


# -- route selection ------------------------------------------------------------


def test_fig4_closer_groups(fig4):
    t, g = fig4
    f = prepare(t)
    pre = compute_costs_and_dividers(f)
    s = f.index[g["S"]]
    lam = f.leaf_col[f.index[g["LAM"]]]
    costs = [int(pre.costs[r, lam]) for r in f.group_remote[s]]
    assert int(pre.costs[s, lam]) == 3 and costs == [4, 2, 4, 2]
    assert pre.dividers[s] == 4
    for mode in ("plain", "updown"):
        assert closer_groups(f, pre, s, lam, mode) == [1, 3]


def test_fig4_route_entry_formula():
    c = [(10,), (20, 21, 22)]
    choice = route_entry(20, c, 4)
    assert (choice.group_index, choice.port_index, choice.port) == (1, 2, 22)
    assert choice.alternatives == (10, 20, 21, 22)


def test_fig4_full_engine(fig4):
    t, g = fig4
    f = prepare(t)
    tb = route(f)
    s = f.index[g["S"]]
    t2_ports = f.group_ports[s][3]
    assert tb.port[s, 20] == t2_ports[2]
    assert sorted(tb.alternatives(s, 20)) == sorted(f.group_ports[s][1] + t2_ports)


def test_route_entry_zero_destination():
    for div in (1, 3, 17):
        assert route_entry(0, [(5, 6), (7,)], div)[:3] == (0, 0, 5)


def test_route_entry_d7():
    assert route_entry(7, [(1,), (2,)], 1)[:2] == (1, 0)
    # destinations alternate groups with period one
    assert [route_entry(d, [(1,), (2,)], 1).group_index for d in range(8)] == [0, 1] * 4


def test_route_entry_empty():
    with pytest.raises(NoRouteError):
        route_entry(3, [], 1)


@settings(max_examples=200, deadline=None)
@given(
    d=st.integers(0, 10**6),
    div=st.integers(1, 1000),
    sizes=st.lists(st.integers(1, 5), min_size=1, max_size=6),
)
def test_route_entry_in_range(d, div, sizes):
    groups, port = [], 0
    for n in sizes:
        groups.append(tuple(range(port, port + n)))
        port += n
    ch = route_entry(d, groups, div)
    assert ch.port in groups[ch.group_index]
    assert ch.port in ch.alternatives
    # consecutive blocks of `div` destinations share a group
    assert route_entry(d - d % div, groups, div).group_index == ch.group_index


def test_fig2_mid_right_closer(fig2):
    t, g = fig2
    f = prepare(t)
    pre = compute_costs_and_dividers(f)
    s = f.index[g["MR"]]
    col = f.leaf_col[f.index[g["BR"]]]
    kept = [f.guids[f.group_remote[s][i]] for i in closer_groups(f, pre, s, col, "plain")]
    assert kept == [g["BR"]]


def test_leaf_to_itself_has_no_closer(fig1):
    f = prepare(fig1)
    pre = compute_costs_and_dividers(f)
    for j, s in enumerate(f.leaves):
        assert closer_groups(f, pre, int(s), j) == []


# -- tables -----------------------------------------------------------------------


def _up_groups_balanced(f, tb):
    for s in range(f.n_switches):
        ups = np.flatnonzero(f.group_up[s])
        if not len(ups):
            continue
        counts = dict.fromkeys(ups.tolist(), 0)
        remote_of_port = {p: gi for gi, ports in enumerate(f.group_ports[s]) for p in ports}
        for d in tb.entries(s):
            gi = remote_of_port.get(int(tb.port[s, d]))
            if gi in counts:
                counts[gi] += 1
        if max(counts.values()) - min(counts.values()) > 1:
            return False
    return True


def test_fig1_tables_complete(fig1):
    f = prepare(fig1)
    tb = route(f)
    assert (tb.port >= 0).all()
    assert tb.gaps == []
    assert _up_groups_balanced(f, tb)


def test_fig1_top_removed_paths_short(fig1):
    t = fig1.without(switches=[13])
    tb = route(t)
    for a, b in itertools.permutations(range(12), 2):
        tr = trace_path(tb, a, b)
        assert tr.length <= 5


def test_route_legality_post_hoc():
    for seed, _, t in itertools.islice(degraded_instances(100), 0, 100, 9):
        f = prepare(t)
        pre = compute_costs_and_dividers(f)
        tb = build_routing_tables(f, pre)
        for s in range(f.n_switches):
            for d in tb.entries(s):
                if tb.is_terminal(s, d):
                    continue
                col = f.node_leaf_col[d]
                nxt = f.peer_switch[s, tb.port[s, d]]
                up = f.rank[nxt] == f.rank[s] + 1
                ref = pre.costs if up else pre.downcosts
                assert ref[nxt, col] < pre.costs[s, col]
                assert int(tb.port[s, d]) in tb.alternatives(s, int(d))


def test_coalescing_single_top_per_destination():
    for spec in ("3;2.2.3;1.2.2;1.2.1", "2;4.4;1.4;1.1", "3;3.2.4;1.3.2;1.2.3"):
        f = prepare(build_pgft(PgftSpec.parse(spec)))
        tb = route(f)
        top = f.max_rank
        for d in range(f.n_nodes):
            roots = set()
            for src in range(f.n_nodes):
                if src == d:
                    continue
                for guid, _ in trace_path(tb, src, d).hops:
                    if f.rank[f.index[guid]] == top:
                        roots.add(guid)
            assert len(roots) <= 1
            if f.node_leaf[d] != f.node_leaf[(d + f.n_nodes // 2) % f.n_nodes]:
                assert len(roots) == 1


def test_gap_signals_internal_error(fig1, monkeypatch):
    from pgft_route import dmodc
    f = prepare(fig1)
    real = dmodc.closer_mask

    def broken(f_, pre, s, mode="updown"):
        m = real(f_, pre, s, mode)
        if s == 6:
            m[:] = False
        return m

    monkeypatch.setattr(dmodc, "closer_mask", broken)
    tb = build_routing_tables(f)
    assert tb.gaps and all(s == 6 for s, _ in tb.gaps)
    with pytest.raises(dmodc.RoutingError, match="internal error"):
        route(f)


def test_plain_mode_can_go_down_then_up():
    # S sees leaf V (cost 2, via N) and top T (cost 2) as closer towards R;
    # plain mode picks V for d=0, whose own route climbs back to N
    names = ["V", "L", "R", "S", "N", "T"]
    links = [("L", "S", 1), ("S", "V", 1), ("V", "N", 1), ("N", "R", 1), ("S", "T", 1), ("T", "N", 1)]
    t, g = make_topology(names, links, {"R": 1, "L": 1, "V": 1})
    plain = trace_path(route(t, mode="plain"), 1, 0)
    assert [h[0] for h in plain.hops] == [g["L"], g["S"], g["V"], g["N"], g["R"]]
    assert plain.shape == "violation"
    strict = trace_path(route(t, mode="updown"), 1, 0)
    assert [h[0] for h in strict.hops] == [g["L"], g["S"], g["T"], g["N"], g["R"]]
    assert strict.shape == "up*down*"


def test_modes_agree_on_degraded_pgfts():
    for _, _, t in itertools.islice(degraded_instances(100), 0, 100, 5):
        f = prepare(t)
        pre = compute_costs_and_dividers(f)
        a = build_routing_tables(f, pre, mode="plain")
        b = build_routing_tables(f, pre, mode="updown")
        np.testing.assert_array_equal(a.port, b.port)


def test_dump_parse_roundtrip(fig1):
    f = prepare(fig1)
    tb = route(f)
    text = dump_tables(tb)
    back = parse_tables(text, f)
    np.testing.assert_array_equal(back.port, tb.port)
    assert dump_tables(back) == text
    assert text.startswith("table 0x0000000000000001\ndest 0x0000000000000011 d=0 port=0 alts=0\n")


def test_parse_tables_rejects_mismatched_id(fig1):
    f = prepare(fig1)
    with pytest.raises(ValueError, match="line 2"):
        parse_tables("table 0x1\ndest 0x11 d=3 port=0 alts=0\n", f)


@pytest.mark.parametrize("threads", [2, 8])
def test_tables_thread_independent(threads):
    _, _, t = next(iter(degraded_instances(3)))
    f = prepare(t)
    a = dump_tables(route(f))
    assert dump_tables(route(f, threads=threads)) == a
