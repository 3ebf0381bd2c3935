"""Hand-built fixtures and brute-force oracles shared by the tests.

Oracles here only use the plain Topology records (and networkx), never the
indexed fabric or the routing engine.
"""

from collections import defaultdict, deque

import networkx as nx

from pgft_route import FaultSpec, Link, Node, PgftSpec, Topology, build_pgft, inject_faults

INF = float("inf")


def make_topology(names, links, nodes):
    """``names`` in guid order; ``links`` as (a, b, parallel); ``nodes`` as {leaf: count}.

    Ports are handed out sequentially per switch, node ports first.
    """
    guid = {n: i + 1 for i, n in enumerate(names)}
    next_port = defaultdict(int)
    node_list = []
    d = 0
    for leaf, count in nodes.items():
        for _ in range(count):
            g = guid[leaf]
            node_list.append(Node(1000 + d, d, g, next_port[g]))
            next_port[g] += 1
            d += 1
    link_list = []
    for a, b, k in links:
        for _ in range(k):
            ga, gb = guid[a], guid[b]
            link_list.append(Link((ga, next_port[ga]), (gb, next_port[gb])))
            next_port[ga] += 1
            next_port[gb] += 1
    return Topology(tuple(guid.values()), tuple(node_list), tuple(link_list)), guid


def fig2_topology():
    """Degraded fragment used for cost propagation: costs are towards BR."""
    names = ["BL", "BR", "ML", "MC", "MR", "TOP"]
    links = [("BR", "MC", 1), ("MC", "TOP", 1), ("TOP", "ML", 1),
             ("ML", "BL", 1), ("BL", "MR", 1), ("MR", "BR", 1)]
    return make_topology(names, links, {"BL": 1, "BR": 1})


def fig3_topology():
    """Three middle switches reaching dividers 3, 2, 3 and three tops above them."""
    names = ["A", "B", "M0", "M1", "M2", "E1", "E2", "T0", "T1", "T2"]
    links = [
        ("A", "M0", 1), ("A", "M2", 1), ("A", "E1", 1), ("B", "M1", 1), ("B", "E2", 1),
        ("M2", "T0", 1), ("T0", "M0", 1), ("M0", "T1", 1), ("T1", "M1", 1),
        ("M1", "T2", 1), ("T2", "M2", 1), ("M2", "T1", 1),
    ]
    return make_topology(names, links, {"A": 1, "B": 1})


def fig4_topology():
    """Switch S with groups [A x2 (down), T1 x1 (up), B x1 (down), T2 x3 (up)], divider 4.

    Destination 20 lives on leaf LAM, reached through T1/T2 -> MP -> LAM.
    """
    names = ["A", "T1", "B", "T2", "S", "LAM", "MP", "X1", "X2", "X3"]
    links = [
        ("S", "A", 2), ("S", "T1", 1), ("S", "B", 1), ("S", "T2", 3),
        ("A", "X1", 1), ("A", "X2", 1), ("A", "X3", 1),
        ("T1", "MP", 1), ("T2", "MP", 1), ("MP", "LAM", 1),
    ]
    return make_topology(names, links, {"A": 10, "B": 9, "LAM": 2})


# -- oracles ------------------------------------------------------------------


def graph(t):
    g = nx.MultiGraph()
    g.add_nodes_from(t.switches)
    for l in t.links:
        g.add_edge(l.a[0], l.b[0])
    return g


def rank_oracle(t):
    """Shortest hop distance to any leaf via networkx."""
    return dict(nx.multi_source_dijkstra_path_length(graph(t), set(t.leaves)))


def updown_cost_oracle(t):
    """{(switch, leaf): hops} over walks that climb rank by 1 then only descend.

    BFS over (switch, descending) states from every switch.
    """
    rank = rank_oracle(t)
    adj = defaultdict(set)
    for l in t.links:
        adj[l.a[0]].add(l.b[0])
        adj[l.b[0]].add(l.a[0])
    leaves = set(t.leaves)
    out = {}
    for s in t.switches:
        for leaf in leaves:
            out[(s, leaf)] = INF
        if s not in rank:
            continue
        dist = {(s, False): 0}
        q = deque([(s, False)])
        while q:
            u, down = q.popleft()
            if u in leaves:
                out[(s, u)] = min(out[(s, u)], dist[(u, down)])
            for v in adj[u]:
                if rank[v] == rank[u] + 1 and not down:
                    nxt = (v, False)
                elif rank[v] == rank[u] - 1:
                    nxt = (v, True)
                else:
                    continue
                if nxt not in dist:
                    dist[nxt] = dist[(u, down)] + 1
                    q.append(nxt)
    return out


def downward_paths(t, start, target):
    """All strictly rank-descending switch paths from ``start`` to switch ``target``."""
    rank = rank_oracle(t)
    adj = defaultdict(set)
    for l in t.links:
        adj[l.a[0]].add(l.b[0])
        adj[l.b[0]].add(l.a[0])
    paths = []

    def dfs(u, path):
        if u == target:
            paths.append(path)
            return
        for v in sorted(adj[u]):
            if rank[v] == rank[u] - 1:
                dfs(v, path + [v])

    dfs(start, [start])
    return paths


def leaf_pairs_ok(t):
    costs = updown_cost_oracle(t)
    return all(costs[(a, b)] < INF for a in t.leaves for b in t.leaves)


DEGRADE_SPECS = ["3;2.2.3;1.2.2;1.2.1", "2;4.4;1.4;1.1", "3;4.4.4;1.4.4;1.1.1", "3;2.3.4;1.2.3;1.1.2"]


def degraded_instances(count=100):
    """Seeded degraded PGFTs: up to 10% of links removed, leaf pairs kept connected."""
    base = {s: build_pgft(PgftSpec.parse(s)) for s in DEGRADE_SPECS}
    for seed in range(count):
        spec = DEGRADE_SPECS[seed % len(DEGRADE_SPECS)]
        fraction = (seed % 10 + 1) / 100
        t, _ = inject_faults(base[spec], FaultSpec(remove_links=fraction, seed=seed,
                                                   preserve_leaf_connectivity=True))
        yield seed, PgftSpec.parse(spec), t
