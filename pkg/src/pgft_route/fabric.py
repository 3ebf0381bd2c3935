"""Dense index view of a :class:`~pgft_route.topology.Topology`.

Switch indices follow guid order, so sorting by index is sorting by guid.
Leaves get their own column index (cost matrices are switches x leaves).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .topology import Topology, build_port_groups, compute_ranks

NO_PEER = -1


@dataclass(eq=False)
class Fabric:
    topology: Topology
    guids: list[int]
    index: dict[int, int]
    rank: np.ndarray            # (S,) -1 for isolated switches
    levels: list[np.ndarray]    # switch indices per rank, ascending
    leaves: np.ndarray          # (L,) switch index of each leaf column
    leaf_col: np.ndarray        # (S,) leaf column or -1
    group_remote: list[np.ndarray]
    group_up: list[np.ndarray]
    group_ports: list[tuple[tuple[int, ...], ...]]
    up_nbrs: list[np.ndarray]
    down_nbrs: list[np.ndarray]
    node_guid: list[int]
    node_leaf: np.ndarray       # (N,) switch index of each destination's leaf
    node_port: np.ndarray       # (N,) leaf port facing the node
    peer_switch: np.ndarray     # (S, P) remote switch index or -1
    peer_port: np.ndarray       # (S, P)
    peer_node: np.ndarray       # (S, P) destination id or -1

    @property
    def n_switches(self) -> int:
        return len(self.guids)

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    @property
    def n_nodes(self) -> int:
        return len(self.node_guid)

    @property
    def max_rank(self) -> int:
        return len(self.levels) - 1

    @property
    def node_leaf_col(self) -> np.ndarray:
        return self.leaf_col[self.node_leaf]

    def group_port_matrix(self, s: int) -> tuple[np.ndarray, np.ndarray]:
        """Ports of switch ``s`` as a padded (groups, max ports) array plus group sizes."""
        groups = self.group_ports[s]
        sizes = np.array([len(g) for g in groups], dtype=np.int64)
        mat = np.full((len(groups), max(sizes, default=0)), -1, dtype=np.int64)
        for i, g in enumerate(groups):
            mat[i, : len(g)] = g
        return mat, sizes


def prepare(t: Topology) -> Fabric:
    """Rank the topology, build port groups and index everything densely."""
    ranks = compute_ranks(t)
    guids = list(t.switches)
    index = {g: i for i, g in enumerate(guids)}
    S = len(guids)
    rank = np.array([ranks.get(g, -1) for g in guids], dtype=np.int64)
    max_rank = int(rank.max())
    levels = [np.flatnonzero(rank == r) for r in range(max_rank + 1)]

    leaves = np.array(sorted(index[g] for g in t.leaves), dtype=np.int64)
    leaf_col = np.full(S, -1, dtype=np.int64)
    leaf_col[leaves] = np.arange(len(leaves))

    groups = build_port_groups(t)
    group_remote, group_up, group_ports, up_nbrs, down_nbrs = [], [], [], [], []
    for s, g in enumerate(guids):
        remote = np.array([index[pg.remote] for pg in groups[g]], dtype=np.int64)
        # isolated switches only neighbour other isolated switches: no up/down
        up = (rank[remote] == rank[s] + 1) & (rank[s] >= 0)
        down = (rank[remote] == rank[s] - 1) & (rank[s] >= 0)
        group_remote.append(remote)
        group_up.append(up)
        group_ports.append(tuple(pg.ports for pg in groups[g]))
        up_nbrs.append(remote[up])
        down_nbrs.append(remote[down])

    max_port = max(
        [n.port for n in t.nodes] + [ep[1] for l in t.links for ep in (l.a, l.b)], default=0
    )
    peer_switch = np.full((S, max_port + 1), NO_PEER, dtype=np.int64)
    peer_port = np.full((S, max_port + 1), NO_PEER, dtype=np.int64)
    peer_node = np.full((S, max_port + 1), NO_PEER, dtype=np.int64)
    for link in t.links:
        (ga, pa), (gb, pb) = link.a, link.b
        a, b = index[ga], index[gb]
        peer_switch[a, pa], peer_port[a, pa] = b, pb
        peer_switch[b, pb], peer_port[b, pb] = a, pa
    node_leaf = np.array([index[n.leaf] for n in t.nodes], dtype=np.int64)
    node_port = np.array([n.port for n in t.nodes], dtype=np.int64)
    peer_node[node_leaf, node_port] = np.arange(len(t.nodes))

    return Fabric(
        topology=t,
        guids=guids,
        index=index,
        rank=rank,
        levels=levels,
        leaves=leaves,
        leaf_col=leaf_col,
        group_remote=group_remote,
        group_up=group_up,
        group_ports=group_ports,
        up_nbrs=up_nbrs,
        down_nbrs=down_nbrs,
        node_guid=[n.guid for n in t.nodes],
        node_leaf=node_leaf,
        node_port=node_port,
        peer_switch=peer_switch,
        peer_port=peer_port,
        peer_node=peer_node,
    )
