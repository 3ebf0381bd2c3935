"""Reference Dmodk routing for complete PGFTs, computed from labels alone.

Used as an oracle for Dmodc: nothing here touches costs or dividers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dmodc import RoutingTables
from .fabric import Fabric, prepare
from .topology import PgftSpec, Topology, build_pgft, pgft_switch_guid


class NotCompletePgft(ValueError):
    pass


@dataclass(frozen=True)
class LevelArities:
    w: tuple[int, ...]
    p: tuple[int, ...]

    @classmethod
    def from_spec(cls, spec: PgftSpec) -> "LevelArities":
        return cls(spec.w, spec.p)

    def divider(self, level: int) -> int:
        """Product of ``w_1..w_level``."""
        return math.prod(self.w[:level])


def dmodk_up_port(level: int, d, arities: LevelArities):
    """Up-port index of a level-``level`` switch (leaves are level 1) for destination ``d``.

    Works on ints and integer arrays alike.
    """
    return (d // arities.divider(level)) % (arities.w[level] * arities.p[level])


def _require_complete(t: Topology | Fabric) -> tuple[Topology, PgftSpec]:
    topo = t.topology if isinstance(t, Fabric) else t
    if topo.pgft is None or build_pgft(topo.pgft) != topo:
        raise NotCompletePgft("Dmodk requires complete PGFT")
    return topo, topo.pgft


def build_dmodk_tables(t: Topology | Fabric) -> RoutingTables:
    topo, spec = _require_complete(t)
    f = t if isinstance(t, Fabric) else prepare(topo)
    ar = LevelArities.from_spec(spec)
    m, w, p, h = spec.m, spec.w, spec.p, spec.h
    d = np.arange(spec.node_count, dtype=np.int64)
    port = np.full((f.n_switches, len(d)), -1, dtype=np.int64)
    closer = []

    for level in range(1, h + 1):
        below_size = math.prod(m[:level])  # nodes under one level-l switch
        n_sw = spec.switch_count(level)
        c_count = math.prod(w[:level])
        for i in range(n_sw):
            s = f.index[pgft_switch_guid(spec, level, i)]
            subtree = i // c_count  # the a_{l+1}..a_h part of the label
            below = d // below_size == subtree
            row = port[s]
            if level == 1:
                row[below] = d[below] % m[0]
            else:
                child = (d[below] // math.prod(m[: level - 1])) % m[level - 1]
                parallel = (d[below] // ar.divider(level)) % p[level - 1]
                row[below] = child + m[level - 1] * parallel
            if level < h:
                row[~below] = m[level - 1] * p[level - 1] + dmodk_up_port(level, d[~below], ar)
            closer.append((s, level, subtree))

    # alternatives: every up group for upward entries, the child group for downward ones
    masks = [None] * f.n_switches
    leaf_subtree = np.arange(f.n_leaves)  # leaf column j == leaf index j in a generated PGFT
    for s, level, subtree in closer:
        n_groups = len(f.group_ports[s])
        up = f.group_up[s]
        mask = np.zeros((n_groups, f.n_leaves), dtype=bool)
        leaf_in = leaf_subtree // math.prod(m[1:level]) == subtree
        mask[np.ix_(up, ~leaf_in)] = True
        if level > 1:
            child_of_leaf = (leaf_subtree // math.prod(m[1 : level - 1])) % m[level - 1]
            down_groups = np.flatnonzero(~up)  # ordered by child a_l
            for j in np.flatnonzero(leaf_in):
                mask[down_groups[child_of_leaf[j]], j] = True
        masks[s] = mask
    return RoutingTables(f, port, "dmodk", masks)
