"""Validity, path tracing and up*down* (deadlock-freedom) checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dmodc import INF, Preprocessing, RoutingTables
from .fabric import Fabric

UPDOWN = "up*down*"
VIOLATION = "violation"


class TraceError(RuntimeError):
    def __init__(self, message: str, switch: int | None = None, dest: int | None = None):
        self.switch = switch
        self.dest = dest
        super().__init__(message)


class RoutingHole(TraceError):
    pass


class LoopSuspected(TraceError):
    pass


@dataclass
class ValidityResult:
    valid: bool
    offending: list[tuple[int, int]] = field(default_factory=list)  # (from leaf guid, to leaf guid)

    def __bool__(self) -> bool:
        return self.valid


def check_validity(pre: Preprocessing, fabric: Fabric) -> ValidityResult:
    """Every leaf must have a finite cost to every other leaf."""
    leaf_costs = pre.costs[fabric.leaves]  # row: from leaf, col: to leaf
    bad = np.argwhere(leaf_costs == INF)
    g = fabric.guids
    offending = [(g[fabric.leaves[i]], g[fabric.leaves[j]]) for i, j in bad]
    return ValidityResult(not offending, offending)


def hop_budget(fabric: Fabric) -> int:
    """Longest trace tolerated before a loop is suspected: 2h + 2 switches."""
    return 2 * (fabric.max_rank + 1) + 2


@dataclass
class PathTrace:
    hops: list[tuple[int, int]]  # (switch guid, out port)
    ranks: list[int]
    shape: str

    @property
    def length(self) -> int:
        return len(self.hops)


def check_updown(ranks) -> str:
    """``up*down*`` if ranks climb by +1 steps then fall by -1 steps."""
    descending = False
    for a, b in zip(ranks, ranks[1:]):
        delta = b - a
        if delta == 1 and not descending:
            continue
        if delta == -1:
            descending = True
            continue
        return VIOLATION
    return UPDOWN


def trace_path(tables: RoutingTables, src: int, dst: int) -> PathTrace:
    """Follow forwarding entries from ``src``'s leaf until ``dst`` is delivered."""
    f = tables.fabric
    budget = hop_budget(f)
    s = int(f.node_leaf[src])
    hops: list[tuple[int, int]] = []
    ranks: list[int] = []
    while True:
        if len(hops) >= budget:
            raise LoopSuspected(f"loop suspected towards destination {dst}", s, dst)
        port = int(tables.port[s, dst])
        if port < 0:
            raise RoutingHole(f"routing hole at ({f.guids[s]:#x}, {dst})", s, dst)
        hops.append((f.guids[s], port))
        ranks.append(int(f.rank[s]))
        if f.peer_node[s, port] == dst:
            return PathTrace(hops, ranks, check_updown(ranks))
        nxt = int(f.peer_switch[s, port])
        if nxt < 0:
            raise RoutingHole(f"routing hole at ({f.guids[s]:#x}, {dst}): port {port} leads nowhere", s, dst)
        s = nxt


@dataclass
class Walk:
    """Vectorised traces of many flows.

    ``steps`` holds one (switch, port, active) triple of arrays per hop;
    ``length`` counts switches visited per flow; ``status`` is 0 delivered,
    1 hole, 2 loop; ``at`` is the switch where each flow stopped.
    """

    src: np.ndarray
    dst: np.ndarray
    steps: list[tuple[np.ndarray, np.ndarray, np.ndarray]]
    length: np.ndarray
    status: np.ndarray
    violation: np.ndarray
    at: np.ndarray


def walk(tables: RoutingTables, src: np.ndarray, dst: np.ndarray) -> Walk:
    f = tables.fabric
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    n = len(src)
    cur = f.node_leaf[src].copy()
    active = np.ones(n, dtype=bool)
    length = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    descending = np.zeros(n, dtype=bool)
    violation = np.zeros(n, dtype=bool)
    steps = []
    budget = hop_budget(f)
    for _ in range(budget):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        s, d = cur[idx], dst[idx]
        port = tables.port[s, d]
        hole = port < 0
        status[idx[hole]] = 1
        active[idx[hole]] = False
        idx, s, d, port = idx[~hole], s[~hole], d[~hole], port[~hole]
        in_range = port < f.peer_node.shape[1]
        status[idx[~in_range]] = 1
        active[idx[~in_range]] = False
        idx, s, d, port = idx[in_range], s[in_range], d[in_range], port[in_range]
        length[idx] += 1
        steps.append((s, port, idx))
        done = f.peer_node[s, port] == d
        active[idx[done]] = False
        idx, s, port = idx[~done], s[~done], port[~done]
        nxt = f.peer_switch[s, port]
        dead = nxt < 0
        status[idx[dead]] = 1
        active[idx[dead]] = False
        idx, s, nxt = idx[~dead], s[~dead], nxt[~dead]
        delta = f.rank[nxt] - f.rank[s]
        violation[idx[(delta == 1) & descending[idx]]] = True
        violation[idx[(delta != 1) & (delta != -1)]] = True
        descending[idx[delta == -1]] = True
        cur[idx] = nxt
    status[active] = 2
    return Walk(src, dst, steps, length, status, violation, cur)


def all_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    src, dst = np.divmod(np.arange(n * n, dtype=np.int64), n)
    keep = src != dst
    return src[keep], dst[keep]


@dataclass
class SweepReport:
    valid: bool
    leaf_pairs_valid: bool
    holes: list[dict]
    violations: list[dict]
    max_path_len: int
    pairs: int

    def to_json(self) -> dict:
        return {
            "valid": self.valid,
            "leaf_pairs_valid": self.leaf_pairs_valid,
            "holes": self.holes,
            "violations": self.violations,
            "max_path_len": self.max_path_len,
            "pairs": self.pairs,
        }


def sweep(tables: RoutingTables, pre: Preprocessing | None = None, *, limit: int = 100) -> SweepReport:
    """Trace every ordered node pair; report holes, loops and shape violations.

    ``limit`` caps how many offending flows are listed (counts are not capped).
    """
    f = tables.fabric
    src, dst = all_pairs(f.n_nodes)
    w = walk(tables, src, dst)
    g = f.guids
    holes = []
    for i in np.flatnonzero(w.status != 0)[:limit]:
        holes.append({
            "src": int(w.src[i]),
            "dst": int(w.dst[i]),
            "switch": f"{g[int(w.at[i])]:#018x}",
            "kind": "hole" if w.status[i] == 1 else "loop",
        })
    violations = [
        {"src": int(w.src[i]), "dst": int(w.dst[i])}
        for i in np.flatnonzero(w.violation & (w.status == 0))[:limit]
    ]
    n_bad = int((w.status != 0).sum() + (w.violation & (w.status == 0)).sum())
    leaf_ok = check_validity(pre, f).valid if pre is not None else True
    return SweepReport(
        valid=leaf_ok and n_bad == 0,
        leaf_pairs_valid=leaf_ok,
        holes=holes,
        violations=violations,
        max_path_len=int(w.length[w.status == 0].max(initial=0)),
        pairs=len(src),
    )
