"""Dmodc: cost/divider preprocessing and closed-form route selection.

Preprocessing walks the switches once upwards (rank ascending) and once
downwards, relaxing per-leaf hop counts and propagating dividers.  Routes are
then picked among the port groups leading strictly closer to the destination
leaf::

    group = C[(d // divider) % len(C)]
    port  = group[(d // (divider * len(C))) % len(group)]
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .fabric import Fabric, prepare
from .topology import Topology, U64_MAX

INF = int(np.iinfo(np.int32).max)
COST_DTYPE = np.int32

MODES = ("plain", "updown")


class RoutingError(RuntimeError):
    pass


class NoRouteError(RoutingError):
    """No port group leads closer to the destination."""


class DividerOverflow(ArithmeticError):
    pass


@dataclass
class Preprocessing:
    """Result of the cost and divider pass.

    ``costs[s, j]`` is the up*down* hop count from switch ``s`` to leaf column
    ``j``; ``downcosts`` counts purely downward paths only.  Both use
    :data:`INF` for "no path".
    """

    costs: np.ndarray
    downcosts: np.ndarray
    dividers: list[int]
    relaxations: int = 0

    @property
    def divider_array(self) -> np.ndarray:
        return np.array(self.dividers, dtype=np.uint64)


def _as_fabric(t: Fabric | Topology) -> Fabric:
    return t if isinstance(t, Fabric) else prepare(t)


def _checked_mul(a: int, b: int) -> int:
    r = a * b
    if r > U64_MAX:
        raise DividerOverflow(f"divider {a} x {b} overflows 64 bits")
    return r


def _plus_one(row: np.ndarray) -> np.ndarray:
    # saturating: INF stays INF
    return row + (row != INF)


def _initial_costs(f: Fabric) -> np.ndarray:
    c = np.full((f.n_switches, f.n_leaves), INF, dtype=COST_DTYPE)
    c[f.leaves, np.arange(f.n_leaves)] = 0
    return c


def _relax(c: np.ndarray, target: int, source: int, strict: bool) -> None:
    cand = _plus_one(c[source])
    if strict:
        np.minimum(c[target], cand, out=c[target])
    else:
        fresh = c[target] == INF
        c[target][fresh] = cand[fresh]


TraceHook = Callable[[str, int, int, int], None]


def _sequential(f: Fabric, strict: bool, trace: TraceHook | None, descend: bool = True):
    c = _initial_costs(f)
    div = [1] * f.n_switches
    visits = 0
    for level in f.levels:
        for s in level:
            ups = f.up_nbrs[s]
            pi = _checked_mul(div[s], len(ups))
            for u in ups:
                _relax(c, u, s, strict)
                visits += f.n_leaves
            for u in ups:
                if div[u] < pi:
                    if trace:
                        trace("divider", int(u), div[u], pi)
                    div[u] = pi
    down = c.copy()
    if descend:
        for level in reversed(f.levels[1:]):
            for s in level:
                for v in f.down_nbrs[s]:
                    _relax(c, v, s, strict)
                    visits += f.n_leaves
    return c, down, div, visits


def _leveled(f: Fabric, threads: int):
    """Same fixpoint as :func:`_sequential`, pulled per level so workers never share a row."""
    c = _initial_costs(f)
    div = [1] * f.n_switches
    visits = [0] * f.n_switches

    def pull_up(s):
        for v in f.down_nbrs[s]:
            np.minimum(c[s], _plus_one(c[v]), out=c[s])
            pi = _checked_mul(div[v], len(f.up_nbrs[v]))
            if div[s] < pi:
                div[s] = pi
            visits[s] += f.n_leaves

    def pull_down(s):
        for u in f.up_nbrs[s]:
            np.minimum(c[s], _plus_one(c[u]), out=c[s])
            visits[s] += f.n_leaves

    with ThreadPoolExecutor(max_workers=threads) as pool:
        for level in f.levels[1:]:
            list(pool.map(pull_up, level.tolist()))  # barrier
        down = c.copy()
        for level in reversed(f.levels[:-1]):
            list(pool.map(pull_down, level.tolist()))
    return c, down, div, sum(visits)


def compute_costs_and_dividers(
    t: Fabric | Topology,
    *,
    threads: int = 1,
    strict: bool = True,
    trace: TraceHook | None = None,
) -> Preprocessing:
    """Costs from every switch to every leaf, and per-switch dividers.

    ``strict=False`` swaps the ``c[s]+1 < c[s']`` relaxation test for the
    naive "target still unreached" test; it exists for experiments only and
    does not give shortest paths.  ``trace`` receives
    ``("divider", switch, old, new)`` events in sweep order (sequential only).
    """
    f = _as_fabric(t)
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if threads == 1 or not strict or trace is not None:
        if threads > 1:
            raise ValueError("naive relaxation and tracing are sequential only")
        c, down, div, visits = _sequential(f, strict, trace)
    else:
        c, down, div, visits = _leveled(f, threads)
    return Preprocessing(c, down, div, visits)


def compute_downpath_costs(t: Fabric | Topology) -> np.ndarray:
    """Hop counts of strictly downward paths from every switch to every leaf."""
    f = _as_fabric(t)
    return _sequential(f, True, None, descend=False)[1]


# -- route selection ---------------------------------------------------------


def closer_mask(f: Fabric, pre: Preprocessing, s: int, mode: str = "updown") -> np.ndarray:
    """Boolean (groups, leaves) matrix: does group ``g`` of ``s`` lead closer to leaf ``j``."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    remote = f.group_remote[s]
    if mode == "plain":
        nb = pre.costs[remote]
    else:
        nb = np.where(f.group_up[s][:, None], pre.costs[remote], pre.downcosts[remote])
    return nb < pre.costs[s][None, :]


def closer_groups(f: Fabric, pre: Preprocessing, s: int, leaf: int, mode: str = "updown") -> list[int]:
    """Indices into the port groups of ``s`` leading closer to leaf column ``leaf``.

    ``plain`` compares up*down* costs for every neighbour.  ``updown``
    compares costs for upper neighbours but pure-downward costs for lower
    ones, which keeps every path up*down* on fat-tree-like graphs.
    """
    return np.flatnonzero(closer_mask(f, pre, s, mode)[:, leaf]).tolist()


class RouteChoice(NamedTuple):
    group_index: int
    port_index: int
    port: int
    alternatives: tuple[int, ...]


def route_entry(d: int, closer: Sequence[Sequence[int]], divider: int) -> RouteChoice:
    """Pick the output port for destination ``d`` among the closer groups."""
    if not closer:
        raise NoRouteError(f"no closer port group for destination {d}")
    if divider < 1:
        raise ValueError("divider must be >= 1")
    gi = (d // divider) % len(closer)
    group = closer[gi]
    pi = (d // (divider * len(closer))) % len(group)
    return RouteChoice(gi, pi, group[pi], tuple(p for g in closer for p in g))


@dataclass(eq=False)
class RoutingTables:
    """Per-switch forwarding tables over dense destination ids.

    ``port[s, d]`` is the output port of switch ``s`` for destination ``d``
    or ``-1`` when ``s`` has no entry.  Entries of a leaf for its own nodes
    are the node-facing ports.
    """

    fabric: Fabric
    port: np.ndarray
    engine: str = "dmodc"
    closer: list[np.ndarray] | None = None  # per switch (groups, leaves)
    gaps: list[tuple[int, int]] = field(default_factory=list)
    explicit_alts: dict[tuple[int, int], tuple[int, ...]] | None = None

    def is_terminal(self, s: int, d: int) -> bool:
        return self.fabric.node_leaf[d] == s

    def alternatives(self, s: int, d: int) -> tuple[int, ...]:
        if self.explicit_alts is not None:
            return self.explicit_alts.get((s, d), ())
        if self.port[s, d] < 0:
            return ()
        if self.is_terminal(s, d):
            return (int(self.port[s, d]),)
        mask = self.closer[s][:, self.fabric.node_leaf_col[d]]
        groups = self.fabric.group_ports[s]
        return tuple(p for gi in np.flatnonzero(mask) for p in groups[gi])

    def entries(self, s: int) -> np.ndarray:
        return np.flatnonzero(self.port[s] >= 0)

    def dumps(self) -> str:
        return dump_tables(self)


def _route_switch(f: Fabric, pre: Preprocessing, s: int, mode: str, dests: np.ndarray):
    """Vectorised table row for one switch over every destination."""
    N = f.n_nodes
    row = np.full(N, -1, dtype=np.int64)
    mask = closer_mask(f, pre, s, mode)
    if f.rank[s] < 0:
        return row, mask, []
    lam = f.node_leaf_col
    reach = pre.costs[s][lam] != INF
    terminal = f.node_leaf == s
    row[terminal] = f.node_port[terminal]

    n_closer = mask.sum(axis=0)[lam]
    routed = reach & ~terminal & (n_closer > 0)
    gaps = np.flatnonzero(reach & ~terminal & (n_closer == 0)).tolist()
    if routed.any():
        d = dests[routed]
        nc = n_closer[routed]
        # divider beyond N only ever yields a zero quotient
        div = min(pre.dividers[s], N + 1)
        order = np.argsort(~mask, axis=0, kind="stable")  # closer groups first, guid order kept
        gsel = order[(d // div) % nc, lam[routed]]
        ports, sizes = f.group_port_matrix(s)
        pidx = (d // (div * nc)) % sizes[gsel]
        row[routed] = ports[gsel, pidx]
    return row, mask, [(s, int(x)) for x in gaps]


def build_routing_tables(
    t: Fabric | Topology,
    pre: Preprocessing | None = None,
    *,
    mode: str = "updown",
    threads: int = 1,
) -> RoutingTables:
    """Compute every switch's table.  Work is split per switch; output is
    independent of ``threads``.

    Destinations whose leaf is unreachable from a switch get no entry.
    Reachable destinations with no closer group are recorded in ``gaps``.
    """
    f = _as_fabric(t)
    if pre is None:
        pre = compute_costs_and_dividers(f, threads=threads)
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    dests = np.arange(f.n_nodes, dtype=np.int64)
    work = lambda s: _route_switch(f, pre, s, mode, dests)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, range(f.n_switches)))
    else:
        rows = [work(s) for s in range(f.n_switches)]
    port = np.stack([r[0] for r in rows]) if rows else np.zeros((0, f.n_nodes), dtype=np.int64)
    gaps = [g for r in rows for g in r[2]]
    return RoutingTables(f, port, "dmodc", [r[1] for r in rows], gaps)


def route(t: Fabric | Topology, *, mode: str = "updown", threads: int = 1, strict_gaps: bool = True) -> RoutingTables:
    """Preprocess and build tables in one go.

    With ``strict_gaps`` a gap on a valid fabric raises, since a finite cost
    always has a closer neighbour on some shortest path.
    """
    from .verification import check_validity

    f = _as_fabric(t)
    pre = compute_costs_and_dividers(f, threads=threads)
    tables = build_routing_tables(f, pre, mode=mode, threads=threads)
    if strict_gaps and tables.gaps and check_validity(pre, f).valid:
        s, d = tables.gaps[0]
        raise RoutingError(
            f"internal error: {len(tables.gaps)} gap(s) on a valid fabric, first at "
            f"switch {f.guids[s]:#x} destination {d}"
        )
    return tables


# -- text dump ---------------------------------------------------------------


def dump_tables(tables: RoutingTables) -> str:
    f = tables.fabric
    out = io.StringIO()
    for s, guid in enumerate(f.guids):
        out.write(f"table {guid:#018x}\n")
        for d in tables.entries(s):
            alts = ",".join(map(str, tables.alternatives(s, int(d))))
            out.write(f"dest {f.node_guid[d]:#018x} d={d} port={tables.port[s, d]} alts={alts}\n")
    return out.getvalue()


def parse_tables(text: str, t: Fabric | Topology) -> RoutingTables:
    """Read a table dump back against its topology."""
    f = _as_fabric(t)
    port = np.full((f.n_switches, f.n_nodes), -1, dtype=np.int64)
    alts: dict[tuple[int, int], tuple[int, ...]] = {}
    node_index = {g: d for d, g in enumerate(f.node_guid)}
    s = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, *args = line.split()
        try:
            if kind == "table":
                s = f.index[int(args[0], 16)]
            elif kind == "dest" and s is not None:
                kv = dict(a.split("=", 1) for a in args[1:])
                d = node_index[int(args[0], 16)]
                if int(kv["d"]) != d:
                    raise ValueError(f"d={kv['d']} does not match node guid")
                port[s, d] = int(kv["port"])
                alts[(s, d)] = tuple(int(x) for x in kv.get("alts", "").split(",") if x)
            else:
                raise ValueError(f"unexpected {kind!r}")
        except (KeyError, ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: bad table line {raw!r}: {exc}") from None
    return RoutingTables(f, port, "parsed", explicit_alts=alts)
