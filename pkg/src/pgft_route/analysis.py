"""Static link-load metrics for communication patterns.

Congestion risk is measured as the number of deterministic flows sharing a
directed switch-to-switch link.  Node access links are pattern-forced and kept
out of the maxima; they are reported in a separate histogram.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .dmodc import RoutingTables, route
from .dmodk import NotCompletePgft, build_dmodk_tables
from .fabric import Fabric, prepare
from .topology import Topology
from .verification import walk


class AnalysisError(RuntimeError):
    pass


@dataclass(frozen=True)
class Pattern:
    kind: str
    src: np.ndarray
    dst: np.ndarray

    @property
    def flows(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist()))

    def __len__(self) -> int:
        return len(self.src)


def make_pattern(kind: str, n: int, *, k: int = 1, seed: int = 0) -> Pattern:
    """``all2all``, ``shift`` (i -> i+k mod n) or ``perm`` (seeded derangement)."""
    if n < 2:
        raise ValueError("patterns need at least two nodes")
    idx = np.arange(n, dtype=np.int64)
    if kind in ("all2all", "all-to-all"):
        src, dst = np.divmod(np.arange(n * n, dtype=np.int64), n)
        keep = src != dst
        return Pattern("all2all", src[keep], dst[keep])
    if kind == "shift":
        if k % n == 0:
            raise ValueError("empty shift")
        return Pattern(f"shift:{k}", idx, (idx + k) % n)
    if kind in ("perm", "permutation"):
        rng = np.random.default_rng(seed)
        while True:
            dst = rng.permutation(n)
            if not (dst == idx).any():
                return Pattern(f"perm:{seed}", idx, dst.astype(np.int64))
    raise ValueError(f"unknown pattern {kind!r}")


def parse_pattern(text: str, n: int) -> Pattern:
    """``all2all``, ``shift:K`` or ``perm:SEED``."""
    name, _, arg = text.partition(":")
    if name == "shift":
        return make_pattern("shift", n, k=int(arg))
    if name == "perm":
        return make_pattern("perm", n, seed=int(arg))
    if arg:
        raise ValueError(f"unknown pattern {text!r}")
    return make_pattern(name, n)


@dataclass
class LoadReport:
    loads: dict[tuple[int, int, int], int]  # (src guid, src port, dst guid) -> flows
    max_load: int
    mean_load: Fraction
    histogram: dict[int, int]
    access_histogram: dict[int, int]
    theoretical_floor: int
    traversals: int
    flows: int = 0
    extra: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["link_src_guid", "link_src_port", "link_dst_guid", "load"])
        for (sg, sp, dg), load in sorted(self.loads.items()):
            w.writerow([f"{sg:#018x}", sp, f"{dg:#018x}", load])
        return out.getvalue()


def _leaf_cut_floor(f: Fabric, pattern: Pattern) -> int:
    """Lower bound on max load from the leaf up-link and down-link cuts."""
    same = f.node_leaf[pattern.src] == f.node_leaf[pattern.dst]
    out_ = np.bincount(f.node_leaf[pattern.src][~same], minlength=f.n_switches)
    in_ = np.bincount(f.node_leaf[pattern.dst][~same], minlength=f.n_switches)
    best = 0
    for s in f.leaves:
        n_links = sum(len(f.group_ports[s][g]) for g in np.flatnonzero(f.group_up[s]))
        for crossing in (out_[s], in_[s]):
            if crossing:
                if n_links == 0:
                    continue  # unroutable; the trace reports it
                best = max(best, math.ceil(crossing / n_links))
    return best


def link_loads(tables: RoutingTables, pattern: Pattern) -> LoadReport:
    """Trace every flow of ``pattern`` and count flows per directed link."""
    f = tables.fabric
    w = walk(tables, pattern.src, pattern.dst)
    bad = np.flatnonzero(w.status != 0)
    if len(bad):
        i = bad[0]
        kind = "routing hole" if w.status[i] == 1 else "loop suspected"
        raise AnalysisError(f"flow {int(w.src[i])}->{int(w.dst[i])}: {kind}")

    counts = np.zeros(f.peer_switch.shape, dtype=np.int64)
    for s, port, _ in w.steps:
        np.add.at(counts, (s, port), 1)
    switch_links = f.peer_switch >= 0
    loads = {
        (f.guids[s], int(p), f.guids[int(f.peer_switch[s, p])]): int(counts[s, p])
        for s, p in np.argwhere(switch_links)
    }
    values = list(loads.values())
    traversals = int(counts[switch_links].sum())

    # access links: node->leaf (one per flow source) and leaf->node (one per flow)
    up_access = np.bincount(pattern.src, minlength=f.n_nodes)
    down_access = counts[f.node_leaf, f.node_port]
    access = Counter(up_access.tolist()) + Counter(down_access.tolist())

    return LoadReport(
        loads=loads,
        max_load=max(values, default=0),
        mean_load=Fraction(traversals, len(values)) if values else Fraction(0),
        histogram=dict(sorted(Counter(values).items())),
        access_histogram=dict(sorted(access.items())),
        theoretical_floor=_leaf_cut_floor(f, pattern),
        traversals=traversals,
        flows=len(pattern),
    )


ENGINES = ("dmodc", "dmodk")


def compare_engines(t: Topology | Fabric, patterns: Iterable[Pattern], engines=ENGINES, *, mode: str = "updown") -> list[dict]:
    """One row per (engine, pattern) with max and mean link load; ``n/a`` when inapplicable."""
    f = t if isinstance(t, Fabric) else prepare(t)
    tables: dict[str, RoutingTables | None] = {}
    for engine in engines:
        if engine == "dmodc":
            tables[engine] = route(f, mode=mode)
        elif engine == "dmodk":
            try:
                tables[engine] = build_dmodk_tables(f)
            except NotCompletePgft:
                tables[engine] = None
        else:
            raise ValueError(f"unknown engine {engine!r}")
    rows = []
    for pattern in patterns:
        for engine in engines:
            tb = tables[engine]
            if tb is None:
                rows.append({"engine": engine, "pattern": pattern.kind, "max_load": "n/a", "mean_load": "n/a"})
                continue
            rep = link_loads(tb, pattern)
            rows.append({
                "engine": engine,
                "pattern": pattern.kind,
                "max_load": rep.max_load,
                "mean_load": f"{float(rep.mean_load):.6f}",
            })
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    out = io.StringIO()
    w = csv.DictWriter(out, ["engine", "pattern", "max_load", "mean_load"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return out.getvalue()
