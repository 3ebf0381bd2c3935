"""Fat-tree topology model: PGFT generation, text I/O, ranking, port groups, faults.

A :class:`Topology` is an immutable bag of switches, nodes and switch-to-switch
links.  Everything the routing engines need (ranks, port groups, index arrays)
is derived from it by :func:`compute_ranks`, :func:`build_port_groups` and
:func:`pgft_route.fabric.prepare`.
"""

from __future__ import annotations

import logging
import math
import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence, Union

log = logging.getLogger(__name__)

Guid = int
Endpoint = tuple  # (guid, port)

U64_MAX = (1 << 64) - 1


class TopologyError(ValueError):
    """Structurally invalid topology."""


class ParseError(TopologyError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class FaultInjectionError(RuntimeError):
    def __init__(self, message: str, achieved: dict):
        self.achieved = achieved
        super().__init__(f"{message} (achieved: {achieved})")


@dataclass(frozen=True)
class PgftSpec:
    """``PGFT(h; m1..mh; w1..wh; p1..ph)`` parameters.

    ``m[l-1]`` is the down-arity of level ``l`` (``m[0]`` = nodes per leaf),
    ``w[l-1]`` the number of distinct parents of a level ``l-1`` element and
    ``p[l-1]`` the number of parallel links towards each of them.
    """

    h: int
    m: tuple[int, ...]
    w: tuple[int, ...]
    p: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(int(x) for x in self.m))
        object.__setattr__(self, "w", tuple(int(x) for x in self.w))
        object.__setattr__(self, "p", tuple(int(x) for x in self.p))
        if self.h < 1:
            raise ValueError("h must be positive")
        if not (len(self.m) == len(self.w) == len(self.p) == self.h):
            raise ValueError(f"expected {self.h} entries in each of m, w, p")
        if min(self.m + self.w + self.p) < 1:
            raise ValueError("all arities must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "PgftSpec":
        """Parse ``"h;m1.m2...;w1.w2...;p1.p2..."``, optionally wrapped in ``PGFT(...)``."""
        s = text.strip()
        if s.upper().startswith("PGFT(") and s.endswith(")"):
            s = s[5:-1]
        parts = s.split(";")
        if len(parts) != 4:
            raise ValueError(f"bad PGFT string {text!r}")
        try:
            h = int(parts[0])
            m, w, p = (tuple(int(x) for x in part.split(".")) for part in parts[1:])
        except ValueError:
            raise ValueError(f"bad PGFT string {text!r}") from None
        return cls(h, m, w, p)

    def __str__(self) -> str:
        dots = lambda xs: ".".join(map(str, xs))  # noqa: E731
        return f"{self.h};{dots(self.m)};{dots(self.w)};{dots(self.p)}"

    @property
    def node_count(self) -> int:
        return math.prod(self.m)

    def switch_count(self, level: int) -> int:
        """Number of switches at ``level`` (1 = leaves)."""
        return math.prod(self.m[level:]) * math.prod(self.w[:level])

    def level_radices(self, level: int) -> tuple[int, ...]:
        # least significant digit first: c_1..c_l, a_{l+1}..a_h
        return self.w[:level] + self.m[level:]


@dataclass(frozen=True, order=True)
class Link:
    """Bidirectional switch-to-switch cable; endpoints are stored sorted."""

    a: tuple[Guid, int]
    b: tuple[Guid, int]

    def __post_init__(self):
        a, b = tuple(self.a), tuple(self.b)
        if b < a:
            a, b = b, a
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def __str__(self) -> str:
        return f"{self.a[0]:#018x}:{self.a[1]} {self.b[0]:#018x}:{self.b[1]}"


@dataclass(frozen=True, order=True)
class Node:
    guid: Guid
    dest: int
    leaf: Guid
    port: int


class PortGroup(NamedTuple):
    remote: Guid
    ports: tuple[int, ...]


@dataclass(frozen=True)
class Topology:
    switches: tuple[Guid, ...]
    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    pgft: PgftSpec | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "switches", tuple(sorted(self.switches)))
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.dest)))
        object.__setattr__(self, "links", tuple(sorted(Link(l.a, l.b) for l in self.links)))
        _validate(self)

    @property
    def leaves(self) -> frozenset[Guid]:
        return frozenset(n.leaf for n in self.nodes)

    def neighbors(self) -> dict[Guid, set[Guid]]:
        adj: dict[Guid, set[Guid]] = {s: set() for s in self.switches}
        for link in self.links:
            adj[link.a[0]].add(link.b[0])
            adj[link.b[0]].add(link.a[0])
        return adj

    def without(self, switches: Iterable[Guid] = (), links: Iterable[Link] = ()) -> "Topology":
        """Copy with the given switches (and their cables) and links removed.

        Generator metadata is dropped: the result is no longer a complete PGFT.
        """
        gone = set(switches)
        dead = set(links)
        if gone & self.leaves:
            raise TopologyError("leaf switches carry nodes and cannot be removed")
        kept = tuple(
            l for l in self.links
            if l not in dead and l.a[0] not in gone and l.b[0] not in gone
        )
        return Topology(tuple(s for s in self.switches if s not in gone), self.nodes, kept)


def _validate(t: Topology) -> None:
    sw = set(t.switches)
    if len(sw) != len(t.switches):
        raise TopologyError("duplicate switch guid")
    used: set[tuple[Guid, int]] = set()

    def claim(ep):
        if ep in used:
            raise TopologyError(f"port conflict at {ep[0]:#x}:{ep[1]}")
        used.add(ep)

    node_guids = set()
    for i, n in enumerate(t.nodes):
        if n.dest != i:
            raise TopologyError("node destination ids must be dense 0..N-1")
        if n.guid in sw or n.guid in node_guids:
            raise TopologyError(f"duplicate guid {n.guid:#x}")
        node_guids.add(n.guid)
        if n.leaf not in sw:
            raise TopologyError(f"node {n.guid:#x} attached to unknown switch {n.leaf:#x}")
        claim((n.leaf, n.port))
    for link in t.links:
        for ep in (link.a, link.b):
            if ep[0] not in sw:
                raise TopologyError(f"dangling link endpoint {ep[0]:#x}")
            claim(ep)
        if link.a[0] == link.b[0]:
            raise TopologyError(f"self-loop on {link.a[0]:#x}")


# -- generation ---------------------------------------------------------------


def _digits(index: int, radices: Sequence[int]) -> list[int]:
    out = []
    for r in radices:
        index, d = divmod(index, r)
        out.append(d)
    return out


def _number(digits: Sequence[int], radices: Sequence[int]) -> int:
    n = 0
    for d, r in zip(reversed(digits), reversed(radices)):
        n = n * r + d
    return n


def pgft_switch_guid(spec: PgftSpec, level: int, index: int) -> Guid:
    """Guid of the ``index``-th switch of ``level`` in a generated PGFT."""
    return 1 + sum(spec.switch_count(k) for k in range(1, level)) + index


def build_pgft(spec: PgftSpec) -> Topology:
    """Generate the complete PGFT described by ``spec``.

    Switches are labelled with mixed-radix digits ``(c_1..c_l, a_{l+1}..a_h)``
    and get guids in (level, label) order.  Up ports of a level-``l`` switch
    come after its ``m_l*p_l`` down ports; up port ``q`` reaches parent
    ``c_{l+1} = q mod w_{l+1}`` on parallel link ``q div w_{l+1}``.
    """
    if spec.w[0] != 1 or spec.p[0] != 1:
        raise TopologyError("nodes attach to exactly one leaf: w1 and p1 must be 1")
    h, m, w, p = spec.h, spec.m, spec.w, spec.p
    counts = [spec.switch_count(l) for l in range(1, h + 1)]
    if spec.node_count + sum(counts) > U64_MAX:
        raise TopologyError("PGFT too large for 64-bit identifiers")

    switches = [pgft_switch_guid(spec, l, i) for l in range(1, h + 1) for i in range(counts[l - 1])]
    links = []
    for l in range(1, h):
        up_base = m[l - 1] * p[l - 1]
        radices, parent_radices = spec.level_radices(l), spec.level_radices(l + 1)
        for i in range(counts[l - 1]):
            dig = _digits(i, radices)
            a_next = dig[l]  # a_{l+1}: position among the parent's children
            for c in range(w[l]):
                parent = _number(dig[:l] + [c] + dig[l + 1:], parent_radices)
                for j in range(p[l]):
                    links.append(Link(
                        (pgft_switch_guid(spec, l, i), up_base + c + w[l] * j),
                        (pgft_switch_guid(spec, l + 1, parent), a_next + m[l] * j),
                    ))
    first_node = switches[-1] + 1
    nodes = [
        Node(first_node + d, d, pgft_switch_guid(spec, 1, d // m[0]), d % m[0])
        for d in range(spec.node_count)
    ]
    return Topology(tuple(switches), tuple(nodes), tuple(links), pgft=spec)


# -- text format --------------------------------------------------------------


def serialize_topology(t: Topology) -> str:
    out = []
    if t.pgft is not None:
        out.append(f"# pgft {t.pgft}")
    out += [f"switch {s:#018x}" for s in t.switches]
    out += [f"node {n.guid:#018x} {n.dest} leaf={n.leaf:#018x} port={n.port}" for n in t.nodes]
    out += [f"link {link}" for link in t.links]
    return "\n".join(out) + "\n"


def _parse_endpoint(tok: str, lineno: int) -> tuple[Guid, int]:
    try:
        g, port = tok.split(":")
        return int(g, 16), int(port)
    except ValueError:
        raise ParseError(f"bad endpoint {tok!r}", lineno) from None


def parse_topology(text: str) -> Topology:
    """Parse the line-oriented topology format.

    A ``# pgft <spec>`` header is honoured only if the body is exactly the
    generated PGFT for that spec; otherwise it is ignored.
    """
    switches: dict[Guid, int] = {}
    nodes: list[tuple[Node, int]] = []
    links: list[tuple[Link, int]] = []
    pgft = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("# pgft "):
            try:
                pgft = PgftSpec.parse(line[7:])
            except ValueError:
                pgft = None
            continue
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        kind, *args = line.split()
        try:
            if kind == "switch" and len(args) == 1:
                g = int(args[0], 16)
                if g in switches:
                    raise ParseError(f"duplicate guid {g:#x}", lineno)
                switches[g] = lineno
            elif kind == "node" and len(args) == 4:
                kv = dict(a.split("=", 1) for a in args[2:])
                nodes.append((Node(int(args[0], 16), int(args[1]), int(kv["leaf"], 16), int(kv["port"])), lineno))
            elif kind == "link" and len(args) == 2:
                links.append((Link(_parse_endpoint(args[0], lineno), _parse_endpoint(args[1], lineno)), lineno))
            else:
                raise ParseError(f"unrecognised line {raw!r}", lineno)
        except (KeyError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"malformed {kind} line: {exc}", lineno) from None
    if not switches:
        raise ParseError("no switches")

    used: dict[tuple[Guid, int], int] = {}
    seen_nodes: dict[Guid, int] = {}
    for n, lineno in nodes:
        if n.guid in switches:
            raise ParseError(f"duplicate guid {n.guid:#x}", lineno)
        if n.guid in seen_nodes:
            raise ParseError(f"node {n.guid:#x} must have exactly one leaf link", lineno)
        seen_nodes[n.guid] = lineno
        if n.leaf not in switches:
            raise ParseError(f"dangling endpoint {n.leaf:#x}", lineno)
        if (n.leaf, n.port) in used:
            raise ParseError(f"port conflict at {n.leaf:#x}:{n.port}", lineno)
        used[(n.leaf, n.port)] = lineno
    for link, lineno in links:
        for ep in (link.a, link.b):
            if ep[0] not in switches:
                raise ParseError(f"dangling endpoint {ep[0]:#x}", lineno)
            if ep in used:
                raise ParseError(f"port conflict at {ep[0]:#x}:{ep[1]}", lineno)
            used[ep] = lineno
    dests = sorted(n.dest for n, _ in nodes)
    if dests != list(range(len(dests))):
        raise ParseError("node destination ids must be dense 0..N-1")

    t = Topology(tuple(switches), tuple(n for n, _ in nodes), tuple(l for l, _ in links))
    if pgft is not None:
        try:
            if build_pgft(pgft) == t:
                t = Topology(t.switches, t.nodes, t.links, pgft=pgft)
        except TopologyError:
            pass
    return t


def read_topology(path) -> Topology:
    with open(path, encoding="utf-8") as f:
        return parse_topology(f.read())


def write_topology(t: Topology, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_topology(t))


# -- ranking and port groups --------------------------------------------------


def compute_ranks(t: Topology) -> dict[Guid, int]:
    """Hop distance of every switch to the nearest leaf (multi-source BFS).

    Switches no leaf can reach are left out of the map, with a warning.
    Raises :class:`TopologyError` on links joining two switches of equal rank.
    """
    leaves = t.leaves
    if not leaves:
        raise TopologyError("topology has no leaf switches")
    adj = t.neighbors()
    rank = {s: 0 for s in sorted(leaves)}
    frontier = deque(rank)
    while frontier:
        s = frontier.popleft()
        for nb in adj[s]:
            if nb not in rank:
                rank[nb] = rank[s] + 1
                frontier.append(nb)
    for link in t.links:
        a, b = link.a[0], link.b[0]
        if a in rank and rank[a] == rank[b]:
            raise TopologyError(
                f"not a leveled fat-tree: link {link} joins two switches of rank {rank[a]}"
            )
    isolated = len(t.switches) - len(rank)
    if isolated:
        log.warning("%d switch(es) unreachable from every leaf are excluded from routing", isolated)
    return rank


def build_port_groups(t: Topology) -> dict[Guid, list[PortGroup]]:
    """Switch-facing ports of each switch, grouped by remote switch.

    Groups are sorted by remote guid and ports ascending; node ports are left out.
    """
    by_remote: dict[Guid, dict[Guid, list[int]]] = {s: defaultdict(list) for s in t.switches}
    for link in t.links:
        (ga, pa), (gb, pb) = link.a, link.b
        by_remote[ga][gb].append(pa)
        by_remote[gb][ga].append(pb)
    return {
        s: [PortGroup(r, tuple(sorted(ports))) for r, ports in sorted(groups.items())]
        for s, groups in by_remote.items()
    }


# -- fault injection ----------------------------------------------------------

Amount = Union[int, float]


@dataclass(frozen=True)
class FaultSpec:
    """What to break.  Integers are counts, floats are fractions of the candidates.

    ``switch_rank`` restricts switch removal to one rank (negative values
    count from the top, ``-1`` being the top level).
    """

    remove_links: Amount = 0
    remove_switches: Amount = 0
    seed: int = 0
    preserve_leaf_connectivity: bool = False
    max_attempts: int | None = None
    switch_rank: int | None = None

    def __post_init__(self):
        for amount in (self.remove_links, self.remove_switches):
            if isinstance(amount, float) and not 0.0 <= amount <= 1.0:
                raise ValueError(f"fraction {amount} outside [0, 1]")
            if amount < 0:
                raise ValueError("negative removal count")


def _resolve(amount: Amount, available: int, what: str) -> int:
    if isinstance(amount, float):
        return round(amount * available)
    if amount > available:
        raise ValueError(f"cannot remove {amount} {what}: only {available} available")
    return int(amount)


def leaf_pairs_connected(t: Topology) -> bool:
    """True when every ordered leaf pair has an up*down* path."""
    from .dmodc import compute_costs_and_dividers
    from .fabric import prepare
    from .verification import check_validity

    try:
        fabric = prepare(t)
    except TopologyError:
        return False
    return check_validity(compute_costs_and_dividers(fabric), fabric).valid


def inject_faults(t: Topology, spec: FaultSpec) -> tuple[Topology, list[str]]:
    """Remove a seeded random selection of non-leaf switches, then of cables.

    Candidates are visited in a seeded shuffled order.  With
    ``preserve_leaf_connectivity`` a removal that breaks any leaf pair is
    rejected and the next candidate is tried.
    """
    rng = random.Random(spec.seed)
    removal_log: list[str] = []
    leaves = t.leaves
    sw_candidates = [s for s in t.switches if s not in leaves]
    if spec.switch_rank is not None:
        ranks = compute_ranks(t)
        wanted = spec.switch_rank
        if wanted < 0:
            wanted += max(ranks.values()) + 1
        sw_candidates = [s for s in sw_candidates if ranks.get(s) == wanted]
    want_sw = _resolve(spec.remove_switches, len(sw_candidates), "switches")
    current = t
    achieved = {"switches": 0, "links": 0}

    def run(candidates, want, key, remove, describe):
        nonlocal current
        rng.shuffle(candidates)
        budget = spec.max_attempts if spec.max_attempts is not None else len(candidates)
        done = attempts = 0
        for cand in candidates:
            if done == want:
                break
            if attempts >= budget:
                break
            attempts += 1
            trial = remove(current, cand)
            if spec.preserve_leaf_connectivity and not leaf_pairs_connected(trial):
                continue
            current = trial
            removal_log.append(describe(cand))
            done += 1
            achieved[key] = done
        if done < want:
            raise FaultInjectionError(f"could only remove {done} of {want} {key}", dict(achieved))

    run(sw_candidates, want_sw, "switches",
        lambda topo, s: topo.without(switches=[s]), lambda s: f"switch {s:#018x}")
    link_candidates = list(current.links)
    want_links = _resolve(spec.remove_links, len(link_candidates), "links")
    run(link_candidates, want_links, "links",
        lambda topo, l: topo.without(links=[l]), lambda l: f"link {l}")
    if not removal_log:
        return t, []
    return current, removal_log
