"""Fault-tolerant deterministic routing for Parallel Generalised Fat-Trees."""

from .dmodc import (
    INF,
    NoRouteError,
    Preprocessing,
    RoutingError,
    RoutingTables,
    build_routing_tables,
    closer_groups,
    compute_costs_and_dividers,
    compute_downpath_costs,
    dump_tables,
    parse_tables,
    route,
    route_entry,
)
from .dmodk import LevelArities, NotCompletePgft, build_dmodk_tables, dmodk_up_port
from .fabric import Fabric, prepare
from .topology import (
    FaultSpec,
    Link,
    Node,
    ParseError,
    PgftSpec,
    PortGroup,
    Topology,
    TopologyError,
    build_pgft,
    build_port_groups,
    compute_ranks,
    inject_faults,
    parse_topology,
    serialize_topology,
)
from .verification import check_updown, check_validity, sweep, trace_path

__version__ = "0.1.0"
