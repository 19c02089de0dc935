"""
Hierarchical network model: nodes, links, and the per-router routing tables
whose connection status the detection and recovery protocols flip.
"""
from enum import Enum, IntEnum
from typing import Dict, Iterable, List, Optional, Tuple

import networkx as nx
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from src.exception import AmbiguousRouteError, NoRouteError, NotAdjacentError, UnknownNodeError
from src.ftn.component.wire import BROADCAST, Address, address
from src.logging import logging as logger

Hop = Tuple[int, str]


class NodeKind(str, Enum):
    GROUP_SERVER = "GroupServer"
    ROUTER = "Router"
    SWITCH = "Switch"
    HOST = "Host"

    @property
    def is_routing(self) -> bool:
        return self in (NodeKind.GROUP_SERVER, NodeKind.ROUTER)


class ConnectionType(str, Enum):
    DIRECT = "D"
    INDIRECT = "I"


class ConnectionStatus(IntEnum):
    INACTIVE = 0
    ACTIVE = 1


class CastClass(str, Enum):
    UNICAST = "Unicast"
    MULTICAST = "Multicast"
    BROADCAST = "Broadcast"


class Node(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int
    name: str
    kind: NodeKind
    address: Address


class Link(BaseModel):
    a: str
    b: str
    delay_ms: int = Field(50, gt=0)
    capacity_bps: int = Field(1_000_000, gt=0)
    up: bool = True

    @property
    def key(self) -> frozenset:
        return frozenset((self.a, self.b))

    def other(self, name: str) -> str:
        return self.b if name == self.a else self.a


class RouteEntry(BaseModel):
    network_address: Address
    next_hop: Optional[Address] = None
    interface: int
    connection_type: ConnectionType
    connection_status: ConnectionStatus = ConnectionStatus.ACTIVE


class RoutingTable:
    """Routing table of one routing device (Network Address / Next Hop / Interface / Type / Status)."""

    def __init__(self, owner: str, entries: List[RouteEntry], interfaces: Dict[int, str]):
        self.owner = owner
        self.entries = entries
        self.interfaces = interfaces
        self._by_address: Dict[Address, RouteEntry] = {e.network_address: e for e in entries}
        self._iface_of: Dict[str, int] = {name: iface for iface, name in interfaces.items()}

    def copy(self) -> "RoutingTable":
        return RoutingTable(self.owner, [e.model_copy() for e in self.entries], dict(self.interfaces))

    def has_route(self, dest: Address) -> bool:
        return dest in self._by_address

    def lookup(self, dest: Address) -> RouteEntry:
        entry = self._by_address.get(dest)
        if entry is None:
            raise NoRouteError(f"{self.owner} has no route to {dest}")
        return entry

    def direct_entries(self) -> List[RouteEntry]:
        return [e for e in self.entries if e.connection_type is ConnectionType.DIRECT]

    def direct_neighbors(self) -> List[Hop]:
        return sorted(self.interfaces.items())

    def interface_of(self, neighbor: str) -> int:
        if neighbor not in self._iface_of:
            raise NotAdjacentError(f"{neighbor} is not directly connected to {self.owner}")
        return self._iface_of[neighbor]

    def neighbor_address(self, neighbor: str) -> Address:
        iface = self.interface_of(neighbor)
        return next(e.network_address for e in self.direct_entries() if e.interface == iface)

    def status_of(self, neighbor: str) -> ConnectionStatus:
        iface = self.interface_of(neighbor)
        for entry in self.direct_entries():
            if entry.interface == iface:
                return entry.connection_status
        raise NotAdjacentError(f"{neighbor} is not directly connected to {self.owner}")

    def next_hop(self, dest: Address) -> Optional[Hop]:
        """(interface, neighbour) toward dest, or None when the route is Inactive."""
        entry = self.lookup(dest)
        if entry.connection_status is ConnectionStatus.INACTIVE:
            return None
        return entry.interface, self.interfaces[entry.interface]

    def set_status(self, neighbor: str, status: ConnectionStatus) -> "RoutingTable":
        iface = self.interface_of(neighbor)
        direct = next(e for e in self.direct_entries() if e.interface == iface)
        direct.connection_status = status
        for entry in self.entries:
            if entry.next_hop is not None and entry.next_hop == direct.network_address:
                entry.connection_status = status
        return self

    def reset(self) -> None:
        for entry in self.entries:
            entry.connection_status = ConnectionStatus.ACTIVE

    def find_interfaces(self, dest: Address, cast: CastClass, arrival_interface: Optional[int] = None) -> List[Hop]:
        if cast is CastClass.UNICAST:
            if not self.has_route(dest):
                return []
            hop = self.next_hop(dest)
            return [hop] if hop else []

        # multicast has no group membership: same fan-out as broadcast
        return [
            (e.interface, self.interfaces[e.interface])
            for e in sorted(self.direct_entries(), key=lambda e: e.interface)
            if e.connection_status is ConnectionStatus.ACTIVE and e.interface != arrival_interface
        ]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "Network Address": str(e.network_address),
                    "Next Hop": str(e.next_hop) if e.next_hop else "-",
                    "Interface": e.interface,
                    "Connection Type": e.connection_type.value,
                    "Connection Status": int(e.connection_status),
                }
                for e in self.entries
            ]
        )


class Topology:
    def __init__(self, nodes: Iterable[Node], links: Iterable[Link]):
        self.nodes: Dict[str, Node] = {n.name: n for n in nodes}
        self.links: Dict[frozenset, Link] = {}
        self.by_address: Dict[Address, Node] = {n.address: n for n in self.nodes.values()}
        self.graph = nx.Graph()
        self.graph.add_nodes_from(self.nodes)
        for link in links:
            for end in (link.a, link.b):
                if end not in self.nodes:
                    raise UnknownNodeError(f"link {link.a}-{link.b} references unknown node {end}")
            self.links[link.key] = link
            self.graph.add_edge(link.a, link.b)
        self.tables: Dict[str, RoutingTable] = {}
        self._paths: Dict[str, Dict[str, List[str]]] = {}

    # lookups

    def node(self, name: str) -> Node:
        if name not in self.nodes:
            raise UnknownNodeError(f"unknown node {name}")
        return self.nodes[name]

    def node_at(self, addr: Address) -> Optional[Node]:
        return self.by_address.get(addr)

    def link(self, a: str, b: str) -> Link:
        key = frozenset((a, b))
        if key not in self.links:
            raise NotAdjacentError(f"{a} and {b} are not linked")
        return self.links[key]

    def neighbors(self, name: str) -> List[str]:
        return sorted(self.graph.neighbors(name))

    def routing_devices(self) -> List[str]:
        return [n.name for n in self.nodes.values() if n.kind.is_routing]

    def hosts(self) -> List[str]:
        return [n.name for n in self.nodes.values() if n.kind is NodeKind.HOST]

    def path(self, a: str, b: str) -> List[str]:
        self.node(a)
        self.node(b)
        if a not in self._paths:
            self._paths[a] = nx.single_source_shortest_path(self.graph, a)
        if b not in self._paths[a]:
            raise NoRouteError(f"no path from {a} to {b}")
        return self._paths[a][b]

    def first_hop(self, a: str, dest: Address) -> Optional[str]:
        """Next node on the tree path from a to the node owning dest (switch/host forwarding)."""
        target = self.node_at(dest)
        if target is None:
            raise NoRouteError(f"{dest} is not a node address")
        path = self.path(a, target.name)
        return path[1] if len(path) > 1 else None

    def uplink(self, name: str) -> str:
        """The non-host neighbour of a switch, or the switch of a host."""
        ups = [n for n in self.neighbors(name) if self.nodes[n].kind is not NodeKind.HOST]
        if not ups:
            raise NoRouteError(f"{name} has no uplink")
        return ups[0]

    # routing-table operations

    def table(self, router: str) -> RoutingTable:
        if router not in self.tables:
            raise UnknownNodeError(f"{router} keeps no routing table")
        return self.tables[router]

    def next_hop(self, router: str, dest: Address) -> Optional[Hop]:
        return self.table(router).next_hop(dest)

    def set_status(self, router: str, neighbor: str, status: ConnectionStatus) -> RoutingTable:
        return self.table(router).set_status(neighbor, status)

    def find_interfaces(
        self, router: str, dest: Address, cast: CastClass, arrival_interface: Optional[int] = None
    ) -> List[Hop]:
        return self.table(router).find_interfaces(dest, cast, arrival_interface)

    def validate(self) -> List[str]:
        """Structural violations of the hierarchical model (empty when the topology is sound)."""
        problems = []
        if not nx.is_forest(self.graph):
            problems.append("link graph contains a cycle")
        elif self.graph.number_of_nodes() and not nx.is_connected(self.graph):
            problems.append("link graph is not connected")
        for name in self.hosts():
            attached = list(self.graph.neighbors(name))
            if len(attached) != 1 or self.nodes[attached[0]].kind is not NodeKind.SWITCH:
                problems.append(f"host {name} must attach to exactly one switch")
        if len(self.by_address) != len(self.nodes):
            problems.append("node addresses are not unique")
        return problems


def map_destination(d: Address) -> CastClass:
    d = address(d)
    if d == BROADCAST:
        return CastClass.BROADCAST
    if 224 <= d.packed[0] <= 239:
        return CastClass.MULTICAST
    return CastClass.UNICAST


def derive_routing_tables(t: Topology) -> Topology:
    """
    Fill one routing table per routing device.

    Direct entries: one per attached link, interfaces numbered 1..deg in
    neighbour-name order. Indirect entries: every other reachable node, with
    next hop and interface of the first hop on the unique tree path.
    """
    if not nx.is_forest(t.graph):
        raise AmbiguousRouteError("routes are ambiguous: the link graph is not a tree")

    for router in t.routing_devices():
        neighbors = t.neighbors(router)
        interfaces = {i: name for i, name in enumerate(neighbors, start=1)}
        iface_of = {name: i for i, name in interfaces.items()}

        entries = [
            RouteEntry(
                network_address=t.nodes[name].address,
                interface=iface_of[name],
                connection_type=ConnectionType.DIRECT,
            )
            for name in neighbors
        ]
        paths = nx.single_source_shortest_path(t.graph, router)
        for name in sorted(paths):
            if name == router or name in iface_of:
                continue
            via = paths[name][1]
            entries.append(
                RouteEntry(
                    network_address=t.nodes[name].address,
                    next_hop=t.nodes[via].address,
                    interface=iface_of[via],
                    connection_type=ConnectionType.INDIRECT,
                )
            )
        t.tables[router] = RoutingTable(router, entries, interfaces)

    logger.debug(f"Derived routing tables for {len(t.tables)} routing devices")
    return t


REFERENCE_LINKS = [
    ("GS1", "R1"), ("R1", "R2"), ("R1", "R3"), ("R2", "R4"), ("R2", "R5"), ("R4", "SW1"),
    ("R5", "SW2"), ("R3", "SW4"), ("R3", "R6"), ("R6", "SW3"), ("R6", "R7"), ("R7", "SW5"),
]


def build_topology(nodes: Iterable[Node], links: Iterable[Link]) -> Topology:
    return derive_routing_tables(Topology(nodes, links))


def build_reference_topology(hosts_per_switch: int = 3, delay_ms: int = 50, capacity_bps: int = 1_000_000) -> Topology:
    """
    GS1 at the root, routers R1..R7, switches SW1..SW5, and hosts named
    SW<j>-<k>. Routing devices sit on 168.1.<i>.1 (GS1 is i = 0), switch j on
    172.1.<j>.1 and its k-th host on 172.1.<j>.<k+1>.
    """
    nodes: List[Node] = [Node(index=0, name="GS1", kind=NodeKind.GROUP_SERVER, address=address("168.1.0.1"))]
    for i in range(1, 8):
        nodes.append(Node(index=len(nodes), name=f"R{i}", kind=NodeKind.ROUTER, address=address(f"168.1.{i}.1")))
    for j in range(1, 6):
        nodes.append(Node(index=len(nodes), name=f"SW{j}", kind=NodeKind.SWITCH, address=address(f"172.1.{j}.1")))

    links = [Link(a=a, b=b, delay_ms=delay_ms, capacity_bps=capacity_bps) for a, b in REFERENCE_LINKS]
    for j in range(1, 6):
        for k in range(1, hosts_per_switch + 1):
            name = f"SW{j}-{k}"
            nodes.append(Node(index=len(nodes), name=name, kind=NodeKind.HOST, address=address(f"172.1.{j}.{k + 1}")))
            links.append(Link(a=f"SW{j}", b=name, delay_ms=delay_ms, capacity_bps=capacity_bps))

    return build_topology(nodes, links)
