"""
Simulation worlds: nodes, links and queues wired up from a scenario.

The topology is kept as a networkx graph; routing tables come from
hop-count shortest paths computed once when the world is built.
"""

import itertools
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np

from src.config import LOGGER, ConfigError
from src.engine.calendar import EventCalendar
from src.engine.scenario import LinkSpec, RouterSpec, ScenarioConfig, Topology
from src.network.link import Link, NicQueue
from src.network.node import Host, Node, Router
from src.network.queue import QueueMode, RouterQueue


class SimWorld:
    """Everything one run needs; owned by a single event loop."""

    def __init__(self, cfg: ScenarioConfig, seed: Optional[int] = None):
        self.cfg = cfg
        self.seed = cfg.seed if seed is None else int(seed)
        self.calendar = EventCalendar()
        self.graph = nx.Graph()
        self.nodes: Dict[str, Node] = {}
        self.links: Dict[Tuple[str, str], Link] = {}
        self.router_queues: Dict[str, RouterQueue] = {}
        self.connections: List = []
        self.recorder = None
        self._packet_ids = itertools.count(1)

        traffic_seed, queue_seed = np.random.SeedSequence(self.seed).spawn(2)
        self.traffic_rng = np.random.Generator(np.random.PCG64(traffic_seed))
        self._queue_seeds = queue_seed

    def next_packet_id(self) -> int:
        return next(self._packet_ids)

    @property
    def hosts(self) -> Dict[str, Host]:
        return {name: n for name, n in self.nodes.items() if isinstance(n, Host)}

    @property
    def routers(self) -> Dict[str, Router]:
        return {name: n for name, n in self.nodes.items() if isinstance(n, Router)}

    def add_node(self, node: Node, **attrs):
        if node.name in self.nodes:
            raise ConfigError("nodes", f"duplicate node id {node.name!r}")
        self.nodes[node.name] = node
        self.graph.add_node(node.name, **attrs)

    def connect(self, u: str, v: str, spec: LinkSpec, modes: Dict[str, QueueMode]):
        """Add both directions of a link; routers get an AQM queue per egress."""
        self.graph.add_edge(u, v, rate_bps=spec.rate_bps, delay_ms=spec.delay_ms)
        for a, b in ((u, v), (v, u)):
            name = f"{a}->{b}"
            if a in modes:
                queue = self._router_queue(name, modes[a])
                self.router_queues[name] = queue
            else:
                queue = NicQueue(name)
            self.links[(a, b)] = Link(
                name, spec.rate_bps, spec.prop_delay_ns, queue,
                self.calendar, self.nodes[b].receive,
            )

    def _router_queue(self, name: str, mode: QueueMode) -> RouterQueue:
        q = self.cfg.queue
        (child,) = self._queue_seeds.spawn(1)
        return RouterQueue(
            name,
            capacity=q.capacity,
            th1=q.th1,
            th2=q.th2,
            red_min=q.red_min,
            red_max=q.red_max,
            red_max_p=q.red_max_p,
            red_weight=q.red_weight,
            mode=mode,
            rng=np.random.Generator(np.random.PCG64(child)),
        )

    def install_routes(self):
        hosts = sorted(self.hosts)
        for name, node in self.nodes.items():
            for dst in hosts:
                if dst == name:
                    continue
                try:
                    path = nx.shortest_path(self.graph, name, dst)
                except nx.NetworkXNoPath:
                    raise ConfigError("topology", f"no path from {name} to {dst}")
                node.routes[dst] = self.links[(name, path[1])]

    def attach(self, observer):
        """Attach a trace observer to every queue and endpoint."""
        for queue in self.router_queues.values():
            queue.attach(observer)
        for connection in self.connections:
            connection.sender.attach(observer)
            connection.receiver.attach(observer)

    def resident_packets(self) -> int:
        resident = sum(link.queue.resident for link in self.links.values())
        in_flight = sum(link.in_flight + int(link.busy) for link in self.links.values())
        return resident + in_flight


def build_world(cfg: ScenarioConfig, seed: Optional[int] = None) -> SimWorld:
    if cfg.topology is Topology.DUMBBELL:
        return build_dumbbell(cfg, seed)
    return build_multihop(cfg, seed)


def build_dumbbell(cfg: ScenarioConfig, seed: Optional[int] = None) -> SimWorld:
    """
    clients -- router A == bottleneck == router B -- servers
    """
    if cfg.topology is not Topology.DUMBBELL:
        raise ConfigError("topology", "build_dumbbell needs a dumbbell scenario")
    left, right = cfg.routers
    return _build_chain(cfg, seed, (left, right))


def build_multihop(cfg: ScenarioConfig, seed: Optional[int] = None) -> SimWorld:
    """
    clients -- r1 == r2 == ... == rN -- servers, every router-to-router hop
    using the bottleneck link parameters. Router modes may differ per hop.
    """
    if cfg.topology is not Topology.MULTIHOP:
        raise ConfigError("topology", "build_multihop needs a multihop scenario")
    return _build_chain(cfg, seed, cfg.routers)


def _build_chain(
    cfg: ScenarioConfig, seed: Optional[int], routers: Tuple[RouterSpec, ...]
) -> SimWorld:
    world = SimWorld(cfg, seed)
    for client in cfg.clients:
        world.add_node(Host(client), role="client")
    for router in routers:
        world.add_node(Router(router.id), role="router")
    for server in cfg.servers:
        world.add_node(Host(server), role="server")

    modes = {router.id: cfg.router_mode(router) for router in routers}
    first, last = routers[0].id, routers[-1].id
    for client in cfg.clients:
        world.connect(client, first, cfg.edge, modes)
    for a, b in zip(routers, routers[1:]):
        world.connect(a.id, b.id, cfg.bottleneck, modes)
    for server in cfg.servers:
        world.connect(last, server, cfg.edge, modes)
    world.install_routes()

    LOGGER.info(
        "Built %s world: %d nodes, %d links, router modes %s",
        cfg.topology.value,
        world.graph.number_of_nodes(),
        world.graph.number_of_edges(),
        ", ".join(f"{r}={m.value}" for r, m in modes.items()),
    )
    return world
