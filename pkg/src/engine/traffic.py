"""
Flow generation and installation.

Elephants are bulk transfers that start together at t=0. Short flows are
small request/response transfers whose start times are jittered over the
configured window with the world's traffic generator, so every algorithm
in a comparison sees the same schedule for the same seed.
"""

from typing import List, Sequence, Tuple

import numpy as np

from src.config import LOGGER
from src.engine.calendar import EventAction, seconds_to_ns
from src.engine.scenario import FlowClass, FlowSpec, Initiator, ScenarioConfig
from src.engine.topology import SimWorld
from src.transport.endpoint import TcpReceiver, TcpSender
from src.transport.state import ConnectionState


def spawn_flows(cfg: ScenarioConfig, rng: np.random.Generator) -> Tuple[FlowSpec, ...]:
    """Explicit flows when the scenario lists them, else the traffic mix."""
    if cfg.flows is not None:
        return cfg.flows

    mix = cfg.traffic
    pairs = _host_pairs(cfg.clients, cfg.servers)
    flows: List[FlowSpec] = []
    for i in range(mix.elephants):
        src, dst = pairs[i % len(pairs)]
        flows.append(
            FlowSpec(len(flows) + 1, src, dst, mix.elephant_bytes, 0.0,
                     cfg.algo, FlowClass.ELEPHANT)
        )

    lo, hi = mix.short_start_s
    starts = np.sort(rng.uniform(lo, hi, size=mix.shorts)) if mix.shorts else []
    for j, start in enumerate(starts):
        src, dst = pairs[(mix.elephants + j) % len(pairs)]
        size = mix.short_sizes[j % len(mix.short_sizes)]
        flows.append(
            FlowSpec(len(flows) + 1, src, dst, int(size), round(float(start), 6),
                     cfg.algo, FlowClass.SHORT)
        )
    return tuple(flows)


def _host_pairs(clients: Sequence[str], servers: Sequence[str]) -> List[Tuple[str, str]]:
    count = max(len(clients), len(servers))
    return [(clients[i % len(clients)], servers[i % len(servers)]) for i in range(count)]


class Connection:
    """Sender and receiver of one flow plus its start event."""

    def __init__(self, spec: FlowSpec, sender: TcpSender, receiver: TcpReceiver):
        self.spec = spec
        self.sender = sender
        self.receiver = receiver

    @property
    def completed(self) -> bool:
        return self.receiver.completed_ns is not None

    def start(self):
        now = self.sender.calendar.now
        self.sender.start_ns = now
        self.receiver.start_ns = now
        initiator = self.sender if self.sender.is_initiator else self.receiver
        initiator.start(now)


def install_flows(world: SimWorld, flows: Sequence[FlowSpec]) -> List[Connection]:
    transport = world.cfg.transport
    hosts = world.hosts

    def connection_state(spec: FlowSpec) -> ConnectionState:
        return ConnectionState(
            seg_size=transport.seg_size,
            cc_algo=spec.algo,
            d=transport.d,
            sigma_ss=transport.sigma_ss,
            sigma_ca=transport.sigma_ca,
            rtt_estimator=transport.rtt_estimator,
            ca_decay=transport.ca_decay,
        )

    for spec in flows:
        sender_first = spec.initiator is Initiator.SRC
        sender = TcpSender(
            spec.flow_id, spec.size_bytes, hosts[spec.src], spec.dst,
            connection_state(spec), world.calendar, world.next_packet_id,
            is_initiator=sender_first,
        )
        receiver = TcpReceiver(
            spec.flow_id, spec.size_bytes, hosts[spec.dst], spec.src,
            connection_state(spec), world.calendar, world.next_packet_id,
            is_initiator=not sender_first,
        )
        connection = Connection(spec, sender, receiver)
        world.connections.append(connection)
        world.calendar.schedule_at(
            seconds_to_ns(spec.start_s), EventAction.FLOW_START, connection.start
        )
        LOGGER.debug(
            "flow %s: %s %s -> %s, %d bytes at %.3f s",
            spec.flow_id, spec.algo.value, spec.src, spec.dst,
            spec.size_bytes, spec.start_s,
        )
    return world.connections
