from typing import Dict, Protocol

from src.network.link import Link
from src.protocol.packet import Packet


class PacketHandler(Protocol):
    def on_packet(self, packet: Packet) -> None: ...


class Node:
    def __init__(self, name: str):
        self.name = name
        self.routes: Dict[str, Link] = {}

    def receive(self, packet: Packet):
        raise NotImplementedError

    def forward(self, packet: Packet):
        self.routes[packet.dst].send(packet)


class Router(Node):
    def receive(self, packet: Packet):
        self.forward(packet)


class Host(Node):
    """End host; hands arriving packets to the endpoint owning the flow."""

    def __init__(self, name: str):
        super().__init__(name)
        self.endpoints: Dict[int, PacketHandler] = {}
        self.packets_sent = 0
        self.bytes_sent = 0
        self.packets_received = 0

    def bind(self, flow_id: int, endpoint: PacketHandler):
        self.endpoints[flow_id] = endpoint

    def send(self, packet: Packet):
        self.packets_sent += 1
        self.bytes_sent += packet.size
        self.forward(packet)

    def receive(self, packet: Packet):
        self.packets_received += 1
        endpoint = self.endpoints.get(packet.flow_id)
        assert endpoint is not None, (
            f"{self.name} has no endpoint for flow {packet.flow_id}"
        )
        endpoint.on_packet(packet)
