from collections import deque
from typing import Callable, Deque, Optional, Tuple, Union

from src.config import ConfigError
from src.engine.calendar import NS_PER_S, EventAction, EventCalendar
from src.network.queue import EnqueueResult, RouterQueue
from src.protocol.packet import Packet


class NicQueue:
    """Unbounded drop-tail FIFO in front of a host's access link."""

    def __init__(self, name: str):
        self.name = name
        self._fifo: Deque[Tuple[Packet, int]] = deque()
        self.enqueued = 0
        self.dequeued = 0
        self.dropped = 0
        self.marked = 0
        self.service_time_ns: Optional[int] = None

    @property
    def occupancy(self) -> int:
        return len(self._fifo)

    @property
    def resident(self) -> int:
        return len(self._fifo)

    def enqueue(self, packet: Packet, now_ns: int) -> EnqueueResult:
        self.enqueued += 1
        self._fifo.append((packet, now_ns))
        return EnqueueResult.ADMITTED

    def dequeue(self, now_ns: int) -> Packet:
        assert self._fifo, f"dequeue on empty queue {self.name}"
        self.dequeued += 1
        return self._fifo.popleft()[0]


class Link:
    """
    One direction of a point-to-point link. Transmits one packet at a time:
    a packet occupies the wire for 8 * size / rate seconds and reaches the
    far end prop_delay later.
    """

    def __init__(
        self,
        name: str,
        rate_bps: int,
        prop_delay_ns: int,
        queue: Union[RouterQueue, NicQueue],
        calendar: EventCalendar,
        deliver: Callable[[Packet], None],
        nominal_packet_bytes: int = 1040,
    ):
        if rate_bps <= 0:
            raise ConfigError(f"links.{name}.rate_bps", "must be positive")
        if prop_delay_ns < 0:
            raise ConfigError(f"links.{name}.delay_ms", "must not be negative")
        self.name = name
        self.rate_bps = int(rate_bps)
        self.prop_delay_ns = prop_delay_ns
        self.queue = queue
        self._calendar = calendar
        self._deliver = deliver
        self.busy = False
        self.in_flight = 0
        self.bytes_sent = 0
        queue.service_time_ns = self.serialization_ns(nominal_packet_bytes)

    def serialization_ns(self, size_bytes: int) -> int:
        return -(-size_bytes * 8 * NS_PER_S // self.rate_bps)

    def send(self, packet: Packet) -> EnqueueResult:
        result = self.queue.enqueue(packet, self._calendar.now)
        if result is EnqueueResult.ADMITTED and not self.busy:
            self._start_transmission()
        return result

    def _start_transmission(self):
        packet = self.queue.dequeue(self._calendar.now)
        self.busy = True
        self._calendar.schedule_in(
            self.serialization_ns(packet.size),
            EventAction.TRANSMIT_COMPLETE,
            self._transmit_complete,
            packet,
        )

    def _transmit_complete(self, packet: Packet):
        self.bytes_sent += packet.size
        self.in_flight += 1
        self._calendar.schedule_in(
            self.prop_delay_ns, EventAction.PACKET_ARRIVAL, self._arrive, packet
        )
        self.busy = False
        if self.queue.occupancy:
            self._start_transmission()

    def _arrive(self, packet: Packet):
        self.in_flight -= 1
        self._deliver(packet)
