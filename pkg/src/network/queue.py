"""
Bounded router queue with the two marking disciplines.

In EECN mode every arriving markable packet is classified with the
queue estimator

    CL = (occupancy + gamma/10 - alpha/10) / capacity

where gamma and alpha are the arrival and departure rates (packets per
second) measured over the last completed 100 ms epoch. A flow is stamped
when the local level rises above the level it was last stamped with; its
record clears once one of its packets finds the queue below th1, so each
flow hears about a congestion episode once per level. In ECN mode the
classic average-queue RED decision marks markable packets CE. Packets
that are not ECN capable get RED drops in both modes.
"""

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Deque, Dict, Optional, Tuple

import numpy as np

from src.config import ConfigError
from src.protocol.codepoint import (
    CL2,
    CongestionLevel,
    EcnCodepoint,
    EecnMeaning,
    decode_ip_eecn,
    eecn_level,
    is_markable,
    stamp_level,
    trace_label,
)
from src.protocol.packet import Packet
from src.tools.observer import Observable

NS_PER_S = 1_000_000_000
DEFAULT_EPOCH_NS = 100_000_000


class QueueMode(Enum):
    ECN = "ecn"
    EECN = "eecn"


class EnqueueResult(Enum):
    ADMITTED = "admitted"
    DROPPED = "dropped"


@dataclass
class MarkDecision:
    """Outcome of ``mark_or_forward``; ``packet`` is None on drop."""

    packet: Optional[Packet]
    marked: bool = False
    drop_reason: Optional[str] = None

    @property
    def dropped(self) -> bool:
        return self.packet is None


class RateEstimator:
    """
    Arrival and departure counters over fixed epochs.

    Rates are those of the most recently completed epoch. An epoch in
    which nothing happened yields zero rates.
    """

    def __init__(self, epoch_ns: int = DEFAULT_EPOCH_NS, start_ns: int = 0):
        if epoch_ns <= 0:
            raise ConfigError("epoch_len", "must be positive")
        self.epoch_ns = epoch_ns
        self.epoch_start = start_ns
        self.window_arrivals = 0
        self.window_departures = 0
        self.arrival_rate = 0.0
        self.departure_rate = 0.0

    def roll(self, now_ns: int):
        if now_ns < self.epoch_start + self.epoch_ns:
            return
        elapsed = (now_ns - self.epoch_start) // self.epoch_ns
        epoch_s = self.epoch_ns / NS_PER_S
        if elapsed == 1:
            self.arrival_rate = self.window_arrivals / epoch_s
            self.departure_rate = self.window_departures / epoch_s
        else:
            # At least one whole epoch passed with no traffic.
            self.arrival_rate = 0.0
            self.departure_rate = 0.0
        self.window_arrivals = 0
        self.window_departures = 0
        self.epoch_start += elapsed * self.epoch_ns

    def record_arrival(self, now_ns: int):
        self.roll(now_ns)
        self.window_arrivals += 1

    def record_departure(self, now_ns: int):
        self.roll(now_ns)
        self.window_departures += 1


def congestion_level_fraction(
    occupancy: float, capacity: float, arrival_rate: float, departure_rate: float
) -> float:
    if capacity <= 0:
        raise ConfigError("capacity", "must be positive")
    value = (occupancy + arrival_rate / 10 - departure_rate / 10) / capacity
    return min(1.0, max(0.0, value))


def classify_fraction(value: float, th1: float, th2: float) -> CongestionLevel:
    if value >= th2:
        return CongestionLevel.CL2
    if value >= th1:
        return CongestionLevel.CL1
    return CongestionLevel.NONE


class RouterQueue(Observable):
    def __init__(
        self,
        name: str,
        capacity: int = 100,
        th1: float = 0.3,
        th2: float = 0.5,
        red_min: float = 30,
        red_max: float = 60,
        red_max_p: float = 0.1,
        red_weight: float = 0.002,
        mode: QueueMode = QueueMode.EECN,
        epoch_ns: int = DEFAULT_EPOCH_NS,
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        self._validate(capacity, th1, th2, red_min, red_max, red_max_p, red_weight)
        self.name = name
        self.capacity = capacity
        self.th1 = th1
        self.th2 = th2
        self.red_min = red_min
        self.red_max = red_max
        self.red_max_p = red_max_p
        self.red_weight = red_weight
        self.mode = mode
        self.rates = RateEstimator(epoch_ns)
        self._rng = rng if rng is not None else np.random.default_rng(0)
        self._fifo: Deque[Tuple[Packet, int]] = deque()
        # Highest level already stamped on each flow since its packets last
        # found the queue below th1.
        self._signalled: Dict[int, CongestionLevel] = {}

        self.red_avg = 0.0
        self._red_count = -1
        self._idle_since: Optional[int] = 0
        # Set by the attached link; enables RED idle-time decay.
        self.service_time_ns: Optional[int] = None

        self.enqueued = 0
        self.dequeued = 0
        self.dropped = 0
        self.marked = 0

    @staticmethod
    def _validate(capacity, th1, th2, red_min, red_max, red_max_p, red_weight):
        if capacity <= 0:
            raise ConfigError("capacity", "must be positive")
        if not 0 < th1 < 1:
            raise ConfigError("th1", "must lie in (0, 1)")
        if not 0 < th2 < 1:
            raise ConfigError("th2", "must lie in (0, 1)")
        if th1 >= th2:
            raise ConfigError("th1", f"must be below th2 ({th1} >= {th2})")
        if not 0 <= red_min < red_max:
            raise ConfigError("red_min", "must satisfy 0 <= red_min < red_max")
        if not 0 < red_max_p <= 1:
            raise ConfigError("red_max_p", "must lie in (0, 1]")
        if not 0 < red_weight <= 1:
            raise ConfigError("red_weight", "must lie in (0, 1]")

    @property
    def occupancy(self) -> int:
        return len(self._fifo)

    @property
    def resident(self) -> int:
        return len(self._fifo)

    def congestion_level_value(self, now_ns: Optional[int] = None) -> float:
        if now_ns is not None:
            self.rates.roll(now_ns)
        return congestion_level_fraction(
            self.occupancy,
            self.capacity,
            self.rates.arrival_rate,
            self.rates.departure_rate,
        )

    def classify(self, now_ns: Optional[int] = None) -> CongestionLevel:
        return classify_fraction(
            self.congestion_level_value(now_ns), self.th1, self.th2
        )

    def enqueue(self, packet: Packet, now_ns: int) -> EnqueueResult:
        self.enqueued += 1
        self.rates.record_arrival(now_ns)
        self._update_red_average(now_ns)

        if self.occupancy >= self.capacity:
            self._drop(packet, now_ns, "overflow")
            return EnqueueResult.DROPPED

        decision = self.mark_or_forward(packet, now_ns)
        if decision.dropped:
            self._drop(packet, now_ns, decision.drop_reason)
            return EnqueueResult.DROPPED

        self._fifo.append((decision.packet, now_ns))
        self._idle_since = None
        self.notify(
            "enqueue",
            self._format_data(
                self.name, "enqueue", now_ns,
                flow=packet.flow_id, packet=packet.uid,
                kind=packet.kind.value, occupancy=self.occupancy,
            ),
        )
        return EnqueueResult.ADMITTED

    def dequeue(self, now_ns: int) -> Packet:
        assert self._fifo, f"dequeue on empty queue {self.name}"
        packet, enqueued_at = self._fifo.popleft()
        self.dequeued += 1
        self.rates.record_departure(now_ns)
        if not self._fifo:
            self._idle_since = now_ns
        self.notify(
            "dequeue",
            self._format_data(
                self.name, "dequeue", now_ns,
                flow=packet.flow_id, packet=packet.uid,
                kind=packet.kind.value, occupancy=self.occupancy,
                sojourn_ns=now_ns - enqueued_at,
            ),
        )
        return packet

    def mark_or_forward(self, packet: Packet, now_ns: int) -> MarkDecision:
        if self.mode is QueueMode.EECN:
            return self._eecn_decision(packet, now_ns)
        return self._ecn_decision(packet, now_ns)

    def _eecn_decision(self, packet: Packet, now_ns: int) -> MarkDecision:
        meaning = decode_ip_eecn(packet.codepoint)
        if meaning is EecnMeaning.NOT_CAPABLE:
            return self._red_unmarkable(packet)
        if meaning is EecnMeaning.CL2:
            return MarkDecision(packet)

        local = self.classify(now_ns)
        flow = packet.flow_id
        if local is CongestionLevel.NONE:
            self._signalled.pop(flow, None)
            return MarkDecision(packet)
        signalled = self._signalled.get(flow, CongestionLevel.NONE)
        if local < signalled:
            self._signalled[flow] = signalled = local

        carried = eecn_level(packet.codepoint)
        if local > carried and local > signalled:
            new_codepoint = stamp_level(local)
            self._record_mark(packet, packet.codepoint, new_codepoint, now_ns)
            packet.codepoint = new_codepoint
            self._signalled[flow] = local
            return MarkDecision(packet, marked=True)
        return MarkDecision(packet)

    def _ecn_decision(self, packet: Packet, now_ns: int) -> MarkDecision:
        action = self._red_action()
        if action == "forced":
            return MarkDecision(None, drop_reason="red_forced")
        if action is None:
            return MarkDecision(packet)
        if is_markable(packet.codepoint):
            self._record_mark(packet, packet.codepoint, CL2, now_ns)
            packet.codepoint = CL2
            return MarkDecision(packet, marked=True)
        if packet.codepoint == CL2:
            # Already CE; nothing more to signal.
            return MarkDecision(packet)
        return MarkDecision(None, drop_reason="red")

    def _red_unmarkable(self, packet: Packet) -> MarkDecision:
        action = self._red_action()
        if action == "forced":
            return MarkDecision(None, drop_reason="red_forced")
        if action == "early":
            return MarkDecision(None, drop_reason="red")
        return MarkDecision(packet)

    def _red_action(self) -> Optional[str]:
        """
        Classic RED decision on the average queue: None, "early" (inside the
        ramp, chosen with count-spaced probability) or "forced" (at or
        above red_max).
        """
        avg = self.red_avg
        if avg < self.red_min:
            self._red_count = -1
            return None
        if avg >= self.red_max:
            self._red_count = 0
            return "forced"

        self._red_count += 1
        p_b = self.red_max_p * (avg - self.red_min) / (self.red_max - self.red_min)
        denominator = 1 - self._red_count * p_b
        p_a = 1.0 if denominator <= 0 else min(1.0, p_b / denominator)
        if self._rng.random() < p_a:
            self._red_count = 0
            return "early"
        return None

    def _update_red_average(self, now_ns: int):
        if (
            not self._fifo
            and self._idle_since is not None
            and self.service_time_ns
        ):
            idle_slots = (now_ns - self._idle_since) / self.service_time_ns
            self.red_avg *= (1 - self.red_weight) ** idle_slots
            self._idle_since = now_ns
        self.red_avg += self.red_weight * (self.occupancy - self.red_avg)

    def _record_mark(
        self, packet: Packet, before: EcnCodepoint, after: EcnCodepoint, now_ns: int
    ):
        self.marked += 1
        self.notify(
            "mark",
            self._format_data(
                self.name, "mark", now_ns,
                flow=packet.flow_id, packet=packet.uid, kind=packet.kind.value,
                before=trace_label(before), after=trace_label(after),
                level=int(eecn_level(after)), occupancy=self.occupancy,
            ),
        )

    def _drop(self, packet: Packet, now_ns: int, reason: str):
        self.dropped += 1
        self.notify(
            "drop",
            self._format_data(
                self.name, "drop", now_ns,
                flow=packet.flow_id, packet=packet.uid, kind=packet.kind.value,
                reason=reason, size=packet.size, occupancy=self.occupancy,
            ),
        )
