import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, List, Optional, Tuple

NS_PER_S = 1_000_000_000


class EventAction(Enum):
    PACKET_ARRIVAL = "packet_arrival"
    TRANSMIT_COMPLETE = "transmit_complete"
    TIMER_EXPIRY = "timer_expiry"
    FLOW_START = "flow_start"


@dataclass(order=True)
class SimEvent:
    fire_time: int
    seq_no: int
    action: EventAction = field(compare=False)
    callback: Callable[..., Any] = field(compare=False, repr=False)
    args: Tuple = field(compare=False, default=(), repr=False)


def seconds_to_ns(seconds: float) -> int:
    return int(round(seconds * NS_PER_S))


def ns_to_seconds(ns: int) -> float:
    return ns / NS_PER_S


class EventCalendar:
    """
    Time-ordered event list. Times are integer nanoseconds; events with
    equal times fire in insertion order.
    """

    def __init__(self):
        self.now: int = 0
        self._events: List[SimEvent] = []
        self._next_seq = 0
        self.processed = 0

    def __len__(self) -> int:
        return len(self._events)

    def schedule_at(
        self, fire_time: int, action: EventAction, callback: Callable, *args
    ) -> SimEvent:
        assert fire_time >= self.now, (
            f"event scheduled in the past: {fire_time} < {self.now}"
        )
        event = SimEvent(fire_time, self._next_seq, action, callback, args)
        self._next_seq += 1
        heapq.heappush(self._events, event)
        return event

    def schedule_in(
        self, delay_ns: int, action: EventAction, callback: Callable, *args
    ) -> SimEvent:
        return self.schedule_at(self.now + delay_ns, action, callback, *args)

    def peek_time(self) -> Optional[int]:
        return self._events[0].fire_time if self._events else None

    def step(self) -> SimEvent:
        event = heapq.heappop(self._events)
        assert event.fire_time >= self.now, (
            f"time regression: {event.fire_time} < {self.now}"
        )
        self.now = event.fire_time
        self.processed += 1
        event.callback(*event.args)
        return event

    def run_until(self, end_ns: Optional[int] = None):
        while self._events:
            if end_ns is not None and self._events[0].fire_time >= end_ns:
                self.now = max(self.now, end_ns)
                return
            self.step()


class Timer:
    """
    Restartable one-shot timer. Only one calendar entry is outstanding at
    a time; when it fires early because the deadline moved, it re-arms.
    """

    def __init__(self, calendar: EventCalendar, callback: Callable[[], Any]):
        self._calendar = calendar
        self._callback = callback
        self.deadline: Optional[int] = None
        self._armed_for: Optional[int] = None

    @property
    def active(self) -> bool:
        return self.deadline is not None

    def restart(self, delay_ns: int):
        self.deadline = self._calendar.now + delay_ns
        if self._armed_for is None or self._armed_for > self.deadline:
            self._arm(self.deadline)

    def cancel(self):
        self.deadline = None

    def _arm(self, at: int):
        self._armed_for = at
        self._calendar.schedule_at(at, EventAction.TIMER_EXPIRY, self._fire, at)

    def _fire(self, armed_for: int):
        if armed_for != self._armed_for:
            return
        self._armed_for = None
        if self.deadline is None:
            return
        if self.deadline > self._calendar.now:
            self._arm(self.deadline)
            return
        self.deadline = None
        self._callback()
