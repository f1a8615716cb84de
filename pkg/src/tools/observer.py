from typing import Dict, List, Tuple


class Observer:
    """
    Receives events from every Observable it is attached to.

    The base implementation keeps the raw updates in arrival order, which
    is enough for tests that want to look at what a component emitted.
    """

    def __init__(self) -> None:
        self.update_id: int = 0
        self.updates: List[Tuple[str, Dict]] = []

    def update(self, event_type: str, data: Dict):
        """
        Records one event.

        :param event_type: Event name, e.g. ``enqueue`` or ``ack``.
        :param data: Event fields; always has ``time_ns``, ``entity`` and ``event``.
        """
        self.updates.append((event_type, data))
        self.update_id += 1

    def events_of(self, event_type: str) -> List[Dict]:
        return [data for kind, data in self.updates if kind == event_type]


class Observable:
    """Mixin for simulation components that publish events."""

    def __init__(self):
        self._observers: List[Observer] = []

    def attach(self, observer: Observer):
        self._observers.append(observer)

    def detach(self, observer: Observer):
        self._observers.remove(observer)

    def notify(self, event_type: str, data: Dict):
        """
        Passes one event to every attached observer, in attach order.
        """
        for observer in self._observers:
            observer.update(event_type, data)

    def _format_data(self, entity: str, event: str, now_ns: int, **detail) -> Dict:
        data = {"time_ns": now_ns, "entity": entity, "event": event}
        data.update(detail)
        return data
