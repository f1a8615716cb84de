from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.engine.scenario import FlowClass

SOJOURN_PERCENTILES = (50, 90, 99)


@dataclass
class FlowStats:
    """
    Measurements of one flow. Times in seconds, rates in bits/second.
    """

    flow_id: int
    flow_class: FlowClass
    algo: str
    src: str
    dst: str
    size_bytes: int
    start_s: float
    fct: Optional[float] = None
    delivered_bytes: int = 0
    data_sent: int = 0
    retransmits: int = 0
    drops: int = 0
    drop_bytes: int = 0
    marks_by_level: Dict[int, int] = field(default_factory=lambda: {1: 0, 2: 0})
    echoes_by_level: Dict[int, int] = field(default_factory=lambda: {1: 0, 2: 0})
    fast_retransmits: int = 0
    timeouts: int = 0
    resets: int = 0
    protocol_violations: int = 0
    initial_segments: Optional[int] = None
    rtt_series: List[Tuple[float, float]] = field(default_factory=list)
    cwnd_series: List[Tuple[float, float]] = field(default_factory=list)
    e2e_delays: List[float] = field(default_factory=list)
    delivery_series: List[Tuple[float, int]] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.fct is not None

    @property
    def marks(self) -> int:
        return sum(self.marks_by_level.values())

    def goodput(self, end_s: Optional[float] = None) -> float:
        """Delivered application bits over the FCT, or up to ``end_s`` if unfinished."""
        if self.fct is not None:
            elapsed = self.fct
        elif end_s is not None:
            elapsed = end_s - self.start_s
        else:
            return 0.0
        if elapsed <= 0:
            return 0.0
        return self.delivered_bytes * 8 / elapsed

    def window_throughput(self, t0: float, t1: float) -> float:
        """Bits/second delivered inside [t0, t1]."""
        if t1 <= t0:
            raise ValueError(f"empty window [{t0}, {t1}]")
        before = after = 0
        for time_s, delivered in self.delivery_series:
            if time_s <= t0:
                before = delivered
            if time_s <= t1:
                after = delivered
            else:
                break
        return (after - before) * 8 / (t1 - t0)

    @property
    def jitter(self) -> float:
        """Mean absolute difference of consecutive RTT samples."""
        if len(self.rtt_series) < 2:
            return 0.0
        rtts = np.array([rtt for _, rtt in self.rtt_series])
        return float(np.mean(np.abs(np.diff(rtts))))

    @property
    def mean_e2e_delay(self) -> Optional[float]:
        if not self.e2e_delays:
            return None
        return float(np.mean(self.e2e_delays))

    def summary(self, end_s: float) -> Dict:
        return {
            "flow_id": self.flow_id,
            "class": self.flow_class.value,
            "algo": self.algo,
            "src": self.src,
            "dst": self.dst,
            "size_bytes": self.size_bytes,
            "start_s": self.start_s,
            "completed": self.completed,
            "fct_s": self.fct,
            "goodput_bps": self.goodput(end_s),
            "delivered_bytes": self.delivered_bytes,
            "data_sent": self.data_sent,
            "retransmits": self.retransmits,
            "drops": self.drops,
            "marks_cl1": self.marks_by_level[1],
            "marks_cl2": self.marks_by_level[2],
            "echoes_cl1": self.echoes_by_level[1],
            "echoes_cl2": self.echoes_by_level[2],
            "fast_retransmits": self.fast_retransmits,
            "timeouts": self.timeouts,
            "initial_segments": self.initial_segments,
            "mean_e2e_delay_s": self.mean_e2e_delay,
            "jitter_s": self.jitter,
        }


@dataclass
class QueueStats:
    queue_id: str
    mode: str
    enqueued: int = 0
    dequeued: int = 0
    drops: int = 0
    drop_bytes: int = 0
    marks: int = 0
    marks_by_level: Dict[int, int] = field(default_factory=lambda: {1: 0, 2: 0})
    drop_reasons: Dict[str, int] = field(default_factory=dict)
    sojourn_times: List[float] = field(default_factory=list)
    occupancy_series: List[Tuple[float, int]] = field(default_factory=list)

    def sojourn_percentiles(
        self, percentiles: Sequence[float] = SOJOURN_PERCENTILES
    ) -> Dict[str, Optional[float]]:
        if not self.sojourn_times:
            return {f"p{p}": None for p in percentiles}
        values = np.percentile(np.array(self.sojourn_times), percentiles)
        return {f"p{p}": float(v) for p, v in zip(percentiles, values)}

    def summary(self) -> Dict:
        occupancies = [occ for _, occ in self.occupancy_series]
        return {
            "queue_id": self.queue_id,
            "mode": self.mode,
            "enqueued": self.enqueued,
            "dequeued": self.dequeued,
            "drops": self.drops,
            "drop_bytes": self.drop_bytes,
            "marks": self.marks,
            "marks_cl1": self.marks_by_level[1],
            "marks_cl2": self.marks_by_level[2],
            "drop_reasons": dict(sorted(self.drop_reasons.items())),
            "mean_occupancy": float(np.mean(occupancies)) if occupancies else 0.0,
            "max_occupancy": max(occupancies, default=0),
            "sojourn_s": self.sojourn_percentiles(),
        }


def jain_fairness(throughputs: Sequence[float]) -> float:
    """
    Jain's index (sum x)^2 / (n * sum x^2). Returns nan when every
    throughput is zero.

    Raises:
        ValueError: on an empty list or a negative throughput.
    """
    if len(throughputs) == 0:
        raise ValueError("jain_fairness needs at least one throughput")
    x = np.asarray(throughputs, dtype=float)
    if np.any(x < 0):
        raise ValueError("throughputs must not be negative")
    squares = float(np.sum(x * x))
    if squares == 0:
        return float("nan")
    return float(np.sum(x)) ** 2 / (len(x) * squares)
