"""
Run reports.

``TraceRecorder`` is the observer attached to every queue and endpoint of
a world. It keeps the per-flow and per-queue accumulators and, when asked
to, the raw trace rows. ``summarize`` folds the recorder into a
``SimReport``; the remaining functions render reports and comparison
tables with pandas.
"""

import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.config import ConfigError
from src.engine.calendar import ns_to_seconds
from src.engine.scenario import FlowClass, FlowSpec
from src.metrics.stats import FlowStats, QueueStats, jain_fairness
from src.tools.observer import Observer

TRACE_COLUMNS = ["time_s", "entity", "event", "flow", "detail"]
SERIES_BUCKET_S = 0.01
EXPORT_FORMATS = ("json", "csv")
# Fraction of the run discarded before measuring steady-state throughput.
STEADY_STATE_START = 0.25

_ROW_KEYS = ("time_ns", "entity", "event", "flow")


class TraceRecorder(Observer):
    def __init__(self, keep_rows: bool = False) -> None:
        super().__init__()
        self.keep_rows = keep_rows
        self.rows: List[Tuple[str, str, str, str, str]] = []
        self.flows: Dict[int, FlowStats] = {}
        self.queues: Dict[str, QueueStats] = {}
        self.event_counts: Counter = Counter()

    def register_flow(self, spec: FlowSpec):
        self.flows[spec.flow_id] = FlowStats(
            flow_id=spec.flow_id,
            flow_class=spec.flow_class,
            algo=spec.algo.value,
            src=spec.src,
            dst=spec.dst,
            size_bytes=spec.size_bytes,
            start_s=spec.start_s,
        )

    def register_queue(self, queue_id: str, mode: str):
        self.queues[queue_id] = QueueStats(queue_id, mode)

    def update(self, event_type: str, data: Dict):
        self.update_id += 1
        self.event_counts[event_type] += 1
        if self.keep_rows:
            self.rows.append(_trace_row(data))
        if "role" in data:
            handler = getattr(self, f"_{data['role']}_{event_type}", None)
        else:
            handler = getattr(self, f"_queue_{event_type}", None)
        if handler is not None:
            handler(ns_to_seconds(data["time_ns"]), data)

    # Queue events.

    def _queue_enqueue(self, t: float, data: Dict):
        q = self.queues[data["entity"]]
        q.enqueued += 1
        q.occupancy_series.append((t, data["occupancy"]))

    def _queue_dequeue(self, t: float, data: Dict):
        q = self.queues[data["entity"]]
        q.dequeued += 1
        q.sojourn_times.append(ns_to_seconds(data["sojourn_ns"]))
        q.occupancy_series.append((t, data["occupancy"]))

    def _queue_mark(self, t: float, data: Dict):
        q = self.queues[data["entity"]]
        level = data["level"]
        q.marks += 1
        q.marks_by_level[level] += 1
        self.flows[data["flow"]].marks_by_level[level] += 1

    def _queue_drop(self, t: float, data: Dict):
        q = self.queues[data["entity"]]
        q.drops += 1
        q.drop_bytes += data["size"]
        q.drop_reasons[data["reason"]] = q.drop_reasons.get(data["reason"], 0) + 1
        flow = self.flows[data["flow"]]
        flow.drops += 1
        flow.drop_bytes += data["size"]

    # Sender events.

    def _sender_handshake(self, t: float, data: Dict):
        self.flows[data["flow"]].initial_segments = data["initial_segments"]

    def _sender_data(self, t: float, data: Dict):
        flow = self.flows[data["flow"]]
        flow.data_sent += 1
        if data["retransmit"]:
            flow.retransmits += 1

    def _sender_ack(self, t: float, data: Dict):
        if data.get("handshake"):
            return
        flow = self.flows[data["flow"]]
        if data.get("rtt") is not None:
            flow.rtt_series.append((t, data["rtt"]))
        flow.cwnd_series.append((t, data["cwnd"]))

    def _sender_echo(self, t: float, data: Dict):
        self.flows[data["flow"]].echoes_by_level[data["level"]] += 1

    def _sender_loss(self, t: float, data: Dict):
        self.flows[data["flow"]].fast_retransmits += 1

    def _sender_rto(self, t: float, data: Dict):
        self.flows[data["flow"]].timeouts += 1

    def _sender_reset(self, t: float, data: Dict):
        self.flows[data["flow"]].resets += 1

    def _sender_protocol_violation(self, t: float, data: Dict):
        self.flows[data["flow"]].protocol_violations += 1

    # Receiver events.

    def _receiver_data_rx(self, t: float, data: Dict):
        flow = self.flows[data["flow"]]
        if data["fresh"]:
            flow.e2e_delays.append(data["e2e_delay"])
        flow.delivery_series.append((t, data["delivered"]))
        flow.delivered_bytes = data["delivered"]

    def _receiver_complete(self, t: float, data: Dict):
        flow = self.flows[data["flow"]]
        flow.fct = data["fct"]
        flow.delivered_bytes = data["delivered"]

    _receiver_reset = _sender_reset


def _trace_row(data: Dict) -> Tuple[str, str, str, str, str]:
    detail = ";".join(f"{k}={v}" for k, v in data.items() if k not in _ROW_KEYS)
    flow = data.get("flow")
    return (
        f"{ns_to_seconds(data['time_ns']):.9f}",
        data["entity"],
        data["event"],
        "" if flow is None else str(flow),
        detail,
    )


@dataclass
class SimReport:
    name: str
    algo: str
    seed: int
    duration_s: float
    end_s: float
    flows: List[FlowStats] = field(default_factory=list)
    queues: List[QueueStats] = field(default_factory=list)
    bottleneck: Optional[str] = None
    packets_sent: int = 0
    bytes_sent: int = 0
    packets_delivered: int = 0
    packets_resident: int = 0
    events_processed: int = 0
    event_counts: Dict[str, int] = field(default_factory=dict)
    trace_rows: List[Tuple[str, str, str, str, str]] = field(default_factory=list, repr=False)

    @property
    def drops(self) -> int:
        return sum(q.drops for q in self.queues)

    @property
    def drop_bytes(self) -> int:
        return sum(q.drop_bytes for q in self.queues)

    @property
    def marks(self) -> int:
        return sum(q.marks for q in self.queues)

    def marks_at(self, level: int) -> int:
        return sum(q.marks_by_level[level] for q in self.queues)

    @property
    def drop_pct(self) -> float:
        if self.packets_sent == 0:
            return 0.0
        return self.drops / self.packets_sent * 100

    def flows_of(self, flow_class: FlowClass) -> List[FlowStats]:
        return [f for f in self.flows if f.flow_class is flow_class]

    def mean_fct(self, flow_class: FlowClass) -> Optional[float]:
        fcts = [f.fct for f in self.flows_of(flow_class) if f.completed]
        return float(np.mean(fcts)) if fcts else None

    def mean_goodput(self, flow_class: FlowClass) -> Optional[float]:
        rates = [f.goodput(self.end_s) for f in self.flows_of(flow_class)]
        return float(np.mean(rates)) if rates else None

    def mean_e2e_delay(self, flow_class: FlowClass) -> Optional[float]:
        delays = [d for f in self.flows_of(flow_class) for d in f.e2e_delays]
        return float(np.mean(delays)) if delays else None

    def jain_index(self) -> Optional[float]:
        """Fairness of elephant throughput over the steady-state part of the run."""
        elephants = self.flows_of(FlowClass.ELEPHANT)
        if not elephants or self.end_s <= 0:
            return None
        t0 = self.end_s * STEADY_STATE_START
        throughputs = [f.window_throughput(t0, self.end_s) for f in elephants]
        index = jain_fairness(throughputs)
        return None if math.isnan(index) else index

    def bottleneck_queue(self) -> Optional[QueueStats]:
        for q in self.queues:
            if q.queue_id == self.bottleneck:
                return q
        return None

    def to_dict(self) -> Dict:
        bottleneck = self.bottleneck_queue()
        per_class = {}
        for flow_class in FlowClass:
            per_class[flow_class.value] = {
                "flows": len(self.flows_of(flow_class)),
                "completed": sum(f.completed for f in self.flows_of(flow_class)),
                "mean_fct_s": self.mean_fct(flow_class),
                "mean_goodput_bps": self.mean_goodput(flow_class),
                "mean_e2e_delay_s": self.mean_e2e_delay(flow_class),
            }
        return {
            "name": self.name,
            "algo": self.algo,
            "seed": self.seed,
            "duration_s": self.duration_s,
            "end_s": self.end_s,
            "totals": {
                "packets_sent": self.packets_sent,
                "bytes_sent": self.bytes_sent,
                "packets_delivered": self.packets_delivered,
                "packets_resident": self.packets_resident,
                "packets_dropped": self.drops,
                "bytes_dropped": self.drop_bytes,
                "drop_pct": self.drop_pct,
                "packets_marked": self.marks,
                "marks_cl1": self.marks_at(1),
                "marks_cl2": self.marks_at(2),
                "events_processed": self.events_processed,
            },
            "classes": per_class,
            "jain_index": self.jain_index(),
            "bottleneck": bottleneck.summary() if bottleneck else None,
            "flows": [f.summary(self.end_s) for f in self.flows],
            "queues": [q.summary() for q in self.queues],
        }


def summarize(world, recorder: TraceRecorder, duration_s: float) -> SimReport:
    """Fold a finished world and its recorder into a report."""
    hosts = world.hosts.values()
    routers = [r.id for r in world.cfg.routers]
    bottleneck = f"{routers[0]}->{routers[1]}" if len(routers) > 1 else None
    return SimReport(
        name=world.cfg.name,
        algo=world.cfg.algo.value,
        seed=world.seed,
        duration_s=duration_s,
        end_s=ns_to_seconds(world.calendar.now),
        flows=[recorder.flows[fid] for fid in sorted(recorder.flows)],
        queues=[recorder.queues[qid] for qid in sorted(recorder.queues)],
        bottleneck=bottleneck,
        packets_sent=sum(h.packets_sent for h in hosts),
        bytes_sent=sum(h.bytes_sent for h in hosts),
        packets_delivered=sum(h.packets_received for h in hosts),
        packets_resident=world.resident_packets(),
        events_processed=world.calendar.processed,
        event_counts=dict(sorted(recorder.event_counts.items())),
        trace_rows=recorder.rows,
    )


def flatten(doc, prefix: str = "") -> Dict[str, object]:
    """Dotted-key view of a nested report, list items keyed by index."""
    items: Dict[str, object] = {}
    if isinstance(doc, dict):
        for key, value in doc.items():
            items.update(flatten(value, f"{prefix}{key}."))
    elif isinstance(doc, list):
        for i, value in enumerate(doc):
            items.update(flatten(value, f"{prefix}{i}."))
    else:
        items[prefix[:-1]] = doc
    return items


def export(report: SimReport, fmt: str = "json") -> bytes:
    """
    Render a report. JSON keeps the nested layout and adds the bucketed
    time series under ``series``; CSV holds one ``key,value`` row per
    scalar leaf (the series have their own long-format CSV, see
    ``series_frame``).

    Raises:
        ConfigError: on an unknown format.
    """
    doc = report.to_dict()
    if fmt == "json":
        doc["series"] = series_dict(report)
        return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")
    if fmt == "csv":
        frame = pd.DataFrame(sorted(flatten(doc).items()), columns=["key", "value"])
        return frame.to_csv(index=False).encode("utf-8")
    raise ConfigError("format", f"unknown export format {fmt!r} (expected json or csv)")


def trace_csv(report: SimReport) -> bytes:
    frame = pd.DataFrame(report.trace_rows, columns=TRACE_COLUMNS)
    return frame.to_csv(index=False).encode("utf-8")


def series_frame(report: SimReport, bucket_s: float = SERIES_BUCKET_S) -> pd.DataFrame:
    """
    Long-format time series bucketed to ``bucket_s``: cwnd (bytes) and RTT
    (seconds) per flow, occupancy (packets) per router queue. Each bucket
    keeps the last cwnd and occupancy value and the mean RTT.
    """
    frames = []
    for flow in report.flows:
        frames.append(_bucket(flow.cwnd_series, "cwnd", f"flow{flow.flow_id}", "last", bucket_s))
        frames.append(_bucket(flow.rtt_series, "rtt", f"flow{flow.flow_id}", "mean", bucket_s))
    for queue in report.queues:
        frames.append(_bucket(queue.occupancy_series, "occupancy", queue.queue_id, "last", bucket_s))
    frames = [f for f in frames if not f.empty]
    if not frames:
        return pd.DataFrame(columns=["series", "entity", "time_s", "value"])
    return pd.concat(frames, ignore_index=True)


def series_dict(report: SimReport, bucket_s: float = SERIES_BUCKET_S) -> Dict[str, Dict[str, List]]:
    """``series_frame`` nested as series -> entity -> [[time_s, value], ...]."""
    doc: Dict[str, Dict[str, List]] = {}
    frame = series_frame(report, bucket_s)
    for (series, entity), group in frame.groupby(["series", "entity"], sort=True):
        points = group[["time_s", "value"]].astype(float).values.tolist()
        doc.setdefault(series, {})[entity] = points
    return doc


def _bucket(points, series: str, entity: str, how: str, bucket_s: float) -> pd.DataFrame:
    if not points:
        return pd.DataFrame(columns=["series", "entity", "time_s", "value"])
    frame = pd.DataFrame(points, columns=["time_s", "value"])
    frame["time_s"] = (np.floor(frame["time_s"] / bucket_s) * bucket_s).round(6)
    grouped = frame.groupby("time_s", sort=True)["value"].agg(how).reset_index()
    grouped.insert(0, "entity", entity)
    grouped.insert(0, "series", series)
    return grouped


def comparison_row(report: SimReport) -> Dict:
    return {
        "algo": report.algo,
        "packets_sent": report.packets_sent,
        "packets_dropped": report.drops,
        "bytes_dropped": report.drop_bytes,
        "drop_pct": report.drop_pct,
        "packets_marked": report.marks,
        "marks_cl1": report.marks_at(1),
        "marks_cl2": report.marks_at(2),
        "short_fct_s": report.mean_fct(FlowClass.SHORT),
        "elephant_fct_s": report.mean_fct(FlowClass.ELEPHANT),
        "short_goodput_bps": report.mean_goodput(FlowClass.SHORT),
        "elephant_goodput_bps": report.mean_goodput(FlowClass.ELEPHANT),
        "short_e2e_delay_s": report.mean_e2e_delay(FlowClass.SHORT),
        "elephant_e2e_delay_s": report.mean_e2e_delay(FlowClass.ELEPHANT),
        "jain_index": report.jain_index(),
    }


REDUCTION_METRICS = (
    ("packets_dropped", "drops"),
    ("packets_marked", "marks"),
    ("short_fct_s", "short_fct"),
    ("short_e2e_delay_s", "short_e2e_delay"),
    ("elephant_e2e_delay_s", "elephant_e2e_delay"),
)


def comparison_table(reports: Sequence[SimReport]) -> pd.DataFrame:
    """One row per algorithm, in the order the reports were given."""
    return pd.DataFrame([comparison_row(r) for r in reports])


def reduction(baseline: Optional[float], value: Optional[float]) -> Optional[float]:
    """Percentage reduction (baseline - value) / baseline; None if undefined."""
    if baseline is None or value is None or baseline == 0:
        return None
    return (baseline - value) / baseline * 100


def reduction_table(table: pd.DataFrame, target: str = "eecn") -> pd.DataFrame:
    """Reductions of ``target`` against every other algorithm in ``table``."""
    columns = ["baseline"] + [name for _, name in REDUCTION_METRICS]
    if target not in set(table.get("algo", [])):
        return pd.DataFrame(columns=columns)
    mine = table[table["algo"] == target].iloc[0]
    rows = []
    for _, other in table[table["algo"] != target].iterrows():
        row = {"baseline": other["algo"]}
        for column, name in REDUCTION_METRICS:
            row[name] = reduction(_optional(other[column]), _optional(mine[column]))
        rows.append(row)
    return pd.DataFrame(rows, columns=columns)


def _optional(value) -> Optional[float]:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return None
    return float(value)


SWEEP_COLUMNS = [
    "th1", "th2", "ef_throughput_bps", "sf_throughput_bps",
    "packets_dropped", "ef_e2e_delay_s", "sf_e2e_delay_s",
]


def sweep_table(results: Iterable[Tuple[float, float, SimReport]]) -> pd.DataFrame:
    rows = [
        {
            "th1": th1,
            "th2": th2,
            "ef_throughput_bps": report.mean_goodput(FlowClass.ELEPHANT),
            "sf_throughput_bps": report.mean_goodput(FlowClass.SHORT),
            "packets_dropped": report.drops,
            "ef_e2e_delay_s": report.mean_e2e_delay(FlowClass.ELEPHANT),
            "sf_e2e_delay_s": report.mean_e2e_delay(FlowClass.SHORT),
        }
        for th1, th2, report in results
    ]
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def table_bytes(frame: pd.DataFrame, fmt: str) -> bytes:
    if fmt == "csv":
        return frame.to_csv(index=False).encode("utf-8")
    if fmt == "json":
        buffer = io.StringIO()
        frame.to_json(buffer, orient="records", indent=2)
        return (buffer.getvalue() + "\n").encode("utf-8")
    raise ConfigError("format", f"unknown export format {fmt!r} (expected json or csv)")
