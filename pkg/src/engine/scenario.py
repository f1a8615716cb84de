"""
Scenario documents.

A scenario is a JSON object with a required ``schema_version``. Every
parameter has a default, so ``{"schema_version": 1}`` is a valid desk-size
dumbbell. Validation happens while parsing and raises ``ConfigError``
with the dotted path of the offending field.

    {
      "schema_version": 1,
      "name": "dumbbell-desk",
      "topology": "dumbbell" | "multihop",
      "seed": 1,
      "duration_s": 60,
      "algo": "eecn" | "ecn" | "newreno",
      "clients": 3 | ["c1", ...],
      "servers": 3 | ["s1", ...],
      "routers": [{"id": "r1", "mode": "ecn" | "eecn" | "auto"}, ...],
      "links": {"edge": {"rate_bps": ..., "delay_ms": ...},
                "bottleneck": {"rate_bps": ..., "delay_ms": ...}},
      "queue": {"capacity": 100, "th1": 0.3, "th2": 0.5, "red_min": 30,
                "red_max": 60, "red_max_p": 0.1, "red_weight": 0.002,
                "mode": "auto"},
      "transport": {"seg_size": 1000, "rtt_estimator": "ewma" | "mean",
                    "ca_decay": "per_ack" | "per_rtt", "d": 8,
                    "sigma_ss": 0.3, "sigma_ca": 0.02},
      "traffic": {"elephants": 2, "elephant_bytes": 10000000, "shorts": 6,
                  "short_sizes": [9000, 16000], "short_start_s": [2, 10]},
      "flows": [{"src": "c1", "dst": "s1", "size_bytes": 16000,
                 "start_s": 0.5, "algo": "eecn", "initiator": "src",
                 "class": "short"}]
    }

When ``flows`` is present it replaces the generated ``traffic`` mix.
"""

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from src.config import LOGGER, ConfigError
from src.network.queue import QueueMode
from src.transport.state import CcAlgorithm, DecayCadence, RttEstimator

SCHEMA_VERSION = 1
# Explicit flows without a "class" are elephants above this size.
SHORT_FLOW_LIMIT_BYTES = 100_000


class Topology(Enum):
    DUMBBELL = "dumbbell"
    MULTIHOP = "multihop"


class FlowClass(Enum):
    ELEPHANT = "elephant"
    SHORT = "short"


class Initiator(Enum):
    SRC = "src"
    DST = "dst"


@dataclass(frozen=True)
class LinkSpec:
    rate_bps: int
    delay_ms: float

    @property
    def prop_delay_ns(self) -> int:
        return int(round(self.delay_ms * 1_000_000))


@dataclass(frozen=True)
class QueueSpec:
    capacity: int = 100
    th1: float = 0.3
    th2: float = 0.5
    red_min: float = 30
    red_max: float = 60
    red_max_p: float = 0.1
    red_weight: float = 0.002
    mode: str = "auto"


@dataclass(frozen=True)
class RouterSpec:
    id: str
    mode: str = "auto"


@dataclass(frozen=True)
class TransportSpec:
    seg_size: int = 1000
    rtt_estimator: RttEstimator = RttEstimator.EWMA
    ca_decay: DecayCadence = DecayCadence.PER_ACK
    d: float = 8.0
    sigma_ss: float = 0.3
    sigma_ca: float = 0.02


@dataclass(frozen=True)
class TrafficSpec:
    elephants: int = 2
    elephant_bytes: int = 10_000_000
    shorts: int = 6
    short_sizes: Tuple[int, ...] = (9000, 16000)
    short_start_s: Tuple[float, float] = (2.0, 10.0)


@dataclass(frozen=True)
class FlowSpec:
    flow_id: int
    src: str
    dst: str
    size_bytes: int
    start_s: float
    algo: CcAlgorithm
    flow_class: FlowClass
    initiator: Initiator = Initiator.SRC


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    topology: Topology = Topology.DUMBBELL
    seed: int = 1
    duration_s: float = 60.0
    algo: CcAlgorithm = CcAlgorithm.EECN
    clients: Tuple[str, ...] = ("c1", "c2", "c3")
    servers: Tuple[str, ...] = ("s1", "s2", "s3")
    routers: Tuple[RouterSpec, ...] = (RouterSpec("rA"), RouterSpec("rB"))
    edge: LinkSpec = LinkSpec(1_000_000_000, 1.0)
    bottleneck: LinkSpec = LinkSpec(100_000_000, 10.0)
    queue: QueueSpec = QueueSpec()
    transport: TransportSpec = TransportSpec()
    traffic: TrafficSpec = TrafficSpec()
    flows: Optional[Tuple[FlowSpec, ...]] = None
    source: Optional[str] = field(default=None, compare=False)

    @property
    def hosts(self) -> Tuple[str, ...]:
        return self.clients + self.servers

    def router_mode(self, router: RouterSpec) -> QueueMode:
        mode = router.mode if router.mode != "auto" else self.queue.mode
        if mode == "auto":
            return QueueMode.EECN if self.algo is CcAlgorithm.EECN else QueueMode.ECN
        return QueueMode(mode)

    def with_algo(self, algo: CcAlgorithm) -> "ScenarioConfig":
        """Same scenario with every flow switched to ``algo``."""
        flows = self.flows
        if flows is not None:
            flows = tuple(replace(f, algo=algo) for f in flows)
        return replace(self, algo=algo, flows=flows)

    def with_thresholds(self, th1: float, th2: float) -> "ScenarioConfig":
        _check_threshold_pair(th1, th2, "queue")
        return replace(self, queue=replace(self.queue, th1=th1, th2=th2))

    def with_overrides(
        self, seed: Optional[int] = None, duration_s: Optional[float] = None
    ) -> "ScenarioConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        if duration_s is not None:
            if duration_s <= 0:
                raise ConfigError("duration", "must be positive")
            cfg = replace(cfg, duration_s=float(duration_s))
        return cfg


def load_scenario(path: str) -> ScenarioConfig:
    """
    Load and validate a scenario document.

    Raises:
        ConfigError: if the file is missing, is not JSON or fails validation.
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise ConfigError("scenario", f"file not found: {path}")
    try:
        doc = json.loads(file_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("scenario", f"{path} is not valid JSON: {exc}") from exc
    cfg = replace(scenario_from_dict(doc), source=str(file_path))
    LOGGER.info(
        "Loaded scenario %s (%s, %d flows configured)",
        cfg.name, cfg.topology.value, len(cfg.flows) if cfg.flows else 0,
    )
    return cfg


def scenario_from_dict(doc: Dict[str, Any]) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("scenario", "document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            "schema_version", f"expected {SCHEMA_VERSION}, got {version!r}"
        )

    topology = _enum(Topology, doc.get("topology", "dumbbell"), "topology")
    seed = doc.get("seed", 1)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed", "must be a non-negative integer")
    duration_s = _number(doc.get("duration_s", 60.0), "duration_s", minimum=0, strict=True)
    algo = CcAlgorithm.parse(doc.get("algo", "eecn"), "algo")

    clients = _node_ids(doc.get("clients", 3), "c", "clients")
    servers = _node_ids(doc.get("servers", 3), "s", "servers")
    routers = _routers(doc.get("routers"), topology)
    _check_unique(clients + servers + tuple(r.id for r in routers))

    links = doc.get("links", {})
    edge = _link(links.get("edge", {}), "links.edge", LinkSpec(1_000_000_000, 1.0))
    bottleneck = _link(
        links.get("bottleneck", {}), "links.bottleneck", LinkSpec(100_000_000, 10.0)
    )

    cfg = ScenarioConfig(
        name=str(doc.get("name", "scenario")),
        topology=topology,
        seed=seed,
        duration_s=float(duration_s),
        algo=algo,
        clients=clients,
        servers=servers,
        routers=routers,
        edge=edge,
        bottleneck=bottleneck,
        queue=_queue(doc.get("queue", {})),
        transport=_transport(doc.get("transport", {})),
        traffic=_traffic(doc.get("traffic", {})),
    )
    if "flows" in doc:
        cfg = replace(cfg, flows=_flows(doc["flows"], cfg))
    return cfg


def _enum(enum_cls, value, path: str):
    try:
        return enum_cls(value)
    except ValueError:
        choices = ", ".join(member.value for member in enum_cls)
        raise ConfigError(path, f"unknown value {value!r} (expected one of {choices})")


def _number(value, path: str, minimum: float = None, strict: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"must be a number, got {value!r}")
    if minimum is not None:
        if strict and value <= minimum:
            raise ConfigError(path, f"must be greater than {minimum}")
        if not strict and value < minimum:
            raise ConfigError(path, f"must be at least {minimum}")
    return value


def _integer(value, path: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(path, f"must be at least {minimum}")
    return value


def _node_ids(value, prefix: str, path: str) -> Tuple[str, ...]:
    if isinstance(value, int) and not isinstance(value, bool):
        ids = tuple(f"{prefix}{i}" for i in range(1, value + 1))
    elif isinstance(value, list) and all(isinstance(v, str) for v in value):
        ids = tuple(value)
    else:
        raise ConfigError(path, "must be a count or a list of node ids")
    if not ids:
        raise ConfigError(path, "at least one node is required")
    if len(set(ids)) != len(ids):
        raise ConfigError(path, "duplicate node ids")
    return ids


def _routers(value, topology: Topology) -> Tuple[RouterSpec, ...]:
    if value is None:
        if topology is Topology.DUMBBELL:
            return (RouterSpec("rA"), RouterSpec("rB"))
        return (RouterSpec("r1", "ecn"), RouterSpec("r2", "eecn"), RouterSpec("r3", "eecn"))
    if not isinstance(value, list):
        raise ConfigError("routers", "must be a list")
    routers = []
    for i, entry in enumerate(value):
        path = f"routers.{i}"
        if not isinstance(entry, dict) or not isinstance(entry.get("id"), str):
            raise ConfigError(f"{path}.id", "every router needs a string id")
        mode = entry.get("mode", "auto")
        if mode not in ("ecn", "eecn", "auto"):
            raise ConfigError(f"{path}.mode", f"unknown queue mode {mode!r}")
        routers.append(RouterSpec(entry["id"], mode))
    if topology is Topology.DUMBBELL and len(routers) != 2:
        raise ConfigError("routers", "a dumbbell has exactly two routers")
    if topology is Topology.MULTIHOP and len(routers) < 2:
        raise ConfigError("routers", "a multi-hop path needs at least two routers")
    return tuple(routers)


def _check_unique(ids: Sequence[str]):
    seen = set()
    for node_id in ids:
        if node_id in seen:
            raise ConfigError("nodes", f"duplicate node id {node_id!r}")
        seen.add(node_id)


def _link(doc: Dict, path: str, default: LinkSpec) -> LinkSpec:
    rate = _number(doc.get("rate_bps", default.rate_bps), f"{path}.rate_bps", 0, strict=True)
    delay = _number(doc.get("delay_ms", default.delay_ms), f"{path}.delay_ms", 0)
    return LinkSpec(int(rate), float(delay))


def _check_threshold_pair(th1, th2, path: str):
    _number(th1, f"{path}.th1", 0, strict=True)
    _number(th2, f"{path}.th2", 0, strict=True)
    if th2 >= 1:
        raise ConfigError(f"{path}.th2", "must be below 1")
    if th1 >= th2:
        raise ConfigError(f"{path}.th1", f"must be below th2 ({th1} >= {th2})")


def _queue(doc: Dict) -> QueueSpec:
    spec = QueueSpec()
    capacity = _integer(doc.get("capacity", spec.capacity), "queue.capacity", 1)
    th1 = doc.get("th1", spec.th1)
    th2 = doc.get("th2", spec.th2)
    _check_threshold_pair(th1, th2, "queue")
    red_min = _number(doc.get("red_min", spec.red_min), "queue.red_min", 0)
    red_max = _number(doc.get("red_max", spec.red_max), "queue.red_max", 0)
    if red_min >= red_max:
        raise ConfigError("queue.red_min", "must be below red_max")
    if red_max > capacity:
        raise ConfigError("queue.red_max", "must not exceed capacity")
    red_max_p = _number(doc.get("red_max_p", spec.red_max_p), "queue.red_max_p", 0, strict=True)
    red_weight = _number(doc.get("red_weight", spec.red_weight), "queue.red_weight", 0, strict=True)
    mode = doc.get("mode", spec.mode)
    if mode not in ("ecn", "eecn", "auto"):
        raise ConfigError("queue.mode", f"unknown queue mode {mode!r}")
    return QueueSpec(capacity, th1, th2, red_min, red_max, red_max_p, red_weight, mode)


def _transport(doc: Dict) -> TransportSpec:
    spec = TransportSpec()
    return TransportSpec(
        seg_size=_integer(doc.get("seg_size", spec.seg_size), "transport.seg_size", 1),
        rtt_estimator=_enum(
            RttEstimator, doc.get("rtt_estimator", spec.rtt_estimator.value),
            "transport.rtt_estimator",
        ),
        ca_decay=_enum(
            DecayCadence, doc.get("ca_decay", spec.ca_decay.value), "transport.ca_decay"
        ),
        d=_number(doc.get("d", spec.d), "transport.d", 2),
        sigma_ss=_number(doc.get("sigma_ss", spec.sigma_ss), "transport.sigma_ss", 0, strict=True),
        sigma_ca=_number(doc.get("sigma_ca", spec.sigma_ca), "transport.sigma_ca", 0, strict=True),
    )


def _traffic(doc: Dict) -> TrafficSpec:
    spec = TrafficSpec()
    sizes = doc.get("short_sizes", list(spec.short_sizes))
    if not isinstance(sizes, list) or not sizes:
        raise ConfigError("traffic.short_sizes", "must be a non-empty list")
    for i, size in enumerate(sizes):
        _integer(size, f"traffic.short_sizes.{i}")
    window = doc.get("short_start_s", list(spec.short_start_s))
    if not isinstance(window, list) or len(window) != 2:
        raise ConfigError("traffic.short_start_s", "must be [earliest, latest]")
    lo = _number(window[0], "traffic.short_start_s.0", 0)
    hi = _number(window[1], "traffic.short_start_s.1", 0)
    if hi < lo:
        raise ConfigError("traffic.short_start_s", "latest start precedes earliest")
    return TrafficSpec(
        elephants=_integer(doc.get("elephants", spec.elephants), "traffic.elephants"),
        elephant_bytes=_integer(
            doc.get("elephant_bytes", spec.elephant_bytes), "traffic.elephant_bytes"
        ),
        shorts=_integer(doc.get("shorts", spec.shorts), "traffic.shorts"),
        short_sizes=tuple(sizes),
        short_start_s=(float(lo), float(hi)),
    )


def _flows(value, cfg: ScenarioConfig) -> Tuple[FlowSpec, ...]:
    if not isinstance(value, list):
        raise ConfigError("flows", "must be a list")
    hosts = set(cfg.hosts)
    flows: List[FlowSpec] = []
    for i, entry in enumerate(value):
        path = f"flows.{i}"
        if not isinstance(entry, dict):
            raise ConfigError(path, "must be an object")
        src, dst = entry.get("src"), entry.get("dst")
        if src not in hosts:
            raise ConfigError(f"{path}.src", f"unknown host {src!r}")
        if dst not in hosts:
            raise ConfigError(f"{path}.dst", f"unknown host {dst!r}")
        if src == dst:
            raise ConfigError(f"{path}.dst", "source and sink must differ")
        size = _integer(entry.get("size_bytes", 0), f"{path}.size_bytes")
        start = _number(entry.get("start_s", 0.0), f"{path}.start_s", 0)
        algo = CcAlgorithm.parse(entry.get("algo", cfg.algo.value), f"{path}.algo")
        default_class = "elephant" if size > SHORT_FLOW_LIMIT_BYTES else "short"
        flow_class = _enum(FlowClass, entry.get("class", default_class), f"{path}.class")
        initiator = _enum(Initiator, entry.get("initiator", "src"), f"{path}.initiator")
        flows.append(
            FlowSpec(i + 1, src, dst, size, float(start), algo, flow_class, initiator)
        )
    return tuple(flows)
