from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional

from src.config import ConfigError
from src.protocol.codepoint import CongestionLevel

# Stands in for "no threshold yet": slow start until the first reduction.
INITIAL_SSTHRESH = float(2**40)
INITIAL_RTO_S = 1.0
MIN_RTO_S = 0.2
MAX_RTO_S = 60.0


class Phase(Enum):
    HANDSHAKE = "handshake"
    SLOW_START = "slow_start"
    CONGESTION_AVOIDANCE = "congestion_avoidance"
    RECOVERY = "recovery"


class HandshakeStage(Enum):
    CLOSED = "closed"
    SYN_SENT = "syn_sent"
    SYN_RCVD = "syn_rcvd"
    ESTABLISHED = "established"


class CcAlgorithm(Enum):
    EECN = "eecn"
    NEW_RENO = "newreno"
    NEW_RENO_ECN = "ecn"

    @classmethod
    def parse(cls, name: str, field_path: str = "algo") -> "CcAlgorithm":
        try:
            return cls(name.lower())
        except (ValueError, AttributeError):
            known = ", ".join(algo.value for algo in cls)
            raise ConfigError(field_path, f"unknown algorithm {name!r} (known: {known})")


class RttEstimator(Enum):
    EWMA = "ewma"
    MEAN = "mean"


class DecayCadence(Enum):
    PER_ACK = "per_ack"
    PER_RTT = "per_rtt"


class LossKind(Enum):
    TRIPLE_DUPACK = "triple_dupack"
    TIMEOUT = "timeout"


@dataclass
class HandshakeOutcome:
    peer_capable: bool = False
    observed_level: CongestionLevel = CongestionLevel.NONE

    def __post_init__(self):
        if not self.peer_capable:
            self.observed_level = CongestionLevel.NONE


@dataclass
class ConnectionState:
    """
    Congestion and echo state of one endpoint. Windows are bytes, times
    are seconds.
    """

    seg_size: int = 1000
    cc_algo: CcAlgorithm = CcAlgorithm.EECN
    cwnd: float = 0.0
    ssthresh: float = INITIAL_SSTHRESH
    avg_rtt: float = 0.0
    cur_rtt: float = 0.0
    d: float = 8.0
    sigma_ss: float = 0.3
    sigma_ca: float = 0.02
    phase: Phase = Phase.HANDSHAKE
    stage: HandshakeStage = HandshakeStage.CLOSED
    eecn_negotiated: bool = False
    ecn_negotiated: bool = False
    outcome: Optional[HandshakeOutcome] = None

    # Receiver echo obligations.
    pending_echo: CongestionLevel = CongestionLevel.NONE
    cl2_echo_pending: bool = False
    cl1_echo_remaining: int = 0
    # Sender: stamp CWR on the next data segment.
    cwr_pending: bool = False

    next_seq: int = 0
    highest_ack: int = 0
    recover: int = 0
    ecn_recover: int = -1
    dupack_count: int = 0

    rtt_estimator: RttEstimator = RttEstimator.EWMA
    ca_decay: DecayCadence = DecayCadence.PER_ACK
    rtt_samples: int = 0
    srtt: float = 0.0
    rttvar: float = 0.0
    rto: float = INITIAL_RTO_S

    # Simulation time (ns) of the last reduction per congestion level.
    last_reduction_ns: Dict[CongestionLevel, int] = field(default_factory=dict)
    last_ca_decay_ns: Optional[int] = None

    def __post_init__(self):
        if self.seg_size <= 0:
            raise ConfigError("seg_size", "must be positive")
        if not 0 < self.sigma_ss <= 1:
            raise ConfigError("sigma_ss", "must satisfy 0 < sigma <= 1")
        if not 0 < self.sigma_ca <= 1:
            raise ConfigError("sigma_ca", "must satisfy 0 < sigma <= 1")
        if self.d < 2:
            raise ConfigError("d", "must be at least 2")

    @property
    def beta(self) -> float:
        return self.cur_rtt - self.avg_rtt

    @property
    def rtt_rising(self) -> bool:
        """cRTT >= avgRTT, the branch condition shared by both algorithms."""
        return self.rtt_samples > 0 and self.cur_rtt >= self.avg_rtt

    @property
    def in_slow_start(self) -> bool:
        return self.cwnd < self.ssthresh

    @property
    def flight_size(self) -> int:
        return self.next_seq - self.highest_ack

    def refresh_phase(self):
        if self.phase in (Phase.HANDSHAKE, Phase.RECOVERY):
            return
        self.phase = Phase.SLOW_START if self.in_slow_start else Phase.CONGESTION_AVOIDANCE
