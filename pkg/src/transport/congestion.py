"""
Window arithmetic for the three sender algorithms.

The module-level functions implement one rule each and return the state
they were given (mutated in place). The controller classes bundle them
per algorithm so an endpoint can stay algorithm-agnostic.
"""

import math
from abc import ABC, abstractmethod
from typing import Optional

from src.protocol.codepoint import CongestionLevel
from src.transport.state import (
    MAX_RTO_S,
    MIN_RTO_S,
    CcAlgorithm,
    ConnectionState,
    DecayCadence,
    HandshakeOutcome,
    LossKind,
    Phase,
    RttEstimator,
)

NS_PER_S = 1_000_000_000
INITIAL_SEGMENTS = {
    CongestionLevel.NONE: 10,
    CongestionLevel.CL1: 5,
    CongestionLevel.CL2: 1,
}
# Plain New Reno starts with the same window, so FCT differences come
# from the congestion response rather than the opening window.
FALLBACK_INITIAL_SEGMENTS = 10
CL1_ECHO_ACKS = 3


def initial_cwnd(outcome: HandshakeOutcome, seg_size: int) -> int:
    if not outcome.peer_capable:
        return FALLBACK_INITIAL_SEGMENTS * seg_size
    return INITIAL_SEGMENTS[outcome.observed_level] * seg_size


def _floor_cwnd(c: ConnectionState):
    c.cwnd = max(c.cwnd, float(c.seg_size))


def _within_reaction_window(
    c: ConnectionState, level: CongestionLevel, now_ns: Optional[int]
) -> bool:
    if now_ns is None:
        return False
    last = c.last_reduction_ns.get(level)
    if last is None:
        return False
    return now_ns - last < c.avg_rtt * NS_PER_S


def on_congestion_echo(
    c: ConnectionState, level: CongestionLevel, now_ns: Optional[int] = None
) -> ConnectionState:
    """
    Sender reaction to a CL1/CL2 echo. At most one reduction per level per
    avgRTT when ``now_ns`` is given. Echoes before the handshake completes
    leave the state untouched.
    """
    if c.phase is Phase.HANDSHAKE or not c.eecn_negotiated:
        return c
    if level is CongestionLevel.NONE:
        return c
    if _within_reaction_window(c, level, now_ns):
        return c

    seg = c.seg_size
    if level is CongestionLevel.CL2:
        divisor = c.d if c.cur_rtt >= c.avg_rtt else c.d / 2
        c.ssthresh = max(2.0 * seg, c.cwnd / divisor)
        c.cwnd = c.ssthresh
    elif c.cur_rtt >= c.avg_rtt:
        c.ssthresh = c.cwnd * math.exp(-c.beta)
        c.cwnd = c.ssthresh
    else:
        # Falling RTT: the window stays, and so does the reaction window.
        return c

    _floor_cwnd(c)
    c.cwr_pending = True
    if now_ns is not None:
        c.last_reduction_ns[level] = now_ns
    c.refresh_phase()
    return c


def on_ack_window_growth(
    c: ConnectionState, now_ns: Optional[int] = None
) -> ConnectionState:
    """Slow start and congestion avoidance for EECN senders, per ACK."""
    if c.phase is Phase.RECOVERY:
        return c
    seg = c.seg_size
    if c.in_slow_start:
        if c.rtt_rising:
            c.cwnd += seg * c.sigma_ss
        else:
            c.cwnd += seg
    elif c.rtt_rising:
        if _decay_due(c, now_ns):
            c.cwnd *= math.exp(-c.beta)
            c.last_ca_decay_ns = now_ns
    else:
        c.cwnd += seg * c.sigma_ca
    _floor_cwnd(c)
    c.refresh_phase()
    return c


def _decay_due(c: ConnectionState, now_ns: Optional[int]) -> bool:
    if c.ca_decay is DecayCadence.PER_ACK or now_ns is None:
        return True
    if c.last_ca_decay_ns is None:
        return True
    return now_ns - c.last_ca_decay_ns >= c.avg_rtt * NS_PER_S


def newreno_window_growth(c: ConnectionState, acked_bytes: int) -> ConnectionState:
    if c.phase is Phase.RECOVERY:
        return c
    seg = c.seg_size
    if c.in_slow_start:
        c.cwnd += min(acked_bytes, seg)
    else:
        c.cwnd += seg * seg / c.cwnd
    c.refresh_phase()
    return c


def receiver_on_marked_packet(
    r: ConnectionState, level: CongestionLevel
) -> ConnectionState:
    if level is CongestionLevel.CL2:
        r.cl2_echo_pending = True
    elif level is CongestionLevel.CL1:
        r.cl1_echo_remaining = CL1_ECHO_ACKS
    _refresh_pending_echo(r)
    return r


def receiver_on_cwr(r: ConnectionState) -> ConnectionState:
    r.cl2_echo_pending = False
    _refresh_pending_echo(r)
    return r


def take_echo(r: ConnectionState) -> CongestionLevel:
    """Level to carry on the next outgoing ACK; consumes one CL1 echo."""
    if r.cl2_echo_pending:
        level = CongestionLevel.CL2
    elif r.cl1_echo_remaining > 0:
        r.cl1_echo_remaining -= 1
        level = CongestionLevel.CL1
    else:
        level = CongestionLevel.NONE
    _refresh_pending_echo(r)
    return level


def _refresh_pending_echo(r: ConnectionState):
    if r.cl2_echo_pending:
        r.pending_echo = CongestionLevel.CL2
    elif r.cl1_echo_remaining > 0:
        r.pending_echo = CongestionLevel.CL1
    else:
        r.pending_echo = CongestionLevel.NONE


def on_rtt_sample(c: ConnectionState, sample: float) -> ConnectionState:
    """
    Feed one RTT sample (seconds). Callers apply Karn's rule and never pass
    samples taken from retransmitted segments.
    """
    if sample <= 0:
        raise ValueError(f"RTT sample must be positive, got {sample}")
    c.cur_rtt = sample
    c.rtt_samples += 1
    if c.rtt_samples == 1:
        c.avg_rtt = sample
        c.srtt = sample
        c.rttvar = sample / 2
    else:
        if c.rtt_estimator is RttEstimator.MEAN:
            c.avg_rtt += (sample - c.avg_rtt) / c.rtt_samples
        else:
            c.avg_rtt += (sample - c.avg_rtt) / 8
        c.rttvar = 0.75 * c.rttvar + 0.25 * abs(c.srtt - sample)
        c.srtt = 0.875 * c.srtt + 0.125 * sample
    c.rto = min(MAX_RTO_S, max(MIN_RTO_S, c.srtt + 4 * c.rttvar))
    return c


def on_loss(c: ConnectionState, kind: LossKind) -> ConnectionState:
    seg = c.seg_size
    c.ssthresh = max(2.0 * seg, c.cwnd / 2)
    c.recover = c.next_seq
    if kind is LossKind.TRIPLE_DUPACK:
        c.cwnd = c.ssthresh + 3 * seg
        c.phase = Phase.RECOVERY
    else:
        c.cwnd = float(seg)
        c.dupack_count = 0
        c.phase = Phase.SLOW_START
        c.rto = min(MAX_RTO_S, c.rto * 2)
    return c


def exit_recovery(c: ConnectionState) -> ConnectionState:
    c.cwnd = max(c.ssthresh, float(c.seg_size))
    c.phase = Phase.SLOW_START
    c.refresh_phase()
    return c


def baseline_ecn_behavior(c: ConnectionState, ce_echo: bool) -> ConnectionState:
    """
    Classic ECN response: halve once per window of data. Echoes arriving
    before the data sent after the last reduction is acknowledged are
    ignored.
    """
    if c.cc_algo is not CcAlgorithm.NEW_RENO_ECN or not c.ecn_negotiated:
        return c
    if not ce_echo or c.phase is Phase.HANDSHAKE:
        return c
    if c.highest_ack <= c.ecn_recover:
        return c
    c.ssthresh = max(2.0 * c.seg_size, c.cwnd / 2)
    c.cwnd = c.ssthresh
    c.cwr_pending = True
    c.ecn_recover = c.next_seq
    c.refresh_phase()
    return c


class CongestionController(ABC):
    """Per-algorithm reaction to ACKs and congestion signals."""

    algo: CcAlgorithm

    def __init__(self, state: ConnectionState):
        self.state = state

    @abstractmethod
    def on_new_ack(self, acked_bytes: int, now_ns: int):
        """Grow the window for an ACK that advanced highest_ack."""

    def on_echo(self, level: CongestionLevel, now_ns: int):
        """React to a congestion echo carried on an ACK."""

    def start_window(self, outcome: HandshakeOutcome):
        c = self.state
        c.cwnd = float(initial_cwnd(outcome, c.seg_size))
        c.phase = Phase.SLOW_START
        c.refresh_phase()


class EecnController(CongestionController):
    algo = CcAlgorithm.EECN

    def on_new_ack(self, acked_bytes: int, now_ns: int):
        if not self.state.eecn_negotiated:
            newreno_window_growth(self.state, acked_bytes)
            return
        on_ack_window_growth(self.state, now_ns)

    def on_echo(self, level: CongestionLevel, now_ns: int):
        on_congestion_echo(self.state, level, now_ns)


class NewRenoController(CongestionController):
    algo = CcAlgorithm.NEW_RENO

    def on_new_ack(self, acked_bytes: int, now_ns: int):
        newreno_window_growth(self.state, acked_bytes)


class NewRenoEcnController(NewRenoController):
    algo = CcAlgorithm.NEW_RENO_ECN

    def on_echo(self, level: CongestionLevel, now_ns: int):
        baseline_ecn_behavior(self.state, level is not CongestionLevel.NONE)


CONTROLLERS = {
    CcAlgorithm.EECN: EecnController,
    CcAlgorithm.NEW_RENO: NewRenoController,
    CcAlgorithm.NEW_RENO_ECN: NewRenoEcnController,
}


def controller_for(state: ConnectionState) -> CongestionController:
    return CONTROLLERS[state.cc_algo](state)
