"""
Sender and receiver endpoints of one simulated connection.

Endpoints talk to the rest of the world through three hooks: the event
calendar (time and timers), the local host (packet output) and a packet
id source. Everything they do is reported to attached observers.
"""

from dataclasses import replace
from typing import Callable, Dict, Optional

from src.config import LOGGER
from src.engine.calendar import EventCalendar, Timer, ns_to_seconds, seconds_to_ns
from src.network.node import Host
from src.protocol.codepoint import (
    CAPABLE,
    NOT_CAPABLE,
    CongestionLevel,
    EcnMeaning,
    TcpEecnMeaning,
    decode_ip_ecn,
    decode_tcp_eecn,
    echo_for_level,
    eecn_level,
    encode_ip_ecn,
    encode_tcp_eecn,
    level_of_echo,
    trace_label,
)
from src.protocol.packet import Packet, PacketKind
from src.tools.observer import Observable
from src.transport.congestion import (
    controller_for,
    exit_recovery,
    on_loss,
    on_rtt_sample,
    receiver_on_cwr,
    receiver_on_marked_packet,
    take_echo,
)
from src.transport.handshake import (
    HandshakeReset,
    complete_without_ack,
    handshake_step,
    initiate,
)
from src.transport.state import (
    INITIAL_RTO_S,
    MAX_RTO_S,
    ConnectionState,
    HandshakeStage,
    LossKind,
    Phase,
)

MAX_CONTROL_RETRIES = 6
DUPACK_THRESHOLD = 3
ECT0 = encode_ip_ecn(EcnMeaning.ECT0)


class TcpEndpoint(Observable):
    role = "endpoint"

    def __init__(
        self,
        flow_id: int,
        size_bytes: int,
        host: Host,
        remote: str,
        state: ConnectionState,
        calendar: EventCalendar,
        new_uid: Callable[[], int],
        is_initiator: bool,
    ):
        super().__init__()
        self.flow_id = flow_id
        self.size_bytes = size_bytes
        self.host = host
        self.remote = remote
        self.state = state
        self.calendar = calendar
        self._new_uid = new_uid
        self.is_initiator = is_initiator
        self.entity = f"flow{flow_id}.{self.role}"
        self.start_ns: Optional[int] = None

        self._control_template: Optional[Packet] = None
        self._control_sent_ns = 0
        self._control_retransmitted = False
        self._control_retries = 0
        self._control_rto = INITIAL_RTO_S
        self._control_timer = Timer(calendar, self._on_control_timeout)
        self.failed = False
        host.bind(flow_id, self)

    @property
    def now(self) -> int:
        return self.calendar.now

    def start(self, start_ns: int):
        self.start_ns = start_ns
        if self.is_initiator:
            syn = initiate(self.state, self.flow_id, self.host.name, self.remote)
            self._send_control(syn)

    def on_packet(self, packet: Packet):
        raise NotImplementedError

    def _emit(self, event: str, **detail):
        c = self.state
        self.notify(
            event,
            self._format_data(
                self.entity, event, self.now,
                flow=self.flow_id, role=self.role,
                cwnd=c.cwnd, ssthresh=c.ssthresh, phase=c.phase.value,
                **detail,
            ),
        )

    def _send(self, packet: Packet):
        packet.uid = self._new_uid()
        packet.sent_ns = self.now
        if not packet.first_sent_ns:
            packet.first_sent_ns = self.now
        self.host.send(packet)

    def _send_control(self, template: Packet):
        """Send a SYN or SYN-ACK and keep a pristine copy for retransmission."""
        self._control_template = template
        self._control_retransmitted = False
        self._control_retries = 0
        self._control_rto = INITIAL_RTO_S
        self._control_sent_ns = self.now
        self._send(replace(template))
        self._emit(template.kind.value, codepoint=trace_label(template.codepoint),
                   ece=template.ece, cwr=template.cwr)
        self._control_timer.restart(seconds_to_ns(self._control_rto))

    def _on_control_timeout(self):
        if self.state.stage is HandshakeStage.ESTABLISHED or self._control_template is None:
            return
        self._control_retries += 1
        if self._control_retries > MAX_CONTROL_RETRIES:
            self.failed = True
            self._emit("reset", reason="handshake retries exhausted")
            LOGGER.debug("flow %s: handshake abandoned", self.flow_id)
            return
        self._control_retransmitted = True
        self._control_rto = min(MAX_RTO_S, self._control_rto * 2)
        template = self._control_template
        self._send(replace(template, retransmitted=True, first_sent_ns=0))
        self._emit(template.kind.value, codepoint=trace_label(template.codepoint),
                   retransmit=True)
        self._control_timer.restart(seconds_to_ns(self._control_rto))

    def _handle_handshake(self, packet: Packet) -> bool:
        """Returns True when this packet completed the handshake."""
        c = self.state
        was_established = c.stage is HandshakeStage.ESTABLISHED
        try:
            _, reply = handshake_step(c, packet)
        except HandshakeReset as exc:
            self._emit("reset", reason=str(exc))
            return False

        if not was_established and packet.kind in (PacketKind.SYNACK, PacketKind.ACK):
            if not self._control_retransmitted:
                on_rtt_sample(c, ns_to_seconds(self.now - self._control_sent_ns))

        if reply is not None:
            if reply.kind is PacketKind.SYNACK:
                self._send_control(reply)
            else:
                self._send(reply)
                self._emit("ack", handshake=True,
                           echo=decode_tcp_eecn(reply.tcp_signal).value)

        if not was_established and c.stage is HandshakeStage.ESTABLISHED:
            self._control_timer.cancel()
            return True
        return False


class TcpSender(TcpEndpoint):
    """Bulk data source with New Reno loss recovery."""

    role = "sender"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.controller = controller_for(self.state)
        self._rto_timer = Timer(self.calendar, self._on_rto)
        self._high_water = 0
        self._first_sent: Dict[int, int] = {}
        self.done = False
        self.retransmits = 0

    def on_packet(self, packet: Packet):
        c = self.state
        if packet.kind in (PacketKind.SYN, PacketKind.SYNACK) or (
            packet.kind is PacketKind.ACK and c.stage is HandshakeStage.SYN_RCVD
        ):
            if self._handle_handshake(packet):
                self._established()
            return
        if c.stage is not HandshakeStage.ESTABLISHED:
            self._emit("protocol_violation", packet=packet.uid, kind=packet.kind.value)
            return
        if packet.kind is PacketKind.ACK:
            self._on_ack(packet)

    def _established(self):
        c = self.state
        self.controller.start_window(c.outcome)
        self._emit(
            "handshake",
            peer_capable=c.outcome.peer_capable,
            observed_level=int(c.outcome.observed_level),
            initial_segments=int(c.cwnd // c.seg_size),
        )
        LOGGER.debug(
            "flow %s: established, initial window %d segments",
            self.flow_id, int(c.cwnd // c.seg_size),
        )
        if self.size_bytes == 0:
            self._finish()
            return
        self._try_send()

    def _on_ack(self, ack: Packet):
        c = self.state
        sample = None
        if ack.echo_sent_ns and not ack.echo_retransmitted:
            sample = ns_to_seconds(self.now - ack.echo_sent_ns)
            on_rtt_sample(c, sample)

        level = self._echo_level(ack)
        if level is not CongestionLevel.NONE:
            self._emit("echo", level=int(level))
            self.controller.on_echo(level, self.now)

        if ack.ack_no > c.highest_ack:
            self._on_new_ack(ack.ack_no)
        elif ack.ack_no == c.highest_ack and c.flight_size > 0:
            self._on_dupack()

        self._emit("ack", ack_no=ack.ack_no, rtt=sample, avg_rtt=c.avg_rtt)
        if not self.done:
            self._try_send()

    def _echo_level(self, ack: Packet) -> CongestionLevel:
        c = self.state
        if c.eecn_negotiated:
            return level_of_echo(decode_tcp_eecn(ack.tcp_signal))
        if c.ecn_negotiated and ack.ece:
            return CongestionLevel.CL2
        return CongestionLevel.NONE

    def _on_new_ack(self, ack_no: int):
        c = self.state
        acked = ack_no - c.highest_ack
        c.highest_ack = ack_no
        c.dupack_count = 0
        c.next_seq = max(c.next_seq, c.highest_ack)

        if c.phase is Phase.RECOVERY:
            if ack_no >= c.recover:
                exit_recovery(c)
            else:
                # Partial ACK: the next hole is lost too.
                self._send_segment(c.highest_ack)
                c.cwnd = max(c.cwnd - acked + c.seg_size, float(c.seg_size))
        else:
            self.controller.on_new_ack(acked, self.now)

        if c.highest_ack >= self.size_bytes:
            self._finish()
        else:
            self._rto_timer.restart(seconds_to_ns(c.rto))

    def _on_dupack(self):
        c = self.state
        c.dupack_count += 1
        if c.phase is Phase.RECOVERY:
            c.cwnd += c.seg_size
        elif c.dupack_count == DUPACK_THRESHOLD and c.highest_ack >= c.recover:
            on_loss(c, LossKind.TRIPLE_DUPACK)
            self._emit("loss", kind=LossKind.TRIPLE_DUPACK.value, seq=c.highest_ack)
            self._send_segment(c.highest_ack)

    def _on_rto(self):
        c = self.state
        if self.done or c.highest_ack >= self.size_bytes:
            return
        on_loss(c, LossKind.TIMEOUT)
        c.next_seq = c.highest_ack
        self._emit("rto", seq=c.highest_ack, rto=c.rto)
        self._try_send()
        self._rto_timer.restart(seconds_to_ns(c.rto))

    def _try_send(self):
        c = self.state
        while c.next_seq < self.size_bytes:
            payload = min(c.seg_size, self.size_bytes - c.next_seq)
            if c.flight_size > 0 and c.flight_size + payload > c.cwnd:
                break
            self._send_segment(c.next_seq)
            c.next_seq += payload
        if c.flight_size > 0 and not self._rto_timer.active:
            self._rto_timer.restart(seconds_to_ns(c.rto))

    def _send_segment(self, seq: int):
        c = self.state
        payload = min(c.seg_size, self.size_bytes - seq)
        retransmit = seq < self._high_water
        segment = Packet(
            flow_id=self.flow_id, kind=PacketKind.DATA,
            src=self.host.name, dst=self.remote,
            seq=seq, payload=payload, retransmitted=retransmit,
            first_sent_ns=self._first_sent.get(seq, 0),
        )
        if c.eecn_negotiated:
            segment.codepoint = CAPABLE
        elif c.ecn_negotiated:
            segment.codepoint = ECT0
        else:
            segment.codepoint = NOT_CAPABLE

        if c.cwr_pending:
            c.cwr_pending = False
            if c.eecn_negotiated:
                signal = encode_tcp_eecn(TcpEecnMeaning.CWR, syn=0, ack=0)
                segment.ece, segment.cwr = signal.ece_bit, signal.cwr_bit
            else:
                segment.cwr = 1
            self._emit("cwr", seq=seq)

        self._send(segment)
        self._first_sent.setdefault(seq, segment.first_sent_ns)
        self._high_water = max(self._high_water, seq + payload)
        if retransmit:
            self.retransmits += 1
        self._emit("data", seq=seq, payload=payload, retransmit=retransmit,
                   codepoint=trace_label(segment.codepoint))

    def _finish(self):
        if self.done:
            return
        self.done = True
        self._rto_timer.cancel()
        self._emit("sender_done", retransmits=self.retransmits)


class TcpReceiver(TcpEndpoint):
    """Data sink; acknowledges every segment and carries echo obligations."""

    role = "receiver"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.rcv_next = 0
        self._out_of_order: Dict[int, int] = {}
        self.completed_ns: Optional[int] = None

    @property
    def delivered_bytes(self) -> int:
        return self.rcv_next

    def on_packet(self, packet: Packet):
        c = self.state
        if packet.kind in (PacketKind.SYN, PacketKind.SYNACK) or (
            packet.kind is PacketKind.ACK and c.stage is HandshakeStage.SYN_RCVD
        ):
            if self._handle_handshake(packet):
                self._established()
            return
        if packet.kind is PacketKind.DATA:
            if c.stage is HandshakeStage.SYN_RCVD:
                complete_without_ack(c)
                self._control_timer.cancel()
                self._established()
            if c.stage is HandshakeStage.ESTABLISHED:
                self._on_data(packet)

    def _established(self):
        c = self.state
        c.phase = Phase.SLOW_START
        if self.size_bytes == 0:
            self._complete()

    def _on_data(self, segment: Packet):
        level = self._read_congestion(segment)

        fresh = segment.seq >= self.rcv_next and segment.seq not in self._out_of_order
        if segment.seq == self.rcv_next:
            self.rcv_next += segment.payload
            while self.rcv_next in self._out_of_order:
                self.rcv_next += self._out_of_order.pop(self.rcv_next)
        elif segment.seq > self.rcv_next:
            self._out_of_order[segment.seq] = segment.payload

        self._emit(
            "data_rx", seq=segment.seq, payload=segment.payload, fresh=fresh,
            level=int(level), e2e_delay=ns_to_seconds(self.now - segment.first_sent_ns),
            codepoint=trace_label(segment.codepoint), delivered=self.rcv_next,
        )
        self._send_ack(segment)
        if self.rcv_next >= self.size_bytes:
            self._complete()

    def _read_congestion(self, segment: Packet) -> CongestionLevel:
        c = self.state
        level = CongestionLevel.NONE
        if c.eecn_negotiated:
            if decode_tcp_eecn(segment.tcp_signal) is TcpEecnMeaning.CWR:
                receiver_on_cwr(c)
            level = eecn_level(segment.codepoint)
        elif c.ecn_negotiated:
            if segment.cwr:
                receiver_on_cwr(c)
            if decode_ip_ecn(segment.codepoint) is EcnMeaning.CE:
                level = CongestionLevel.CL2
        if level is not CongestionLevel.NONE:
            receiver_on_marked_packet(c, level)
        return level

    def _send_ack(self, segment: Packet):
        c = self.state
        ack = Packet(
            flow_id=self.flow_id, kind=PacketKind.ACK,
            src=self.host.name, dst=self.remote,
            ack_no=self.rcv_next,
            echo_sent_ns=segment.sent_ns,
            echo_retransmitted=segment.retransmitted,
        )
        echo = CongestionLevel.NONE
        if c.eecn_negotiated:
            echo = take_echo(c)
            signal = encode_tcp_eecn(echo_for_level(echo), syn=0, ack=1)
            ack.ece, ack.cwr = signal.ece_bit, signal.cwr_bit
        elif c.ecn_negotiated and c.cl2_echo_pending:
            echo = CongestionLevel.CL2
            ack.ece = 1
        self._send(ack)
        self._emit("ack", ack_no=ack.ack_no, echo=int(echo))

    def _complete(self):
        if self.completed_ns is not None:
            return
        self.completed_ns = self.now
        fct = ns_to_seconds(self.now - self.start_ns)
        self._emit("complete", fct=fct, delivered=self.rcv_next)
        LOGGER.debug("flow %s: complete, FCT %.6f s", self.flow_id, fct)
