"""
Three-way handshake with capability negotiation.

EECN endpoints send SYN and SYN-ACK as ECT(1) in both the IP and the TCP
signal. A level found on an arriving SYN is echoed in the SYN-ACK, a
level found on an arriving SYN-ACK is echoed in the final ACK, and each
side keeps the level echoed about its own control packet as its
handshake outcome. Classic ECN endpoints negotiate with ECE+CWR on the
SYN and ECE on the SYN-ACK; plain New Reno endpoints clear both bits.
"""

from typing import Optional, Tuple

from src.protocol.codepoint import (
    CAPABLE,
    NOT_CAPABLE,
    TcpEcnSignal,
    TcpEecnMeaning,
    decode_tcp_eecn,
    echo_for_level,
    eecn_level,
    encode_tcp_eecn,
    level_of_echo,
)
from src.protocol.packet import Packet, PacketKind
from src.transport.state import (
    CcAlgorithm,
    ConnectionState,
    HandshakeOutcome,
    HandshakeStage,
)


class HandshakeReset(Exception):
    """A control packet arrived in a stage that cannot accept it."""


def initiate(c: ConnectionState, flow_id: int, local: str, remote: str) -> Packet:
    """Build the SYN and move the initiator to SYN_SENT."""
    if c.stage is not HandshakeStage.CLOSED:
        raise HandshakeReset(f"SYN requested in stage {c.stage.value}")
    syn = Packet(flow_id=flow_id, kind=PacketKind.SYN, src=local, dst=remote)
    if c.cc_algo is CcAlgorithm.EECN:
        _apply_signal(syn, encode_tcp_eecn(TcpEecnMeaning.CAPABLE, syn=1, ack=0))
        syn.codepoint = CAPABLE
    elif c.cc_algo is CcAlgorithm.NEW_RENO_ECN:
        syn.ece, syn.cwr = 1, 1
    c.stage = HandshakeStage.SYN_SENT
    return syn


def handshake_step(
    c: ConnectionState, incoming: Packet
) -> Tuple[ConnectionState, Optional[Packet]]:
    """
    Advance the handshake with one arriving control packet. Returns the
    reply (None when the handshake completes on the responder side).

    Raises:
        HandshakeReset: on a packet the current stage cannot accept.
    """
    if incoming.kind is PacketKind.SYN:
        if c.stage not in (HandshakeStage.CLOSED, HandshakeStage.SYN_RCVD):
            raise HandshakeReset(f"SYN received in stage {c.stage.value}")
        return c, _answer_syn(c, incoming)

    if incoming.kind is PacketKind.SYNACK:
        if c.stage is HandshakeStage.ESTABLISHED and c.outcome is not None:
            # Our final ACK was lost; repeat it.
            return c, _final_ack(c, incoming)
        if c.stage is not HandshakeStage.SYN_SENT:
            raise HandshakeReset(f"SYN-ACK received in stage {c.stage.value}")
        c.outcome = _outcome_from_synack(c, incoming)
        reply = _final_ack(c, incoming)
        c.stage = HandshakeStage.ESTABLISHED
        return c, reply

    if incoming.kind is PacketKind.ACK:
        if c.stage is not HandshakeStage.SYN_RCVD:
            raise HandshakeReset(f"ACK received in stage {c.stage.value}")
        c.outcome = _outcome_from_final_ack(c, incoming)
        c.stage = HandshakeStage.ESTABLISHED
        return c, None

    raise HandshakeReset(f"{incoming.kind.value} packet during handshake")


def complete_without_ack(c: ConnectionState) -> ConnectionState:
    """
    Responder saw data before the final ACK (the ACK was lost). The echo it
    carried is gone, so the responder assumes an uncongested path.
    """
    if c.stage is HandshakeStage.SYN_RCVD:
        c.outcome = HandshakeOutcome(peer_capable=c.eecn_negotiated)
        c.stage = HandshakeStage.ESTABLISHED
    return c


def _answer_syn(c: ConnectionState, syn: Packet) -> Packet:
    synack = Packet(
        flow_id=syn.flow_id, kind=PacketKind.SYNACK, src=syn.dst, dst=syn.src
    )
    if c.cc_algo is CcAlgorithm.EECN:
        meaning = decode_tcp_eecn(syn.tcp_signal)
        c.eecn_negotiated = meaning is TcpEecnMeaning.CAPABLE
        if c.eecn_negotiated:
            echo = echo_for_level(eecn_level(syn.codepoint))
            _apply_signal(synack, encode_tcp_eecn(echo, syn=1, ack=1))
            synack.codepoint = CAPABLE
        else:
            _apply_signal(
                synack, encode_tcp_eecn(TcpEecnMeaning.NOT_CAPABLE, syn=1, ack=1)
            )
            synack.codepoint = NOT_CAPABLE
    elif c.cc_algo is CcAlgorithm.NEW_RENO_ECN:
        c.ecn_negotiated = bool(syn.ece and syn.cwr)
        synack.ece = int(c.ecn_negotiated)
    c.stage = HandshakeStage.SYN_RCVD
    return synack


def _outcome_from_synack(c: ConnectionState, synack: Packet) -> HandshakeOutcome:
    if c.cc_algo is CcAlgorithm.EECN:
        meaning = decode_tcp_eecn(synack.tcp_signal)
        c.eecn_negotiated = meaning in (
            TcpEecnMeaning.CAPABLE,
            TcpEecnMeaning.CL1_ECHO,
            TcpEecnMeaning.CL2_ECHO,
        )
        return HandshakeOutcome(
            peer_capable=c.eecn_negotiated, observed_level=level_of_echo(meaning)
        )
    if c.cc_algo is CcAlgorithm.NEW_RENO_ECN:
        c.ecn_negotiated = bool(synack.ece and not synack.cwr)
    return HandshakeOutcome(peer_capable=False)


def _final_ack(c: ConnectionState, synack: Packet) -> Packet:
    ack = Packet(
        flow_id=synack.flow_id, kind=PacketKind.ACK, src=synack.dst, dst=synack.src
    )
    if c.eecn_negotiated:
        echo = echo_for_level(eecn_level(synack.codepoint))
        _apply_signal(ack, encode_tcp_eecn(echo, syn=0, ack=1))
    return ack


def _outcome_from_final_ack(c: ConnectionState, ack: Packet) -> HandshakeOutcome:
    if not c.eecn_negotiated:
        return HandshakeOutcome(peer_capable=False)
    level = level_of_echo(decode_tcp_eecn(ack.tcp_signal))
    return HandshakeOutcome(peer_capable=True, observed_level=level)


def _apply_signal(packet: Packet, signal: TcpEcnSignal):
    packet.ece = signal.ece_bit
    packet.cwr = signal.cwr_bit

