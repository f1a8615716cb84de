import pytest

from src.protocol.codepoint import (
    CAPABLE,
    CL1,
    CL2,
    NOT_CAPABLE,
    CongestionLevel,
    TcpEecnMeaning,
    decode_tcp_eecn,
)
from src.protocol.packet import Packet, PacketKind
from src.transport.congestion import initial_cwnd
from src.transport.handshake import (
    HandshakeReset,
    complete_without_ack,
    handshake_step,
    initiate,
)
from src.transport.state import CcAlgorithm, ConnectionState, HandshakeStage


def pair(initiator_algo=CcAlgorithm.EECN, responder_algo=CcAlgorithm.EECN):
    return ConnectionState(cc_algo=initiator_algo), ConnectionState(cc_algo=responder_algo)


def run_handshake(a, b, syn_mark=None, synack_mark=None):
    """Drive SYN, SYN-ACK and final ACK, optionally re-marking packets in flight."""
    syn = initiate(a, 1, "c1", "s1")
    if syn_mark is not None:
        syn.codepoint = syn_mark
    _, synack = handshake_step(b, syn)
    if synack_mark is not None:
        synack.codepoint = synack_mark
    _, ack = handshake_step(a, synack)
    _, reply = handshake_step(b, ack)
    assert reply is None
    return syn, synack, ack


def test_syn_is_sent_capable():
    a, _ = pair()
    syn = initiate(a, 1, "c1", "s1")
    assert syn.codepoint == CAPABLE
    assert decode_tcp_eecn(syn.tcp_signal) is TcpEecnMeaning.CAPABLE
    assert a.stage is HandshakeStage.SYN_SENT


def test_uncongested_path_opens_ten_segments_both_ways():
    a, b = pair()
    _, synack, ack = run_handshake(a, b)
    assert decode_tcp_eecn(synack.tcp_signal) is TcpEecnMeaning.CAPABLE
    assert decode_tcp_eecn(ack.tcp_signal) is TcpEecnMeaning.CAPABLE
    for side in (a, b):
        assert side.stage is HandshakeStage.ESTABLISHED
        assert side.eecn_negotiated
        assert side.outcome.observed_level is CongestionLevel.NONE
        assert initial_cwnd(side.outcome, 1000) == 10000


def test_heavily_congested_forward_path_opens_one_segment():
    a, b = pair()
    _, synack, _ = run_handshake(a, b, syn_mark=CL2)
    assert (synack.ece, synack.cwr, synack.syn, synack.ack) == (1, 1, 1, 1)
    assert a.outcome.observed_level is CongestionLevel.CL2
    assert initial_cwnd(a.outcome, 1000) == 1000
    assert b.outcome.observed_level is CongestionLevel.NONE


def test_mildly_congested_reverse_path_opens_five_segments():
    a, b = pair()
    _, _, ack = run_handshake(a, b, synack_mark=CL1)
    assert (ack.ece, ack.cwr, ack.syn, ack.ack) == (1, 0, 0, 1)
    assert b.outcome.observed_level is CongestionLevel.CL1
    assert initial_cwnd(b.outcome, 1000) == 5000
    assert a.outcome.observed_level is CongestionLevel.NONE


def test_mildly_congested_forward_path_opens_five_segments():
    a, b = pair()
    _, synack, ack = run_handshake(a, b, syn_mark=CL1)
    assert decode_tcp_eecn(synack.tcp_signal) is TcpEecnMeaning.CL1_ECHO
    assert a.outcome.observed_level is CongestionLevel.CL1
    assert initial_cwnd(a.outcome, 1000) == 5000
    assert decode_tcp_eecn(ack.tcp_signal) is TcpEecnMeaning.CAPABLE
    assert initial_cwnd(b.outcome, 1000) == 10000


def test_congestion_on_both_legs_sizes_each_window_separately():
    a, b = pair()
    _, synack, ack = run_handshake(a, b, syn_mark=CL1, synack_mark=CL2)
    assert decode_tcp_eecn(synack.tcp_signal) is TcpEecnMeaning.CL1_ECHO
    assert synack.codepoint == CL2
    assert decode_tcp_eecn(ack.tcp_signal) is TcpEecnMeaning.CL2_ECHO
    assert a.outcome.observed_level is CongestionLevel.CL1
    assert b.outcome.observed_level is CongestionLevel.CL2
    assert initial_cwnd(a.outcome, 1000) == 5000
    assert initial_cwnd(b.outcome, 1000) == 1000


def test_undefined_syn_signal_is_treated_as_not_capable():
    a, b = pair()
    syn = initiate(a, 1, "c1", "s1")
    syn.ece, syn.cwr = 1, 0
    assert decode_tcp_eecn(syn.tcp_signal) is TcpEecnMeaning.UNDEFINED
    _, synack = handshake_step(b, syn)
    assert not b.eecn_negotiated
    assert synack.codepoint == NOT_CAPABLE
    assert decode_tcp_eecn(synack.tcp_signal) is TcpEecnMeaning.NOT_CAPABLE
    _, ack = handshake_step(a, synack)
    assert not a.eecn_negotiated
    assert not a.outcome.peer_capable
    assert (ack.ece, ack.cwr) == (0, 0)


def test_eecn_initiator_falls_back_against_new_reno_responder():
    a, b = pair(responder_algo=CcAlgorithm.NEW_RENO)
    run_handshake(a, b)
    assert not a.eecn_negotiated
    assert initial_cwnd(a.outcome, 1000) == 10000


def test_classic_ecn_negotiation():
    a, b = pair(CcAlgorithm.NEW_RENO_ECN, CcAlgorithm.NEW_RENO_ECN)
    syn, synack, _ = run_handshake(a, b)
    assert (syn.ece, syn.cwr) == (1, 1)
    assert (synack.ece, synack.cwr) == (1, 0)
    assert a.ecn_negotiated and b.ecn_negotiated
    assert not a.eecn_negotiated


def test_classic_ecn_against_new_reno_is_not_negotiated():
    a, b = pair(CcAlgorithm.NEW_RENO_ECN, CcAlgorithm.NEW_RENO)
    run_handshake(a, b)
    assert not a.ecn_negotiated


def test_duplicate_synack_repeats_the_final_ack():
    a, b = pair()
    syn = initiate(a, 1, "c1", "s1")
    _, synack = handshake_step(b, syn)
    _, first = handshake_step(a, synack)
    _, again = handshake_step(a, synack)
    assert again.kind is PacketKind.ACK
    assert again.tcp_signal == first.tcp_signal


def test_retransmitted_syn_is_answered_again():
    a, b = pair()
    syn = initiate(a, 1, "c1", "s1")
    handshake_step(b, syn)
    _, synack = handshake_step(b, syn)
    assert synack.kind is PacketKind.SYNACK
    assert b.stage is HandshakeStage.SYN_RCVD


@pytest.mark.parametrize(
    "stage, kind",
    [
        (HandshakeStage.CLOSED, PacketKind.ACK),
        (HandshakeStage.CLOSED, PacketKind.SYNACK),
        (HandshakeStage.ESTABLISHED, PacketKind.SYN),
        (HandshakeStage.SYN_SENT, PacketKind.DATA),
    ],
)
def test_unexpected_control_packets_reset(stage, kind):
    c = ConnectionState()
    c.stage = stage
    with pytest.raises(HandshakeReset):
        handshake_step(c, Packet(flow_id=1, kind=kind, src="s1", dst="c1"))


def test_initiating_twice_resets():
    a, _ = pair()
    initiate(a, 1, "c1", "s1")
    with pytest.raises(HandshakeReset):
        initiate(a, 1, "c1", "s1")


def test_lost_final_ack_completes_on_first_data():
    a, b = pair()
    syn = initiate(a, 1, "c1", "s1")
    handshake_step(b, syn)
    complete_without_ack(b)
    assert b.stage is HandshakeStage.ESTABLISHED
    assert b.outcome.peer_capable
    assert b.outcome.observed_level is CongestionLevel.NONE


def test_complete_without_ack_is_a_no_op_once_established():
    a, b = pair()
    run_handshake(a, b, synack_mark=CL1)
    complete_without_ack(b)
    assert b.outcome.observed_level is CongestionLevel.CL1
