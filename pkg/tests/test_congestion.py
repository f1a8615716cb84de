import math

import pytest

from src.config import ConfigError
from src.protocol.codepoint import CongestionLevel
from src.transport.congestion import (
    INITIAL_SEGMENTS,
    EecnController,
    NewRenoController,
    NewRenoEcnController,
    baseline_ecn_behavior,
    controller_for,
    exit_recovery,
    initial_cwnd,
    on_ack_window_growth,
    on_congestion_echo,
    on_loss,
    on_rtt_sample,
    receiver_on_cwr,
    receiver_on_marked_packet,
    take_echo,
)
from src.transport.state import (
    MIN_RTO_S,
    CcAlgorithm,
    ConnectionState,
    DecayCadence,
    HandshakeOutcome,
    LossKind,
    Phase,
    RttEstimator,
)

SZ = 1000


@pytest.mark.parametrize(
    "outcome, seg_size, expected",
    [
        (HandshakeOutcome(True, CongestionLevel.NONE), 1000, 10000),
        (HandshakeOutcome(True, CongestionLevel.CL2), 1000, 1000),
        (HandshakeOutcome(True, CongestionLevel.CL1), 500, 2500),
        (HandshakeOutcome(False, CongestionLevel.CL2), 1000, 10000),
    ],
)
def test_initial_cwnd(outcome, seg_size, expected):
    assert initial_cwnd(outcome, seg_size) == expected


def test_initial_window_mapping_is_exactly_ten_five_one():
    assert {lvl: n for lvl, n in INITIAL_SEGMENTS.items()} == {
        CongestionLevel.NONE: 10, CongestionLevel.CL1: 5, CongestionLevel.CL2: 1,
    }


def test_outcome_without_capable_peer_has_no_level():
    assert HandshakeOutcome(False, CongestionLevel.CL1).observed_level is CongestionLevel.NONE


def test_cl2_with_rising_rtt_divides_by_d(sender_state):
    c = sender_state(cwnd=16000, cur_rtt=0.12, avg_rtt=0.1)
    on_congestion_echo(c, CongestionLevel.CL2)
    assert c.cwnd == 2000
    assert c.ssthresh == 2000
    assert c.cwr_pending


def test_cl2_with_falling_rtt_divides_by_half_d_and_clamps(sender_state):
    c = sender_state(cwnd=8000, cur_rtt=0.08, avg_rtt=0.1)
    on_congestion_echo(c, CongestionLevel.CL2)
    assert c.cwnd == 2000
    assert c.ssthresh >= 2 * SZ


def test_cl2_clamp_binds_for_small_windows(sender_state):
    c = sender_state(cwnd=4000, cur_rtt=0.1, avg_rtt=0.1)
    on_congestion_echo(c, CongestionLevel.CL2)
    assert c.cwnd == 2000


def test_cl1_with_zero_beta_is_a_fixed_point(sender_state):
    c = sender_state(cwnd=10000, cur_rtt=0.1, avg_rtt=0.1)
    on_congestion_echo(c, CongestionLevel.CL1)
    assert c.cwnd == 10000


def test_cl1_decays_by_exp_minus_beta(sender_state):
    c = sender_state(cwnd=10000, cur_rtt=0.13, avg_rtt=0.1)
    on_congestion_echo(c, CongestionLevel.CL1)
    assert c.beta == pytest.approx(0.03)
    assert math.exp(-0.03) == pytest.approx(0.97045, abs=1e-5)
    assert c.cwnd == pytest.approx(10000 * math.exp(-0.03))


def test_cl1_with_falling_rtt_leaves_window_alone(sender_state):
    c = sender_state(cwnd=10000, cur_rtt=0.09, avg_rtt=0.1)
    ssthresh = c.ssthresh
    on_congestion_echo(c, CongestionLevel.CL1)
    assert c.cwnd == 10000 and c.ssthresh == ssthresh


def test_cl1_without_reduction_does_not_open_a_reaction_window(sender_state):
    c = sender_state(cwnd=10000, cur_rtt=0.09, avg_rtt=0.1)
    on_congestion_echo(c, CongestionLevel.CL1, now_ns=1_000_000)
    assert not c.cwr_pending
    assert CongestionLevel.CL1 not in c.last_reduction_ns

    c.cur_rtt = 0.13
    on_congestion_echo(c, CongestionLevel.CL1, now_ns=2_000_000)
    assert c.cwnd == pytest.approx(10000 * math.exp(-0.03))
    assert c.cwr_pending
    assert c.last_reduction_ns[CongestionLevel.CL1] == 2_000_000


def test_cl2_is_at_least_as_severe_as_cl1(sender_state):
    for cur in (0.1, 0.15, 0.4, 1.0):
        a = sender_state(cwnd=64000, cur_rtt=cur, avg_rtt=0.1)
        b = sender_state(cwnd=64000, cur_rtt=cur, avg_rtt=0.1)
        on_congestion_echo(a, CongestionLevel.CL2)
        on_congestion_echo(b, CongestionLevel.CL1)
        assert a.cwnd <= b.cwnd <= 64000


def test_echo_before_handshake_is_ignored():
    c = ConnectionState()
    c.cwnd = 10000.0
    c.eecn_negotiated = True
    on_congestion_echo(c, CongestionLevel.CL2)
    assert c.cwnd == 10000 and not c.cwr_pending


def test_one_reduction_per_level_per_avg_rtt(sender_state):
    c = sender_state(cwnd=64000, cur_rtt=0.1, avg_rtt=0.1)
    on_congestion_echo(c, CongestionLevel.CL2, now_ns=0)
    after_first = c.cwnd
    on_congestion_echo(c, CongestionLevel.CL2, now_ns=50_000_000)
    assert c.cwnd == after_first
    c.cwnd = 64000.0
    on_congestion_echo(c, CongestionLevel.CL2, now_ns=100_000_000)
    assert c.cwnd == 8000


@pytest.mark.parametrize(
    "cwnd, ssthresh, cur, avg, expected",
    [
        (5000, 1e12, 0.09, 0.1, 6000),
        (5000, 1e12, 0.1, 0.1, 5300),
        (5000, 4000, 0.09, 0.1, 5020),
    ],
)
def test_window_growth(sender_state, cwnd, ssthresh, cur, avg, expected):
    c = sender_state(cwnd=cwnd, cur_rtt=cur, avg_rtt=avg)
    c.ssthresh = ssthresh
    c.refresh_phase()
    on_ack_window_growth(c)
    assert c.cwnd == pytest.approx(expected)


def test_congestion_avoidance_decay_with_rising_rtt(sender_state):
    c = sender_state(cwnd=5000, cur_rtt=0.13, avg_rtt=0.1)
    c.ssthresh = 4000
    c.refresh_phase()
    on_ack_window_growth(c)
    assert c.cwnd == pytest.approx(5000 * math.exp(-0.03))


def test_per_rtt_decay_applies_once_per_avg_rtt(sender_state):
    c = sender_state(cwnd=5000, cur_rtt=0.13, avg_rtt=0.1, ca_decay=DecayCadence.PER_RTT)
    c.ssthresh = 4000
    c.refresh_phase()
    on_ack_window_growth(c, now_ns=0)
    once = c.cwnd
    on_ack_window_growth(c, now_ns=10_000_000)
    assert c.cwnd == once
    on_ack_window_growth(c, now_ns=100_000_000)
    assert c.cwnd < once


def test_window_never_drops_below_one_segment(sender_state):
    c = sender_state(cwnd=1000, cur_rtt=5.0, avg_rtt=0.1)
    c.ssthresh = 500
    c.refresh_phase()
    for _ in range(20):
        on_ack_window_growth(c)
        on_congestion_echo(c, CongestionLevel.CL1)
        assert c.cwnd >= SZ


def test_slow_start_growth_never_exceeds_one_segment(sender_state):
    for cur in (0.05, 0.1, 0.2):
        c = sender_state(cwnd=3000, cur_rtt=cur, avg_rtt=0.1)
        before = c.cwnd
        on_ack_window_growth(c)
        assert c.cwnd - before <= SZ


def test_growth_is_skipped_in_recovery(sender_state):
    c = sender_state(cwnd=5000)
    c.phase = Phase.RECOVERY
    on_ack_window_growth(c)
    assert c.cwnd == 5000


def test_cl1_echoed_on_exactly_three_acks():
    r = ConnectionState()
    receiver_on_marked_packet(r, CongestionLevel.CL1)
    echoes = [take_echo(r) for _ in range(5)]
    assert echoes == [CongestionLevel.CL1] * 3 + [CongestionLevel.NONE] * 2


def test_cl2_echoed_until_cwr():
    r = ConnectionState()
    receiver_on_marked_packet(r, CongestionLevel.CL2)
    assert take_echo(r) is CongestionLevel.CL2
    receiver_on_cwr(r)
    assert take_echo(r) is CongestionLevel.NONE
    assert r.pending_echo is CongestionLevel.NONE


def test_cl1_echo_survives_cwr_and_ends_after_three():
    r = ConnectionState()
    receiver_on_marked_packet(r, CongestionLevel.CL1)
    take_echo(r)
    receiver_on_cwr(r)
    assert [take_echo(r) for _ in range(3)] == [
        CongestionLevel.CL1, CongestionLevel.CL1, CongestionLevel.NONE,
    ]


def test_unmarked_traffic_produces_no_echo():
    r = ConnectionState()
    assert take_echo(r) is CongestionLevel.NONE


def test_rtt_first_sample_initializes():
    c = on_rtt_sample(ConnectionState(), 0.1)
    assert c.avg_rtt == 0.1 and c.cur_rtt == 0.1
    assert c.rto == pytest.approx(max(MIN_RTO_S, 0.1 + 4 * 0.05))


def test_running_mean_estimator():
    c = ConnectionState(rtt_estimator=RttEstimator.MEAN)
    on_rtt_sample(c, 0.1)
    on_rtt_sample(c, 0.2)
    assert c.avg_rtt == pytest.approx(0.15)


def test_ewma_estimator():
    c = ConnectionState()
    on_rtt_sample(c, 0.1)
    on_rtt_sample(c, 0.2)
    assert c.avg_rtt == pytest.approx(0.1125)


def test_rtt_sample_must_be_positive():
    with pytest.raises(ValueError):
        on_rtt_sample(ConnectionState(), 0.0)


def test_rto_has_a_floor():
    c = ConnectionState()
    for _ in range(50):
        on_rtt_sample(c, 0.001)
    assert c.rto == MIN_RTO_S


def test_timeout_resets_to_one_segment(sender_state):
    c = sender_state(cwnd=10000)
    on_loss(c, LossKind.TIMEOUT)
    assert c.cwnd == 1000 and c.ssthresh == 5000
    assert c.phase is Phase.SLOW_START


def test_triple_dupack_floor_binds(sender_state):
    c = sender_state(cwnd=3000)
    c.next_seq = 9000
    on_loss(c, LossKind.TRIPLE_DUPACK)
    assert c.ssthresh == 2000
    assert c.phase is Phase.RECOVERY
    assert c.recover == 9000
    exit_recovery(c)
    assert c.cwnd == 2000 and c.phase is Phase.CONGESTION_AVOIDANCE


def test_classic_ecn_halves(sender_state):
    c = sender_state(cwnd=10000, cc_algo=CcAlgorithm.NEW_RENO_ECN)
    baseline_ecn_behavior(c, True)
    assert c.cwnd == 5000 and c.cwr_pending


def test_classic_ecn_reduces_once_per_window(sender_state):
    c = sender_state(cwnd=10000, cc_algo=CcAlgorithm.NEW_RENO_ECN)
    c.next_seq = 20000
    c.highest_ack = 1000
    baseline_ecn_behavior(c, True)
    baseline_ecn_behavior(c, True)
    assert c.cwnd == 5000
    c.highest_ack = 20001
    baseline_ecn_behavior(c, True)
    assert c.cwnd == 2500


def test_classic_ecn_does_not_apply_to_plain_new_reno(sender_state):
    c = sender_state(cwnd=10000, cc_algo=CcAlgorithm.NEW_RENO)
    baseline_ecn_behavior(c, True)
    assert c.cwnd == 10000


def test_controller_registry(sender_state):
    assert isinstance(controller_for(sender_state(cc_algo=CcAlgorithm.EECN)), EecnController)
    assert isinstance(controller_for(sender_state(cc_algo=CcAlgorithm.NEW_RENO)), NewRenoController)
    assert isinstance(
        controller_for(sender_state(cc_algo=CcAlgorithm.NEW_RENO_ECN)), NewRenoEcnController
    )


def test_new_reno_controller_grows_by_acked_bytes_in_slow_start(sender_state):
    c = sender_state(cwnd=4000, cc_algo=CcAlgorithm.NEW_RENO)
    NewRenoController(c).on_new_ack(1000, 0)
    assert c.cwnd == 5000


def test_eecn_controller_falls_back_without_negotiation(sender_state):
    c = sender_state(cwnd=4000, cur_rtt=0.2, avg_rtt=0.1)
    c.eecn_negotiated = False
    controller = EecnController(c)
    controller.on_new_ack(1000, 0)
    assert c.cwnd == 5000
    controller.on_echo(CongestionLevel.CL2, 0)
    assert c.cwnd == 5000


def test_unknown_algorithm_is_a_configuration_error():
    with pytest.raises(ConfigError) as err:
        CcAlgorithm.parse("vegas", "flows.0.algo")
    assert err.value.field == "flows.0.algo"


def test_sigma_bounds_are_validated():
    with pytest.raises(ConfigError):
        ConnectionState(sigma_ss=0.0)
    with pytest.raises(ConfigError):
        ConnectionState(sigma_ca=1.5)
