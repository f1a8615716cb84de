import copy

import pytest

from src.engine.scenario import scenario_from_dict
from src.protocol.codepoint import CAPABLE
from src.protocol.packet import Packet, PacketKind
from src.transport.state import CcAlgorithm, ConnectionState, Phase

SMALL_SCENARIO = {
    "schema_version": 1,
    "name": "small",
    "topology": "dumbbell",
    "seed": 3,
    "duration_s": 5,
    "algo": "eecn",
    "clients": 3,
    "servers": 3,
    "links": {
        "edge": {"rate_bps": 1000000000, "delay_ms": 1},
        "bottleneck": {"rate_bps": 10000000, "delay_ms": 10},
    },
    "transport": {"rtt_estimator": "ewma"},
    "flows": [],
}


@pytest.fixture
def scenario_doc():
    """A fresh, mutable copy of a small dumbbell document without flows."""
    return copy.deepcopy(SMALL_SCENARIO)


@pytest.fixture
def make_scenario(scenario_doc):
    def factory(flows=None, **overrides):
        doc = copy.deepcopy(scenario_doc)
        doc.update(overrides)
        if flows is not None:
            doc["flows"] = flows
        return scenario_from_dict(doc)

    return factory


@pytest.fixture
def sender_state():
    """An established EECN sender with one RTT sample of 100 ms."""

    def factory(cwnd=10000.0, cur_rtt=0.1, avg_rtt=0.1, **fields):
        c = ConnectionState(cc_algo=fields.pop("cc_algo", CcAlgorithm.EECN), **fields)
        c.cwnd = float(cwnd)
        c.cur_rtt = cur_rtt
        c.avg_rtt = avg_rtt
        c.rtt_samples = 1
        c.eecn_negotiated = c.cc_algo is CcAlgorithm.EECN
        c.ecn_negotiated = c.cc_algo is CcAlgorithm.NEW_RENO_ECN
        c.phase = Phase.SLOW_START
        c.refresh_phase()
        return c

    return factory


@pytest.fixture
def make_packet():
    def factory(kind=PacketKind.DATA, codepoint=CAPABLE, flow_id=1, **fields):
        return Packet(flow_id=flow_id, kind=kind, src="c1", dst="s1",
                      codepoint=codepoint, payload=fields.pop("payload", 1000), **fields)

    return factory
