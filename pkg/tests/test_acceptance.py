"""
Whole-scenario directional checks. Slow; they run with the default suite, and ``-m acceptance`` runs them alone.
"""

from pathlib import Path

import pytest

from src.engine.scenario import FlowClass, load_scenario, scenario_from_dict
from src.engine.simulator import prepare, run
from src.main import run_members
from src.metrics.report import comparison_table
from src.network.queue import QueueMode
from src.protocol.codepoint import CongestionLevel
from src.transport.state import CcAlgorithm

pytestmark = pytest.mark.acceptance

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"
DESK = str(SCENARIO_DIR / "dumbbell-desk.json")


@pytest.fixture(scope="module")
def desk_reports():
    cfg = load_scenario(DESK)
    algos = [CcAlgorithm.EECN, CcAlgorithm.NEW_RENO_ECN, CcAlgorithm.NEW_RENO]
    reports = run_members([(cfg.with_algo(a), None) for a in algos], jobs=3)
    return dict(zip(("eecn", "ecn", "newreno"), reports))


def test_drop_ordering(desk_reports):
    eecn, ecn, newreno = (desk_reports[k].drops for k in ("eecn", "ecn", "newreno"))
    assert eecn < ecn < newreno
    assert eecn <= 0.5 * ecn


def test_mark_reduction(desk_reports):
    assert desk_reports["eecn"].marks <= 0.25 * desk_reports["ecn"].marks


def test_short_flows_finish_faster(desk_reports):
    eecn = desk_reports["eecn"].mean_fct(FlowClass.SHORT)
    ecn = desk_reports["ecn"].mean_fct(FlowClass.SHORT)
    assert eecn is not None and ecn is not None
    assert eecn <= 0.7 * ecn


def test_elephants_are_largely_unaffected(desk_reports):
    fcts = [r.mean_fct(FlowClass.ELEPHANT) for r in desk_reports.values()]
    assert all(f is not None for f in fcts)
    reference = desk_reports["eecn"].mean_fct(FlowClass.ELEPHANT)
    for fct in fcts:
        assert abs(fct - reference) <= 0.1 * reference


def test_comparison_table_is_in_declaration_order(desk_reports):
    table = comparison_table(list(desk_reports.values()))
    assert list(table["algo"]) == ["eecn", "ecn", "newreno"]


def test_three_long_flows_share_the_bottleneck_fairly(scenario_doc):
    scenario_doc["duration_s"] = 30
    scenario_doc["flows"] = [
        {"src": f"c{i}", "dst": f"s{i}", "size_bytes": 100_000_000} for i in (1, 2, 3)
    ]
    world = prepare(scenario_from_dict(scenario_doc))
    report = run(world)
    assert report.jain_index() >= 0.9


def test_threshold_sweep_direction():
    cfg = load_scenario(DESK)
    pairs = [(0.5, 0.7), (0.3, 0.5), (0.2, 0.4)]
    reports = run_members([(cfg.with_thresholds(*p), None) for p in pairs], jobs=3)
    drops = [r.drops for r in reports]
    delays = [r.mean_e2e_delay(FlowClass.SHORT) for r in reports]
    assert drops == sorted(drops)
    assert delays == sorted(delays, reverse=True)


def _multihop(scenario_doc, algo):
    scenario_doc.update(topology="multihop", algo=algo, duration_s=5, flows=[
        {"src": "c1", "dst": "s1", "size_bytes": 50_000},
    ])
    return prepare(scenario_from_dict(scenario_doc))


def test_eecn_flow_treats_ce_from_an_ecn_hop_as_cl2(scenario_doc):
    world = _multihop(scenario_doc, "eecn")
    world.router_queues["r1->r2"]._red_action = lambda: "early"
    report = run(world)
    (flow,) = report.flows
    sender = world.connections[0].sender
    assert flow.echoes_by_level[2] > 0 and flow.echoes_by_level[1] == 0
    assert sender.state.ssthresh <= 4 * 1000
    assert flow.completed


def test_ecn_flow_reads_cl2_from_an_eecn_hop_as_ce(scenario_doc):
    world = _multihop(scenario_doc, "ecn")
    hop_queue = world.router_queues["r2->r3"]
    assert hop_queue.mode is QueueMode.EECN
    hop_queue.classify = lambda now_ns=None: CongestionLevel.CL2
    report = run(world)
    (flow,) = report.flows
    hop = next(q for q in report.queues if q.queue_id == "r2->r3")
    assert hop.marks > 0
    assert flow.echoes_by_level[2] > 0
    assert flow.completed
