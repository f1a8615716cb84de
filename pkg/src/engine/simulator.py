from typing import Optional

from src.config import LOGGER, ConfigError
from src.engine.calendar import seconds_to_ns
from src.engine.scenario import ScenarioConfig
from src.engine.topology import SimWorld, build_world
from src.engine.traffic import install_flows, spawn_flows
from src.metrics.report import SimReport, TraceRecorder, summarize


def prepare(
    cfg: ScenarioConfig, seed: Optional[int] = None, keep_trace: bool = False
) -> SimWorld:
    """Build the world, install the scenario's flows and attach a recorder."""
    world = build_world(cfg, seed)
    flows = spawn_flows(cfg, world.traffic_rng)
    install_flows(world, flows)

    recorder = TraceRecorder(keep_rows=keep_trace)
    for spec in flows:
        recorder.register_flow(spec)
    for name, queue in world.router_queues.items():
        recorder.register_queue(name, queue.mode.value)
    world.attach(recorder)
    world.recorder = recorder
    return world


def run(
    world: SimWorld, duration_s: Optional[float] = None, seed: Optional[int] = None
) -> SimReport:
    """
    Process events until the calendar drains or ``duration_s`` is reached.

    Raises:
        ConfigError: on a non-positive duration or a seed the world was not
            built with.
        AssertionError: on an engine fault (time regression, lost packets).
    """
    duration_s = world.cfg.duration_s if duration_s is None else duration_s
    if duration_s <= 0:
        raise ConfigError("duration", "must be positive")
    if seed is not None and seed != world.seed:
        raise ConfigError("seed", f"world was built with seed {world.seed}, not {seed}")

    LOGGER.info(
        "Running %s (%s, seed %s) for %.3f s with %d flows",
        world.cfg.name, world.cfg.algo.value, world.seed, duration_s,
        len(world.connections),
    )
    world.calendar.run_until(seconds_to_ns(duration_s))

    report = summarize(world, world.recorder, duration_s)
    dropped = sum(q.dropped for q in world.router_queues.values())
    assert report.packets_sent == report.packets_delivered + dropped + report.packets_resident, (
        f"packet conservation violated: sent {report.packets_sent}, "
        f"delivered {report.packets_delivered}, dropped {dropped}, "
        f"resident {report.packets_resident}"
    )
    LOGGER.info(
        "Finished %s: %d events, %d packets sent, %d dropped, %d marked",
        world.cfg.name, report.events_processed, report.packets_sent,
        report.drops, report.marks,
    )
    return report


def simulate(
    cfg: ScenarioConfig,
    seed: Optional[int] = None,
    duration_s: Optional[float] = None,
    keep_trace: bool = False,
) -> SimReport:
    world = prepare(cfg, seed, keep_trace)
    return run(world, duration_s)
