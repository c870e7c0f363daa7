"""Trip-to-bus scheduling.

Trips start at their school's bell time, so chaining trips onto buses is a
minimum path cover of the compatibility DAG: number of buses = trips minus a
maximum bipartite matching between predecessor and successor copies. Among
maximum matchings we prefer minimum total deadhead travel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .matching import max_bipartite_matching, min_cost_assignment, pad_square
from .model import (
    FEET_PER_MILE,
    SECONDS_PER_HOUR,
    Instance,
    Metric,
    Trip,
)

REPORT_HEADER = "scenario,n_schools,n_stops,NT,NB,TT_min,RT_s"

# Cost standing in for "no compatibility edge" in the min-deadhead pass.
# Far above any achievable sum of real deadhead seconds, so matching
# cardinality always dominates deadhead minimisation.
_NO_EDGE_COST = 1e9


@dataclass(frozen=True)
class Route:
    """One bus: the ordered trips it serves and the deadhead between them."""

    bus: int
    trip_ids: tuple[int, ...]
    starts_s: tuple[float, ...]
    ends_s: tuple[float, ...]
    deadheads_s: tuple[float, ...]


@dataclass(frozen=True)
class SchedulePlan:
    routes: tuple[Route, ...]
    nb: int
    total_deadhead_s: float
    trips: tuple[Trip, ...]


def _trip_arrays(trips: tuple[Trip, ...], instance: Instance):
    bells = np.array(
        [instance.school_by_id[t.school_id].bell_s for t in trips], dtype=float
    )
    mts = np.array([t.mt_s for t in trips], dtype=float)
    last_xy = np.array(
        [
            (
                instance.stop_by_id[t.last_stop].location.x,
                instance.stop_by_id[t.last_stop].location.y,
            )
            for t in trips
        ],
        dtype=float,
    )
    school_xy = np.array(
        [
            (
                instance.school_by_id[t.school_id].location.x,
                instance.school_by_id[t.school_id].location.y,
            )
            for t in trips
        ],
        dtype=float,
    )
    return bells, mts, last_xy, school_xy


def _deadhead_matrix(trips: tuple[Trip, ...], instance: Instance) -> np.ndarray:
    """deadhead[i, j]: seconds from trip i's last stop to trip j's school."""
    _, _, last_xy, school_xy = _trip_arrays(trips, instance)
    dx = last_xy[:, None, 0] - school_xy[None, :, 0]
    dy = last_xy[:, None, 1] - school_xy[None, :, 1]
    if instance.metric is Metric.EUCLIDEAN:
        d = np.hypot(dx, dy)
    else:
        d = np.abs(dx) + np.abs(dy)
    return d / (instance.speed_mph * FEET_PER_MILE) * SECONDS_PER_HOUR


def compatibility_graph(trips, instance: Instance) -> np.ndarray:
    """Boolean adjacency: edge i -> j when one bus can serve trip j after i."""
    trips = tuple(trips)
    n = len(trips)
    bells, mts, _, _ = _trip_arrays(trips, instance)
    dd = _deadhead_matrix(trips, instance)
    adj = (bells + mts)[:, None] + dd <= bells[None, :]
    np.fill_diagonal(adj, False)
    return adj


def min_buses(trips, instance: Instance) -> SchedulePlan:
    """Chain trips onto the fewest buses; prefer minimum deadhead among ties.

    The successor links come from a min-cost assignment over the deadhead
    matrix with non-edges priced prohibitively, which yields a maximum
    matching of minimum total deadhead. Its cardinality is cross-checked
    against an independent augmenting-path matcher.
    """
    trips = tuple(trips)
    if not trips:
        raise ValueError("cannot schedule an empty trip list")
    n = len(trips)
    adj = compatibility_graph(trips, instance)
    dd = _deadhead_matrix(trips, instance)
    if float(dd.max(initial=0.0)) * n >= _NO_EDGE_COST:
        raise ValueError("deadhead times too large to schedule reliably")
    kuhn_size = len(max_bipartite_matching(adj))
    costs = np.where(adj, dd, _NO_EDGE_COST)
    assignment = min_cost_assignment(pad_square(costs))
    links = [(i, j) for i, j in assignment.pairs if adj[i, j]]
    if len(links) != kuhn_size:
        raise RuntimeError(
            "internal error: min-deadhead matching cardinality "
            f"{len(links)} != maximum matching {kuhn_size}"
        )
    succ = {i: j for i, j in links}
    has_pred = {j for _, j in links}
    bells = [instance.school_by_id[t.school_id].bell_s for t in trips]

    chains = []
    for start in range(n):
        if start in has_pred:
            continue
        chain = [start]
        while chain[-1] in succ:
            chain.append(succ[chain[-1]])
        chains.append(chain)
    chains.sort()

    routes = []
    total_deadhead = 0.0
    for bus, chain in enumerate(chains):
        starts = [bells[t] for t in chain]
        ends = [bells[t] + trips[t].mt_s for t in chain]
        deadheads = [float(dd[a, b]) for a, b in zip(chain, chain[1:])]
        for k in range(len(chain) - 1):
            if ends[k] + deadheads[k] > starts[k + 1]:
                raise RuntimeError("internal error: route timeline not monotone")
        total_deadhead += sum(deadheads)
        routes.append(
            Route(bus, tuple(chain), tuple(starts), tuple(ends), tuple(deadheads))
        )
    nb = n - len(links)
    if len(routes) != nb:
        raise RuntimeError("internal error: route count != trips - matching size")
    return SchedulePlan(tuple(routes), nb, total_deadhead, trips)


@dataclass(frozen=True)
class ScheduleReport:
    nt: int
    nb: int
    tt_s: float
    total_deadhead_s: float
    timelines: tuple[tuple[tuple[int, float, float], ...], ...]


def schedule_report(plan: SchedulePlan) -> ScheduleReport:
    """Aggregate metrics, re-derived from the raw trips as a consistency check."""
    nt = len(plan.trips)
    tt = sum(t.mt_s for t in plan.trips)
    deadhead = sum(sum(r.deadheads_s) for r in plan.routes)
    covered = sorted(t for r in plan.routes for t in r.trip_ids)
    if covered != list(range(nt)):
        raise ValueError("routes do not cover every trip exactly once")
    if abs(deadhead - plan.total_deadhead_s) > 1e-6:
        raise ValueError("stored total deadhead is stale")
    if len(plan.routes) != plan.nb:
        raise ValueError("stored bus count is stale")
    timelines = tuple(
        tuple(zip(r.trip_ids, r.starts_s, r.ends_s)) for r in plan.routes
    )
    return ScheduleReport(nt, plan.nb, tt, deadhead, timelines)


def report_row(
    scenario: str, n_schools: int, n_stops: int, report: ScheduleReport, rt_s: float
) -> str:
    """One CSV line under REPORT_HEADER; TT in minutes, RT in seconds."""
    return (
        f"{scenario},{n_schools},{n_stops},{report.nt},{report.nb},"
        f"{report.tt_s / 60.0:.2f},{rt_s:.3f}"
    )


def schedule_to_dict(plan: SchedulePlan) -> dict:
    return {
        "routes": [
            {
                "bus": r.bus,
                "trips": list(r.trip_ids),
                "deadheads_s": list(r.deadheads_s),
            }
            for r in plan.routes
        ],
        "nb": plan.nb,
        "total_deadhead_s": plan.total_deadhead_s,
    }


def schedule_to_json(plan: SchedulePlan) -> str:
    return json.dumps(schedule_to_dict(plan), indent=2) + "\n"


def save_schedule(plan: SchedulePlan, path: str | Path) -> None:
    Path(path).write_text(schedule_to_json(plan))
