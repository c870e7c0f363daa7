"""Matching-based trip construction.

Each school is routed independently: seed trips with far-out stops, then
repeatedly solve a min-cost assignment between unrouted stops and trips,
applying the matched feasible insertions. Sequential mode grows one trip at
a time; parallel mode seeds a capacity lower bound of trips from k-means
clusters and fills them together.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .matching import CostMatrix, min_cost_assignment, pad_square
from .model import (
    FEET_PER_MILE,
    SECONDS_PER_HOUR,
    InfeasibleInstanceError,
    Instance,
    Metric,
    Point,
    RoutingPlan,
    School,
    SolverParams,
    Stop,
    Trip,
    best_insertion_position,
    child_seed,
    distance,
    make_trip,
    trip_is_feasible,
)


class Mode(str, Enum):
    SMCM = "smcm"
    PMCM = "pmcm"


@dataclass
class SchoolContext:
    """One school's routing workspace: its stops plus cached geometry.

    `tt_to_schools(stop_id)` returns the travel time from that stop to every
    school of the instance (in instance.schools order); rows are cached
    because the compatibility count hits them for every insertion evaluated.
    """

    school: School
    stops: tuple[Stop, ...]
    instance: Instance
    school_bells: np.ndarray
    school_xy: np.ndarray
    _tt_cache: dict[int, np.ndarray] = field(default_factory=dict)

    def tt_to_schools(self, stop_id: int) -> np.ndarray:
        row = self._tt_cache.get(stop_id)
        if row is None:
            loc = self.instance.stop_by_id[stop_id].location
            dx = self.school_xy[:, 0] - loc.x
            dy = self.school_xy[:, 1] - loc.y
            if self.instance.metric is Metric.EUCLIDEAN:
                d = np.hypot(dx, dy)
            else:
                d = np.abs(dx) + np.abs(dy)
            row = d / (self.instance.speed_mph * FEET_PER_MILE) * SECONDS_PER_HOUR
            self._tt_cache[stop_id] = row
        return row


def make_school_context(instance: Instance, school: School) -> SchoolContext:
    stops = instance.stops_of_school.get(school.id, ())
    if not stops:
        raise ValueError(f"school {school.id} has no stops")
    bells = np.array([s.bell_s for s in instance.schools], dtype=float)
    xy = np.array([(s.location.x, s.location.y) for s in instance.schools], dtype=float)
    return SchoolContext(school, stops, instance, bells, xy)


@dataclass(frozen=True)
class InsertionEvaluation:
    """Outcome of inserting one stop into one trip at its cheapest position."""

    stop_id: int
    trip_index: int
    position: int
    mq: int
    mc: int
    mt_s: float
    ic: float
    feasible: bool


def kmeans(
    points,
    k: int,
    seed: int,
    n_init: int = 10,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> list[int]:
    """Lloyd's k-means on planar points; returns a label per point.

    Runs n_init seeded random initializations and keeps the lowest
    within-cluster sum of squares. Deterministic for a fixed seed. Empty
    clusters are re-seeded with the point farthest from its own centroid.
    """
    pts = np.asarray(
        [(p.x, p.y) if isinstance(p, Point) else (p[0], p[1]) for p in points], dtype=float
    )
    n = len(pts)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be between 1 and the number of points {n}")
    rng = random.Random(seed)
    best_labels: np.ndarray | None = None
    best_wcss = math.inf
    for _ in range(n_init):
        centroids = pts[rng.sample(range(n), k)].copy()
        labels = np.zeros(n, dtype=np.int64)
        for _ in range(max_iter):
            d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
            labels = np.argmin(d2, axis=1)
            own = d2[np.arange(n), labels]
            for c in range(k):
                if not (labels == c).any():
                    far = int(np.argmax(own))
                    centroids[c] = pts[far]
                    labels[far] = c
                    own[far] = 0.0
            new_centroids = centroids.copy()
            for c in range(k):
                members = pts[labels == c]
                if len(members):
                    new_centroids[c] = members.mean(axis=0)
            shift = float(np.abs(new_centroids - centroids).max())
            centroids = new_centroids
            if shift < tol:
                break
        wcss = float(((pts - centroids[labels]) ** 2).sum())
        if wcss < best_wcss:
            best_wcss = wcss
            best_labels = labels.copy()
    assert best_labels is not None
    return [int(x) for x in best_labels]


def _farthest_stop(stops, school: School, instance: Instance) -> Stop:
    """Stop with maximum distance from the school; ties to the lowest id."""
    best = None
    best_d = -1.0
    for stop in sorted(stops, key=lambda s: s.id):
        d = distance(school.location, stop.location, instance.metric)
        if d > best_d:
            best_d = d
            best = stop
    return best


def initialize_trips(
    ctx: SchoolContext, mode: Mode, params: SolverParams
) -> tuple[list[Trip], set[int]]:
    """Seed trips for one school and return (trips, unrouted stop ids).

    Sequential mode opens a single trip holding the farthest stop. Parallel
    mode opens ceil(total students / capacity) trips, each seeded with the
    farthest-from-school stop of one k-means cluster of the stop locations.
    """
    instance = ctx.instance
    school = ctx.school
    if mode is Mode.SMCM:
        seeds = [_farthest_stop(ctx.stops, school, instance)]
    else:
        total_q = sum(s.students for s in ctx.stops)
        n0 = math.ceil(total_q / instance.capacity)
        labels = kmeans(
            [s.location for s in ctx.stops],
            n0,
            seed=child_seed(params.seed, f"kmeans|{school.id}"),
        )
        clusters: dict[int, list[Stop]] = {}
        for stop, lab in zip(ctx.stops, labels):
            clusters.setdefault(lab, []).append(stop)
        seeds = [
            _farthest_stop(members, school, instance)
            for _, members in sorted(clusters.items())
        ]
        if len(seeds) < n0:
            # Degenerate clustering (duplicate coordinates) left fewer
            # non-empty clusters than seats require; top up from what is left.
            taken = {s.id for s in seeds}
            rest = [s for s in ctx.stops if s.id not in taken]
            while len(seeds) < n0 and rest:
                far = _farthest_stop(rest, school, instance)
                seeds.append(far)
                rest = [s for s in rest if s.id != far.id]
    trips = [make_trip(instance, school.id, [s.id]) for s in seeds]
    unrouted = {s.id for s in ctx.stops} - {s.id for s in seeds}
    return trips, unrouted


def evaluate_insertion(
    stop: Stop,
    trip: Trip,
    ctx: SchoolContext,
    params: SolverParams,
    trip_index: int = -1,
) -> InsertionEvaluation:
    """Score inserting `stop` into `trip` at its cheapest position.

    The insertion cost blends the remaining seat count, the count of schools
    the augmented trip can no longer reach before their bells, and the
    augmented trip duration. Infeasible insertions get a large penalty so the
    matcher only picks them when nothing feasible exists.
    """
    instance = ctx.instance
    position, mt_aug = best_insertion_position(trip, stop, instance)
    new_load = trip.load + stop.students
    mq = instance.capacity - new_load
    last = stop.id if position == len(trip.stops) else trip.last_stop
    arrivals = ctx.school.bell_s + mt_aug + ctx.tt_to_schools(last)
    mc = len(instance.schools) - int(np.count_nonzero(arrivals <= ctx.school_bells))
    feasible = new_load <= instance.capacity and mt_aug <= instance.mrt_s
    if feasible:
        ic = params.alpha_Q * mq + params.alpha_C * mc + params.alpha_T * mt_aug
    else:
        ic = params.big_penalty
    return InsertionEvaluation(stop.id, trip_index, position, mq, mc, mt_aug, ic, feasible)


def _insertion_table(
    unrouted_ids: list[int], trips: list[Trip], trip_indices: list[int],
    ctx: SchoolContext, params: SolverParams,
) -> tuple[CostMatrix, dict[tuple[int, int], InsertionEvaluation]]:
    rows = len(unrouted_ids)
    cols = len(trips)
    costs = np.empty((rows, cols))
    evals: dict[tuple[int, int], InsertionEvaluation] = {}
    for r, stop_id in enumerate(unrouted_ids):
        stop = ctx.instance.stop_by_id[stop_id]
        for c, trip in enumerate(trips):
            ev = evaluate_insertion(stop, trip, ctx, params, trip_index=trip_indices[c])
            evals[(r, c)] = ev
            costs[r, c] = ev.ic
    return pad_square(costs), evals


def build_cost_matrix(
    unrouted_stops, trips, ctx: SchoolContext, params: SolverParams
) -> CostMatrix:
    """Padded insertion-cost matrix: one row per unrouted stop, one column per trip."""
    ids = sorted(s.id if isinstance(s, Stop) else s for s in unrouted_stops)
    trips = list(trips)
    matrix, _ = _insertion_table(ids, trips, list(range(len(trips))), ctx, params)
    return matrix


def mcm_route_school(
    ctx: SchoolContext,
    mode: Mode,
    params: SolverParams,
    trace: list | None = None,
) -> list[Trip]:
    """Route one school's stops into feasible trips.

    Raises InfeasibleInstanceError if any stop cannot even be served by a
    dedicated one-stop trip. Each matching round either inserts at least one
    stop or opens a new trip seeded with the farthest unrouted stop, so the
    loop always terminates.
    """
    instance = ctx.instance
    school = ctx.school
    for stop in ctx.stops:
        if stop.students > instance.capacity:
            raise InfeasibleInstanceError(
                school.id, stop.id,
                f"{stop.students} students exceed bus capacity {instance.capacity}",
            )
        single = make_trip(instance, school.id, [stop.id])
        if single.mt_s > instance.mrt_s:
            raise InfeasibleInstanceError(
                school.id, stop.id,
                f"one-stop trip takes {single.mt_s:.0f}s > maximum ride time "
                f"{instance.mrt_s:.0f}s",
            )

    trips, unrouted = initialize_trips(ctx, mode, params)
    if trace is not None:
        trace.append(("init", school.id, mode.value, len(trips)))
    while unrouted:
        rows = sorted(unrouted)
        if mode is Mode.SMCM:
            trip_indices = [len(trips) - 1]
        else:
            trip_indices = list(range(len(trips)))
        cols = [trips[i] for i in trip_indices]
        matrix, evals = _insertion_table(rows, cols, trip_indices, ctx, params)
        assignment = min_cost_assignment(matrix)
        applied = [
            evals[(r, c)]
            for r, c in assignment.pairs
            if matrix.is_real(r, c) and evals[(r, c)].feasible
        ]
        if applied:
            for ev in applied:
                old = trips[ev.trip_index]
                seq = list(old.stops)
                seq.insert(ev.position, ev.stop_id)
                new_trip = make_trip(instance, school.id, seq)
                if not trip_is_feasible(new_trip, instance):
                    raise RuntimeError(
                        f"internal error: applied insertion built an infeasible trip "
                        f"(school {school.id}, stop {ev.stop_id})"
                    )
                trips[ev.trip_index] = new_trip
                unrouted.remove(ev.stop_id)
                if trace is not None:
                    trace.append(("insert", ev.stop_id, ev.trip_index, ev.position))
        else:
            far = _farthest_stop(
                [instance.stop_by_id[i] for i in unrouted], school, instance
            )
            trips.append(make_trip(instance, school.id, [far.id]))
            unrouted.remove(far.id)
            if trace is not None:
                trace.append(("new_trip", far.id, len(trips) - 1))
    return trips


def route_all_schools(
    instance: Instance,
    mode: Mode,
    params: SolverParams,
    trace: list | None = None,
) -> RoutingPlan:
    """Route every school (ascending id) and collect the trips into a plan.

    Schools are independent subproblems: each uses an RNG stream derived from
    (seed, school id), so the result does not depend on processing order.
    Schools without stops contribute no trips.
    """
    trips: list[Trip] = []
    for school in sorted(instance.schools, key=lambda s: s.id):
        if not instance.stops_of_school.get(school.id):
            continue
        ctx = make_school_context(instance, school)
        trips.extend(mcm_route_school(ctx, mode, params, trace))
    return RoutingPlan(tuple(trips), instance)
