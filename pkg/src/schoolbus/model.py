"""Problem model for multi-school bus routing.

Geometry, travel-time arithmetic, trips, routing plans, and solver
parameters. All times are seconds, coordinates are feet, speeds are miles
per hour. Model objects are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, fields
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Sequence

FEET_PER_MILE = 5280.0
SECONDS_PER_HOUR = 3600.0


class Metric(str, Enum):
    """Distance metric used for every travel-time computation of an instance."""

    EUCLIDEAN = "euclidean"
    MANHATTAN = "manhattan"


@dataclass(frozen=True)
class Point:
    """Planar location in feet."""

    x: float
    y: float


def distance(a: Point, b: Point, metric: Metric) -> float:
    """Distance between two points in feet under the given metric."""
    dx = a.x - b.x
    dy = a.y - b.y
    if metric is Metric.EUCLIDEAN:
        return math.hypot(dx, dy)
    return abs(dx) + abs(dy)


def travel_time(dist_ft: float, speed_mph: float) -> float:
    """Seconds needed to cover dist_ft at constant speed_mph."""
    return dist_ft / (speed_mph * FEET_PER_MILE) * SECONDS_PER_HOUR


def school_service_time(n_students: int) -> float:
    """Unload duration in seconds at a school serving n_students in total.

    Affine model: fixed maneuvering time plus a per-student increment.
    """
    return 29.0 + 1.9 * n_students


def stop_service_time(q: int) -> float:
    """Pickup duration in seconds at a stop with q students (same model)."""
    return 19.0 + 2.6 * q


def child_seed(seed: int, tag: object) -> int:
    """Derive a stable 64-bit sub-seed from a root seed and a tag.

    Hash-based so the result does not depend on processing order, only on
    (seed, tag). Used to give each school / each solver phase its own RNG
    stream.
    """
    digest = hashlib.blake2b(f"{seed}|{tag}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


class InfeasibleInstanceError(Exception):
    """A stop cannot be served by any feasible trip of its school."""

    def __init__(self, school_id: int, stop_id: int, reason: str):
        self.school_id = school_id
        self.stop_id = stop_id
        super().__init__(
            f"school {school_id}, stop {stop_id}: {reason}"
        )


@dataclass(frozen=True)
class School:
    id: int
    location: Point
    bell_s: float
    student_count: int = 0


@dataclass(frozen=True)
class Stop:
    id: int
    school_id: int
    location: Point
    students: int


@dataclass(frozen=True)
class Instance:
    """A routing problem: schools with bell times and stops with students.

    Afternoon orientation: a bus starts at a school at its bell time, unloads
    there, then drops students along its stop sequence. `depot` is accepted
    for completeness but unused by the solver.
    """

    schools: tuple[School, ...]
    stops: tuple[Stop, ...]
    capacity: int
    mrt_s: float
    speed_mph: float
    metric: Metric
    depot: Point | None = None

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        if self.mrt_s <= 0:
            raise ValueError("mrt_s must be positive")
        if self.speed_mph <= 0:
            raise ValueError("speed_mph must be positive")
        school_ids = [s.id for s in self.schools]
        if len(set(school_ids)) != len(school_ids):
            raise ValueError("duplicate school ids")
        stop_ids = [s.id for s in self.stops]
        if len(set(stop_ids)) != len(stop_ids):
            raise ValueError("duplicate stop ids")
        known = set(school_ids)
        counts = {sid: 0 for sid in known}
        for stop in self.stops:
            if stop.school_id not in known:
                raise ValueError(f"stop {stop.id} references unknown school {stop.school_id}")
            if stop.students < 1:
                raise ValueError(f"stop {stop.id} must have at least one student")
            counts[stop.school_id] += stop.students
        for school in self.schools:
            if school.student_count != counts[school.id]:
                raise ValueError(
                    f"school {school.id} student_count {school.student_count} "
                    f"!= sum of its stops {counts[school.id]}"
                )

    @cached_property
    def school_by_id(self) -> dict[int, School]:
        return {s.id: s for s in self.schools}

    @cached_property
    def stop_by_id(self) -> dict[int, Stop]:
        return {s.id: s for s in self.stops}

    @cached_property
    def stops_of_school(self) -> dict[int, tuple[Stop, ...]]:
        grouped: dict[int, list[Stop]] = {s.id: [] for s in self.schools}
        for stop in self.stops:
            grouped[stop.school_id].append(stop)
        return {k: tuple(sorted(v, key=lambda s: s.id)) for k, v in grouped.items()}

    def tt(self, a: Point, b: Point) -> float:
        """Travel time in seconds between two points of this instance."""
        return travel_time(distance(a, b, self.metric), self.speed_mph)


def build_instance(
    schools: Sequence[tuple[int, tuple[float, float], float]],
    stops: Sequence[tuple[int, int, tuple[float, float], int]],
    capacity: int = 66,
    mrt_s: float = 5400.0,
    speed_mph: float = 20.0,
    metric: Metric = Metric.EUCLIDEAN,
) -> Instance:
    """Construct an Instance from plain tuples, deriving school student counts.

    schools: (id, (x_ft, y_ft), bell_s); stops: (id, school_id, (x_ft, y_ft), students).
    """
    counts: dict[int, int] = {sid: 0 for sid, _, _ in schools}
    for _, school_id, _, q in stops:
        if school_id in counts:
            counts[school_id] += q
    return Instance(
        schools=tuple(
            School(sid, Point(*xy), bell, counts.get(sid, 0)) for sid, xy, bell in schools
        ),
        stops=tuple(Stop(sid, sch, Point(*xy), q) for sid, sch, xy, q in stops),
        capacity=capacity,
        mrt_s=mrt_s,
        speed_mph=speed_mph,
        metric=metric,
    )


@dataclass(frozen=True)
class Trip:
    """An ordered stop sequence served by one bus departure from one school.

    `mt_s` caches the trip duration (travel plus service times) and
    `last_stop` the final stop id; both must match a recomputation from the
    stop sequence, which `make_trip` guarantees.
    """

    school_id: int
    stops: tuple[int, ...]
    load: int
    mt_s: float
    last_stop: int


def trip_travel_time(school: School, stop_sequence: Sequence[int], instance: Instance) -> float:
    """Trip duration: leg travel times plus the school's unload service time
    plus every stop's pickup service time."""
    if not stop_sequence:
        raise ValueError("trip must serve at least one stop")
    total = school_service_time(school.student_count)
    prev = school.location
    for stop_id in stop_sequence:
        stop = instance.stop_by_id[stop_id]
        if stop.school_id != school.id:
            raise ValueError(f"stop {stop_id} does not belong to school {school.id}")
        total += instance.tt(prev, stop.location)
        total += stop_service_time(stop.students)
        prev = stop.location
    return total


def make_trip(instance: Instance, school_id: int, stop_ids: Sequence[int]) -> Trip:
    """Build a Trip with freshly computed load, duration, and last stop."""
    stop_ids = tuple(stop_ids)
    if len(set(stop_ids)) != len(stop_ids):
        raise ValueError("trip visits a stop twice")
    school = instance.school_by_id[school_id]
    load = sum(instance.stop_by_id[s].students for s in stop_ids)
    mt = trip_travel_time(school, stop_ids, instance)
    return Trip(school_id, stop_ids, load, mt, stop_ids[-1])


def trip_is_feasible(trip: Trip, instance: Instance) -> bool:
    """Capacity and maximum-ride-time check, boundaries inclusive."""
    return trip.load <= instance.capacity and trip.mt_s <= instance.mrt_s


def trip_school_compatible(trip: Trip, target: School, instance: Instance) -> bool:
    """Can a bus finish this trip and reach `target` by its bell time?

    The bus leaves its own school at the bell, runs the trip, then deadheads
    from the trip's last stop to the target school. Boundary inclusive.
    """
    own = instance.school_by_id[trip.school_id]
    last = instance.stop_by_id[trip.last_stop]
    arrival = own.bell_s + trip.mt_s + instance.tt(last.location, target.location)
    return arrival <= target.bell_s


def trip_trip_compatible(pred: Trip, succ: Trip, instance: Instance) -> bool:
    """Can one bus serve `pred` and then `succ`? A trip never precedes itself."""
    if pred is succ:
        return False
    return trip_school_compatible(pred, instance.school_by_id[succ.school_id], instance)


def best_insertion_position(trip: Trip, stop: Stop, instance: Instance) -> tuple[int, float]:
    """Cheapest position to insert `stop` into `trip`.

    Returns (position, resulting trip duration). Position p means the stop
    becomes the p-th element of the stop sequence. Ties go to the earliest
    position. Incremental: only the affected legs are recomputed.
    """
    if stop.school_id != trip.school_id:
        raise ValueError("stop belongs to a different school")
    if stop.id in trip.stops:
        raise ValueError("stop already on trip")
    school = instance.school_by_id[trip.school_id]
    seq = [instance.stop_by_id[s] for s in trip.stops]
    loc = stop.location
    best_pos = 0
    best_delta = math.inf
    prev = school.location
    for pos in range(len(seq) + 1):
        delta = instance.tt(prev, loc)
        if pos < len(seq):
            nxt = seq[pos].location
            delta += instance.tt(loc, nxt) - instance.tt(prev, nxt)
            prev = nxt
        if delta < best_delta:
            best_delta = delta
            best_pos = pos
    return best_pos, trip.mt_s + best_delta + stop_service_time(stop.students)


@dataclass(frozen=True)
class RoutingPlan:
    """A set of trips covering every stop of the instance exactly once."""

    trips: tuple[Trip, ...]
    instance: Instance


class PlanMetrics(NamedTuple):
    tn: int
    tc: int
    tt_s: float


def plan_metrics(plan: RoutingPlan) -> PlanMetrics:
    """Trip count, ordered compatible-pair count, and total trip duration."""
    trips = plan.trips
    tc = 0
    for i, a in enumerate(trips):
        for j, b in enumerate(trips):
            if i != j and trip_trip_compatible(a, b, plan.instance):
                tc += 1
    return PlanMetrics(len(trips), tc, sum(t.mt_s for t in trips))


def validate_plan(plan: RoutingPlan) -> None:
    """Raise ValueError unless the plan is a feasible partition of all stops."""
    instance = plan.instance
    seen: set[int] = set()
    for idx, trip in enumerate(plan.trips):
        if not trip.stops:
            raise ValueError(f"trip {idx} is empty")
        expected = make_trip(instance, trip.school_id, trip.stops)
        if abs(expected.mt_s - trip.mt_s) > 1e-6 or expected.load != trip.load:
            raise ValueError(f"trip {idx} cached duration/load is stale")
        if trip.last_stop != trip.stops[-1]:
            raise ValueError(f"trip {idx} cached last stop is stale")
        if not trip_is_feasible(trip, instance):
            raise ValueError(
                f"trip {idx} infeasible: load {trip.load}/{instance.capacity}, "
                f"duration {trip.mt_s:.1f}/{instance.mrt_s:.0f}s"
            )
        dup = seen.intersection(trip.stops)
        if dup:
            raise ValueError(f"stops {sorted(dup)} served more than once")
        seen.update(trip.stops)
    missing = {s.id for s in instance.stops} - seen
    if missing:
        raise ValueError(f"stops {sorted(missing)} not served")


@dataclass(frozen=True)
class SolverParams:
    """Weights and knobs for trip construction and post improvement.

    Defaults are the calibrated values: insertion-cost weights favour packing
    (alpha_Q) over compatibility (alpha_C) over ride time (alpha_T), and the
    surrogate objective prices a trip (gamma_N) far above a compatible pair
    (gamma_C) and a second of ride time (gamma_T).
    """

    alpha_Q: float = 200.0
    alpha_C: float = 10.0
    alpha_T: float = 1.0
    beta_S: float = 10000.0
    beta_T_removal: float = 1.0
    beta_Q: float = 100.0
    beta_T_close: float = 1.0
    beta_D: float = 10.0
    gamma_N: float = 10000.0
    gamma_C: float = 1250.0
    gamma_T: float = 1.0
    t_initial_factor: float = 100.0
    t_end: float = 10.0
    t_cool: float = 0.9
    it_max: int = 10
    n_nei: int = 20
    epsilon_max: float = 100.0
    tabu_tenure: int | None = None  # None: 10 x trip count at improvement start
    big_penalty: float = 1e12
    seed: int = 0
    always_accept_improving: bool = False

    def __post_init__(self):
        if not 0.0 < self.t_cool < 1.0:
            raise ValueError("t_cool must lie in (0, 1)")
        if self.t_end <= 0 or self.t_initial_factor <= 0:
            raise ValueError("temperatures must be positive")
        if self.it_max < 0 or self.n_nei < 1:
            raise ValueError("it_max must be >= 0 and n_nei >= 1")
        if self.epsilon_max < 0:
            raise ValueError("epsilon_max must be >= 0")
        if self.big_penalty <= 0:
            raise ValueError("big_penalty must be positive")
        if self.tabu_tenure is not None and self.tabu_tenure < 0:
            raise ValueError("tabu_tenure must be >= 0")


def params_with_overrides(params: SolverParams, overrides: dict[str, str]) -> SolverParams:
    """Apply string-valued overrides (e.g. parsed from a CLI) to SolverParams."""
    by_name = {f.name: f for f in fields(SolverParams)}
    kwargs = {}
    for key, raw in overrides.items():
        if key not in by_name:
            raise ValueError(f"unknown parameter {key!r}")
        if key == "tabu_tenure":
            kwargs[key] = None if raw in ("none", "None", "") else int(raw)
        elif key == "always_accept_improving":
            kwargs[key] = raw in ("1", "true", "True", "yes")
        elif key in ("it_max", "n_nei", "seed"):
            kwargs[key] = int(raw)
        else:
            kwargs[key] = float(raw)
    merged = {f.name: getattr(params, f.name) for f in fields(SolverParams)}
    merged.update(kwargs)
    return SolverParams(**merged)


# ---------------------------------------------------------------------------
# JSON serialization. Field order is fixed so identical objects always
# serialize to identical bytes.

def instance_to_dict(instance: Instance) -> dict:
    return {
        "schools": [
            {"id": s.id, "x_ft": s.location.x, "y_ft": s.location.y, "bell_s": s.bell_s}
            for s in instance.schools
        ],
        "stops": [
            {
                "id": s.id,
                "school_id": s.school_id,
                "x_ft": s.location.x,
                "y_ft": s.location.y,
                "students": s.students,
            }
            for s in instance.stops
        ],
        "capacity": instance.capacity,
        "mrt_s": instance.mrt_s,
        "speed_mph": instance.speed_mph,
        "metric": instance.metric.value,
    }


def instance_from_dict(data: dict) -> Instance:
    return build_instance(
        schools=[(s["id"], (s["x_ft"], s["y_ft"]), s["bell_s"]) for s in data["schools"]],
        stops=[
            (s["id"], s["school_id"], (s["x_ft"], s["y_ft"]), s["students"])
            for s in data["stops"]
        ],
        capacity=data["capacity"],
        mrt_s=data["mrt_s"],
        speed_mph=data["speed_mph"],
        metric=Metric(data["metric"]),
    )


def instance_to_json(instance: Instance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2) + "\n"


def save_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(instance_to_json(instance))


def load_instance(path: str | Path) -> Instance:
    return instance_from_dict(json.loads(Path(path).read_text()))


def plan_to_dict(plan: RoutingPlan) -> dict:
    return {
        "trips": [
            {
                "school_id": t.school_id,
                "stops": list(t.stops),
                "mt_s": t.mt_s,
                "load": t.load,
            }
            for t in plan.trips
        ]
    }


def plan_from_dict(data: dict, instance: Instance) -> RoutingPlan:
    trips = []
    for idx, raw in enumerate(data["trips"]):
        trip = make_trip(instance, raw["school_id"], raw["stops"])
        if abs(trip.mt_s - raw["mt_s"]) > 1e-6:
            raise ValueError(f"trip {idx}: stored duration {raw['mt_s']} is stale")
        if trip.load != raw["load"]:
            raise ValueError(f"trip {idx}: stored load {raw['load']} is stale")
        trips.append(trip)
    return RoutingPlan(tuple(trips), instance)


def plan_to_json(plan: RoutingPlan) -> str:
    return json.dumps(plan_to_dict(plan), indent=2) + "\n"


def save_plan(plan: RoutingPlan, path: str | Path) -> None:
    Path(path).write_text(plan_to_json(plan))


def load_plan(path: str | Path, instance: Instance) -> RoutingPlan:
    return plan_from_dict(json.loads(Path(path).read_text()), instance)
