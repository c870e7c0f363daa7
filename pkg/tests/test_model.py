"""Core model: geometry, service times, trips, plans, serialization."""

import json
import math
import random

import pytest

from schoolbus import (
    InfeasibleInstanceError,
    Instance,
    Metric,
    Point,
    SolverParams,
    best_insertion_position,
    build_instance,
    child_seed,
    distance,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    load_plan,
    make_trip,
    params_with_overrides,
    plan_from_dict,
    plan_metrics,
    plan_to_dict,
    save_instance,
    save_plan,
    school_service_time,
    stop_service_time,
    travel_time,
    trip_is_feasible,
    trip_school_compatible,
    trip_travel_time,
    trip_trip_compatible,
    validate_plan,
)
from schoolbus.model import RoutingPlan

MILE_FT = 5280.0


def two_school_instance():
    """School 0 at the origin with three stops, school 1 six miles east."""
    return build_instance(
        schools=[(0, (0.0, 0.0), 46800), (1, (6 * MILE_FT, 0.0), 50400)],
        stops=[
            (0, 0, (MILE_FT, 0.0), 5),
            (1, 0, (2 * MILE_FT, 0.0), 5),
            (2, 0, (0.0, MILE_FT), 8),
            (3, 1, (7 * MILE_FT, 0.0), 12),
        ],
    )


# ---------------------------------------------------------------- geometry


def test_distance_euclidean_and_manhattan():
    a = Point(0.0, 0.0)
    b = Point(3.0, 4.0)
    assert distance(a, b, Metric.EUCLIDEAN) == 5.0
    assert distance(a, b, Metric.MANHATTAN) == 7.0


def test_manhattan_dominates_euclidean():
    rng = random.Random(11)
    for _ in range(200):
        a = Point(rng.uniform(-1e5, 1e5), rng.uniform(-1e5, 1e5))
        b = Point(rng.uniform(-1e5, 1e5), rng.uniform(-1e5, 1e5))
        assert distance(a, b, Metric.MANHATTAN) >= distance(a, b, Metric.EUCLIDEAN) - 1e-9


def test_travel_time_one_mile_at_20mph_is_180s():
    assert travel_time(MILE_FT, 20.0) == pytest.approx(180.0)


def test_travel_time_scales_linearly():
    assert travel_time(2 * MILE_FT, 20.0) == pytest.approx(360.0)
    assert travel_time(MILE_FT, 40.0) == pytest.approx(90.0)


# ------------------------------------------------------------ service times


def test_school_service_time_regression_points():
    assert school_service_time(10) == pytest.approx(48.0)
    assert school_service_time(100) == pytest.approx(219.0)


def test_stop_service_time_regression_points():
    assert stop_service_time(5) == pytest.approx(32.0)
    assert stop_service_time(20) == pytest.approx(71.0)


# ------------------------------------------------------------------- seeds


def test_child_seed_is_deterministic_and_tag_sensitive():
    assert child_seed(42, "route") == child_seed(42, "route")
    assert child_seed(42, "route") != child_seed(42, "improve")
    assert child_seed(42, "route") != child_seed(43, "route")
    assert child_seed(7, 0) != child_seed(7, 1)


# ---------------------------------------------------------------- instance


def test_build_instance_derives_school_student_counts():
    inst = two_school_instance()
    assert inst.school_by_id[0].student_count == 18
    assert inst.school_by_id[1].student_count == 12


def test_build_instance_rejects_duplicate_ids():
    with pytest.raises(ValueError):
        build_instance(
            schools=[(0, (0, 0), 46800), (0, (1, 1), 50400)],
            stops=[(0, 0, (1, 0), 5), (1, 0, (2, 0), 5)],
        )
    with pytest.raises(ValueError):
        build_instance(
            schools=[(0, (0, 0), 46800)],
            stops=[(0, 0, (1, 0), 5), (0, 0, (2, 0), 5)],
        )


def test_build_instance_rejects_unknown_school_reference():
    with pytest.raises(ValueError):
        build_instance(
            schools=[(0, (0, 0), 46800)],
            stops=[(0, 3, (1, 0), 5)],
        )


def test_instance_stops_sorted_per_school():
    inst = two_school_instance()
    assert [s.id for s in inst.stops_of_school[0]] == [0, 1, 2]
    assert [s.id for s in inst.stops_of_school[1]] == [3]


# ------------------------------------------------------------------- trips


def test_trip_duration_frozen_example():
    # One-mile leg (180 s) + unloading 18 students at school 0 (63.2 s)
    # + picking up 5 students (32 s).
    inst = two_school_instance()
    school = inst.school_by_id[0]
    mt = trip_travel_time(school, [0], inst)
    assert mt == pytest.approx(180.0 + school_service_time(18) + 32.0)


def test_trip_duration_260s_example():
    # School serving 10 students total; trip visits the 5-student stop one
    # mile out: 180 + 48 + 32.
    inst = build_instance(
        schools=[(0, (0.0, 0.0), 46800)],
        stops=[(0, 0, (MILE_FT, 0.0), 5), (1, 0, (0.0, 2 * MILE_FT), 5)],
    )
    trip = make_trip(inst, 0, [0])
    assert trip.mt_s == pytest.approx(260.0)
    assert trip.load == 5
    assert trip.last_stop == 0


def test_make_trip_rejects_duplicates_and_foreign_stops():
    inst = two_school_instance()
    with pytest.raises(ValueError):
        make_trip(inst, 0, [0, 0])
    with pytest.raises(ValueError):
        make_trip(inst, 0, [3])


def test_trip_feasibility_boundaries_inclusive():
    inst = build_instance(
        schools=[(0, (0.0, 0.0), 46800)],
        stops=[(0, 0, (MILE_FT, 0.0), 66)],
        capacity=66,
        mrt_s=180.0 + school_service_time(66) + stop_service_time(66),
    )
    trip = make_trip(inst, 0, [0])
    assert trip.load == inst.capacity
    assert trip.mt_s == pytest.approx(inst.mrt_s)
    assert trip_is_feasible(trip, inst)


def test_trip_school_compatibility_boundary():
    # Trip of school 0 ends at stop 1 (2 mi out); school 1 sits 6 mi from the
    # origin, so the deadhead is 4 mi = 720 s.
    inst = two_school_instance()
    trip = make_trip(inst, 0, [0, 1])
    arrival = inst.school_by_id[0].bell_s + trip.mt_s + 720.0
    just_in_time = build_instance(
        schools=[(0, (0.0, 0.0), 46800), (1, (6 * MILE_FT, 0.0), arrival)],
        stops=[
            (0, 0, (MILE_FT, 0.0), 5),
            (1, 0, (2 * MILE_FT, 0.0), 5),
            (2, 0, (0.0, MILE_FT), 8),
            (3, 1, (7 * MILE_FT, 0.0), 12),
        ],
    )
    trip = make_trip(just_in_time, 0, [0, 1])
    assert trip_school_compatible(trip, just_in_time.school_by_id[1], just_in_time)
    late = make_trip(just_in_time, 0, [1, 0])  # ends 1 mi out: longer deadhead
    assert not trip_school_compatible(late, just_in_time.school_by_id[1], just_in_time)


def test_trip_trip_compatible_never_self():
    inst = two_school_instance()
    trip = make_trip(inst, 0, [0])
    assert not trip_trip_compatible(trip, trip, inst)


def test_same_school_trips_never_compatible():
    inst = two_school_instance()
    t1 = make_trip(inst, 0, [0])
    t2 = make_trip(inst, 0, [1])
    assert not trip_trip_compatible(t1, t2, inst)
    assert not trip_trip_compatible(t2, t1, inst)


# --------------------------------------------------------------- insertion


def test_best_insertion_keeps_collinear_order():
    inst = two_school_instance()
    trip = make_trip(inst, 0, [1])  # 2 miles out
    pos, mt = best_insertion_position(trip, inst.stop_by_id[0], inst)
    assert pos == 0  # 1-mile stop slots in before the 2-mile stop
    assert mt == pytest.approx(make_trip(inst, 0, [0, 1]).mt_s)


def test_best_insertion_appends_when_cheapest():
    inst = two_school_instance()
    trip = make_trip(inst, 0, [0])
    pos, mt = best_insertion_position(trip, inst.stop_by_id[1], inst)
    assert pos == 1
    assert mt == pytest.approx(make_trip(inst, 0, [0, 1]).mt_s)


def test_best_insertion_matches_exhaustive_scan():
    rng = random.Random(5)
    for _ in range(30):
        n = rng.randint(2, 6)
        stops = [(i, 0, (rng.uniform(0, 5e4), rng.uniform(0, 5e4)), rng.randint(1, 10))
                 for i in range(n)]
        inst = build_instance(schools=[(0, (0.0, 0.0), 46800)], stops=stops)
        seq = list(range(1, n))
        rng.shuffle(seq)
        trip = make_trip(inst, 0, seq)
        pos, mt = best_insertion_position(trip, inst.stop_by_id[0], inst)
        durations = []
        for p in range(len(seq) + 1):
            cand = seq[:p] + [0] + seq[p:]
            durations.append(make_trip(inst, 0, cand).mt_s)
        assert mt == pytest.approx(min(durations))
        assert pos == durations.index(min(durations))


# -------------------------------------------------------------------- plans


def test_plan_metrics_counts_cross_school_compatibilities():
    inst = two_school_instance()
    plan = RoutingPlan(
        (make_trip(inst, 0, [0, 1]), make_trip(inst, 0, [2]), make_trip(inst, 1, [3])),
        inst,
    )
    tn, tc, tt = plan_metrics(plan)
    assert tn == 3
    assert tt == pytest.approx(sum(t.mt_s for t in plan.trips))
    expected_tc = sum(
        trip_trip_compatible(a, b, inst) for a in plan.trips for b in plan.trips
    )
    assert tc == expected_tc
    assert tc >= 1  # school-0 trips have an hour of slack to reach school 1


def test_validate_plan_catches_missing_and_duplicated_stops():
    inst = two_school_instance()
    good = RoutingPlan(
        (make_trip(inst, 0, [0, 1, 2]), make_trip(inst, 1, [3])), inst
    )
    validate_plan(good)
    with pytest.raises(ValueError):
        validate_plan(RoutingPlan((make_trip(inst, 0, [0, 1]),), inst))
    with pytest.raises(ValueError):
        validate_plan(
            RoutingPlan(
                (
                    make_trip(inst, 0, [0, 1, 2]),
                    make_trip(inst, 0, [2]),
                    make_trip(inst, 1, [3]),
                ),
                inst,
            )
        )


# ------------------------------------------------------------------ params


def test_params_defaults_match_published_calibration():
    p = SolverParams()
    assert (p.alpha_Q, p.alpha_C, p.alpha_T) == (200.0, 10.0, 1.0)
    assert (p.gamma_N, p.gamma_C, p.gamma_T) == (10000.0, 1250.0, 1.0)
    assert p.beta_S == 10000.0
    assert (p.beta_Q, p.beta_D) == (100.0, 10.0)
    assert p.t_end == 10.0
    assert p.t_cool == 0.9
    assert p.it_max == 10
    assert p.n_nei == 20


def test_params_overrides_coerce_types():
    p = params_with_overrides(SolverParams(), {"t_end": "5", "it_max": "3", "seed": "9"})
    assert p.t_end == 5.0
    assert p.it_max == 3
    assert p.seed == 9
    with pytest.raises(ValueError):
        params_with_overrides(SolverParams(), {"nope": "1"})


def test_params_reject_bad_values():
    with pytest.raises(ValueError):
        SolverParams(t_cool=1.5)
    with pytest.raises(ValueError):
        SolverParams(it_max=-1)


# ----------------------------------------------------------- serialization


def test_instance_json_round_trip_is_byte_stable(tmp_path):
    inst = two_school_instance()
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    text = path.read_text()
    assert text.endswith("\n")
    again = load_instance(path)
    save_instance(again, tmp_path / "inst2.json")
    assert (tmp_path / "inst2.json").read_text() == text
    assert instance_to_dict(again) == instance_to_dict(inst)


def test_instance_dict_shape():
    data = instance_to_dict(two_school_instance())
    assert list(data) == ["schools", "stops", "capacity", "mrt_s", "speed_mph", "metric"]
    assert list(data["schools"][0]) == ["id", "x_ft", "y_ft", "bell_s"]
    assert list(data["stops"][0]) == ["id", "school_id", "x_ft", "y_ft", "students"]


def test_plan_json_round_trip(tmp_path):
    inst = two_school_instance()
    plan = RoutingPlan(
        (make_trip(inst, 0, [0, 1, 2]), make_trip(inst, 1, [3])), inst
    )
    path = tmp_path / "plan.json"
    save_plan(plan, path)
    loaded = load_plan(path, inst)
    assert plan_to_dict(loaded) == plan_to_dict(plan)
    data = json.loads(path.read_text())
    assert [t["stops"] for t in data["trips"]] == [[0, 1, 2], [3]]


def test_plan_from_dict_rejects_stale_durations():
    inst = two_school_instance()
    plan = RoutingPlan((make_trip(inst, 0, [0, 1, 2]), make_trip(inst, 1, [3])), inst)
    data = plan_to_dict(plan)
    data["trips"][0]["mt_s"] += 50.0
    with pytest.raises(ValueError):
        plan_from_dict(data, inst)


def test_instance_from_dict_rejects_unknown_metric():
    data = instance_to_dict(two_school_instance())
    data["metric"] = "chebyshev"
    with pytest.raises(ValueError):
        instance_from_dict(data)


def test_infeasible_error_names_the_stop():
    err = InfeasibleInstanceError(3, 17, "needs 80 seats but buses hold 66")
    text = str(err)
    assert "17" in text and "3" in text
