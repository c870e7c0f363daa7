"""Post improvement of a routing plan.

Simulated-annealing search over single-stop relocations between trips of the
same school, guided by a surrogate cost that rewards fewer trips, more
chainable (compatible) trip pairs, and less ride time. A tabu list blocks
immediate move reversals. The result is kept only if it schedules onto
strictly fewer buses than the input plan.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .model import (
    FEET_PER_MILE,
    SECONDS_PER_HOUR,
    Instance,
    Metric,
    RoutingPlan,
    SolverParams,
    child_seed,
    make_trip,
    plan_metrics,
    stop_service_time,
    trip_is_feasible,
)
from .scheduling import min_buses


class TabuList:
    """Recency memory of applied moves with lazy expiry.

    A record (pl, p) made at iteration k blocks the move (pl, p) while the
    current iteration is within `tenure` of k; callers look up the reverse of
    a candidate move before applying it.
    """

    def __init__(self, tenure: int):
        self.tenure = tenure
        self._records: dict[tuple[int, int], int] = {}

    def add(self, move: tuple[int, int], iteration: int) -> None:
        self._records[move] = iteration

    def is_active(self, move: tuple[int, int], iteration: int) -> bool:
        recorded = self._records.get(move)
        if recorded is None:
            return False
        if iteration - recorded > self.tenure:
            del self._records[move]
            return False
        return True


@dataclass
class _PlanIndex:
    """Lookup tables for one plan: stop -> trip index, school -> routed stops."""

    trip_of: dict[int, int]
    school_stops: dict[int, list[int]]

    @classmethod
    def build(cls, plan: RoutingPlan) -> "_PlanIndex":
        trip_of: dict[int, int] = {}
        school_stops: dict[int, list[int]] = {}
        for ti, trip in enumerate(plan.trips):
            for sid in trip.stops:
                trip_of[sid] = ti
                school_stops.setdefault(trip.school_id, []).append(sid)
        for stops in school_stops.values():
            stops.sort()
        return cls(trip_of, school_stops)


def removal_cost(
    stop_id: int,
    plan: RoutingPlan,
    rng: random.Random,
    params: SolverParams,
    index: _PlanIndex | None = None,
) -> float:
    """How little we lose by pulling this stop out of its trip, plus noise.

    Stops on short, quick trips score low and are examined first when the
    exchange list is sorted ascending.
    """
    idx = index if index is not None else _PlanIndex.build(plan)
    trip = plan.trips[idx.trip_of[stop_id]]
    eps = rng.uniform(0.0, params.epsilon_max)
    return params.beta_S * len(trip.stops) + params.beta_T_removal * trip.mt_s + eps


def build_exchange_list(
    plan: RoutingPlan,
    rng: random.Random,
    params: SolverParams,
    index: _PlanIndex | None = None,
) -> list[int]:
    """All routed stops, sorted ascending by removal cost.

    Noise draws happen in ascending stop-id order so a fixed seed gives a
    fixed list; equal keys fall back to stop id.
    """
    idx = index if index is not None else _PlanIndex.build(plan)
    keyed = [
        (removal_cost(sid, plan, rng, params, index=idx), sid)
        for sid in sorted(idx.trip_of)
    ]
    keyed.sort()
    return [sid for _, sid in keyed]


def closeness(
    s_id: int,
    p_id: int,
    plan: RoutingPlan,
    params: SolverParams,
    index: _PlanIndex | None = None,
) -> float:
    """Attractiveness of relocating p right after s: lighter and quicker
    receiving trips and nearer stops score lower (better)."""
    idx = index if index is not None else _PlanIndex.build(plan)
    instance = plan.instance
    s_stop = instance.stop_by_id[s_id]
    p_stop = instance.stop_by_id[p_id]
    if s_stop.school_id != p_stop.school_id:
        raise ValueError("closeness is defined for stops of the same school")
    if idx.trip_of[s_id] == idx.trip_of[p_id]:
        raise ValueError("closeness is defined for stops on different trips")
    trip_s = plan.trips[idx.trip_of[s_id]]
    d = instance.tt(s_stop.location, p_stop.location)
    return (
        params.beta_Q * trip_s.load
        + params.beta_T_close * trip_s.mt_s
        + params.beta_D * d
    )


def build_neighborhood(
    p_id: int,
    plan: RoutingPlan,
    params: SolverParams,
    index: _PlanIndex | None = None,
) -> list[int]:
    """Same-school stops on other trips, closest first, truncated to n_nei."""
    idx = index if index is not None else _PlanIndex.build(plan)
    school_id = plan.instance.stop_by_id[p_id].school_id
    p_trip = idx.trip_of[p_id]
    keyed = []
    for s_id in idx.school_stops.get(school_id, []):
        if idx.trip_of[s_id] == p_trip:
            continue
        keyed.append((closeness(s_id, p_id, plan, params, index=idx), s_id))
    keyed.sort()
    return [sid for _, sid in keyed[: params.n_nei]]


def surrogate_cost(plan: RoutingPlan, params: SolverParams) -> float:
    """Plan goodness stand-in: trips are expensive, compatible pairs are
    valuable, ride time breaks ties."""
    tn, tc, tt = plan_metrics(plan)
    return params.gamma_N * tn - params.gamma_C * tc + params.gamma_T * tt


def acceptance_probability(sc_new: float, sc_old: float, t: float) -> float:
    """Sigmoid acceptance: 0.5 for a neutral move, higher for improvements."""
    if t <= 0:
        raise ValueError("temperature must be positive")
    x = (sc_new - sc_old) / t
    if x > 700.0:
        return 0.0
    if x < -700.0:
        return 1.0
    return 1.0 / (1.0 + math.exp(x))


def apply_move(plan: RoutingPlan, pl_id: int, p_id: int) -> RoutingPlan:
    """Relocate stop p to the position right after stop pl.

    The two stops must share a school but not a trip, and the receiving trip
    must stay feasible. The donor trip is deleted if the move empties it.
    """
    instance = plan.instance
    idx = _PlanIndex.build(plan)
    a = idx.trip_of[p_id]
    b = idx.trip_of[pl_id]
    if a == b:
        raise ValueError("move requires stops on different trips")
    ta = plan.trips[a]
    tb = plan.trips[b]
    if ta.school_id != tb.school_id:
        raise ValueError("move requires stops of the same school")
    seq_b = list(tb.stops)
    seq_b.insert(seq_b.index(pl_id) + 1, p_id)
    new_b = make_trip(instance, tb.school_id, seq_b)
    if not trip_is_feasible(new_b, instance):
        raise ValueError("destination trip would violate capacity or ride time")
    trips = list(plan.trips)
    trips[b] = new_b
    seq_a = [s for s in ta.stops if s != p_id]
    if seq_a:
        new_a = make_trip(instance, ta.school_id, seq_a)
        if not trip_is_feasible(new_a, instance):
            raise RuntimeError("internal error: removal made the donor trip infeasible")
        trips[a] = new_a
    else:
        del trips[a]
    return RoutingPlan(tuple(trips), instance)


class _SurrogateDelta:
    """Vectorised surrogate-cost bookkeeping for one plan.

    Holds per-trip arrays (bell, duration, school index, travel time from the
    trip's last stop to every school) so the change in compatible-pair count
    for a candidate move costs O(trips) instead of O(trips^2).
    """

    def __init__(self, plan: RoutingPlan, params: SolverParams, tts_cache: dict):
        self.plan = plan
        self.params = params
        self.instance = plan.instance
        self._tts_cache = tts_cache
        instance = plan.instance
        self.school_col = {s.id: k for k, s in enumerate(instance.schools)}
        trips = plan.trips
        self.bell = np.array(
            [instance.school_by_id[t.school_id].bell_s for t in trips], dtype=float
        )
        self.mt = np.array([t.mt_s for t in trips], dtype=float)
        self.school_ix = np.array(
            [self.school_col[t.school_id] for t in trips], dtype=np.int64
        )
        if trips:
            self.tts = np.vstack([self.stop_tts(t.last_stop) for t in trips])
        else:
            self.tts = np.zeros((0, len(instance.schools)))
        self.arrive = self.bell + self.mt
        if len(trips):
            adj = self.arrive[:, None] + self.tts[:, self.school_ix] <= self.bell[None, :]
            np.fill_diagonal(adj, False)
            self.tc = int(adj.sum())
        else:
            self.tc = 0
        self.tn = len(trips)
        self.tt_total = float(self.mt.sum())

    def stop_tts(self, stop_id: int) -> np.ndarray:
        row = self._tts_cache.get(stop_id)
        if row is None:
            instance = self.instance
            loc = instance.stop_by_id[stop_id].location
            xs = np.array([s.location.x for s in instance.schools])
            ys = np.array([s.location.y for s in instance.schools])
            dx = xs - loc.x
            dy = ys - loc.y
            if instance.metric is Metric.EUCLIDEAN:
                d = np.hypot(dx, dy)
            else:
                d = np.abs(dx) + np.abs(dy)
            row = d / (instance.speed_mph * FEET_PER_MILE) * SECONDS_PER_HOUR
            self._tts_cache[stop_id] = row
        return row

    def sc(self) -> float:
        p = self.params
        return p.gamma_N * self.tn - p.gamma_C * self.tc + p.gamma_T * self.tt_total

    def _out_count(self, arrive_x: float, tts_row: np.ndarray, mask: np.ndarray) -> int:
        lhs = arrive_x + tts_row[self.school_ix]
        return int(np.count_nonzero((lhs <= self.bell) & mask))

    def _in_count(self, school_col: int, bell_x: float, mask: np.ndarray) -> int:
        lhs = self.arrive + self.tts[:, school_col]
        return int(np.count_nonzero((lhs <= bell_x) & mask))

    def move_delta(self, p_id: int, pl_id: int, idx: _PlanIndex) -> float | None:
        """Surrogate-cost change for move(pl, p), or None if infeasible."""
        instance = self.instance
        a = idx.trip_of[p_id]
        b = idx.trip_of[pl_id]
        if a == b:
            return None
        ta = self.plan.trips[a]
        tb = self.plan.trips[b]
        p_stop = instance.stop_by_id[p_id]
        if tb.load + p_stop.students > instance.capacity:
            return None

        # Receiving trip with p spliced in right after pl.
        k = tb.stops.index(pl_id)
        pl_loc = instance.stop_by_id[pl_id].location
        delta_b = instance.tt(pl_loc, p_stop.location)
        if k + 1 < len(tb.stops):
            nxt = instance.stop_by_id[tb.stops[k + 1]].location
            delta_b += instance.tt(p_stop.location, nxt) - instance.tt(pl_loc, nxt)
        mt_b_new = tb.mt_s + delta_b + stop_service_time(p_stop.students)
        if mt_b_new > instance.mrt_s:
            return None
        last_b_new = p_id if k + 1 == len(tb.stops) else tb.last_stop

        # Donor trip with p removed (possibly deleted).
        j = ta.stops.index(p_id)
        deleted = len(ta.stops) == 1
        if not deleted:
            prev = (
                instance.school_by_id[ta.school_id].location
                if j == 0
                else instance.stop_by_id[ta.stops[j - 1]].location
            )
            delta_a = -instance.tt(prev, p_stop.location)
            if j + 1 < len(ta.stops):
                nxt = instance.stop_by_id[ta.stops[j + 1]].location
                delta_a -= instance.tt(p_stop.location, nxt) - instance.tt(prev, nxt)
            mt_a_new = ta.mt_s + delta_a - stop_service_time(p_stop.students)
            last_a_new = ta.stops[-2] if j == len(ta.stops) - 1 else ta.last_stop

        mask = np.ones(self.tn, dtype=bool)
        mask[a] = False
        mask[b] = False

        arrive_b_new = self.bell[b] + mt_b_new
        tts_b_new = self.stop_tts(last_b_new)
        col_b = int(self.school_ix[b])
        col_a = int(self.school_ix[a])

        d_tc = self._out_count(arrive_b_new, tts_b_new, mask) - self._out_count(
            self.arrive[b], self.tts[b], mask
        )
        c_ab = self.arrive[a] + self.tts[a][col_b] <= self.bell[b]
        c_ba = self.arrive[b] + self.tts[b][col_a] <= self.bell[a]
        if deleted:
            d_tc -= self._out_count(self.arrive[a], self.tts[a], mask)
            d_tc -= self._in_count(col_a, self.bell[a], mask)
            d_tc -= int(c_ab) + int(c_ba)
            d_tt = (mt_b_new - tb.mt_s) - ta.mt_s
            d_tn = -1
        else:
            arrive_a_new = self.bell[a] + mt_a_new
            tts_a_new = self.stop_tts(last_a_new)
            d_tc += self._out_count(arrive_a_new, tts_a_new, mask) - self._out_count(
                self.arrive[a], self.tts[a], mask
            )
            c_ab_new = arrive_a_new + tts_a_new[col_b] <= self.bell[b]
            c_ba_new = arrive_b_new + tts_b_new[col_a] <= self.bell[a]
            d_tc += int(c_ab_new) + int(c_ba_new) - int(c_ab) - int(c_ba)
            d_tt = (mt_b_new - tb.mt_s) + (mt_a_new - ta.mt_s)
            d_tn = 0
        p = self.params
        return p.gamma_N * d_tn - p.gamma_C * d_tc + p.gamma_T * d_tt


@dataclass
class PIState:
    """Mutable state of one improvement run."""

    plan: RoutingPlan
    t: float
    it: int
    iteration: int
    tabu: TabuList
    rng: random.Random
    params: SolverParams


def improve(
    plan: RoutingPlan,
    instance: Instance,
    params: SolverParams,
    trace: list | None = None,
) -> RoutingPlan:
    """Anneal single-stop relocations; keep the result only if it needs fewer buses.

    Each outer iteration rebuilds the exchange list, scans it for the first
    move that is feasible, not a tabu reversal, and wins its acceptance draw,
    applies at most that one move, then cools. The loop stops when the
    temperature drops below t_end or it_max iterations pass without a change.
    The returned plan is the improved one only when its scheduled bus count
    strictly beats the input plan's; ties keep the input.
    """
    if not plan.trips:
        return plan
    isp_nb = min_buses(plan.trips, instance).nb
    tn0 = len(plan.trips)
    tenure = params.tabu_tenure if params.tabu_tenure is not None else 10 * tn0
    state = PIState(
        plan=plan,
        t=params.t_initial_factor * tn0,
        it=0,
        iteration=0,
        tabu=TabuList(tenure),
        rng=random.Random(child_seed(params.seed, "improve")),
        params=params,
    )
    tts_cache: dict[int, np.ndarray] = {}
    evaluator = _SurrogateDelta(state.plan, params, tts_cache)

    while state.t >= params.t_end and state.it <= params.it_max:
        idx = _PlanIndex.build(state.plan)
        exchange_list = build_exchange_list(state.plan, state.rng, params, index=idx)
        moved = False
        for p_id in exchange_list:
            for pl_id in build_neighborhood(p_id, state.plan, params, index=idx):
                delta = evaluator.move_delta(p_id, pl_id, idx)
                if delta is None:
                    continue
                if state.tabu.is_active((p_id, pl_id), state.iteration):
                    if trace is not None:
                        trace.append(("tabu_skip", pl_id, p_id, state.iteration))
                    continue
                sc_old = evaluator.sc()
                if params.always_accept_improving and delta < 0:
                    accepted = True
                else:
                    prob = acceptance_probability(sc_old + delta, sc_old, state.t)
                    accepted = state.rng.random() < prob
                if not accepted:
                    continue
                emptied = len(state.plan.trips[idx.trip_of[p_id]].stops) == 1
                state.plan = apply_move(state.plan, pl_id, p_id)
                evaluator = _SurrogateDelta(state.plan, params, tts_cache)
                state.tabu.add((pl_id, p_id), state.iteration)
                state.it = 0
                moved = True
                if trace is not None:
                    trace.append(("move", pl_id, p_id, state.iteration))
                    if emptied:
                        trace.append(("trip_deleted", state.iteration))
                break
            if moved:
                break
        state.it += 1
        state.t *= params.t_cool
        state.iteration += 1
        if trace is not None:
            trace.append(("cool", state.iteration, state.t, state.it))

    nsp_nb = min_buses(state.plan.trips, instance).nb
    if trace is not None:
        trace.append(("guard", nsp_nb, isp_nb))
    return state.plan if nsp_nb < isp_nb else plan
