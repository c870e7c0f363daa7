"""Brute-force exact solvers at tiny scale.

These are reference implementations used to pin down ground truth in tests
and for desk experiments. They enumerate exhaustively and refuse inputs
beyond their limits rather than silently truncating the search.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import permutations
from typing import Iterator, Sequence

from .mcm import SchoolContext, make_school_context
from .model import (
    Instance,
    SolverParams,
    Trip,
    make_trip,
    trip_travel_time,
    trip_trip_compatible,
)


@dataclass(frozen=True)
class OracleLimits:
    """Hard caps keeping exhaustive search tractable."""

    max_stops: int = 7
    max_trips: int = 8
    time_budget_s: float = 60.0


class OracleLimitError(Exception):
    """Raised when an input exceeds the oracle's limits or time budget."""


def set_partitions(items: Sequence) -> Iterator[list[list]]:
    """All partitions of items into unordered blocks, via restricted growth
    strings (canonical order, no duplicates)."""
    n = len(items)
    if n == 0:
        yield []
        return
    codes = [0] * n
    while True:
        n_blocks = max(codes) + 1
        blocks: list[list] = [[] for _ in range(n_blocks)]
        for i, c in enumerate(codes):
            blocks[c].append(items[i])
        yield blocks
        # Advance to the next restricted growth string.
        j = n - 1
        while j > 0 and codes[j] > max(codes[:j]):
            j -= 1
        if j == 0:
            return
        codes[j] += 1
        for k in range(j + 1, n):
            codes[k] = 0


class _SubsetTable:
    """Per-subset order search for one school's stops, shared by the oracles.

    For every subset of the school's stops this finds the duration-minimizing
    feasible visiting order, and whether some feasible order lets the trip
    reach a given other school before its bell.
    """

    def __init__(self, ctx: SchoolContext, deadline: float | None):
        self.ctx = ctx
        self.deadline = deadline
        self.stop_ids = [s.id for s in ctx.stops]
        self._best: dict[frozenset, tuple[float, tuple[int, ...]] | None] = {}

    def _check_time(self) -> None:
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise OracleLimitError("oracle time budget exceeded")

    def best_order(self, subset: frozenset) -> tuple[float, tuple[int, ...]] | None:
        """Minimum-duration feasible order of the subset, or None."""
        cached = self._best.get(subset)
        if subset in self._best:
            return cached
        self._check_time()
        instance = self.ctx.instance
        school = self.ctx.school
        best: tuple[float, tuple[int, ...]] | None = None
        for order in permutations(sorted(subset)):
            mt = trip_travel_time(school, order, instance)
            if mt > instance.mrt_s:
                continue
            if best is None or mt < best[0]:
                best = (mt, order)
        self._best[subset] = best
        return best

    def reaches(self, subset: frozenset, other_bell_s: float, other_xy) -> bool:
        """True if some feasible order arrives at the other school in time."""
        self._check_time()
        instance = self.ctx.instance
        school = self.ctx.school
        for order in permutations(sorted(subset)):
            mt = trip_travel_time(school, order, instance)
            if mt > instance.mrt_s:
                continue
            last = instance.stop_by_id[order[-1]].location
            dd = instance.tt(last, other_xy)
            if school.bell_s + mt + dd <= other_bell_s:
                return True
        return False


def _check_route_limits(ctx: SchoolContext, limits: OracleLimits) -> None:
    if len(ctx.stops) > limits.max_stops:
        raise OracleLimitError(
            f"school {ctx.school.id} has {len(ctx.stops)} stops; "
            f"oracle limit is {limits.max_stops}"
        )


def exact_route(
    ctx: SchoolContext,
    limits: OracleLimits = OracleLimits(),
    params: SolverParams = SolverParams(),
    objective: str = "surrogate",
) -> tuple[Trip, ...]:
    """Optimal trips for one school by exhaustive partition search.

    objective "surrogate" minimizes gamma_N*TN - gamma_C*TC + gamma_T*TT;
    trips of one school all leave at the same bell, so TC is zero and the
    trade is trips versus ride time. objective "buses" minimizes the trip
    count first and ride time second.
    """
    _check_route_limits(ctx, limits)
    if objective not in ("surrogate", "buses"):
        raise ValueError(f"unknown objective {objective!r}")
    deadline = (
        time.monotonic() + limits.time_budget_s
        if limits.time_budget_s is not None
        else None
    )
    table = _SubsetTable(ctx, deadline)
    instance = ctx.instance
    capacity = instance.capacity
    students = {s.id: s.students for s in ctx.stops}

    best_key: tuple | None = None
    best_orders: list[tuple[int, ...]] | None = None
    for blocks in set_partitions(table.stop_ids):
        orders = []
        total_mt = 0.0
        ok = True
        for block in blocks:
            if sum(students[sid] for sid in block) > capacity:
                ok = False
                break
            found = table.best_order(frozenset(block))
            if found is None:
                ok = False
                break
            mt, order = found
            total_mt += mt
            orders.append(order)
        if not ok:
            continue
        if objective == "surrogate":
            key = (params.gamma_N * len(blocks) + params.gamma_T * total_mt,)
        else:
            key = (len(blocks), total_mt)
        if best_key is None or key < best_key:
            best_key = key
            best_orders = orders
    if best_orders is None:
        raise OracleLimitError(
            f"school {ctx.school.id}: no feasible partition of its stops"
        )
    return tuple(
        make_trip(instance, ctx.school.id, order) for order in best_orders
    )


def exact_min_buses(
    trips: Sequence[Trip],
    instance: Instance,
    limits: OracleLimits = OracleLimits(),
) -> int:
    """Exact minimum bus count by exhaustive chain-partition search.

    Dynamic program: a subset of trips is chainable if some ordering of it is
    pairwise-compatible front to back (Hamiltonian-path style DP), then the
    fewest chains covering all trips is found over submasks. Independent of
    the matching-based production path.
    """
    n = len(trips)
    if n == 0:
        return 0
    if n > limits.max_trips:
        raise OracleLimitError(f"{n} trips; oracle limit is {limits.max_trips}")
    compat = [
        [
            trip_trip_compatible(trips[i], trips[j], instance)
            for j in range(n)
        ]
        for i in range(n)
    ]
    # ham[mask] = bitmask of trips that can end a chain covering exactly mask.
    ham = [0] * (1 << n)
    for i in range(n):
        ham[1 << i] = 1 << i
    for mask in range(1, 1 << n):
        ends = ham[mask]
        if not ends:
            continue
        for j in range(n):
            if mask & (1 << j):
                continue
            for i in range(n):
                if ends & (1 << i) and compat[i][j]:
                    ham[mask | (1 << j)] |= 1 << j
                    break
    chainable = [mask for mask in range(1, 1 << n) if ham[mask]]
    full = (1 << n) - 1
    INF = n + 1
    dp = [INF] * (1 << n)
    dp[0] = 0
    for mask in range(1, 1 << n):
        # Only submasks containing the lowest set bit need be tried.
        low = mask & -mask
        sub = mask
        while sub:
            if sub & low and ham[sub]:
                cand = dp[mask ^ sub] + 1
                if cand < dp[mask]:
                    dp[mask] = cand
            sub = (sub - 1) & mask
    assert dp[full] <= n, "singleton chains always cover"
    return dp[full]


def exact_min_nb_instance(
    instance: Instance,
    limits: OracleLimits = OracleLimits(),
) -> int:
    """Exact minimum bus count over ALL feasible plans of a 1- or 2-school
    instance (every way of partitioning and ordering stops into trips).

    Relies on two structural facts: trips of one school are never mutually
    chainable (equal bells), and a trip's onward reach depends only on its
    duration and last stop. For one school the optimum is the fewest feasible
    trips. For two schools, chains have length at most two, pointing from the
    earlier bell to the later one, so the optimum follows from each school's
    achievable (trip count, reaching-trip count) pairs.
    """
    schools = instance.schools
    if len(schools) > 2:
        raise OracleLimitError(
            f"{len(schools)} schools; instance-level oracle handles at most 2"
        )
    deadline = (
        time.monotonic() + limits.time_budget_s
        if limits.time_budget_s is not None
        else None
    )

    contexts = []
    for school in schools:
        if not instance.stops_of_school.get(school.id):
            continue
        ctx = make_school_context(instance, school)
        _check_route_limits(ctx, limits)
        contexts.append(ctx)
    if not contexts:
        return 0

    def candidates(ctx: SchoolContext, other) -> list[tuple[int, int]]:
        """Achievable (trip count, max trips able to reach `other`) pairs."""
        table = _SubsetTable(ctx, deadline)
        students = {s.id: s.students for s in ctx.stops}
        capacity = ctx.instance.capacity
        reach_cache: dict[frozenset, bool] = {}
        best_reach: dict[int, int] = {}
        for blocks in set_partitions(table.stop_ids):
            tn = len(blocks)
            reach = 0
            ok = True
            for block in blocks:
                if sum(students[sid] for sid in block) > capacity:
                    ok = False
                    break
                key = frozenset(block)
                if table.best_order(key) is None:
                    ok = False
                    break
                if other is not None:
                    hit = reach_cache.get(key)
                    if hit is None:
                        hit = table.reaches(key, other.bell_s, other.location)
                        reach_cache[key] = hit
                    reach += int(hit)
            if not ok:
                continue
            if tn not in best_reach or reach > best_reach[tn]:
                best_reach[tn] = reach
        if not best_reach:
            raise OracleLimitError(
                f"school {ctx.school.id}: no feasible partition of its stops"
            )
        return sorted(best_reach.items())

    if len(contexts) == 1:
        return candidates(contexts[0], None)[0][0]

    a, b = contexts
    if a.school.bell_s == b.school.bell_s:
        return candidates(a, None)[0][0] + candidates(b, None)[0][0]
    early, late = (a, b) if a.school.bell_s < b.school.bell_s else (b, a)
    early_cands = candidates(early, late.school)
    late_tns = [tn for tn, _ in candidates(late, None)]
    best = None
    for tn_e, reach in early_cands:
        for tn_l in late_tns:
            nb = tn_e + tn_l - min(reach, tn_l)
            if best is None or nb < best:
                best = nb
    return best
