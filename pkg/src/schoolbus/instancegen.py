"""Random instance generator.

Scatters nodes uniformly in a square service area, clusters them with
k-means (one cluster per school), promotes each cluster's most central node
to a school site, and turns the rest into stops assigned to their nearest
school. All draws come from one seeded stream so a seed pins every byte of
the resulting instance.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .mcm import kmeans
from .model import Instance, Metric, build_instance, child_seed, distance, Point

DEFAULT_SIDE_FT = 211200.0  # 40 miles


@dataclass(frozen=True)
class GenParams:
    """Knobs for the random instance recipe."""

    n_schools: int
    n_stops: int
    seed: int = 0
    side_ft: float = DEFAULT_SIDE_FT
    student_min: int = 1
    student_max: int = 20
    capacity: int = 66
    mrt_s: float = 5400.0
    bell_min_s: int = 43200  # noon
    bell_max_s: int = 57600  # 4 pm
    bell_step_s: int = 900
    speed_mph: float = 20.0
    metric: Metric = Metric.EUCLIDEAN

    def __post_init__(self) -> None:
        if self.n_schools < 1:
            raise ValueError("need at least one school")
        if self.n_stops < self.n_schools:
            raise ValueError("need at least as many stops as schools")
        if self.side_ft <= 0:
            raise ValueError("side_ft must be positive")
        if not 1 <= self.student_min <= self.student_max:
            raise ValueError("student range must satisfy 1 <= min <= max")
        if self.bell_step_s <= 0 or self.bell_max_s < self.bell_min_s:
            raise ValueError("bell window is empty")
        if (self.bell_max_s - self.bell_min_s) % self.bell_step_s != 0:
            raise ValueError("bell window must be a whole number of steps")


def generate(params: GenParams) -> Instance:
    """Build a random instance; the same params yield the same instance.

    Draw order is fixed: node coordinates, then one bell per school, then one
    student count per stop. Clustering runs on a child seed so it does not
    disturb the main stream.
    """
    rng = random.Random(params.seed)
    total = params.n_schools + params.n_stops
    nodes = [
        Point(rng.uniform(0.0, params.side_ft), rng.uniform(0.0, params.side_ft))
        for _ in range(total)
    ]

    labels = kmeans(nodes, params.n_schools, seed=child_seed(params.seed, "kmeans"))
    pts = np.array([(p.x, p.y) for p in nodes])
    school_nodes: list[int] = []
    for cluster in range(params.n_schools):
        members = [i for i in range(total) if labels[i] == cluster]
        centroid = pts[members].mean(axis=0)
        d = np.hypot(pts[members, 0] - centroid[0], pts[members, 1] - centroid[1])
        school_nodes.append(members[int(np.argmin(d))])
    # School ids follow node order, not cluster order.
    school_nodes.sort()

    n_grid = (params.bell_max_s - params.bell_min_s) // params.bell_step_s + 1
    bells = [
        params.bell_min_s + params.bell_step_s * rng.randrange(n_grid)
        for _ in range(params.n_schools)
    ]
    stop_nodes = [i for i in range(total) if i not in set(school_nodes)]
    students = [
        rng.randint(params.student_min, params.student_max) for _ in stop_nodes
    ]

    schools = [
        (sid, (nodes[node].x, nodes[node].y), bells[sid])
        for sid, node in enumerate(school_nodes)
    ]
    stops = []
    for stop_id, node in enumerate(stop_nodes):
        dists = [
            distance(nodes[node], nodes[school_node], params.metric)
            for school_node in school_nodes
        ]
        nearest = min(range(params.n_schools), key=lambda s: (dists[s], s))
        stops.append((stop_id, nearest, (nodes[node].x, nodes[node].y), students[stop_id]))

    return build_instance(
        schools=schools,
        stops=stops,
        capacity=params.capacity,
        mrt_s=params.mrt_s,
        speed_mph=params.speed_mph,
        metric=params.metric,
    )
