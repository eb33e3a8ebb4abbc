"""Polygon and triangle primitives in normalized patch coordinates.

Patch coordinates span [-1, 1] on both axes; ``x`` runs along columns and
``y`` along rows (downwards).  Polygons are ``(k, 2)`` float arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class Triangulation:
    """Fixed triangle index list shared by every polygon of a field."""

    k: int
    triangles: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        if self.k < 3:
            raise ValueError(f"triangulation needs k >= 3, got {self.k}")
        for t in self.triangles:
            if len(set(t)) != 3 or not all(0 <= i < self.k for i in t):
                raise ValueError(f"bad triangle {t} for k={self.k}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)

    def edge_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique edges and the vertices opposite to them.

        Returns ``(edges, opposite)``, both ``(E, 2)`` int arrays.  For an
        edge used by a single triangle the second opposite index is -1.
        Edges shared by more than two triangles keep their first two owners.
        """
        return _edge_table(self.triangles)


@lru_cache(maxsize=None)
def _edge_table(triangles):
    owners: dict[tuple[int, int], list[int]] = {}
    for a, b, c in triangles:
        for u, v, w in ((a, b, c), (b, c, a), (c, a, b)):
            owners.setdefault((min(u, v), max(u, v)), []).append(w)
    edges = np.array(list(owners), dtype=np.int64).reshape(-1, 2)
    opposite = np.full_like(edges, -1)
    for n, opp in enumerate(owners.values()):
        opposite[n, : min(2, len(opp))] = opp[:2]
    edges.setflags(write=False)
    opposite.setflags(write=False)
    return edges, opposite


def regular_polygon_triangulation(k: int) -> Triangulation:
    """Fan triangulation ``(0, i, i+1)`` of a regular k-gon.

    The vertices of a regular polygon are cocircular, so every
    triangulation of it satisfies the empty-circumcircle property; the fan
    is picked because it is index-stable.
    """
    k = int(k)
    if k < 3:
        raise ValueError(f"a polygon needs at least 3 vertices, got {k}")
    return Triangulation(k, tuple((0, i, i + 1) for i in range(1, k - 1)))


def regular_polygon(k: int, radius: float = 1.0, center=(0.0, 0.0)) -> np.ndarray:
    """Vertices of a regular k-gon; vertex j sits at angle (2j + 1) * pi / k."""
    theta = (2.0 * np.arange(k) + 1.0) * np.pi / k
    pts = np.stack([np.cos(theta), np.sin(theta)], axis=-1) * radius
    return pts + np.asarray(center, dtype=float)


def regular_polygon_area(k: int, radius: float) -> float:
    return 0.5 * k * math.sin(2.0 * math.pi / k) * radius * radius


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def segment_distance(p, a, b) -> float:
    """Euclidean distance from point ``p`` to the closed segment ``ab``."""
    px, py = float(p[0]), float(p[1])
    ax, ay = float(a[0]), float(a[1])
    abx, aby = float(b[0]) - ax, float(b[1]) - ay
    length2 = abx * abx + aby * aby
    t = 0.0
    if length2 > 0.0:
        t = min(1.0, max(0.0, ((px - ax) * abx + (py - ay) * aby) / length2))
    return math.hypot(px - (ax + t * abx), py - (ay + t * aby))


def point_in_triangle(p, a, b, c) -> bool:
    """Closed, orientation-independent containment test.

    Zero-area triangles contain exactly the points of their degenerate
    segment (or point).
    """
    d1 = _cross(a, b, p)
    d2 = _cross(b, c, p)
    d3 = _cross(c, a, p)
    if _cross(a, b, c) == 0.0:
        return min(segment_distance(p, a, b), segment_distance(p, b, c),
                   segment_distance(p, c, a)) == 0.0
    has_neg = d1 < 0.0 or d2 < 0.0 or d3 < 0.0
    has_pos = d1 > 0.0 or d2 > 0.0 or d3 > 0.0
    return not (has_neg and has_pos)


def triangle_signed_distance(p, a, b, c) -> float:
    """Signed distance from ``p`` to the boundary of triangle ``abc``.

    Positive strictly inside, negative outside, zero on the boundary.  A
    zero-area triangle never yields a positive value.
    """
    d = min(segment_distance(p, a, b), segment_distance(p, b, c),
            segment_distance(p, c, a))
    if d > 0.0 and _cross(a, b, c) != 0.0 and point_in_triangle(p, a, b, c):
        return d
    return -d


def point_in_polygon(p, poly, tri: Triangulation) -> bool:
    """Union-of-triangles fill rule."""
    return any(point_in_triangle(p, poly[i], poly[j], poly[l])
               for i, j, l in tri.triangles)


def boundary_edges(poly, tri: Triangulation) -> np.ndarray:
    """Edges of ``tri`` that bound the union of its triangles for ``poly``.

    An edge shared by two triangles whose third vertices lie strictly on
    opposite sides of it is interior to the union and dropped; every other
    edge is kept.  Exact whenever the triangles do not overlap.
    """
    poly = np.asarray(poly, dtype=float)
    edges, opposite = tri.edge_table()
    keep = []
    for (u, v), (o1, o2) in zip(edges, opposite):
        if o2 >= 0:
            s1 = _cross(poly[u], poly[v], poly[o1])
            s2 = _cross(poly[u], poly[v], poly[o2])
            if s1 * s2 < 0.0:
                continue
        keep.append((u, v))
    return np.asarray(keep, dtype=np.int64).reshape(-1, 2)


def polygon_signed_distance(p, poly, tri: Triangulation, power: float | None = None) -> float:
    """Signed distance to the boundary of the triangle union.

    With ``power=None`` the magnitude is the exact distance to the nearest
    boundary edge; otherwise it is the p-norm soft minimum
    ``(sum_e d_e**-power) ** (-1/power)`` used by the soft rasterizer.
    Scalar reference for the vectorized kernels in :mod:`patchpoly._kernels`.
    """
    poly = np.asarray(poly, dtype=float)
    dists = [segment_distance(p, poly[u], poly[v]) for u, v in boundary_edges(poly, tri)]
    d = min(dists)
    if power is not None and d > 0.0:
        d = sum((x / d) ** -power for x in dists) ** (-1.0 / power) * d
    return d if point_in_polygon(p, poly, tri) else -d
