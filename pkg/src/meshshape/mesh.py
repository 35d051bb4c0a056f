"""Connectivity complexes, vertex configurations and elementary mesh geometry.

A mesh is split into two independent objects: a :class:`ConnectivityComplex`
holding the purely combinatorial data (triangles, derived edges, boundary
sets, triangle adjacency) and a vertex configuration, which is simply an
``(N_V, 2)`` float array whose row ``j`` is the position of vertex ``j``.

Vectorized quantities use the "vec" ordering throughout the package: the
flattened coordinate vector is ``coords.ravel()``, i.e.
``[x_0, y_0, x_1, y_1, ...]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    DegenerateEdge,
    EdgeOveruse,
    InconsistentOrientation,
    NotPure,
    NotTwoPathConnected,
)

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class ConnectivityComplex:
    """Oriented abstract simplicial 2-complex of a triangular mesh.

    Attributes
    ----------
    num_vertices : int
        Number of vertices ``N_V``; triangle indices are 0-based in
        ``[0, N_V)``.
    triangles : ndarray, shape (N_T, 3)
        Oriented vertex index triples.
    edges : ndarray, shape (N_E, 2)
        Derived undirected edges, each row sorted, rows lexicographically
        sorted.
    boundary_edges : ndarray, shape (N_B, 2)
        Edges incident to exactly one triangle (subset of ``edges``).
    boundary_vertices : ndarray
        Sorted vertices of the boundary edges.
    triangle_adjacency : ndarray, shape (N_T, 3)
        ``triangle_adjacency[k, l]`` is the index of the triangle sharing
        the edge opposite local vertex ``l`` of triangle ``k``, or ``-1``
        for a boundary edge.

    Instances are produced by :func:`build_complex`, which verifies that the
    complex is pure (every vertex lies in some triangle), 2-path connected
    (the adjacency graph is connected) and consistently oriented (each
    interior edge is traversed in opposite directions by its two triangles).
    """

    num_vertices: int
    triangles: np.ndarray
    edges: np.ndarray
    boundary_edges: np.ndarray
    boundary_vertices: np.ndarray
    triangle_adjacency: np.ndarray

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def boundary_pairs(self) -> np.ndarray:
        """All (vertex, edge) pairs entering the boundary-proximity terms.

        Returns an ``(P, 3)`` int array of rows ``(i0, j0, j1)`` where
        ``[j0, j1]`` is a boundary edge and ``i0`` a boundary vertex that is
        not an endpoint of it.
        """
        rows = []
        for j0, j1 in self.boundary_edges:
            for i0 in self.boundary_vertices:
                if i0 != j0 and i0 != j1:
                    rows.append((i0, j0, j1))
        if not rows:
            return np.empty((0, 3), dtype=np.int64)
        return np.asarray(rows, dtype=np.int64)


def build_complex(triangles, num_vertices: int) -> ConnectivityComplex:
    """Build and validate a :class:`ConnectivityComplex` from index triples.

    Raises
    ------
    NotPure
        If the triangle list is empty or some vertex is isolated.
    EdgeOveruse
        If some edge belongs to more than two triangles.
    InconsistentOrientation
        If an interior edge is induced with the same orientation twice.
    NotTwoPathConnected
        If the triangle adjacency graph is disconnected.
    ValueError
        If an index is out of range or a triangle repeats a vertex.
    """
    tris = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if num_vertices <= 0 or tris.shape[0] == 0:
        raise NotPure("complex has no triangles")
    if tris.min(initial=0) < 0 or tris.max(initial=-1) >= num_vertices:
        raise ValueError("triangle vertex index out of range")
    if np.any((tris[:, 0] == tris[:, 1]) | (tris[:, 1] == tris[:, 2]) | (tris[:, 2] == tris[:, 0])):
        raise ValueError("triangle with repeated vertex")

    n_t = tris.shape[0]
    # Directed edges in traversal order; edge l is opposite local vertex l.
    directed = np.stack(
        [tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]], axis=1
    ).reshape(-1, 2)
    lo = directed.min(axis=1)
    hi = directed.max(axis=1)
    keys = lo * num_vertices + hi
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    uniq_keys, first, counts = np.unique(sorted_keys, return_index=True, return_counts=True)
    if np.any(counts > 2):
        raise EdgeOveruse("edge shared by more than two triangles")

    edges = np.column_stack([uniq_keys // num_vertices, uniq_keys % num_vertices])

    # Orientation: the two traversals of an interior edge must be opposite,
    # i.e. one must run lo->hi and the other hi->lo.
    forward = (directed[:, 0] == lo).astype(np.int8)
    adjacency = -np.ones(3 * n_t, dtype=np.int64)
    half_edge_ids = order  # flat index = 3*triangle + local edge
    for e, (start, cnt) in enumerate(zip(first, counts)):
        if cnt == 2:
            h0, h1 = half_edge_ids[start], half_edge_ids[start + 1]
            if forward[h0] == forward[h1]:
                raise InconsistentOrientation(
                    f"edge {tuple(edges[e])} induced twice with the same orientation"
                )
            adjacency[h0] = h1 // 3
            adjacency[h1] = h0 // 3
    triangle_adjacency = adjacency.reshape(n_t, 3)

    used = np.zeros(num_vertices, dtype=bool)
    used[tris.ravel()] = True
    if not used.all():
        missing = int(np.flatnonzero(~used)[0])
        raise NotPure(f"vertex {missing} does not belong to any triangle")

    boundary_edges = edges[counts == 1]
    boundary_vertices = np.unique(boundary_edges)

    if n_t > 1:
        src, dst = [], []
        for k in range(n_t):
            for nb in triangle_adjacency[k]:
                if nb >= 0:
                    src.append(k)
                    dst.append(nb)
        graph = coo_matrix((np.ones(len(src)), (src, dst)), shape=(n_t, n_t))
        n_comp, _ = connected_components(graph, directed=False)
        if n_comp != 1:
            raise NotTwoPathConnected(f"{n_comp} triangle components")

    return ConnectivityComplex(
        num_vertices=num_vertices,
        triangles=tris,
        edges=edges,
        boundary_edges=boundary_edges,
        boundary_vertices=boundary_vertices,
        triangle_adjacency=triangle_adjacency,
    )


# ---------------------------------------------------------------------------
# Elementary geometric quantities
# ---------------------------------------------------------------------------

def signed_area(coords: np.ndarray, tri) -> float:
    """Signed area of one triangle: half the determinant of two edge vectors.

    Positive for counter-clockwise orientation; antisymmetric under swapping
    any two vertices.
    """
    p0, p1, p2 = coords[tri[0]], coords[tri[1]], coords[tri[2]]
    a, b = p1 - p0, p2 - p1
    return 0.5 * (a[0] * b[1] - a[1] * b[0])


def signed_areas(coords: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Signed areas of all triangles, vectorized."""
    p = coords[triangles]  # (N_T, 3, 2)
    a = p[:, 1] - p[:, 0]
    b = p[:, 2] - p[:, 1]
    return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])


def edge_length(coords: np.ndarray, tri, ell: int) -> float:
    """Length of the edge opposite local vertex ``ell`` (indices mod 3)."""
    i = tri[(ell + 1) % 3]
    j = tri[(ell + 2) % 3]
    return float(np.linalg.norm(coords[i] - coords[j]))


def edge_lengths(coords: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """All edge lengths as an (N_T, 3) array; column ``ell`` is opposite vertex ``ell``."""
    p = coords[triangles]
    diffs = p[:, [2, 0, 1]] - p[:, [1, 2, 0]]
    return np.sqrt(np.sum(diffs**2, axis=2))


def height(coords: np.ndarray, tri, ell: int) -> float:
    """Triangle height onto the edge opposite vertex ``ell``.

    Equals twice the signed area divided by the opposite edge length, so its
    sign follows the orientation.

    Raises
    ------
    DegenerateEdge
        If the opposite edge has zero length.
    """
    e = edge_length(coords, tri, ell)
    if e == 0.0:
        raise DegenerateEdge("zero-length edge has no height")
    return 2.0 * signed_area(coords, tri) / e


def heights(coords: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """All heights as an (N_T, 3) array, sign following the signed area."""
    e = edge_lengths(coords, triangles)
    if np.any(e == 0.0):
        raise DegenerateEdge("zero-length edge has no height")
    return 2.0 * signed_areas(coords, triangles)[:, None] / e


# ---------------------------------------------------------------------------
# Regularized vertex-edge distance
# ---------------------------------------------------------------------------
#
# Distance from a vertex to a segment, measured with a smooth underestimate of
# the 1-norm in the orthogonal frame aligned with the segment.  With (xi, eta)
# the tangential/normal coordinates of the vertex relative to the segment
# [0, L] the exact frame-aligned 1-norm distance is
#
#     |eta| + max(-xi, 0) + max(xi - L, 0),
#
# and we replace |.| by a_mu and max(., 0) by m_mu below.  Both are smooth
# (C^3) underestimates, so the result is a nonnegative underestimate that
# vanishes exactly when the vertex lies on the segment.


def smooth_abs(t, mu: float):
    """C^inf underestimate of ``|t|``: ``t^2 / sqrt(t^2 + mu^2)``."""
    return t * t / np.sqrt(t * t + mu * mu)


def smooth_abs_prime(t, mu: float):
    tt = t * t
    return t * (tt + 2.0 * mu * mu) / (tt + mu * mu) ** 1.5


def _smoothstep(u):
    # C^3 step: 0 for u <= 0, 1 for u >= 1, degree-7 Hermite blend between.
    u = np.clip(u, 0.0, 1.0)
    return u**4 * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u)))


def _smoothstep_prime(u):
    inside = (u > 0.0) & (u < 1.0)
    u = np.clip(u, 0.0, 1.0)
    return np.where(inside, u**3 * (140.0 + u * (-420.0 + u * (420.0 - 140.0 * u))), 0.0)


def smooth_pos(t, mu: float):
    """C^3 underestimate of ``max(t, 0)`` that is exactly zero for ``t <= 0``.

    For ``t >= mu`` it equals ``(t + smooth_abs(t)) / 2``; a step blend on
    ``[0, mu]`` removes the (slightly negative) values the plain average would
    take for negative arguments, keeping the result nonnegative with zero set
    exactly ``t <= 0``.
    """
    return 0.5 * (t + smooth_abs(t, mu)) * _smoothstep(t / mu)


def smooth_pos_prime(t, mu: float):
    s = _smoothstep(t / mu)
    sp = _smoothstep_prime(t / mu) / mu
    return 0.5 * (1.0 + smooth_abs_prime(t, mu)) * s + 0.5 * (t + smooth_abs(t, mu)) * sp


def _edge_frame(coords, vertex, j0, j1):
    e = coords[j1] - coords[j0]
    length = float(np.hypot(e[0], e[1]))
    if length == 0.0:
        raise DegenerateEdge("edge endpoints coincide")
    t = e / length
    n = np.array([-t[1], t[0]])
    u = coords[vertex] - coords[j0]
    xi = float(u @ t)
    eta = float(u @ n)
    return t, n, xi, eta, length


def regularized_distance(coords: np.ndarray, vertex: int, edge, mu: float) -> float:
    """Smoothed 1-norm distance from a vertex to a non-incident segment.

    A nonnegative ``C^3`` underestimate of the minimum, over points of the
    segment, of the 1-norm in the edge-aligned frame; zero exactly when the
    vertex lies on the segment.
    """
    if mu <= 0.0:
        raise ValueError("smoothing parameter must be positive")
    j0, j1 = edge
    _, _, xi, eta, length = _edge_frame(coords, vertex, j0, j1)
    return float(
        smooth_abs(eta, mu) + smooth_pos(-xi, mu) + smooth_pos(xi - length, mu)
    )


def regularized_distances(coords, pairs, mu):
    """Vectorized :func:`regularized_distance` over an (P, 3) pair array."""
    v = coords[pairs[:, 0]]
    p0 = coords[pairs[:, 1]]
    p1 = coords[pairs[:, 2]]
    e = p1 - p0
    length = np.sqrt(np.sum(e**2, axis=1))
    if np.any(length == 0.0):
        raise DegenerateEdge("edge endpoints coincide")
    t = e / length[:, None]
    n = np.column_stack([-t[:, 1], t[:, 0]])
    u = v - p0
    xi = np.sum(u * t, axis=1)
    eta = np.sum(u * n, axis=1)
    return smooth_abs(eta, mu) + smooth_pos(-xi, mu) + smooth_pos(xi - length, mu)


# ---------------------------------------------------------------------------
# Admissibility
# ---------------------------------------------------------------------------

def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _segments_intersect(p0, p1, q0, q1):
    d1 = _orient(q0, q1, p0)
    d2 = _orient(q0, q1, p1)
    d3 = _orient(p0, p1, q0)
    d4 = _orient(p0, p1, q1)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True

    def on_segment(a, b, c):
        return (
            min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])
        )

    if d1 == 0 and on_segment(q0, q1, p0):
        return True
    if d2 == 0 and on_segment(q0, q1, p1):
        return True
    if d3 == 0 and on_segment(p0, p1, q0):
        return True
    if d4 == 0 and on_segment(p0, p1, q1):
        return True
    return False


def is_admissible(complex: ConnectivityComplex, coords: np.ndarray, check_intersections: bool = False) -> bool:
    """Whether a vertex configuration is an admissible mesh for ``complex``.

    Always requires strictly positive signed areas.  With
    ``check_intersections`` a conservative geometric check is added: no two
    non-adjacent boundary edges may intersect and no boundary vertex may lie
    strictly inside a non-incident triangle.
    """
    if not np.all(np.isfinite(coords)):
        return False
    areas = signed_areas(coords, complex.triangles)
    if not np.all(areas > 0.0):
        return False
    if not check_intersections:
        return True

    be = complex.boundary_edges
    for i in range(len(be)):
        a, b = be[i]
        for j in range(i + 1, len(be)):
            c, d = be[j]
            if len({a, b, c, d}) < 4:
                continue  # adjacent boundary edges share a vertex
            if _segments_intersect(coords[a], coords[b], coords[c], coords[d]):
                return False

    tris = complex.triangles
    for v in complex.boundary_vertices:
        pv = coords[v]
        for k in range(tris.shape[0]):
            t = tris[k]
            if v in t:
                continue
            d0 = _orient(coords[t[0]], coords[t[1]], pv)
            d1 = _orient(coords[t[1]], coords[t[2]], pv)
            d2 = _orient(coords[t[2]], coords[t[0]], pv)
            if d0 > 0 and d1 > 0 and d2 > 0:
                return False
    return True


# ---------------------------------------------------------------------------
# Refinement and generators
# ---------------------------------------------------------------------------

def uniform_refine(complex: ConnectivityComplex, coords: np.ndarray):
    """Bisect every edge, splitting each triangle into 4 similar children.

    Preserves total area and per-triangle quality exactly (children are
    congruent and similar to their parent); the child count is ``4 N_T``.
    """
    n_v = complex.num_vertices
    edges = complex.edges
    edge_index = {(int(a), int(b)): n_v + i for i, (a, b) in enumerate(edges)}

    def mid(a, b):
        return edge_index[(a, b) if a < b else (b, a)]

    new_coords = np.vstack([coords, 0.5 * (coords[edges[:, 0]] + coords[edges[:, 1]])])
    children = []
    for a, b, c in complex.triangles:
        a, b, c = int(a), int(b), int(c)
        mab, mbc, mca = mid(a, b), mid(b, c), mid(c, a)
        children.append((a, mab, mca))
        children.append((mab, b, mbc))
        children.append((mca, mbc, c))
        children.append((mab, mbc, mca))
    refined = build_complex(children, n_v + len(edges))
    return refined, new_coords


def make_square5_mesh():
    """The 5-vertex mesh of the square [-1,1]^2: 4 corners plus the center."""
    coords = np.array(
        [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0], [0.0, 0.0]]
    )
    complex = build_complex([(0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4)], 5)
    return complex, coords


def make_disc_mesh(rings: int):
    """Triangulate the unit disc with concentric rings.

    Ring ``k`` (1-based) sits at radius ``k / rings`` and carries ``6 k``
    vertices, giving ``1 + 3 rings (rings+1)`` vertices and ``6 rings^2``
    positively oriented triangles.
    """
    if rings < 1:
        raise ValueError("rings must be >= 1")

    coords = [np.zeros(2)]
    offsets = [0, 1]
    for k in range(1, rings + 1):
        r = k / rings
        angles = 2.0 * np.pi * np.arange(6 * k) / (6 * k)
        coords.extend(np.column_stack([r * np.cos(angles), r * np.sin(angles)]))
        offsets.append(offsets[-1] + 6 * k)

    triangles = []
    for k in range(1, rings + 1):
        n_out = 6 * k
        n_in = 6 * (k - 1)
        out0 = offsets[k]
        in0 = offsets[k - 1]
        for s in range(6):
            for u in range(k):
                o_a = out0 + (s * k + u) % n_out
                o_b = out0 + (s * k + u + 1) % n_out
                inner = 0 if k == 1 else in0 + (s * (k - 1) + u) % n_in
                triangles.append((o_a, o_b, inner))
            for u in range(k - 1):
                o_b = out0 + (s * k + u + 1) % n_out
                i_a = in0 + (s * (k - 1) + u) % n_in
                i_b = in0 + (s * (k - 1) + u + 1) % n_in
                triangles.append((o_b, i_b, i_a))

    complex = build_complex(triangles, offsets[-1])
    return complex, np.asarray(coords)
