"""P1 finite elements for the Poisson model problem on a moving mesh.

State: -Laplace(y) = r with homogeneous Dirichlet conditions, discretized
with piecewise linear elements.  The load vector uses a one-point quadrature
rule at triangle centroids; this exact rule choice is deliberately shared
with the geometry derivative so that the discrete adjoint is the exact
derivative of the discrete reduced objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import NonpositiveArea, SingularSystem
from .mesh import ConnectivityComplex, signed_areas


@dataclass(frozen=True)
class RhsField:
    """Right-hand side with analytic gradient, both vectorized over points."""

    value: Callable
    gradient: Callable


def model_rhs() -> RhsField:
    """The built-in benchmark right-hand side
    ``r(x1, x2) = 2.5 (x1 + 0.4 - x2^2)^2 + x1^2 + x2^2 - 1``."""

    def value(x1, x2):
        w = x1 + 0.4 - x2**2
        return 2.5 * w**2 + x1**2 + x2**2 - 1.0

    def gradient(x1, x2):
        w = x1 + 0.4 - x2**2
        return 5.0 * w + 2.0 * x1, 2.0 * x2 * (1.0 - 5.0 * w)

    return RhsField(value=value, gradient=gradient)


def constant_rhs(c: float) -> RhsField:
    def value(x1, x2):
        return np.full_like(np.asarray(x1, dtype=float), c)

    def gradient(x1, x2):
        z = np.zeros_like(np.asarray(x1, dtype=float))
        return z, z.copy()

    return RhsField(value=value, gradient=gradient)


@dataclass(frozen=True)
class AssembledSystem:
    """Stiffness, mass, centroid-rule load and interior-DOF bookkeeping."""

    stiffness: sparse.csr_matrix
    mass: sparse.csr_matrix
    load: np.ndarray
    volume_weights: np.ndarray  # integral of each nodal basis function
    interior: np.ndarray        # indices of non-boundary vertices


def _basis_gradients(p, areas):
    # gradient of hat function at local vertex l: rot_{-90}(p_{l+1} - p_{l+2}) / (2A)
    diff = p[:, [1, 2, 0]] - p[:, [2, 0, 1]]
    rot = np.stack([diff[..., 1], -diff[..., 0]], axis=-1)
    return rot / (2.0 * areas[:, None, None])


def assemble(coords: np.ndarray, complex: ConnectivityComplex, rhs: RhsField) -> AssembledSystem:
    """Assemble stiffness, mass, load and volume weights on the current mesh."""
    tris = complex.triangles
    n_v = complex.num_vertices
    p = coords[tris]
    areas = signed_areas(coords, tris)
    if np.any(areas <= 0.0):
        raise NonpositiveArea("assembly requires positive areas")

    grads = _basis_gradients(p, areas)  # (N_T, 3, 2)
    k_loc = areas[:, None, None] * np.einsum("tld,tmd->tlm", grads, grads)

    m_loc = (areas / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))

    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    stiffness = sparse.coo_matrix(
        (k_loc.ravel(), (rows, cols)), shape=(n_v, n_v)
    ).tocsr()
    mass = sparse.coo_matrix((m_loc.ravel(), (rows, cols)), shape=(n_v, n_v)).tocsr()

    centroids = p.mean(axis=1)
    r_c = np.asarray(rhs.value(centroids[:, 0], centroids[:, 1]), dtype=float)
    load = np.zeros(n_v)
    np.add.at(load, tris.ravel(), np.repeat(areas * r_c / 3.0, 3))

    weights = np.zeros(n_v)
    np.add.at(weights, tris.ravel(), np.repeat(areas / 3.0, 3))

    interior = np.setdiff1d(
        np.arange(n_v), complex.boundary_vertices, assume_unique=True
    )
    return AssembledSystem(
        stiffness=stiffness,
        mass=mass,
        load=load,
        volume_weights=weights,
        interior=interior,
    )


def _reduced_solve(system: AssembledSystem, rhs_full: np.ndarray) -> np.ndarray:
    interior = system.interior
    if interior.size == 0:
        return np.zeros_like(rhs_full)
    k_red = system.stiffness[interior][:, interior].tocsc()
    b = rhs_full[interior]
    try:
        lu = splu(k_red)
        x = lu.solve(b)
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite solution")
    norm_b = np.linalg.norm(b)
    if norm_b > 0.0:
        # ill-conditioned (near-degenerate) meshes may need refinement steps
        for _ in range(3):
            residual = b - k_red @ x
            if np.linalg.norm(residual) <= 1e-10 * norm_b:
                break
            x = x + lu.solve(residual)
        residual = np.linalg.norm(k_red @ x - b)
        if not np.isfinite(residual) or residual > 1e-10 * norm_b:
            raise SingularSystem(f"relative residual {residual / norm_b:.3e}")
    full = np.zeros_like(rhs_full)
    full[interior] = x
    return full


def solve_state(system: AssembledSystem) -> np.ndarray:
    """Nodal state values; zero on boundary vertices."""
    return _reduced_solve(system, system.load)


def solve_adjoint(system: AssembledSystem) -> np.ndarray:
    """Nodal adjoint values (right-hand side is minus the volume weights)."""
    return _reduced_solve(system, -system.volume_weights)


def objective_value(coords: np.ndarray, complex: ConnectivityComplex, y: np.ndarray) -> float:
    """Integral of the piecewise linear field ``y`` over the mesh (exact)."""
    areas = signed_areas(coords, complex.triangles)
    return float(np.sum(areas * y[complex.triangles].mean(axis=1)))


def shape_derivative(
    coords: np.ndarray,
    complex: ConnectivityComplex,
    y: np.ndarray,
    p: np.ndarray,
    rhs: RhsField,
) -> np.ndarray:
    """Derivative of the reduced objective w.r.t. every vertex coordinate.

    Entry ``i`` pairs the objective with the hat-field moving one coordinate
    of one vertex (vec order).  Integrands that are piecewise polynomial in
    the P1 fields are integrated exactly; factors involving the right-hand
    side use the same centroid rule as the load assembly.  The penalty
    gradient is *not* included here.
    """
    tris = complex.triangles
    pts = coords[tris]
    areas = signed_areas(coords, tris)
    if np.any(areas <= 0.0):
        raise NonpositiveArea("derivative requires positive areas")
    grads = _basis_gradients(pts, areas)  # (N_T, 3, 2): grad of hat at local vertex

    y_loc = y[tris]
    p_loc = p[tris]
    grad_y = np.einsum("tl,tld->td", y_loc, grads)
    grad_p = np.einsum("tl,tld->td", p_loc, grads)

    centroids = pts.mean(axis=1)
    r_c = np.asarray(rhs.value(centroids[:, 0], centroids[:, 1]), dtype=float)
    rgx, rgy = rhs.gradient(centroids[:, 0], centroids[:, 1])
    r_grad = np.column_stack([np.asarray(rgx, dtype=float), np.asarray(rgy, dtype=float)])

    y_mean = y_loc.mean(axis=1)
    p_mean = p_loc.mean(axis=1)
    gy_dot_gp = np.sum(grad_y * grad_p, axis=1)

    # For direction = coordinate alpha of local vertex l (hat field V):
    #   div V = grads[t, l, alpha],  DV = e_alpha (x) grads[t, l, :].
    # contribution(t, l, alpha) =
    #     A ybar div V                                  (objective transport)
    #   + A [div V (gy . gp) - gy_alpha (G_l . gp) - gp_alpha (G_l . gy)]
    #   - A pbar [rgrad_alpha / 3 + r_c div V]          (load transport)
    g_dot_gp = np.einsum("tld,td->tl", grads, grad_p)
    g_dot_gy = np.einsum("tld,td->tl", grads, grad_y)

    contrib = (
        (areas * (y_mean + gy_dot_gp - p_mean * r_c))[:, None, None] * grads
        - areas[:, None, None] * grad_y[:, None, :] * g_dot_gp[:, :, None]
        - areas[:, None, None] * grad_p[:, None, :] * g_dot_gy[:, :, None]
        - ((areas * p_mean / 3.0)[:, None] * r_grad)[:, None, :]
    )

    out = np.zeros(2 * complex.num_vertices)
    np.add.at(out, 2 * tris.ravel(), contrib[..., 0].ravel())
    np.add.at(out, 2 * tris.ravel() + 1, contrib[..., 1].ravel())
    return out
