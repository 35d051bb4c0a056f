"""Riemannian metrics on the space of vertex configurations.

Three kinds: the Euclidean metric (identity), a linear-elasticity metric
(vector P1 stiffness plus a damped vector mass matrix, assembled fresh at the
current configuration) and a rank-one metric ``I + g g^T`` built from the
gradient of the mesh-quality penalty.  The rank-one structure makes the
derivative-to-gradient solve cheap: two unpreconditioned CG iterations are
exact, and a closed-form inverse is available for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import NonpositiveArea, SingularSystem
from .mesh import ConnectivityComplex, signed_areas
from .penalty import PenaltyParams, penalty_gradient

EUCLIDEAN = "euclidean"
ELASTICITY = "elasticity"
COMPLETE = "complete"


@dataclass(frozen=True)
class MetricSpec:
    kind: str
    young_E: float = 1.0
    poisson_nu: float = 0.4
    damping_delta: float | None = None
    penalty: PenaltyParams | None = None
    qref: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, ELASTICITY, COMPLETE):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == ELASTICITY:
            if self.young_E <= 0:
                raise ValueError("Young's modulus must be positive")
            if not (0.0 < self.poisson_nu < 0.5):
                raise ValueError("Poisson ratio must lie in (0, 0.5)")
            if self.damping_delta is not None and self.damping_delta <= 0:
                raise ValueError("damping must be positive")
        if self.kind == COMPLETE:
            if self.penalty is None or self.qref is None:
                raise ValueError("complete metric needs penalty params and a reference")
            a1, a2, a3, a4 = self.penalty.alpha
            # a3 == 0 is admitted: the boundary term can be switched off by a
            # cutoff without affecting completeness in practice.
            if a1 <= 0 or a2 <= 0 or a4 <= 0 or a3 < 0:
                raise ValueError("complete metric requires positive weights")

    @staticmethod
    def euclidean() -> "MetricSpec":
        return MetricSpec(kind=EUCLIDEAN)

    @staticmethod
    def elasticity(young_E=1.0, poisson_nu=0.4, damping_delta=None) -> "MetricSpec":
        return MetricSpec(
            kind=ELASTICITY,
            young_E=young_E,
            poisson_nu=poisson_nu,
            damping_delta=damping_delta,
        )

    @staticmethod
    def complete(penalty: PenaltyParams, qref: np.ndarray) -> "MetricSpec":
        return MetricSpec(kind=COMPLETE, penalty=penalty, qref=np.asarray(qref, dtype=float))


def lame_parameters(spec: MetricSpec):
    """Lame constants and damping from Young's modulus and Poisson ratio."""
    e, nu = spec.young_E, spec.poisson_nu
    mu = e / (2.0 * (1.0 + nu))
    lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    delta = spec.damping_delta if spec.damping_delta is not None else 0.2 * e
    return mu, lam, delta


def assemble_elasticity(coords: np.ndarray, complex: ConnectivityComplex, spec: MetricSpec):
    """Vector P1 elasticity stiffness plus damped vector mass, vec ordering."""
    mu, lam, delta = lame_parameters(spec)
    tris = complex.triangles
    n = 2 * complex.num_vertices
    p = coords[tris]
    areas = signed_areas(coords, tris)
    if np.any(areas <= 0.0):
        raise NonpositiveArea("metric assembly requires positive areas")

    diff = p[:, [1, 2, 0]] - p[:, [2, 0, 1]]
    grads = np.stack([diff[..., 1], -diff[..., 0]], axis=-1) / (
        2.0 * areas[:, None, None]
    )

    # Strain-displacement matrices, Voigt order (e_xx, e_yy, gamma_xy).
    n_t = tris.shape[0]
    b_mat = np.zeros((n_t, 3, 6))
    b_mat[:, 0, 0::2] = grads[..., 0]
    b_mat[:, 1, 1::2] = grads[..., 1]
    b_mat[:, 2, 0::2] = grads[..., 1]
    b_mat[:, 2, 1::2] = grads[..., 0]
    d_mat = np.array(
        [
            [2.0 * mu + lam, lam, 0.0],
            [lam, 2.0 * mu + lam, 0.0],
            [0.0, 0.0, mu],
        ]
    )
    k_loc = areas[:, None, None] * np.einsum("tiv,ij,tjw->tvw", b_mat, d_mat, b_mat)

    m_scalar = (np.ones((3, 3)) + np.eye(3)) / 12.0
    m_loc = np.zeros((n_t, 6, 6))
    for a in range(3):
        for b in range(3):
            m_loc[:, 2 * a, 2 * b] = areas * m_scalar[a, b]
            m_loc[:, 2 * a + 1, 2 * b + 1] = areas * m_scalar[a, b]

    dofs = np.empty((n_t, 6), dtype=np.int64)
    dofs[:, 0::2] = 2 * tris
    dofs[:, 1::2] = 2 * tris + 1
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    vals = (k_loc + delta * m_loc).ravel()
    return sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()


class MetricOperator:
    """Metric at a fixed configuration: apply, solve, and norm.

    An optional per-vertex boolean mask restricts the metric to the
    complementary (free) subspace; masked coordinates are pinned to zero in
    both inputs and outputs of ``solve``.
    """

    def __init__(self, spec: MetricSpec, coords, complex, fixed_mask=None):
        self.spec = spec
        self.n = 2 * complex.num_vertices
        self._free = None
        if fixed_mask is not None:
            fixed_mask = np.asarray(fixed_mask, dtype=bool)
            self._free = ~np.repeat(fixed_mask, 2)
        if spec.kind == ELASTICITY:
            mat = assemble_elasticity(coords, complex, spec)
            if self._free is not None:
                mat = mat.tolil()
                fixed = np.flatnonzero(~self._free)
                mat[fixed, :] = 0.0
                mat[:, fixed] = 0.0
                mat[fixed, fixed] = 1.0
                mat = mat.tocsc()
            self._matrix = mat
            try:
                self._lu = splu(mat)
            except RuntimeError as exc:
                raise SingularSystem(str(exc)) from exc
        elif spec.kind == COMPLETE:
            g = penalty_gradient(coords, spec.qref, complex, spec.penalty)
            if self._free is not None:
                g = np.where(self._free, g, 0.0)
            self._g = g
        # Euclidean: nothing to precompute.

    def apply(self, v: np.ndarray) -> np.ndarray:
        if self.spec.kind == EUCLIDEAN:
            return np.array(v, dtype=float)
        if self.spec.kind == ELASTICITY:
            return self._matrix @ v
        return v + self._g * (self._g @ v)

    def solve(self, d: np.ndarray) -> np.ndarray:
        if self._free is not None:
            d = np.where(self._free, d, 0.0)
        if self.spec.kind == EUCLIDEAN:
            return np.array(d, dtype=float)
        if self.spec.kind == ELASTICITY:
            x = self._lu.solve(d)
            if not np.all(np.isfinite(x)):
                raise SingularSystem("non-finite metric solve")
            norm_d = np.linalg.norm(d)
            if norm_d > 0 and np.linalg.norm(self._matrix @ x - d) > 1e-10 * norm_d:
                raise SingularSystem("metric solve residual too large")
            return x
        return _cg_rank_one(self._g, d)

    def norm(self, v: np.ndarray) -> float:
        return float(np.sqrt(max(v @ self.apply(v), 0.0)))


def _cg_rank_one(g: np.ndarray, d: np.ndarray) -> np.ndarray:
    # Two CG iterations are exact for I + g g^T (two distinct eigenvalues).
    x = np.zeros_like(d)
    r = d - (x + g * (g @ x))
    p = r.copy()
    rs = r @ r
    for _ in range(2):
        if rs == 0.0:
            break
        ap = p + g * (g @ p)
        alpha = rs / (p @ ap)
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = r @ r
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


def sherman_morrison_solve(g: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Closed-form solve of ``(I + g g^T) x = d``."""
    return d - g * ((g @ d) / (1.0 + g @ g))


def metric_apply(spec: MetricSpec, coords, complex, v: np.ndarray) -> np.ndarray:
    """Apply the metric tensor at ``coords`` to a tangent vector (vec order)."""
    return MetricOperator(spec, coords, complex).apply(np.asarray(v, dtype=float))


def to_gradient(spec: MetricSpec, coords, complex, derivative: np.ndarray) -> np.ndarray:
    """Convert a derivative (covector) to the metric gradient (tangent vector)."""
    return MetricOperator(spec, coords, complex).solve(np.asarray(derivative, dtype=float))


def retract_euclidean(coords: np.ndarray, v: np.ndarray, s: float) -> np.ndarray:
    """Straight-line retraction ``coords + s * v`` (vec order unfolded)."""
    return coords + s * np.asarray(v, dtype=float).reshape(coords.shape)
