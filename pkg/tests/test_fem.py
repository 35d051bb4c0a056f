import numpy as np
import pytest

from meshshape.fem import (
    assemble,
    constant_rhs,
    model_rhs,
    objective_value,
    shape_derivative,
    solve_adjoint,
    solve_state,
)
from meshshape.mesh import make_square5_mesh, uniform_refine

from conftest import central_difference


def _degenerate_square5(eps):
    cx, q = make_square5_mesh()
    qe = q.copy()
    qe[4] = (0.0, 1.0 - eps)
    return cx, qe


def test_reference_assembly_center(square5):
    cx, q = square5
    sys_ = assemble(q, cx, constant_rhs(1.0))
    # hand assembly on four right isoceles triangles: diagonal entry 4, load 4/3
    assert sys_.stiffness[4, 4] == pytest.approx(4.0, abs=1e-12)
    assert sys_.load[4] == pytest.approx(4.0 / 3.0, abs=1e-12)
    assert list(sys_.interior) == [4]


@pytest.mark.parametrize("eps", [0.5, 0.1, 0.01])
def test_degenerate_family_assembly(eps):
    # Exact reduced stiffness of the off-center fan: 2 + 1/eps + 1/(2-eps).
    cx, qe = _degenerate_square5(eps)
    sys_ = assemble(qe, cx, constant_rhs(1.0))
    expected = 2.0 + 1.0 / eps + 1.0 / (2.0 - eps)
    assert sys_.stiffness[4, 4] == pytest.approx(expected, rel=1e-12)
    assert sys_.load[4] == pytest.approx(4.0 / 3.0, rel=1e-12)


def test_stiffness_row_sums_zero(disc3):
    cx, q = disc3
    sys_ = assemble(q, cx, model_rhs())
    row_sums = np.asarray(sys_.stiffness.sum(axis=1)).ravel()
    assert np.max(np.abs(row_sums)) < 1e-12


def test_state_solution_center(square5):
    cx, q = square5
    sys_ = assemble(q, cx, constant_rhs(1.0))
    y = solve_state(sys_)
    assert y[4] == pytest.approx(1.0 / 3.0, rel=1e-12)
    assert np.all(y[:4] == 0.0)


def test_state_zero_load(square5):
    cx, q = square5
    sys_ = assemble(q, cx, constant_rhs(0.0))
    assert np.all(solve_state(sys_) == 0.0)


def test_state_residual_contract(disc3):
    cx, q = disc3
    sys_ = assemble(q, cx, model_rhs())
    y = solve_state(sys_)
    interior = sys_.interior
    k = sys_.stiffness[interior][:, interior]
    b = sys_.load[interior]
    assert np.linalg.norm(k @ y[interior] - b) <= 1e-10 * np.linalg.norm(b)


def test_adjoint_center(square5):
    cx, q = square5
    sys_ = assemble(q, cx, constant_rhs(1.0))
    p = solve_adjoint(sys_)
    assert p[4] == pytest.approx(-1.0 / 3.0, rel=1e-12)


def test_adjoint_is_minus_state_for_unit_rhs(disc3):
    # with r = 1 the load equals the volume weights exactly, so p = -y
    cx, q = disc3
    sys_ = assemble(q, cx, constant_rhs(1.0))
    assert np.max(np.abs(solve_adjoint(sys_) + solve_state(sys_))) < 1e-14


def test_objective_center(square5):
    cx, q = square5
    sys_ = assemble(q, cx, constant_rhs(1.0))
    y = solve_state(sys_)
    assert objective_value(q, cx, y) == pytest.approx(4.0 / 9.0, rel=1e-12)


def test_objective_zero_field(square5):
    cx, q = square5
    assert objective_value(q, cx, np.zeros(5)) == 0.0


def test_objective_linear_interpolant_refinement_invariant(square5):
    cx, q = square5
    field = lambda c: 0.3 * c[:, 0] - 0.7 * c[:, 1] + 0.2
    base = objective_value(q, cx, field(q))
    rcx, rq = uniform_refine(cx, q)
    assert objective_value(rq, rcx, field(rq)) == pytest.approx(base, abs=1e-12)


def test_monotone_degeneration():
    values = []
    for eps in (0.5, 0.1, 0.01, 0.001):
        cx, qe = _degenerate_square5(eps)
        sys_ = assemble(qe, cx, constant_rhs(1.0))
        values.append(objective_value(qe, cx, solve_state(sys_)))
    assert all(a > b > 0 for a, b in zip(values, values[1:]))


def test_continuous_reference_value(square5):
    cx, q = square5
    for _ in range(5):
        cx, q = uniform_refine(cx, q)
    sys_ = assemble(q, cx, constant_rhs(1.0))
    obj = objective_value(q, cx, solve_state(sys_))
    assert obj == pytest.approx(0.5622, rel=0.01)


def test_rhs_gradient_consistency(rng):
    rhs = model_rhs()
    for _ in range(20):
        x1, x2 = rng.uniform(-1.5, 1.5, 2)
        h = 1e-6
        gx = (rhs.value(x1 + h, x2) - rhs.value(x1 - h, x2)) / (2 * h)
        gy = (rhs.value(x1, x2 + h) - rhs.value(x1, x2 - h)) / (2 * h)
        ax, ay = rhs.gradient(x1, x2)
        assert gx == pytest.approx(ax, rel=1e-6, abs=1e-8)
        assert gy == pytest.approx(ay, rel=1e-6, abs=1e-8)


def test_shape_derivative_fd(disc3, rng):
    cx, q = disc3
    coords = q + 0.02 * rng.standard_normal(q.shape)
    rhs = model_rhs()
    sys_ = assemble(coords, cx, rhs)
    y = solve_state(sys_)
    p = solve_adjoint(sys_)
    grad = shape_derivative(coords, cx, y, p, rhs)

    def reduced(c):
        s = assemble(c, cx, rhs)
        return objective_value(c, cx, solve_state(s))

    fd = central_difference(reduced, coords)
    assert np.max(np.abs(fd - grad)) / np.max(np.abs(grad)) < 1e-5


def test_shape_derivative_translation_invariance(disc3):
    cx, q = disc3
    rhs = constant_rhs(3.0)
    sys_ = assemble(q, cx, rhs)
    grad = shape_derivative(q, cx, solve_state(sys_), solve_adjoint(sys_), rhs)
    for axis in (0, 1):
        t = np.zeros_like(grad)
        t[axis::2] = 1.0
        assert abs(grad @ t) < 1e-10


def test_shape_derivative_symmetry_center(square5):
    # moving the center vertically at the symmetric configuration: zero derivative
    cx, q = square5
    rhs = constant_rhs(1.0)
    sys_ = assemble(q, cx, rhs)
    grad = shape_derivative(q, cx, solve_state(sys_), solve_adjoint(sys_), rhs)
    assert abs(grad[2 * 4 + 1]) < 1e-12
    assert abs(grad[2 * 4]) < 1e-12
