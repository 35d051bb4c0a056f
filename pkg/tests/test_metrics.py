import numpy as np
import pytest

from meshshape.metrics import (
    MetricOperator,
    MetricSpec,
    assemble_elasticity,
    lame_parameters,
    metric_apply,
    retract_euclidean,
    sherman_morrison_solve,
    to_gradient,
)
from meshshape.penalty import PenaltyParams, penalty_gradient

METRIC_ALPHA = PenaltyParams((10.0, 1.0, 0.0, 0.01))


def _specs(qref):
    return [
        MetricSpec.euclidean(),
        MetricSpec.elasticity(),
        MetricSpec.complete(METRIC_ALPHA, qref),
    ]


def test_lame_parameters():
    mu, lam, delta = lame_parameters(MetricSpec.elasticity(1.0, 0.4))
    assert mu == pytest.approx(1.0 / 2.8)
    assert lam == pytest.approx(0.4 / (1.4 * 0.2))
    assert delta == pytest.approx(0.2)
    mu0, lam0, _ = lame_parameters(MetricSpec.elasticity(2.0, 1e-9))
    assert lam0 == pytest.approx(0.0, abs=1e-8)
    assert mu0 == pytest.approx(1.0, rel=1e-6)


def test_poisson_ratio_bounds():
    with pytest.raises(ValueError):
        MetricSpec.elasticity(1.0, 0.5)
    with pytest.raises(ValueError):
        MetricSpec.elasticity(-1.0, 0.4)


def test_complete_requires_weights(disc2):
    _, q = disc2
    with pytest.raises(ValueError):
        MetricSpec.complete(PenaltyParams((0.0, 1.0, 0.0, 1.0)), q)


def test_elasticity_local_stiffness_hand_value():
    from meshshape.mesh import build_complex

    cx = build_complex([(0, 1, 2)], 3)
    q = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    mat = assemble_elasticity(q, cx, MetricSpec.elasticity(damping_delta=1e-30)).toarray()
    mu, lam, _ = lame_parameters(MetricSpec.elasticity())
    assert mat[0, 0] == pytest.approx(0.5 * (2 * mu + lam + mu), rel=1e-12)


def test_metric_symmetry_and_spd(disc2, rng):
    cx, q = disc2
    for spec in _specs(q.copy()):
        op = MetricOperator(spec, q, cx)
        for _ in range(5):
            v = rng.standard_normal(2 * cx.num_vertices)
            w = rng.standard_normal(2 * cx.num_vertices)
            assert w @ op.apply(v) == pytest.approx(v @ op.apply(w), abs=1e-12 * (1 + abs(v @ op.apply(w))))
            assert v @ op.apply(v) > 0.0


def test_elasticity_spd_eigenvalues(disc2):
    cx, q = disc2
    mat = assemble_elasticity(q, cx, MetricSpec.elasticity()).toarray()
    eig = np.linalg.eigvalsh(mat)
    assert eig.min() > 0.0


def test_to_gradient_inverts_metric(disc2, rng):
    cx, q = disc2
    for spec in _specs(q.copy()):
        d = rng.standard_normal(2 * cx.num_vertices)
        x = to_gradient(spec, q, cx, d)
        assert np.linalg.norm(metric_apply(spec, q, cx, x) - d) <= 1e-10 * np.linalg.norm(d)


def test_euclidean_gradient_is_identity(disc2, rng):
    cx, q = disc2
    d = rng.standard_normal(2 * cx.num_vertices)
    assert np.array_equal(to_gradient(MetricSpec.euclidean(), q, cx, d), d)


def test_sherman_morrison_closed_form(disc2, rng):
    cx, q = disc2
    g = penalty_gradient(q, q, cx, METRIC_ALPHA)
    d = rng.standard_normal(2 * cx.num_vertices)
    x = sherman_morrison_solve(g, d)
    expected = d - g * (g @ d) / (1.0 + g @ g)
    assert np.allclose(x, expected, rtol=0, atol=1e-15)
    # solves the rank-one system
    assert np.allclose(x + g * (g @ x), d, atol=1e-12)


def test_two_cg_iterations_match_closed_form(disc2, rng):
    cx, q = disc2
    qref = q + 0.01 * rng.standard_normal(q.shape)
    spec = MetricSpec.complete(METRIC_ALPHA, qref)
    op = MetricOperator(spec, q, cx)
    for _ in range(5):
        d = rng.standard_normal(2 * cx.num_vertices)
        x_cg = op.solve(d)
        x_sm = sherman_morrison_solve(op._g, d)
        assert np.max(np.abs(x_cg - x_sm)) < 1e-12
        assert np.linalg.norm(op.apply(x_cg) - d) <= 1e-10 * np.linalg.norm(d)


def test_complete_metric_identity_when_flat(disc2, rng):
    cx, q = disc2
    spec = MetricSpec.complete(METRIC_ALPHA, q.copy())
    op = MetricOperator(spec, q, cx)
    v = rng.standard_normal(2 * cx.num_vertices)
    # algebraic identity: v^T G v = |v|^2 + (g.v)^2
    assert v @ op.apply(v) == pytest.approx(v @ v + (op._g @ v) ** 2, rel=1e-12)


def test_descent_compatibility(disc2, rng):
    cx, q = disc2
    for spec in _specs(q.copy()):
        d = rng.standard_normal(2 * cx.num_vertices)
        assert d @ to_gradient(spec, q, cx, d) > 0.0


def test_retract_euclidean_affine(disc2, rng):
    cx, q = disc2
    v = rng.standard_normal(2 * cx.num_vertices)
    assert np.array_equal(retract_euclidean(q, v, 0.0), q)
    assert np.array_equal(retract_euclidean(q, np.zeros_like(v), 2.0), q)
    chained = retract_euclidean(retract_euclidean(q, v, 0.3), v, 0.4)
    direct = retract_euclidean(q, v, 0.7)
    assert np.allclose(chained, direct, atol=1e-15)


def test_fixed_mask_restriction(disc2, rng):
    cx, q = disc2
    mask = np.zeros(cx.num_vertices, dtype=bool)
    mask[cx.boundary_vertices] = True
    d = rng.standard_normal(2 * cx.num_vertices)
    for spec in _specs(q.copy()):
        op = MetricOperator(spec, q, cx, fixed_mask=mask)
        x = op.solve(d)
        fixed = np.repeat(mask, 2)
        assert np.all(x[fixed] == 0.0)
        free = ~fixed
        applied = op.apply(x)
        assert np.allclose(applied[free], d[free], atol=1e-10 * np.linalg.norm(d))
