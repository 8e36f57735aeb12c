from __future__ import annotations

import math

import numpy as np
import pytest

from morphopt.descriptions import (
    concave_combo,
    description_from_json,
    geometric_constraint,
    k_ellipse,
    log_sum_exp,
    pencil_homotopy,
    pnorm_ball,
    rz_product_homotopy,
    unit_ball,
)
from morphopt.errors import EvaluationSingularity, ProblemFormatError
from morphopt.poly import MatrixPencil, elementary_symmetric_pk, unit_ball_poly

RNG = np.random.default_rng(20240812)

A1_PENCIL = MatrixPencil([[[-1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [1.0, 0.0]]])
B1_PENCIL = MatrixPencil([[[0.0, 1.0], [1.0, 0.0]], [[-1.0, 0.0], [0.0, 1.0]]])

# Four-term exponential constraint used in the concave-combination demo
DEMO_B = [[0.2, 0.2], [-0.1, 0.2], [-0.2, -0.2], [0.1, -0.1]]


def check_against_finite_differences(desc, t, x, h=1e-5, tol=1e-5):
    """All five bundle fields against central differences in x and t."""
    e = desc.evaluate(t, x)
    n = desc.n_vars

    def close(a, b):
        return np.all(np.abs(np.asarray(a) - np.asarray(b))
                      <= tol * (1.0 + np.abs(np.asarray(a)) + np.abs(np.asarray(b))))

    fd_grad = np.zeros(n)
    fd_hess = np.zeros((n, n))
    for i in range(n):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fd_grad[i] = (desc.evaluate(t, xp).value - desc.evaluate(t, xm).value) / (2 * h)
        fd_hess[:, i] = (desc.evaluate(t, xp).grad - desc.evaluate(t, xm).grad) / (2 * h)
    assert close(e.grad, fd_grad), f"grad mismatch for {desc.label}"
    assert close(e.hess, fd_hess), f"hess mismatch for {desc.label}"
    fd_dt = (desc.evaluate(t + h, x).value - desc.evaluate(t - h, x).value) / (2 * h)
    fd_dtg = (desc.evaluate(t + h, x).grad - desc.evaluate(t - h, x).grad) / (2 * h)
    assert close(e.dt_value, fd_dt), f"dt_value mismatch for {desc.label}"
    assert close(e.dt_grad, fd_dtg), f"dt_grad mismatch for {desc.label}"


# -- unit ball ---------------------------------------------------------------


def test_unit_ball_examples():
    d = unit_ball(3)
    e = d.evaluate(0.3, np.zeros(3))
    assert e.value == 1.0
    assert np.allclose(e.grad, 0.0)
    e = d.evaluate(0.0, np.array([1.0, 0.0, 0.0]))
    assert e.value == 0.0
    assert np.allclose(e.grad, [-2.0, 0.0, 0.0])
    assert np.allclose(np.linalg.eigvalsh(e.hess), -2.0)
    assert e.dt_value == 0.0 and np.allclose(e.dt_grad, 0.0)


# -- concave combination --------------------------------------------------------


def test_combo_endpoints_and_degenerate():
    p0 = unit_ball(2)
    p1 = pnorm_ball(8, 1.0, 2)
    combo = concave_combo(p0, p1)
    for _ in range(5):
        x = RNG.uniform(-0.7, 0.7, 2)
        assert combo.evaluate(0.0, x).value == pytest.approx(p0.evaluate(0, x).value)
        assert combo.evaluate(1.0, x).value == pytest.approx(p1.evaluate(1, x).value)
    same = concave_combo(unit_ball(2), unit_ball(2))
    x = np.array([0.4, -0.2])
    vals = {same.evaluate(t, x).value for t in (0.0, 0.25, 0.9)}
    assert len(vals) == 1


def test_combo_requires_positive_origin():
    shifted = k_ellipse([[0.5, 0.0]], 2.0)  # fine at origin
    bad = pnorm_ball(2, 1.0, 2)
    with pytest.raises(ValueError):
        concave_combo(shifted, _NegatedBall(2))


class _NegatedBall(unit_ball(1).__class__):
    # helper: a description that is negative at the origin
    def __init__(self, n):
        self.n_vars = n
        self.label = "negated_ball"

    def evaluate(self, t, x):
        e = unit_ball(self.n_vars).evaluate(t, x)
        return type(e)(-e.value, -e.grad, -e.hess, 0.0, np.zeros(self.n_vars))


def test_combo_exponential_demo_origin_value():
    p1 = geometric_constraint([1.0] * 4, DEMO_B, [0.0] * 4, 10.0)
    combo = concave_combo(unit_ball(2), p1)
    for t in (0.0, 0.3, 0.77, 1.0):
        assert combo.evaluate(t, np.zeros(2)).value == pytest.approx((1 - t) + 6 * t)


def test_combo_containment_property():
    # feasible in both endpoints -> feasible at every t;
    # feasible at t -> feasible in at least one endpoint
    p0 = unit_ball(2)
    p1 = k_ellipse([[0.5, 0.0], [-0.3, 0.4]], 3.0)
    combo = concave_combo(p0, p1)
    rng = np.random.default_rng(99)
    X = rng.uniform(-3, 3, size=(1000, 2))
    ts = rng.uniform(0, 1, size=1000)
    v0 = p0.value_many(0, X)
    v1 = p1.value_many(1, X)
    for i in range(1000):
        vt = combo.evaluate(ts[i], X[i]).value
        if v0[i] >= 0 and v1[i] >= 0:
            assert vt >= -1e-12
        if vt >= 0:
            assert v0[i] >= -1e-12 or v1[i] >= -1e-12


def test_combo_strict_concavity_bound():
    p1 = geometric_constraint([1.0] * 4, DEMO_B, [0.0] * 4, 10.0)
    combo = concave_combo(unit_ball(2), p1)
    rng = np.random.default_rng(5)
    for _ in range(40):
        t = rng.uniform(0, 1)
        x = rng.uniform(-1.5, 1.5, 2)
        top = np.linalg.eigvalsh(combo.evaluate(t, x).hess).max()
        assert top <= -2.0 * (1 - t) + 1e-9


# -- smoothed product homotopy ----------------------------------------------------


def test_rz_product_endpoint_zero_sets():
    p0 = unit_ball_poly(2)
    p1 = elementary_symmetric_pk(2, 2)
    d = rz_product_homotopy(p0, p1)
    for _ in range(10):
        x = RNG.uniform(-1.5, 1.5, 2)
        # at t = 0 the value is p0(x) * p1(0); same zero set as p0
        assert d.evaluate(0.0, x).value == pytest.approx(p0.eval(x) * p1.eval([0, 0]))
        assert d.evaluate(1.0, x).value == pytest.approx(p1.eval(x) * p0.eval([0, 0]))


def test_rz_product_double_root_instance():
    ball = unit_ball_poly(2)
    d = rz_product_homotopy(ball, ball, eps_max=0.0)
    x = np.array([2.0, 0.0])
    assert d.evaluate(0.5, x).value == pytest.approx(0.0, abs=1e-12)
    x = np.array([1.3, 0.7])
    expected = (1 - 0.25 * (x @ x)) ** 2
    assert d.evaluate(0.5, x).value == pytest.approx(expected)


def test_rz_product_finite_differences():
    p0 = unit_ball_poly(3)
    p1 = elementary_symmetric_pk(3, 2)
    d = rz_product_homotopy(p0, p1)
    for _ in range(25):
        t = RNG.uniform(0.05, 0.95)
        x = RNG.uniform(-1.0, 1.0, 3)
        check_against_finite_differences(d, t, x)


def test_rz_product_repeat_finite_differences():
    p0 = unit_ball_poly(2)
    p1 = elementary_symmetric_pk(2, 3)
    d = rz_product_homotopy(p0, p1, repeat=3)
    for _ in range(10):
        t = RNG.uniform(0.05, 0.95)
        x = RNG.uniform(-1.0, 1.0, 2)
        check_against_finite_differences(d, t, x)


def test_rz_product_real_zero_preservation():
    # restrictions stay real rooted along the homotopy
    p0 = unit_ball_poly(3)
    p1 = elementary_symmetric_pk(3, 2)
    d = rz_product_homotopy(p0, p1)
    rng = np.random.default_rng(23)
    for t in np.arange(0.1, 0.95, 0.1):
        filled = _time_slice_poly(d, t)
        for _ in range(10):
            a = rng.standard_normal(3)
            assert filled.restrict(a).real_rooted(1e-6)


def _time_slice_poly(d, t):
    # assemble p_t symbolically from the precomputed chains (test helper)
    from morphopt.poly import MultiPoly

    n = d.n_vars
    out = MultiPoly(n)
    eps = d.eps(t)
    for j in range(d.repeat + 1):
        sj = MultiPoly(n)
        for i in range(j + 1):
            g = _scale_vars(d.chain0[i], 1 - t)
            h = _scale_vars(d.chain1[j - i], t)
            sj = sj + math.comb(j, i) * (g * h)
        out = out + math.comb(d.repeat, j) * (eps**j) * sj
    return out


def _scale_vars(p, c):
    from morphopt.poly import MultiPoly

    return MultiPoly(p.n_vars, {e: coeff * c ** sum(e) for e, coeff in p.terms.items()})


def test_rz_product_rejects_bad_inputs():
    ball = unit_ball_poly(2)
    neg = -1.0 * ball
    with pytest.raises(ValueError):
        rz_product_homotopy(neg, ball)
    with pytest.raises(ValueError):
        rz_product_homotopy(ball, ball, schedule=(lambda t: 0.1, lambda t: 0.0))


# -- k-ellipse -----------------------------------------------------------------------


def test_k_ellipse_examples():
    circle = k_ellipse([[0.0, 0.0]], 2.0)
    assert circle.evaluate(0, np.array([2.0, 0.0])).value == pytest.approx(0.0)

    fig5 = k_ellipse([[2.0, 0.0], [-2.0, 0.0], [6.0, 0.0]], 12.0)
    assert fig5.evaluate(0, np.zeros(2)).value == pytest.approx(2.0)


def test_k_ellipse_origin_value_exact():
    rng = np.random.default_rng(31)
    for _ in range(10):
        U = rng.uniform(-1, 1, size=(4, 3))
        r = float(np.linalg.norm(U, axis=1).sum() + rng.uniform(0.5, 2))
        d = k_ellipse(U, r)
        assert d.evaluate(0, np.zeros(3)).value == r - np.linalg.norm(U, axis=1).sum()


def test_k_ellipse_finite_differences():
    d = k_ellipse([[2.0, 0.0], [-2.0, 0.0], [6.0, 0.0]], 12.0)
    for _ in range(10):
        x = RNG.uniform(-1.5, 1.5, 2)
        check_against_finite_differences(d, 0.4, x, tol=1e-6)


def test_k_ellipse_focal_singularity():
    d = k_ellipse([[1.0, 0.0]], 3.0)
    with pytest.raises(EvaluationSingularity):
        d.evaluate(0, np.array([1.0, 0.0]))


# -- p-norm ball -----------------------------------------------------------------------


def test_pnorm_ball_examples():
    ball2 = pnorm_ball(2, 1.5, 3)
    x = RNG.uniform(-0.5, 0.5, 3)
    e = ball2.evaluate(0, x)
    assert e.value == pytest.approx(1.5**2 - x @ x)
    assert np.allclose(e.grad, -2 * x)
    assert np.allclose(e.hess, -2 * np.eye(3))

    ball8 = pnorm_ball(8, 1.0, 2)
    assert ball8.evaluate(0, np.array([1.0, 0.0])).value == pytest.approx(0.0)
    assert ball8.evaluate(0, np.array([0.5, 0.5])).value == pytest.approx(127 / 128)


def test_pnorm_ball_rejects_odd():
    with pytest.raises(ValueError):
        pnorm_ball(3, 1.0, 2)
    with pytest.raises(ValueError):
        pnorm_ball(2.5, 1.0, 2)


def test_pnorm_finite_differences():
    d = pnorm_ball(8, 1.0, 3)
    for _ in range(10):
        x = RNG.uniform(-0.9, 0.9, 3)
        check_against_finite_differences(d, 0.2, x)


# -- exponential sum ---------------------------------------------------------------------


def test_exponential_sum_examples():
    d = geometric_constraint([1.0], [[1.0]], [0.0], 2.0)
    assert d.evaluate(0, np.array([math.log(2.0)])).value == pytest.approx(0.0)

    demo = geometric_constraint([1.0] * 4, DEMO_B, [0.0] * 4, 10.0)
    assert demo.evaluate(0, np.zeros(2)).value == pytest.approx(6.0)


def test_exponential_sum_concavity():
    demo = geometric_constraint([1.0] * 4, DEMO_B, [0.0] * 4, 10.0)
    for _ in range(20):
        x = RNG.uniform(-3, 3, 2)
        top = np.linalg.eigvalsh(demo.evaluate(0, x).hess).max()
        assert top <= 1e-10


def test_exponential_sum_finite_differences():
    demo = geometric_constraint([0.5, 2.0, 1.0], [[0.3, -0.2], [-0.4, 0.1], [0.2, 0.5]],
                                [0.1, -0.3, 0.0], 8.0)
    for _ in range(10):
        x = RNG.uniform(-1.5, 1.5, 2)
        check_against_finite_differences(demo, 0.6, x)


def test_exponential_sum_rejects_infeasible_origin():
    with pytest.raises(ValueError):
        geometric_constraint([3.0], [[1.0, 0.0]], [0.0], 2.0)


# -- log-sum-exp ------------------------------------------------------------------------


def test_log_sum_exp_value_and_concavity():
    B = [[2.0, 2.0], [-1.6, 1.6], [-0.6, 1.2], [0.0, -1.2]]
    d = log_sum_exp(B, 5.0)
    assert d.evaluate(0, np.zeros(2)).value == pytest.approx(5.0 - math.log(4.0))
    for _ in range(20):
        x = RNG.uniform(-3, 3, 2)
        top = np.linalg.eigvalsh(d.evaluate(0, x).hess).max()
        assert top <= 1e-10


def test_log_sum_exp_finite_differences():
    B = [[2.0, 2.0], [-1.6, 1.6], [-0.6, 1.2], [0.0, -1.2]]
    d = log_sum_exp(B, 5.0)
    for _ in range(10):
        x = RNG.uniform(-1.5, 1.5, 2)
        check_against_finite_differences(d, 0.5, x)


# -- pencil homotopy ---------------------------------------------------------------------


def test_pencil_homotopy_slices():
    d = pencil_homotopy(A1_PENCIL, B1_PENCIL)
    for _ in range(10):
        x = RNG.uniform(-2, 2, 2)
        disk = 1.0 - x @ x
        assert d.evaluate(0.0, x).value == pytest.approx(disk, abs=1e-12)
        assert d.evaluate(1.0, x).value == pytest.approx(disk, abs=1e-12)
        s = x[0] + x[1]
        assert d.evaluate(0.5, x).value == pytest.approx(1 - s * s / 2, abs=1e-12)


def test_pencil_homotopy_boundary_at_half_time():
    d = pencil_homotopy(A1_PENCIL, B1_PENCIL)
    s = math.sqrt(2.0)
    for x in ([s / 2, s / 2], [s - 1.0, 1.0], [5.0 + s, -5.0]):
        assert d.evaluate(0.5, np.array(x)).value == pytest.approx(0.0, abs=1e-9)


def test_pencil_homotopy_finite_differences():
    d = pencil_homotopy(A1_PENCIL, B1_PENCIL)
    for _ in range(10):
        t = RNG.uniform(0.05, 0.95)
        x = RNG.uniform(-2, 2, 2)
        check_against_finite_differences(d, t, x)


def test_pencil_homotopy_requires_matching_pencils():
    small = MatrixPencil([np.zeros((2, 2))])
    with pytest.raises(ValueError):
        pencil_homotopy(A1_PENCIL, small)


# -- value_many ---------------------------------------------------------------------------


def test_value_many_agrees_with_scalar():
    descs = [
        unit_ball(2),
        k_ellipse([[0.5, 0.2], [-0.4, 0.1]], 4.0),
        pnorm_ball(8, 1.0, 2),
        geometric_constraint([1.0] * 4, DEMO_B, [0.0] * 4, 10.0),
        log_sum_exp([[2.0, 2.0], [-1.6, 1.6], [-0.6, 1.2], [0.0, -1.2]], 5.0),
        pencil_homotopy(A1_PENCIL, B1_PENCIL),
        concave_combo(unit_ball(2), pnorm_ball(8, 1.0, 2)),
        rz_product_homotopy(unit_ball_poly(2), elementary_symmetric_pk(2, 2)),
    ]
    X = RNG.uniform(-1.2, 1.2, size=(17, 2))
    for d in descs:
        t = float(RNG.uniform(0.1, 0.9))
        vals = d.value_many(t, X)
        for i in range(X.shape[0]):
            assert vals[i] == pytest.approx(d.evaluate(t, X[i]).value, rel=1e-10, abs=1e-10)


# -- JSON ----------------------------------------------------------------------------------


def test_description_json_kinds():
    obj = {
        "kind": "concave_combo",
        "p0": {"kind": "unit_ball", "n": 2},
        "p1": {"kind": "k_ellipse", "focal_points": [[0.5, 0.0]], "r": 2.0},
    }
    d = description_from_json(obj)
    assert d.n_vars == 2
    x = np.array([0.1, 0.2])
    assert d.evaluate(0.0, x).value == pytest.approx(1 - x @ x)


def test_description_json_errors_name_fields():
    with pytest.raises(ProblemFormatError, match="description.kind"):
        description_from_json({})
    with pytest.raises(ProblemFormatError, match="description.kind"):
        description_from_json({"kind": "banana"})
    with pytest.raises(ProblemFormatError, match="description.p0"):
        description_from_json({"kind": "concave_combo", "p1": {"kind": "unit_ball", "n": 2}})
    with pytest.raises(ProblemFormatError, match="description.r"):
        description_from_json({"kind": "k_ellipse", "focal_points": [[0.0, 0.0]]})
