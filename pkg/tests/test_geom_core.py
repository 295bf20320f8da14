import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import upstairs
from tractorforge import geom_core as gc
from tractorforge.cr_geometry import manifold_from_name, pseudohermitian, sample_points
from tractorforge.errors import DepthExceeded, DivisionByZeroConstant, SingularMetric, SlotMismatch
from tractorforge.surface_dsl import compile_expr, jet_lift

coef = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
small = st.floats(-0.4, 0.4, allow_nan=False, allow_infinity=False)


def poly_jet(space, base, coeffs, order):
    """c0 + c1 x + c2 y + c3 x y + c4 x^2 as a jet at ``base``."""
    x = space.variables(base, order)
    X, Y = x[0], x[1]
    return coeffs[0] + coeffs[1] * X + coeffs[2] * Y + coeffs[3] * X * Y + coeffs[4] * X * X


def poly_value(p, coeffs):
    X, Y = p
    return coeffs[0] + coeffs[1] * X + coeffs[2] * Y + coeffs[3] * X * Y + coeffs[4] * X * X


# ---------------------------------------------------------------------------
# jet arithmetic


@settings(max_examples=60, deadline=None)
@given(st.lists(coef, min_size=5, max_size=5), st.lists(coef, min_size=5, max_size=5),
       st.tuples(coef, coef), st.tuples(small, small))
def test_polynomial_products_are_exact(a, b, base, dx):
    sp = gc.jet_space(2, 4)
    prod = poly_jet(sp, base, a, 4) * poly_jet(sp, base, b, 4)
    p = (base[0] + dx[0], base[1] + dx[1])
    want = poly_value(p, a) * poly_value(p, b)
    assert abs(prod.taylor(dx) - want) < 1e-9 * (1 + abs(want))


@settings(max_examples=60, deadline=None)
@given(st.lists(coef, min_size=5, max_size=5), st.tuples(coef, coef))
def test_reciprocal_exp_log_sqrt(a, base):
    sp = gc.jet_space(2, 5)
    f = poly_jet(sp, base, a, 5) * poly_jet(sp, base, a, 5) + 1.0   # positive
    one = f * f.reciprocal()
    assert gc.maxabs((one - 1.0).c) < 1e-10 * max(1.0, gc.maxabs(f.c)) ** 6
    assert np.allclose(f.log().exp().c, f.c, rtol=1e-9, atol=1e-9 * np.abs(f.c).max())
    assert np.allclose((f.sqrt() * f.sqrt()).c, f.c, rtol=1e-9, atol=1e-9 * np.abs(f.c).max())


@settings(max_examples=40, deadline=None)
@given(st.lists(coef, min_size=5, max_size=5), st.lists(coef, min_size=5, max_size=5), st.tuples(coef, coef))
def test_product_rule(a, b, base):
    sp = gc.jet_space(2, 4)
    f, g = poly_jet(sp, base, a, 4), poly_jet(sp, base, b, 4)
    lhs = (f * g).grad()
    k = 3
    rhs = gc.stack([f.deriv(v).truncate(k) * g.truncate(k) + f.truncate(k) * g.deriv(v).truncate(k)
                    for v in range(2)], axis=-1)
    assert np.allclose(lhs.c, rhs.c, atol=1e-9 * (1 + np.abs(rhs.c).max()))


@settings(max_examples=40, deadline=None)
@given(st.lists(coef, min_size=5, max_size=5), st.tuples(coef, coef))
def test_antiderivative_round_trip(a, base):
    sp = gc.jet_space(2, 5)
    f = poly_jet(sp, base, a, 5)
    F, res = gc.antiderivative(f.grad(), value=float(f.value))
    assert res < 1e-10
    assert np.allclose(F.c, f.c, atol=1e-10 * (1 + np.abs(f.c).max()))


def test_conj_is_an_involution():
    sp = gc.jet_space(2, 3)
    x = sp.variables([0.3, -0.2])
    f = (x[0] + 1j * x[1]) ** 3 + 2j
    assert np.array_equal(f.conj().conj().c, f.c)
    assert np.allclose((f.real + 1j * f.imag).c, f.c)


def test_division_by_zero_constant():
    sp = gc.jet_space(1, 3)
    x = sp.variables([0.0])
    with pytest.raises(DivisionByZeroConstant):
        _ = 1.0 / x[0]


def test_partial_depth_guard():
    sp = gc.jet_space(1, 2)
    x = sp.variables([1.0])
    with pytest.raises(DepthExceeded):
        x[0].partial((3,))


def test_embed_and_restrict_round_trip():
    small_sp, big_sp = gc.jet_space(2, 4), gc.jet_space(3, 4)
    x = small_sp.variables([0.5, -1.0])
    f = x[0] * x[1] ** 2 + x[0].exp()
    up = f.embed(big_sp, [0, 2])
    back = gc.restrict(up, small_sp, [0, 2])
    assert np.allclose(back.c, f.c)


def test_einsum_and_inverse():
    sp = gc.jet_space(2, 3)
    x = sp.variables([0.2, 0.1])
    m = gc.stack([gc.stack([1.0 + x[0] * 0, x[1]]), gc.stack([x[0] * x[1], 2.0 + x[0]])])
    mi = gc.inv(m)
    prod = gc.einsum("ij,jk->ik", m, mi)
    assert gc.maxabs((prod - gc.lift(np.eye(2), prod)).c) < 1e-13


# ---------------------------------------------------------------------------
# jet_lift examples


def test_jet_lift_square():
    ex = compile_expr("re(z1)*re(z1)", 1)
    j = jet_lift(ex, [3.0, 0.0], 2)
    idx = j.space.index
    assert j.c[idx[(0, 0)]] == pytest.approx(9)
    assert j.c[idx[(1, 0)]] == pytest.approx(6)
    assert j.c[idx[(2, 0)]] == pytest.approx(1)      # Taylor coefficient f''/2!
    assert j.partial((2, 0)) == pytest.approx(2)
    assert abs(j.c[idx[(0, 1)]]) == 0


def test_jet_lift_constant():
    j = jet_lift(compile_expr("1", 2), [0.1, 0.2, 0.3, 0.4], 3)
    assert j.value == pytest.approx(1)
    assert gc.maxabs(j.c[..., 1:]) == 0


def test_jet_lift_sphere_gradient_vs_central_differences():
    ex = compile_expr("|z1|^2+|z2|^2-1", 2)
    p = np.array([1.0, 0.0, 0.0, 0.0])
    j = jet_lift(ex, p, 3)
    assert abs(j.value) < 1e-15
    for i in range(4):
        fd = gc.central_difference(lambda q: ex.at_real(q), p, i)
        assert abs(j.grad().value[i] - fd) < 1e-7


def test_jet_lift_rejects_bad_arguments():
    ex = compile_expr("z1", 1)
    with pytest.raises(ValueError):
        jet_lift(ex, [0.0, 0.0], 0)
    with pytest.raises(ValueError):
        jet_lift(ex, [0.0], 2)


# ---------------------------------------------------------------------------
# weights and indexed tensors


def test_weights():
    w = gc.Weight.cr(1, 0) + gc.Weight.cr(0.5, -0.5)
    assert (w.w, w.wbar) == (1.5, -0.5)
    assert w.to_conformal() == gc.Weight.conformal(1)
    with pytest.raises(ValueError):
        gc.Weight.cr(0.5, 0)
    with pytest.raises(SlotMismatch):
        gc.Weight.cr(1, 0) + gc.Weight.conformal(1)


R_UP, R_DN = gc.Slot("real", True), gc.Slot("real", False)
H_DN, HB_DN = gc.Slot("holo", False), gc.Slot("antiholo", False)
H_UP, HB_UP = gc.Slot("holo", True), gc.Slot("antiholo", True)


def test_contract_identity_and_inverse_pairing(rng):
    v = gc.IndexedTensor((R_UP,), rng.normal(size=4), gc.Weight.conformal(1))
    delta = gc.IndexedTensor((R_UP, R_DN), np.eye(4), gc.Weight.conformal(-1))
    out = gc.contract(delta, v, [(1, 0)])
    assert np.allclose(out.data, v.data)
    assert out.weight == gc.Weight.conformal(0)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    h = a @ a.conj().T + np.eye(2)
    hd = gc.IndexedTensor((H_DN, HB_DN), h)
    hu = gc.IndexedTensor((HB_UP, H_UP), np.linalg.inv(h))
    assert np.allclose(gc.contract(hd, hu, [(1, 0)]).data, np.eye(2))


def test_contract_rejects_mismatched_slots(rng):
    a = gc.IndexedTensor((R_UP,), rng.normal(size=3))
    b = gc.IndexedTensor((R_UP,), rng.normal(size=3))
    with pytest.raises(SlotMismatch):
        gc.contract(a, b, [(0, 0)])
    c = gc.IndexedTensor((H_DN,), rng.normal(size=3))
    with pytest.raises(SlotMismatch):
        gc.contract(a, c, [(0, 0)])
    with pytest.raises(SlotMismatch):
        gc.IndexedTensor((R_UP, R_DN), np.zeros(3))


@settings(max_examples=40, deadline=None)
@given(st.lists(coef, min_size=9, max_size=9), st.lists(coef, min_size=3, max_size=3),
       st.lists(coef, min_size=3, max_size=3), coef)
def test_contract_is_bilinear(m, u, w, s):
    M = gc.IndexedTensor((R_UP, R_DN), np.reshape(m, (3, 3)))
    U = gc.IndexedTensor((R_UP,), np.array(u))
    W = gc.IndexedTensor((R_UP,), np.array(w))
    UW = gc.IndexedTensor((R_UP,), np.array(u) + s * np.array(w))
    lhs = gc.contract(M, UW, [(1, 0)]).data
    rhs = gc.contract(M, U, [(1, 0)]).data + s * gc.contract(M, W, [(1, 0)]).data
    assert np.allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(rhs).max()))


def test_contract_is_associative(rng):
    A = gc.IndexedTensor((R_UP, R_DN), rng.normal(size=(3, 3)))
    B = gc.IndexedTensor((R_UP, R_DN), rng.normal(size=(3, 3)))
    v = gc.IndexedTensor((R_UP,), rng.normal(size=3))
    left = gc.contract(gc.contract(A, B, [(1, 0)]), v, [(1, 0)])
    right = gc.contract(A, gc.contract(B, v, [(1, 0)]), [(1, 0)])
    assert np.allclose(left.data, right.data)


def test_raise_lower_round_trip(rng):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    h = gc.IndexedTensor((H_DN, HB_DN), a @ a.conj().T + np.eye(2))
    v = gc.IndexedTensor((H_UP,), rng.normal(size=2) + 1j * rng.normal(size=2))
    low = gc.raise_lower(v, h, 0)
    assert low.slots == (HB_DN,)
    back = gc.raise_lower(low, h, 0)
    assert back.slots == (H_UP,)
    assert np.max(np.abs(back.data - v.data)) < 1e-12


def test_raise_lower_singular_metric():
    g = gc.IndexedTensor((R_DN, R_DN), np.diag([1.0, 1e-14]))
    v = gc.IndexedTensor((R_UP,), np.ones(2))
    with pytest.raises(SingularMetric):
        gc.raise_lower(v, g, 0)


def test_tractor_X_is_null():
    _, _, cd = upstairs("sphere(1)", 0)
    A_UP, A_DN = gc.Slot("conftractor", True), gc.Slot("conftractor", False)
    H = gc.IndexedTensor((A_DN, A_DN), cd.H.value)
    X = gc.IndexedTensor((A_UP,), cd.X_col)
    Xl = gc.raise_lower(X, H, 0)
    assert abs(gc.contract(X, Xl, [(0, 0)]).data) < 1e-12


def test_ell_and_kappa_null_on_sphere():
    _, _, cd = upstairs("sphere(1)", 1)
    g = gc.IndexedTensor((R_DN, R_DN), cd.lc.g.value)
    ell = gc.IndexedTensor((R_DN,), cd.ell.value)
    ell_up = gc.raise_lower(ell, g, 0)
    assert abs(gc.contract(ell_up, ell, [(0, 0)]).data) < 1e-10
    k = gc.IndexedTensor((R_UP,), cd.kappa_up)
    assert abs(gc.contract(k, gc.raise_lower(k, g, 0), [(0, 0)]).data) < 1e-10


# ---------------------------------------------------------------------------
# point fields


def _poly_field():
    def ev(p, order):
        x = gc.jet_space(2, max(order, 1)).variables(p)
        return gc.stack([x[0] * x[1], x[0] ** 3])
    return gc.PointField(ev, 3)


def test_field_derivative_basics():
    const = gc.PointField(lambda p, k: gc.jet_space(2, max(k, 1)).constant(2.0), 2)
    assert gc.field_derivative(const, 0).value([0.3, 0.4]) == pytest.approx(0)
    coords = gc.PointField(lambda p, k: gc.jet_space(2, max(k, 1)).variables(p), 2)
    for j in range(2):
        assert np.allclose(gc.field_derivative(coords, j).value([0.3, 0.4]), np.eye(2)[:, j])
    f = _poly_field()
    df = gc.field_derivative(f, 0)
    assert np.allclose(df.value([2.0, 5.0]), [5.0, 12.0])
    with pytest.raises(DepthExceeded):
        f([0.0, 0.0], 4)
    last = gc.field_derivative(gc.field_derivative(gc.field_derivative(f, 0), 0), 0)
    with pytest.raises(DepthExceeded):
        gc.field_derivative(last, 0)


def test_point_field_is_pure():
    f = _poly_field()
    a, b = f([0.7, -0.1], 2).c, f([0.7, -0.1], 2).c
    assert np.array_equal(a, b)


def test_levi_metric_derivative_vs_central_differences():
    patch = manifold_from_name("ellipsoid(1, 1, 2)")
    x0 = sample_points(patch, 1, 3)[0]
    d0 = pseudohermitian(patch, x0, 4)
    chart = d0.chart

    def ev(u, order):
        x = chart.to_ambient(patch, u, guess=x0[chart.solved])
        return pseudohermitian(patch, x, max(order + 2, 4), chart=chart).h

    field = gc.PointField(ev, 2)
    u0 = chart.to_chart(x0)
    for i in range(u0.size):
        jet = gc.field_derivative(field, i).value(u0)
        fd = gc.central_difference(field.value, u0, i, step=1e-4)
        assert gc.rel_err(jet, fd) < 1e-6


def test_rel_err_and_maxabs():
    assert gc.rel_err([1.0, 2.0], [1.0, 2.0]) == 0
    assert gc.rel_err([0.0], [4.0]) == pytest.approx(1.0)
    assert gc.maxabs(np.array([-3.0, 2.0])) == 3.0
    assert math.isclose(gc.rel_err([1e-3], [0.0]), 1e-3)
