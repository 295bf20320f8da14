import dataclasses

import numpy as np
import pytest

from conftest import base, patch, points
from tractorforge import geom_core as gc
from tractorforge.cr_geometry import (coframe_residuals, connection_residuals, integrability_residual,
                                      levi_form, levi_identity_residual, manifold_from_name, patch_from_rho,
                                      pseudohermitian, sample_points, tnorm_residual, tspe_residual)
from tractorforge.errors import CriticalPoint, Degenerate, ManifoldError
from tractorforge.surface_dsl import compile_expr

MANIFOLDS = ("sphere(1)", "sphere(2)", "ellipsoid(1, 1, 2)", "ellipsoid(2, 1, 2, 3)", "heisenberg(1)",
             "hyperquadric(1,1)")
UPSILON = "0.3*re(z1) + 0.2*im(z2)^2"


def test_registry_names():
    assert manifold_from_name("sphere(2)").n == 2
    assert manifold_from_name("ellipsoid(1, 1, 2)").name == "ellipsoid(1, 1, 2)"
    assert manifold_from_name("hyperquadric(1,1)").signature == (1, 1)
    for bad in ("sphere", "torus(1)", "sphere(0)", "ellipsoid(1, 1)", "ellipsoid(1, 1, -2)", "sphere(1.5)"):
        with pytest.raises(ManifoldError):
            manifold_from_name(bad)


@pytest.mark.parametrize("name", MANIFOLDS)
def test_sample_points_lie_on_the_surface(name):
    p = patch(name)
    pts = points(name)
    assert len(pts) == 20
    assert max(abs(p.rho_real(x)) for x in pts) < 1e-10
    again = sample_points(p, 20, 7)
    assert all(np.array_equal(a, b) for a, b in zip(pts, again))


@pytest.mark.parametrize("name", MANIFOLDS)
def test_frame_identities_at_twenty_points(name):
    worst = {"tnorm": 0.0, "levi": 0.0, "theta_alpha(r)": 0.0, "H01": 0.0, "integrable": 0.0, "connection": 0.0}
    for i in range(20):
        d = base(name, i)
        worst["tnorm"] = max(worst["tnorm"], tnorm_residual(d))
        worst["levi"] = max(worst["levi"], levi_identity_residual(d))
        cf = coframe_residuals(d)
        worst["theta_alpha(r)"] = max(worst["theta_alpha(r)"], cf["theta_alpha(r)"])
        worst["H01"] = max(worst["H01"], cf["annihilates H01"])
        assert cf["span det"] > 1e-6
        worst["integrable"] = max(worst["integrable"], max(integrability_residual(d)))
        worst["connection"] = max(worst["connection"], max(connection_residuals(d).values()))
    assert worst["tnorm"] < 1e-10
    assert worst["levi"] < 1e-9
    assert worst["theta_alpha(r)"] < 1e-12
    assert worst["H01"] < 1e-10
    assert worst["integrable"] < 1e-9
    assert worst["connection"] < 1e-8


@pytest.mark.parametrize("name, sig", [("sphere(1)", (1, 0)), ("sphere(2)", (2, 0)), ("heisenberg(1)", (1, 0)),
                                       ("hyperquadric(1,1)", (1, 1)), ("ellipsoid(2, 1, 2, 3)", (2, 0))])
def test_levi_signature(name, sig):
    for i in range(10):
        h, got = levi_form(base(name, i))
        assert got == sig
        assert np.allclose(h, h.conj().T)


def test_theta_annihilates_H_and_reeb_is_transverse_on_sphere():
    d = pseudohermitian(patch("sphere(1)"), [1.0, 0.0, 0.0, 0.0], 4)
    V = d.frame.value
    assert gc.maxabs(d.theta.value @ V[1:].T) < 1e-12
    assert abs(d.theta.value @ d.reeb.value - 1) < 1e-12
    # Hopf direction at (1, 0) is i z, i.e. d/dy1; in the chart y1 is a free coordinate
    X = d.X.grad().value                                  # ambient components per chart direction
    r_amb = X @ d.reeb.value
    assert abs(abs(r_amb[1]) - np.linalg.norm(r_amb)) < 1e-12


def test_contact_form_rescales_with_the_defining_function():
    sph = patch("sphere(1)")
    scaled = patch_from_rho("(2 + |z1|^2)*(|z1|^2 + |z2|^2 - 1)", 1)
    factor = compile_expr("2 + |z1|^2", 2)
    for x in sample_points(sph, 10, 3):
        d0 = pseudohermitian(sph, x, 3)
        d1 = pseudohermitian(scaled, x, 3, chart=d0.chart)
        lam = factor.at_real(x).real
        assert gc.maxabs(d1.theta.value - lam * d0.theta.value) < 1e-10


def test_integrability_detects_a_twisted_frame():
    d = base("sphere(2)", 0)
    n = d.n
    m = 2 * n + 1
    c = d.c.value
    assert integrability_residual(d)[0] < 1e-12
    partial = []
    for eps in (1e-3, 2e-3, 4e-3):
        Q = np.eye(m, dtype=complex)
        Q[1, 2 + n] = eps                                  # Z'_1 = Z_1 + eps Z_2bar
        Qi = np.linalg.inv(Q)
        twisted = np.einsum("Aa,Bb,abc,cC->ABC", Q, Q, c, Qi)
        fake = dataclasses.replace(d, c=gc.lift(twisted, d.c))
        partial.append(integrability_residual(fake)[0])
    assert partial[0] > 1e-5
    assert partial[1] / partial[0] == pytest.approx(2, rel=1e-6)
    assert partial[2] / partial[0] == pytest.approx(4, rel=1e-6)


def test_zero_upsilon_reproduces_the_data():
    x = points("ellipsoid(1, 1, 2)")[2]
    p = patch("ellipsoid(1, 1, 2)")
    d0 = pseudohermitian(p, x, 6)
    d1 = pseudohermitian(p, x, 6, upsilon="0")
    for field in ("theta", "reeb", "h", "A", "P_ab", "P", "T", "S"):
        assert gc.maxabs(getattr(d1, field).value - getattr(d0, field).value) < 1e-12


def test_change_of_contact_form():
    p = patch("ellipsoid(1, 1, 2)")
    U = compile_expr(UPSILON, 2)
    for x in points("ellipsoid(1, 1, 2)")[:10]:
        d0 = pseudohermitian(p, x, 5)
        d1 = pseudohermitian(p, x, 5, upsilon=UPSILON)
        e = np.exp(U.at_real(x).real)
        assert gc.maxabs(d1.theta.value - e * d0.theta.value) < 1e-12
        assert tnorm_residual(d1) < 1e-10
        assert gc.maxabs(d1.reeb.value - d0.reeb.value / e) > 1e-4
        # Levi form on H^{1,0} scales by e^Upsilon
        V = d0.frame.value[1:d0.n + 1]
        L0 = V @ d0.dtheta.value @ V.conj().T
        L1 = V @ d1.dtheta.value @ V.conj().T
        assert gc.maxabs(L1 - e * L0) < 1e-10


def test_sphere_is_torsion_free_with_constant_S():
    S = []
    for i in range(20):
        d = base("sphere(1)", i)
        assert gc.maxabs(d.A.value) < 1e-9
        assert gc.maxabs(d.T.value) < 1e-9
        S.append(complex(d.S.value))
    assert max(abs(s - S[0]) for s in S) < 1e-9


def test_ellipsoid_is_not_pseudo_einstein():
    assert min(tspe_residual(base("ellipsoid(2, 1, 2, 3)", i))[1] for i in range(20)) > 1e-3


def test_rescaled_sphere_acquires_torsion():
    x = points("sphere(1)")[0]
    d = pseudohermitian(patch("sphere(1)"), x, 5, upsilon=UPSILON)
    assert tspe_residual(d)[0] > 1e-3


def test_critical_and_degenerate_points():
    with pytest.raises(CriticalPoint):
        pseudohermitian(patch_from_rho("|z1|^2 + |z2|^2", 1), np.zeros(4), 3)
    flat = patch_from_rho("im(z2) - re(z1)^4", 1)
    with pytest.raises(Degenerate):
        levi_form(pseudohermitian(flat, np.zeros(4), 4))


def test_point_off_the_surface_is_rejected():
    with pytest.raises(ManifoldError):
        pseudohermitian(patch("sphere(1)"), [2.0, 0.0, 0.0, 0.0], 3)
