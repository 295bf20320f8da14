"""Acceptance criteria A1..A12.

Each test evaluates one criterion over the stated sample set, appends a
single PASS/FAIL line to the terminal summary, then asserts.
"""
from __future__ import annotations

import numpy as np

from conftest import ACCEPTANCE_LINES, base, patch, points, upstairs
from tractorforge import conf_tractor as ct
from tractorforge import cr_tractor as crt
from tractorforge import geom_core as gc
from tractorforge.fefferman import tau_phase_residual
from tractorforge.killing import (KILLING_ORDER, decompose, form_derivative, lift_candidate, model_generators,
                                  nck_proportionality, second_derivative_identity, splitting, w_alpha_residuals,
                                  wedge_power)
from tractorforge.oracle import fd_oracle
from tractorforge.report import TEST_DENSITY, TEST_PHASE, TEST_WEIGHTS

N = 20
SPHERES = ("sphere(1)", "sphere(2)")
ELLIPSOIDS = ("ellipsoid(1, 1, 2)", "ellipsoid(2, 1, 2, 3)")
BUILTINS = SPHERES + ELLIPSOIDS + ("heisenberg(1)", "hyperquadric(1,1)")


def verdict(tag: str, checks: dict[str, tuple[float, str, float]]) -> None:
    """checks maps label -> (observed, comparison '<' or '>', threshold)."""
    failed = []
    parts = []
    for label, (obs, op, thr) in checks.items():
        ok = obs < thr if op == "<" else obs > thr
        parts.append(f"{label}={obs:.2e}{op}{thr:.0e}")
        if not ok:
            failed.append(label)
    line = f"{tag} {'PASS' if not failed else 'FAIL'}  " + "; ".join(parts)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert not failed, line


def worst(values) -> float:
    return float(max(values))


def density(d, w, wb):
    return crt.density_from_expr(d, TEST_DENSITY, w, wb)


def test_a01_model_flatness():
    checks = {}
    for name in SPHERES:
        cr, conf = [], []
        for i in range(N):
            d, _, cd = upstairs(name, i)
            cr.append(gc.maxabs(crt.curvature(d).value))
            conf.append(ct.curvature_checks(cd)["norm"])
        checks[f"{name} |Omega|"] = (worst(cr), "<", 1e-6)
        checks[f"{name} |kappa~|"] = (worst(conf), "<", 1e-6)
    verdict("A1 model flatness", checks)


def test_a02_normality():
    name = ELLIPSOIDS[0]
    cr, conf = [], []
    for i in range(N):
        d, _, cd = upstairs(name, i)
        cr.append(crt.normality_residual(d))
        conf.append(ct.conf_normality_residual(cd))
    verdict("A2 normality", {"CR": (worst(cr), "<", 1e-6), "conformal": (worst(conf), "<", 1e-6)})


def test_a03_kappa_suite():
    limits = {"nabla_J": 1e-7, "kappa_null": 1e-8, "divergence": 1e-8, "killing_sym": 1e-8,
              "ell_schouten": 1e-7, "sparling": 1e-7, "kappa_geodesic": 1e-7, "ell_kappa": 1e-7,
              "kappa_ell_parallel": 1e-7}
    obs = {k: 0.0 for k in limits}
    for name in ELLIPSOIDS:
        for i in range(N):
            _, _, cd = upstairs(name, i)
            res = dict(ct.kappa_identities(cd))
            res["nabla_J"] = ct.J_residuals(cd)["nabla_J"]
            for k in limits:
                obs[k] = max(obs[k], res[k])
    verdict("A3 kappa identities", {k: (obs[k], "<", limits[k]) for k in limits})


def test_a04_kappa_theta():
    keys = ("kappa_theta", "nabla_kappa_dtheta", "reeb_projection")
    obs = {k: 0.0 for k in keys}
    for name in BUILTINS[:4]:
        for i in range(N):
            _, _, cd = upstairs(name, i)
            res = ct.kappa_identities(cd)
            for k in keys:
                obs[k] = max(obs[k], res[k])
    verdict("A4 kappa and theta", {k: (obs[k], "<", 1e-7) for k in keys})


def test_a05_metric_routes_and_tau():
    routes, phase = [], []
    for name in ELLIPSOIDS:
        for i in range(N):
            _, _, cd = upstairs(name, i)
            routes.append(ct.metric_routes(cd))
            phase.append(tau_phase_residual(patch(name), points(name)[i], TEST_PHASE))
    verdict("A5 Fefferman metric", {"two routes": (worst(routes), "<", 1e-7),
                                    "tau phase independence": (worst(phase), "<", 1e-9)})


def test_a06_schouten_reassembly():
    full, trace = [], []
    for name in ELLIPSOIDS:
        for i in range(N):
            _, _, cd = upstairs(name, i)
            f, t = ct.schouten_reassembly(cd)
            full.append(f)
            trace.append(t)
    verdict("A6 Schouten reassembly", {"full": (worst(full), "<", 1e-6), "trace": (worst(trace), "<", 1e-7)})


def test_a07_tractor_D_descent():
    single, double = [], []
    for name in ("sphere(1)",) + ELLIPSOIDS:
        for i in range(N):
            d, _, cd = upstairs(name, i)
            for w, wb in TEST_WEIGHTS:
                f = density(d, w, wb)
                single.append(worst(ct.tractor_D_descent(cd, f).values()))
                double.append(worst(ct.double_D_descent(cd, f).values()))
    verdict("A7 tractor-D descent", {"tractor-D": (worst(single), "<", 1e-6),
                                     "double-D": (worst(double), "<", 1e-6)})


def test_a08_eigenvalues():
    dens, hsec = [], []
    for name in ("sphere(1)",) + ELLIPSOIDS:
        for i in range(N):
            d, _, cd = upstairs(name, i)
            xi = gc.lift(np.arange(1, d.n + 1) * (1 + 0.5j), d.frame)
            for w, wb in TEST_WEIGHTS:
                dens.append(ct.density_eigen_residual(cd, density(d, w, wb)))
                for anti in (False, True):
                    hsec.append(ct.H_lift_eigen_residual(cd, xi, w, wb, anti))
    verdict("A8 eigenvalues", {"densities": (worst(dens), "<", 1e-8), "H sections": (worst(hsec), "<", 1e-8)})


def test_a09_killing_decomposition():
    name = "sphere(1)"
    gens = model_generators(patch(name))
    resum, proj, wres, second = [], [], [], []
    for i in range(N):
        _, fp, cd = upstairs(name, i, KILLING_ORDER)
        for cand in gens:
            v = lift_candidate(fp, cand).v
            dec = decompose(cd, v, splitting(cd, v))
            resum.append(dec.diagnostics["resum"])
            proj.append(dec.diagnostics["part1_projectable"])
            wres.append(worst(w_alpha_residuals(cd, v).values()))
            second.append(second_derivative_identity(cd, v))
    verdict("A9 Killing decomposition", {
        "generators": (float(len(gens)), ">", 2.5),
        "resum": (worst(resum), "<", 1e-7),
        "part1 projectable": (worst(proj), "<", 1e-6),
        "w identities": (worst(wres), "<", 1e-6),
        "second derivative": (worst(second), "<", 1e-5),
    })


def test_a10_einstein_scales():
    tspe, par, scan = [], [], []
    for name in SPHERES:
        for i in range(N):
            d = base(name, i)
            s = crt.holomorphic_volume_scale(d)
            tspe.append(max(crt.tspe_residual(d)))
            par.append(crt.einstein_parallel_residual(d, s))
            scan.append(0.0 if crt.fiber_sign_changes(s, 64) else 1.0)
    defect = []
    for name in ELLIPSOIDS:
        for i in range(N):
            defect.append(max(crt.tspe_residual(base(name, i))))
    verdict("A10 Einstein scales", {
        "sphere TSPE": (worst(tspe), "<", 1e-8),
        "sphere parallel I": (worst(par), "<", 1e-7),
        "ellipsoid TSPE defect (min)": (float(min(defect)), ">", 1e-3),
        "fibres without sign change": (float(sum(scan)), "<", 0.5),
    })


def test_a11_normal_killing_forms():
    checks = {}
    for name in ELLIPSOIDS:
        wedge, fits, consts = [], [], []
        for i in range(N):
            _, _, cd = upstairs(name, i)
            wedge.append(gc.maxabs(form_derivative(wedge_power(cd, 2), cd.M).value))
            c, fit = nck_proportionality(cd, 1)
            fits.append(fit)
            consts.append(c)
        spread = max(abs(c - consts[0]) for c in consts) / abs(consts[0])
        checks[f"{name} nabla(J^J)"] = (worst(wedge), "<", 1e-6)
        checks[f"{name} fit"] = (worst(fits), "<", 1e-6)
        checks[f"{name} constant spread"] = (spread, "<", 1e-6)
    verdict("A11 normal Killing forms", checks)


def test_a12_finite_difference_oracle():
    checks = {}
    for name in BUILTINS:
        errs = [worst(fd_oracle(patch(name), x).values()) for x in points(name)]
        checks[name] = (worst(errs), "<", 1e-6)
    verdict("A12 derivative oracle", checks)
