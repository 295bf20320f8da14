"""Conformal Killing fields on the Fefferman space.

Infinitesimal CR automorphisms of the base are given by holomorphic
ambient fields ``zdot``.  Their lift to the Fefferman chart is
``X + f d/dgamma`` with ``f`` integrated from the conformal Killing
equation.  The adjoint tractor of a conformal Killing field comes from the
tractor-D operator, and its splitting under ``J`` gives the three parts.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import geom_core as gc
from .conf_tractor import (ConfData, adjoint_derivative, adjoint_split, column_derivative, conf_data,
                           covector_derivative, projection, vector_derivative)
from .cr_geometry import HypersurfacePatch, PseudohermitianData, ambient_gradient, pseudohermitian
from .cr_tractor import frame_cov
from .errors import ConfigError, NotKilling
from .fefferman import FeffermanPointData, fefferman_from_base
from .geom_core import Jet, einsum
from .surface_dsl import CompiledExpression, compile_expr, complex_coordinates

KILLING_ORDER = 8


@dataclass
class KillingCandidate:
    """Holomorphic ambient field ``zdot(z)`` generating a CR automorphism."""

    name: str
    zdot: Callable[[list], list]
    source: str = "builtin"


def _matrix_generator(name: str, A: np.ndarray) -> KillingCandidate:
    """zdot_j = (A Z)_j - z_j (A Z)_last on homogeneous Z = (z, 1)."""
    A = np.asarray(A, dtype=complex)
    m = A.shape[0]

    def zdot(zs):
        Z = list(zs) + [1.0]
        AZ = [sum(A[i, k] * Z[k] for k in range(m) if A[i, k] != 0) for i in range(m)]
        return [AZ[j] - zs[j] * AZ[-1] for j in range(m - 1)]

    return KillingCandidate(name, zdot)


def model_generators(patch: HypersurfacePatch) -> list[KillingCandidate]:
    """Exact symmetry generators for the built-in quadric models."""
    n = patch.n
    kind = patch.name.split("(")[0]
    if kind == "sphere":
        m = n + 2
        E = lambda i, j: np.eye(m)[:, [i]] @ np.eye(m)[[j], :]
        rot = np.zeros((m, m), dtype=complex)
        rot[0, 0], rot[1, 1] = 1j, -1j
        return [
            _matrix_generator("rotation", rot),
            _matrix_generator("unitary-mix", E(0, 1) - E(1, 0)),
            _matrix_generator("boost", E(0, m - 1) + E(m - 1, 0)),
            _matrix_generator("boost-i", 1j * (E(0, m - 1) - E(m - 1, 0))),
        ]
    if kind in ("hyperquadric", "heisenberg"):
        p = patch.signature[0]
        eps1 = 1.0 if p >= 1 else -1.0

        def translation(zs):
            return [0 * zs[0]] * n + [0 * zs[0] + 1.0]

        def dilation(zs):
            return [zs[a] for a in range(n)] + [2.0 * zs[n]]

        def rotation(zs):
            return [1j * zs[0]] + [0 * zs[0]] * (n - 1) + [0 * zs[0]]

        def heis(zs):
            return [0 * zs[0] + 1.0] + [0 * zs[0]] * (n - 1) + [2j * eps1 * zs[0]]

        return [KillingCandidate("translation", translation), KillingCandidate("dilation", dilation),
                KillingCandidate("rotation", rotation), KillingCandidate("heisenberg", heis)]
    if kind == "ellipsoid":
        axes = [float(a) for a in patch.name[patch.name.index("(") + 1:-1].split(",")[1:]]
        out = []
        for j, a in enumerate(axes):
            if a == 1.0:
                out.append(KillingCandidate(f"rotation-{j + 1}", _phase_rotation(j)))
        for j in range(len(axes)):
            for k in range(j + 1, len(axes)):
                if axes[j] == axes[k]:
                    out.append(KillingCandidate(f"real-rotation-{j + 1}{k + 1}", _real_rotation(j, k)))
        return out
    return []


def _phase_rotation(j: int):
    def zdot(zs):
        return [1j * z if i == j else 0 * z for i, z in enumerate(zs)]
    return zdot


def _real_rotation(j: int, k: int):
    def zdot(zs):
        out = [0 * z for z in zs]
        out[j], out[k] = -zs[k], zs[j]
        return out
    return zdot


def candidate_from_exprs(exprs: Sequence[str | CompiledExpression], nvars: int, name: str = "user") -> KillingCandidate:
    """User field from DSL components ``zdot_1 .. zdot_(n+1)``."""
    if len(exprs) != nvars:
        raise ConfigError(f"expected {nvars} component expressions, got {len(exprs)}")
    comp = [e if isinstance(e, CompiledExpression) else compile_expr(e, nvars) for e in exprs]

    def zdot(zs):
        return [c(zs) for c in comp]

    return KillingCandidate(name, zdot, source="user-DSL")


# ---------------------------------------------------------------------------
# lift to the Fefferman chart


def _lie_covector(X: Jet, w: Jet) -> Jet:
    k = min(X.order, w.order) - 1
    dw = w.grad().truncate(k)                    # [i, k] = d_k w_i
    dX = X.grad().truncate(k)                    # [k, i] = d_i X^k
    Xk, wk = X.truncate(k), w.truncate(k)
    return einsum("ik,k->i", dw, Xk) + einsum("k,ki->i", wk, dX)


def _lie_sym2(X: Jet, T: Jet) -> Jet:
    k = min(X.order, T.order) - 1
    dT = T.grad().truncate(k)                    # [i, j, k]
    dX = X.grad().truncate(k)
    Xk, Tk = X.truncate(k), T.truncate(k)
    a = einsum("kj,ki->ij", Tk, dX)
    return einsum("ijk,k->ij", dT, Xk) + a + a.T


@dataclass
class LiftedField:
    name: str
    v: Jet                                       # components on the Fefferman chart
    base: Jet                                    # chart components downstairs
    lam: Jet                                     # L_X theta = lam theta
    diagnostics: dict = field(default_factory=dict)


def lift_candidate(fp: FeffermanPointData, cand: KillingCandidate) -> LiftedField:
    from .fefferman import levi_metric, tau_form

    d = fp.base
    X = d.X
    zs = complex_coordinates(X)
    zd = cand.zdot(zs)
    zd = [z if isinstance(z, Jet) else gc.lift(complex(z), X) for z in zd]
    amb = []
    for z in zd:
        amb += [z.real, z.imag]
    amb = gc.stack(amb)
    _, grad = ambient_gradient(d.patch.rho, X)
    tang = gc.maxabs(einsum("k,k->", grad.real.truncate(min(grad.order, amb.order)), amb.truncate(min(grad.order, amb.order))).c)
    Xc = amb[list(d.chart.free)]
    th = d.theta.real
    lth = _lie_covector(Xc, th)
    r = d.reeb.real
    k = lth.order
    lam = einsum("i,i->", lth, r.truncate(k))
    cr_res = gc.maxabs((lth - th.truncate(k) * lam).c)
    tb = tau_form(d)
    L = levi_metric(d)
    lt = _lie_covector(Xc, tb)
    lL = _lie_sym2(Xc, L)
    k = min(lt.order, lL.order)
    rk, thk = r.truncate(k), th.truncate(k)
    iL = einsum("ij,i->j", lL.truncate(k), rk)
    iLL = einsum("j,j->", iL, rk)
    df = -lt.truncate(k) - iL * 0.5 + thk * iLL * 0.25
    f, closed = gc.antiderivative(df)
    kv = min(f.order, Xc.order)
    base = gc.concat([Xc.truncate(kv), f.truncate(kv).reshape(1)], axis=0)
    v = fp.up(base) + 0j
    return LiftedField(cand.name, v, Xc, lam, {"tangency": tang, "cr_automorphism": cr_res, "closedness": closed})


def kappa_field(fp: FeffermanPointData) -> Jet:
    return gc.lift(fp.kappa_up.astype(complex), fp.g)


# ---------------------------------------------------------------------------
# conformal Killing equation and the splitting operator


def conformal_killing_residual(cd: ConfData, v: Jet) -> float:
    nv = vector_derivative(v, cd.lc)             # [a, b] = nabla_a v^b
    k = nv.order
    low = einsum("ab,cb->ac", nv, cd.lc.g.truncate(k))
    div = nv.trace()
    sym = low + low.T - cd.lc.g.truncate(k) * div * (2.0 / cd.dim)
    return gc.maxabs(sym.value)


def splitting(cd: ConfData, v: Jet) -> Jet:
    """s^A_B = -(1/(2n+2)) D_B Vt^A with Vt^A = Z^A_a v^a - X^A div(v)/(2n+2)."""
    d = cd.dim
    m = d                                        # = 2n + 2
    nv = vector_derivative(v, cd.lc)
    div = nv.trace()
    k = div.order
    col = gc.concat([(div * 0).reshape(1), v.truncate(k), (div * (-1.0 / m)).reshape(1)], axis=0)
    dV = column_derivative(col, cd.M)            # [a, B]
    ddV = dV.grad().transpose(2, 0, 1)            # [b, a, B] = d_b (nabla_a V)
    kk = ddV.order
    G, Mk, dVk = cd.lc.Gamma.truncate(kk), cd.M.truncate(kk), dV.truncate(kk)
    ddV = ddV - einsum("cba,cB->baB", G, dVk) + einsum("bBC,aC->baB", Mk, dVk)
    lap = einsum("ab,baB->B", cd.lc.ginv.truncate(kk), ddV)
    Jt = einsum("ab,ab->", cd.lc.ginv.truncate(kk), cd.P.truncate(kk))
    colk = col.truncate(kk)
    top = -(lap + colk * Jt)
    rows = [top.reshape(1, d + 2), dVk * m, (colk * m).reshape(1, d + 2)]
    D = gc.concat(rows, axis=0)                  # [A, B] = D_A Vt^B
    return D.T * (-1.0 / m)


def killing_tractor_residual(cd: ConfData, s: Jet) -> float:
    """nabla_a s - kt(Pi(s), a); the Killing tractor is parallel up to this insertion."""
    ds = adjoint_derivative(s, cd.M)
    nu = projection(s.value, cd.dim)
    ins = np.einsum("b,baij->aij", nu, cd.curvature.value)
    return gc.maxabs(ds.value - ins)


# ---------------------------------------------------------------------------
# decomposition


@dataclass
class Decomposition:
    part1: np.ndarray
    a: complex
    part3: np.ndarray
    diagnostics: dict


def decompose(cd: ConfData, v: Jet, s: Jet | None = None, tol: float = 1e-6) -> Decomposition:
    res = conformal_killing_residual(cd, v)
    if res > tol:
        raise NotKilling(res)
    s = splitting(cd, v) if s is None else s
    d = cd.dim
    J = cd.J.value
    sv = s.value
    su, a, c = adjoint_split(sv, J)
    part1 = projection(su, d)
    part3 = projection(c, d)
    kap = cd.kappa_up
    diag: dict[str, float] = {}
    diag["resum"] = gc.maxabs(part1 + a * kap + part3 - v.value)
    nv = vector_derivative(v, cd.lc)              # [a, b] = nabla_a v^b
    nk = cd.nabla_kappa_up.value                  # [a, b] = nabla_a kappa^b
    vv = v.value
    ell_u = cd.ell_up.value
    kl = cd.kappa.value
    # {s, J} carries v^b nabla_b kappa - kappa^b nabla_b v
    br = sv @ J - J @ sv
    diag["bracket_field"] = gc.maxabs(projection(br, d) - (vv @ nk - kap @ nv.value))
    # complex-linear part underlies (u + c kappa)/2
    u = vv - (kap @ nv.value) @ nk + (kl @ vv) * ell_u
    lin = su + a * J
    pl = projection(lin, d)
    I = cd.I.value
    diag["u_part"] = gc.maxabs(I @ (2 * pl) - I @ u)
    # conjugate-linear part underlies w / 2 on H
    w = I @ vv + (kap @ nv.value) @ nk
    diag["w_part"] = gc.maxabs(I @ (2 * part3) - w)
    # kappa_b v^b is constant along kappa
    kv = einsum("a,a->", cd.kappa.truncate(v.order), v.truncate(min(v.order, cd.kappa.order)))
    diag["kappa_v_descends"] = abs(complex(kv.grad().value @ kap))
    # informational: I u = nabla^c(kappa_b v^b) nabla_c kappa
    q = cd.lc.ginv.value @ kv.grad().value @ nk
    diag["u_gradient_info"] = gc.maxabs(cd.I.value @ u - q)
    # eigenrelation for w
    wj = _w_jet(cd, v)
    nw = vector_derivative(wj, cd.lc).value
    diag["w_eigen"] = gc.maxabs(kap @ nw + wj.value @ nk)
    # part1 descends: [kappa, part1] is vertical
    p1 = _projection_jet(cd, su_jet(cd, s))
    dp1 = p1.grad().value[:, d - 1]
    diag["part1_projectable"] = gc.maxabs(dp1[: d - 1])
    # B(s, J) constant and {s, J} parallel
    if s.order >= 1:
        Bj = einsum("ij,ji->", s, cd.J.truncate(min(s.order, cd.J.order)))
        diag["B_sJ_constant"] = gc.maxabs(Bj.grad().value)
        brj = gc.matmul(s.truncate(min(s.order, cd.J.order)), cd.J.truncate(min(s.order, cd.J.order)))
        brj = brj - gc.matmul(cd.J.truncate(brj.order), s.truncate(brj.order))
        diag["bracket_parallel"] = killing_tractor_residual(cd, brj)
    return Decomposition(part1, a, part3, diag)


def su_jet(cd: ConfData, s: Jet) -> Jet:
    k = min(s.order, cd.J.order)
    s, J = s.truncate(k), cd.J.truncate(k)
    JsJ = gc.matmul(J, gc.matmul(s, J))
    lin = (s - JsJ) * 0.5
    BJJ = -(2 * cd.n + 4)
    a = einsum("ij,ji->", lin, J) * (1.0 / BJJ)
    return lin - J * a


def _projection_jet(cd: ConfData, s: Jet) -> Jet:
    d = cd.dim
    return -(s[list(range(1, d + 1))][:, d + 1])


def _w_jet(cd: ConfData, v: Jet) -> Jet:
    """w^a = I^a_c v^c + (kappa^b nabla_b v^d) nabla_d kappa^a, as a jet."""
    nv = vector_derivative(v, cd.lc)
    nk = cd.nabla_kappa_up
    k = min(nv.order, nk.order, cd.I.order)
    kap = gc.lift(cd.kappa_up.astype(complex), nv.truncate(k))
    knv = einsum("b,bd->d", kap, nv.truncate(k))
    return einsum("ac,c->a", cd.I.truncate(k), v.truncate(k)) + einsum("d,da->a", knv, nk.truncate(k))


def w_alpha_residuals(cd: ConfData, v: Jet) -> dict[str, float]:
    """Descend w^alpha in E^alpha(-1,1) and check its two defining equations."""
    fp = cd.fp
    d = fp.base
    n = d.n
    D = fp.dim
    wj = _w_jet(cd, v)
    nk = cd.nabla_kappa_up
    k = min(wj.order, nk.order)
    wh = wj.truncate(k) - einsum("c,ca->a", wj.truncate(k), nk.truncate(k)) * 1j
    # component w^alpha = theta^alpha(dpi wh)
    th = fp.up(d.coframe[list(range(1, n + 1))])
    kk = min(th.order, wh.order)
    wal = einsum("ai,i->a", th.truncate(kk), wh[list(range(D - 1))].truncate(kk))
    eig = gc.maxabs(cd.kappa_up @ vector_derivative(wh, cd.lc).value + 1j * wh.value)
    down = gc.restrict(wal, d.X.space, list(range(D - 1)))
    # lower with h and differentiate in the Webster-Tanaka calculus
    kd = min(down.order, d.h.order)
    wl = einsum("ab,a->b", d.h.truncate(kd), down.truncate(kd))   # w_betabar
    t = gc.concat([(wl[0] * 0).reshape(1), (wl * 0), wl], axis=0)  # full frame covector
    cov = frame_cov(d, t, -1.0, 1.0).value                        # [A, B]
    hol = list(range(1, n + 1))
    ahol = list(range(n + 1, 2 * n + 1))
    Hi = d.hinv.value                                             # Hi[s, r] = h^{r sbar}
    # nabla_alpha w^beta = h^{beta gammabar} nabla_alpha w_gammabar
    Dab = np.einsum("gb,ag->ab", Hi, cov[np.ix_(hol, ahol)])
    tr = np.trace(Dab)
    r1 = gc.maxabs(Dab - np.eye(n) * tr / n)
    # nabla^alpha w^beta = h^{alpha gammabar} nabla_gammabar w^beta
    Dbb = np.einsum("gb,cg->cb", Hi, cov[np.ix_(ahol, ahol)])     # nabla_cbar w^b
    up = np.einsum("ca,cb->ab", Hi, Dbb)
    r2 = gc.maxabs(up + up.T)
    return {"holomorphic_eigen": eig, "trace_part": r1, "skew_part": r2}


# ---------------------------------------------------------------------------
# second-derivative identity


def second_derivative_identity(cd: ConfData, v: Jet, rho: np.ndarray | None = None,
                               weyl_terms: bool = True, tol: float | None = None) -> float:
    """Residual of the expansion of nabla_a nabla_b v^c for a conformal Killing field."""
    if tol is not None:
        res = conformal_killing_residual(cd, v)
        if res > tol:
            raise NotKilling(res)
    lc = cd.lc
    nv = vector_derivative(v, lc)                      # [b, c] = nabla_b v^c
    dnv = nv.grad().transpose(2, 0, 1)                 # [a, b, c]
    k = dnv.order
    G, nvk = lc.Gamma.truncate(k), nv.truncate(k)
    lhs = dnv - einsum("eab,ec->abc", G, nvk) + einsum("cae,be->abc", G, nvk)
    lhs = lhs.value
    g, ginv = lc.g.value, lc.ginv.value
    P = cd.P.value
    vv = v.value
    vl = g @ vv
    Pv = P @ vv
    if rho is None:
        div = nv.trace()
        ddiv = div.grad().value
        rho = -ddiv / cd.dim - Pv
    rho_up = ginv @ rho
    d = cd.dim
    eye = np.eye(d)
    Pmix = P @ ginv                                    # P_a^c
    rhs = (np.einsum("ab,c->abc", g, rho_up) - np.einsum("ac,b->abc", eye, rho)
           - np.einsum("ab,c->abc", P, vv) + np.einsum("ac,b->abc", Pmix, vl))
    if weyl_terms:
        C = cd.C.value                                 # C[a, b, c, d] = C_ab^c_d
        # C_b^{cd}_a v_d = g^{ce} C_{be}^d_a v_d
        rhs = rhs + np.einsum("ce,beda,d->abc", ginv, C, vl)
        rhs = rhs - np.einsum("a,bc->abc", rho, eye) - np.einsum("a,bc->abc", Pv, eye)
    return gc.maxabs(lhs - rhs)


def kappa_second_derivative_residual(cd: ConfData) -> float:
    """The kappa-variant: rho replaced by -ell and the last three summands dropped."""
    v = kappa_field(cd.fp)
    lc = cd.lc
    nv = vector_derivative(v, lc)
    dnv = nv.grad().transpose(2, 0, 1)
    k = dnv.order
    G, nvk = lc.Gamma.truncate(k), nv.truncate(k)
    lhs = (dnv - einsum("eab,ec->abc", G, nvk) + einsum("cae,be->abc", G, nvk)).value
    g, ginv = lc.g.value, lc.ginv.value
    P = cd.P.value
    vv = v.value
    vl = g @ vv
    rho = -cd.ell.value
    rho_up = ginv @ rho
    d = cd.dim
    eye = np.eye(d)
    rhs = (np.einsum("ab,c->abc", g, rho_up) - np.einsum("ac,b->abc", eye, rho)
           - np.einsum("ab,c->abc", P, vv) + np.einsum("ac,b->abc", P @ ginv, vl)
           + np.einsum("ce,beda,d->abc", ginv, cd.C.value, vl))
    return gc.maxabs(lhs - rhs)


# ---------------------------------------------------------------------------
# normal conformal Killing forms


def antisymmetrize(T: np.ndarray) -> np.ndarray:
    k = T.ndim
    out = np.zeros_like(T)
    for perm in itertools.permutations(range(k)):
        sign = np.linalg.det(np.eye(k)[list(perm)])
        out = out + sign * np.transpose(T, perm)
    return out / math.factorial(k)


def _antisym_jet(T: Jet) -> Jet:
    k = T.ndim
    acc = None
    for perm in itertools.permutations(range(k)):
        sign = round(np.linalg.det(np.eye(k)[list(perm)]))
        term = T.transpose(perm) * float(sign)
        acc = term if acc is None else acc + term
    return acc * (1.0 / math.factorial(k))


def nck_form(cd: ConfData, j: int) -> np.ndarray:
    """kappa_[a (nabla kappa)_{a1 b1} ... (nabla kappa)_{aj bj]}, a (2j+1)-form."""
    if j < 0 or j > cd.n + 1:
        raise ValueError(f"j must lie in 0..{cd.n + 1}")
    if 2 * j + 1 > cd.dim:
        return np.zeros((cd.dim,) * (2 * j + 1), dtype=complex)   # degree exceeds the dimension
    T = cd.kappa.value
    nk = cd.nabla_kappa.value
    for _ in range(j):
        T = np.multiply.outer(T, nk)
    return antisymmetrize(T) if T.ndim > 1 else T


def wedge_power(cd: ConfData, k: int) -> Jet:
    """J_low wedge ... wedge J_low (k factors), a tractor 2k-form jet."""
    J = cd.J_low
    T = J
    for _ in range(k - 1):
        T = einsum("AB,CD->ABCD", T, J) if T.ndim == 2 else _outer(T, J)
    return _antisym_jet(T) if k > 1 else J


def wedge_power_value(cd: ConfData, k: int) -> np.ndarray:
    """Point value of ``wedge_power`` without carrying the jet."""
    J = cd.J_low.value
    T = J
    for _ in range(k - 1):
        T = np.multiply.outer(T, J)
    return antisymmetrize(T) if k > 1 else J


def _outer(T: Jet, J: Jet) -> Jet:
    letters = "abcdefghijklmnop"[:T.ndim]
    return einsum(f"{letters},xy->{letters}xy", T, J)


def form_projection(F: np.ndarray, d: int) -> np.ndarray:
    """F(X, Z_a1, ..., Z_ak): insert X into the first slot, Z's into the rest."""
    rho = d + 1
    out = F[rho]
    idx = (slice(1, d + 1),) * (F.ndim - 1)
    return out[idx]


def form_derivative(F: Jet, M: Jet) -> Jet:
    """nabla_a of a lowered tractor form."""
    dF = F.grad()
    k = dF.order
    r = F.ndim
    Fk, Mk = F.truncate(k), M.truncate(k)
    letters = "bcdefghij"[:r]
    out = dF.transpose((r,) + tuple(range(r)))
    for pos in range(r):
        src = letters[:pos] + "y" + letters[pos + 1:]
        out = out - einsum(f"{src},ay{letters[pos]}->a{letters}", Fk, Mk)
    return out


def nck_proportionality(cd: ConfData, j: int = 1) -> tuple[complex, float]:
    """Least-squares constant c with form = c * projection, and the fit residual."""
    if 2 * j + 1 > cd.dim:
        raise ValueError(f"a {2 * j + 1}-form vanishes in dimension {cd.dim}; no constant to fit")
    form = nck_form(cd, j)
    F = wedge_power_value(cd, j + 1)
    proj = form_projection(F, cd.dim)
    a = proj.ravel()
    b = form.ravel()
    den = np.vdot(a, a)
    if abs(den) < 1e-300:
        return complex("nan"), float("inf")
    c = np.vdot(a, b) / den
    return c, gc.maxabs(b - c * a) / max(gc.maxabs(b), 1e-300)
