"""Conformal standard tractors on a Fefferman chart.

Tractor columns are ordered ``(sigma, mu^1..mu^d, rho)`` for
``t = sigma Y + mu^b Z_b + rho X``.  The connection acts on columns,
``nabla_a t = d_a t + M[a] t``.  Tractor covectors are rows, and an adjoint
tractor ``s`` is the matrix ``s^A_B`` acting on columns.

A conformal scale is fixed by the metric jet ``g`` itself, so densities
are plain functions here.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import geom_core as gc
from .fefferman import FeffermanPointData
from .geom_core import Jet, einsum


# ---------------------------------------------------------------------------
# Riemannian layer


@dataclass
class LeviCivita:
    g: Jet
    ginv: Jet
    Gamma: Jet          # Gamma[c, a, b] = Gamma^c_ab

    @property
    def dim(self) -> int:
        return self.g.shape[0]


def levi_civita(g: Jet, ginv: Jet | None = None) -> LeviCivita:
    ginv = gc.inv(g) if ginv is None else ginv
    dg = g.grad()                                    # dg[a, b, c] = d_c g_ab
    # Gamma_{eab} = 1/2 (d_a g_eb + d_b g_ea - d_e g_ab)
    first = (dg.transpose(0, 2, 1) + dg - dg.transpose(2, 0, 1)) * 0.5
    Gam = einsum("ce,eab->cab", ginv, first)
    return LeviCivita(g, ginv, Gam)


def riemann(lc: LeviCivita) -> Jet:
    """R[a, b, c, d] = R_ab^c_d with [nabla_a, nabla_b] v^c = R_ab^c_d v^d."""
    G = lc.Gamma
    dG = G.grad()                                   # dG[c, b, d, a] = d_a Gamma^c_bd
    t1 = dG.transpose(3, 1, 0, 2)                   # [a, b, c, d] = d_a Gamma^c_bd
    t2 = t1.swapaxes(0, 1)
    GG = einsum("cae,ebd->abcd", G, G)
    return t1 - t2 + GG - GG.swapaxes(0, 1)


def ricci(R: Jet) -> Jet:
    return R.trace(0, 2)                            # Ric_bd = R_ab^a_d


def schouten(lc: LeviCivita, Ric: Jet | None = None) -> Jet:
    d = lc.dim
    Ric = ricci(riemann(lc)) if Ric is None else Ric
    k = Ric.order
    ginv, g = lc.ginv.truncate(k), lc.g.truncate(k)
    sc = einsum("ab,ab->", ginv, Ric)
    return (Ric - g * (sc / (2 * (d - 1)))) / (d - 2)


def weyl(R: Jet, P: Jet, lc: LeviCivita) -> Jet:
    """C_ab^c_d = R_ab^c_d - (delta_a^c P_bd - delta_b^c P_ad + g_bd P_a^c - g_ad P_b^c)."""
    d = lc.dim
    k = min(R.order, P.order)
    R, P = R.truncate(k), P.truncate(k)
    g, ginv = lc.g.truncate(k), lc.ginv.truncate(k)
    Pup = einsum("ae,ec->ac", P, ginv)              # P_a^c
    delta = np.eye(d)
    t1 = einsum("ac,bd->abcd", gc.lift(delta, P), P)
    t3 = einsum("bd,ac->abcd", g, Pup)
    corr = t1 - t1.swapaxes(0, 1) + t3 - t3.swapaxes(0, 1)
    return R - corr


def _common(*jets: Jet) -> list[Jet]:
    k = min(j.order for j in jets)
    return [j.truncate(k) for j in jets]


def density_laplacian(f: Jet, lc: LeviCivita) -> Jet:
    df = f.grad()
    hess, df, G, ginv = _common(df.grad(), df, lc.Gamma, lc.ginv)
    return einsum("ab,ab->", ginv, hess - einsum("cab,c->ab", G, df))


def covector_derivative(w: Jet, lc: LeviCivita) -> Jet:
    """nabla_a w_b stored as [a, b]."""
    dw, G, w = _common(w.grad().T, lc.Gamma, w)     # dw[a, b] = d_a w_b
    return dw - einsum("cab,c->ab", G, w)


def vector_derivative(v: Jet | np.ndarray, lc: LeviCivita) -> Jet:
    """nabla_a v^b stored as [a, b]."""
    if not isinstance(v, Jet):
        v = gc.lift(np.asarray(v, dtype=complex), lc.Gamma)
    dv, G, v = _common(v.grad().T, lc.Gamma, v)
    return dv + einsum("bac,c->ab", G, v)


# ---------------------------------------------------------------------------
# tractor layer


def tractor_metric(g: Jet) -> Jet:
    d = g.shape[0]
    c = np.zeros((d + 2, d + 2, g.c.shape[-1]), dtype=complex)
    c[1:d + 1, 1:d + 1] = g.c
    c[0, d + 1, 0] = 1.0
    c[d + 1, 0, 0] = 1.0
    return Jet(g.space, g.order, c)


def tractor_connection(lc: LeviCivita, P: Jet) -> Jet:
    """M[a] with rows/cols (sigma, mu, rho)."""
    d = lc.dim
    k = min(P.order, lc.Gamma.order)
    g, ginv, G, P = lc.g.truncate(k), lc.ginv.truncate(k), lc.Gamma.truncate(k), P.truncate(k)
    Pup = einsum("ae,eb->ab", P, ginv)
    nc = P.c.shape[-1]
    c = np.zeros((d, d + 2, d + 2, nc), dtype=complex)
    mu = slice(1, d + 1)
    for a in range(d):
        c[a, 0, mu] = -g.c[a]
        c[a, mu, 0] = Pup.c[a]
        c[a, mu, mu] = G.c[:, a, :]
        c[a, 1 + a, d + 1, 0] = 1.0
        c[a, d + 1, mu] = -P.c[a]
    return Jet(P.space, k, c)


def tractor_curvature(M: Jet) -> Jet:
    """kt[a, b] = d_a M_b - d_b M_a + [M_a, M_b]."""
    dM = M.grad()                                   # [b, i, j, a] = d_a M_b
    t = dM.transpose(3, 0, 1, 2)                    # [a, b, i, j]
    MM = einsum("aik,bkj->abij", M, M)
    return t - t.swapaxes(0, 1) + MM - MM.swapaxes(0, 1)


def adjoint_derivative(S: Jet, M: Jet) -> Jet:
    """nabla_a S for an endomorphism jet; [a, i, j]."""
    dS, Mk, Sk = _common(S.grad().transpose(2, 0, 1), M, S)
    return dS + einsum("aik,kj->aij", Mk, Sk) - einsum("ik,akj->aij", Sk, Mk)


def column_derivative(t: Jet, M: Jet) -> Jet:
    dt, Mk, t = _common(t.grad().T, M, t)
    return dt + einsum("aij,j->ai", Mk, t)


def row_derivative(V: Jet, M: Jet) -> Jet:
    """nabla_a V_B = d_a V_B - V_C M_a^C_B, for a weight-independent covector in a scale."""
    dV, Mk, V = _common(V.grad().T, M, V)
    return dV - einsum("j,aji->ai", V, Mk)


def killing_form(s, t) -> complex:
    """B(s, t) = tr(s t) on the real tractor fibre."""
    return complex(np.trace(np.asarray(s) @ np.asarray(t)))


def metric_compatibility_residual(M: Jet, H: Jet) -> float:
    dH = H.grad().transpose(2, 0, 1)
    k = min(dH.order, M.order)
    dH = dH.truncate(k)
    Mk, Hk = M.truncate(k), H.truncate(k)
    res = dH - einsum("aki,kj->aij", Mk, Hk) - einsum("ik,akj->aij", Hk, Mk)
    return gc.maxabs(res.value)


# ---------------------------------------------------------------------------
# the whole package at one Fefferman point


def _unit(d: int, slot: int) -> np.ndarray:
    e = np.zeros(d + 2, dtype=complex)
    e[slot] = 1.0
    return e


@dataclass
class ConfData:
    fp: FeffermanPointData
    extras: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.fp.dim

    @property
    def n(self) -> int:
        return self.fp.n

    # slots
    @property
    def s_sigma(self) -> int:
        return 0

    @property
    def s_rho(self) -> int:
        return self.dim + 1

    def s_mu(self, a: int) -> int:
        return 1 + a

    @cached_property
    def lc(self) -> LeviCivita:
        return levi_civita(self.fp.g, self.fp.ginv)

    @cached_property
    def R(self) -> Jet:
        return riemann(self.lc)

    @cached_property
    def Ric(self) -> Jet:
        return ricci(self.R)

    @cached_property
    def P(self) -> Jet:
        return schouten(self.lc, self.Ric)

    @cached_property
    def C(self) -> Jet:
        return weyl(self.R, self.P, self.lc)

    @cached_property
    def H(self) -> Jet:
        return tractor_metric(self.fp.g)

    @cached_property
    def Hinv(self) -> Jet:
        return gc.inv(self.H)

    @cached_property
    def M(self) -> Jet:
        return tractor_connection(self.lc, self.P)

    @cached_property
    def curvature(self) -> Jet:
        return tractor_curvature(self.M)

    # distinguished fields
    @property
    def kappa_up(self) -> np.ndarray:
        return self.fp.kappa_up

    @cached_property
    def kappa(self) -> Jet:
        return self.fp.kappa

    @cached_property
    def nabla_kappa(self) -> Jet:
        """nabla_a kappa_b as [a, b]."""
        return covector_derivative(self.kappa, self.lc)

    @cached_property
    def nabla_kappa_up(self) -> Jet:
        """nabla_a kappa^b as [a, b]."""
        return vector_derivative(self.kappa_up, self.lc)

    @cached_property
    def ell(self) -> Jet:
        """ell_a = P_ab kappa^b."""
        return einsum("ab,b->a", self.P, gc.lift(self.kappa_up.astype(complex), self.P))

    @cached_property
    def ell_up(self) -> Jet:
        k = self.ell.order
        return einsum("ab,b->a", self.lc.ginv.truncate(k), self.ell)

    @cached_property
    def I(self) -> Jet:
        """I^a_b stored as [a, b]."""
        k = self.ell.order
        kap = gc.lift(self.kappa_up.astype(complex), self.ell)
        kl = self.kappa.truncate(k)
        eye = gc.lift(np.eye(self.dim, dtype=complex), self.ell)
        return eye - einsum("a,b->ab", kap, self.ell) - einsum("a,b->ab", self.ell_up, kl)

    # tractor frame in rows/columns
    @property
    def X_col(self) -> np.ndarray:
        return _unit(self.dim, self.s_rho)

    @property
    def Y_col(self) -> np.ndarray:
        return _unit(self.dim, self.s_sigma)

    @property
    def X_row(self) -> np.ndarray:
        return _unit(self.dim, self.s_sigma)

    @property
    def Y_row(self) -> np.ndarray:
        return _unit(self.dim, self.s_rho)

    def Z_row(self, a: int) -> np.ndarray:
        """Z_A^a."""
        return _unit(self.dim, self.s_mu(a))

    # J
    @cached_property
    def J_low(self) -> Jet:
        return J_lowered(self)

    @cached_property
    def J(self) -> Jet:
        """J^A_B as a matrix acting on columns."""
        k = self.J_low.order
        return gc.matmul(self.Hinv.truncate(k), self.J_low)

    @cached_property
    def J2(self) -> Jet:
        return J_from_projectors(self)


def conf_data(fp: FeffermanPointData) -> ConfData:
    return ConfData(fp)


# ---------------------------------------------------------------------------
# J by two routes


def J_lowered(cd: ConfData) -> Jet:
    """J_AB = 2 Y_[A Z_B]^b kappa_b + Z_A^a Z_B^b nabla_a kappa_b + 2 X_[A Z_B]^b P_bc kappa^c."""
    d = cd.dim
    k = min(cd.nabla_kappa.order, cd.ell.order)
    nk, kap, ell = cd.nabla_kappa.truncate(k), cd.kappa.truncate(k), cd.ell.truncate(k)
    c = np.zeros((d + 2, d + 2, nk.c.shape[-1]), dtype=complex)
    mu = slice(1, d + 1)
    rho, sig = d + 1, 0
    # Y_A picks rho, X_A picks sigma, Z_A^a picks mu^a
    c[rho, mu] += kap.c
    c[mu, rho] -= kap.c
    c[mu, mu] += nk.c
    c[sig, mu] += ell.c
    c[mu, sig] -= ell.c
    return Jet(nk.space, k, c)


def J_from_projectors(cd: ConfData) -> Jet:
    """J^A_B = X^A L_B - K^A Y_B + Wt^A_a Wt_B^b nabla^a kappa_b + Y^A K_B - L^A X_B."""
    d = cd.dim
    J = cd.J
    k = J.order
    Hk, Hi = cd.H.truncate(k), cd.Hinv.truncate(k)
    X, Y = gc.lift(cd.X_col, J), gc.lift(cd.Y_col, J)
    # K^A = X^B J_B^A, J_B^A = J_BC H^CA = -J^A_B
    K = -einsum("AB,B->A", J, X)
    L = -einsum("AB,B->A", J, Y)
    Kl, Ll = einsum("A,AB->B", K, Hk), einsum("A,AB->B", L, Hk)
    Xl, Yl = einsum("A,AB->B", X, Hk), einsum("A,AB->B", Y, Hk)
    I = cd.I.truncate(k)
    eye = gc.lift(np.eye(d + 2, dtype=complex), I)
    Zc = eye[list(range(1, d + 1))].T                     # Z^A_b as [A, b]
    # Wt_B^a = Z_B^b I^a_b, which equals Z_B^a - K_B ell^a - L_B kappa^a
    Zr = eye[list(range(1, d + 1))]                       # Z_B^b as [b, B]
    Wt_low = einsum("ab,bB->aB", I, Zr)                   # Wt_B^a as [a, B]
    Wt_up = einsum("Ab,ba->Aa", Zc, I)                    # Wt^A_a as [A, a] (I^b_a Z^A_b)
    nk = einsum("ac,cb->ab", cd.lc.ginv.truncate(k), cd.nabla_kappa.truncate(k))  # nabla^a kappa_b
    mid = einsum("Aa,aB->AB", Wt_up, einsum("ab,bB->aB", nk, Wt_low))
    return (einsum("A,B->AB", X, Ll) - einsum("A,B->AB", K, Yl) + mid
            + einsum("A,B->AB", Y, Kl) - einsum("A,B->AB", L, Xl))


def J_residuals(cd: ConfData) -> dict[str, float]:
    J = cd.J.value
    d = cd.dim
    H = cd.H.value
    dJ = adjoint_derivative(cd.J, cd.M)
    Kcol = -J @ cd.X_col
    return {
        "J_squared": gc.maxabs(J @ J + np.eye(d + 2)),
        "J_skew": gc.maxabs(H @ J + (H @ J).T),
        "B_JJ": abs(killing_form(J, J) + (2 * cd.n + 4)),
        "nabla_J": gc.maxabs(dJ.value),
        "Pi_J": gc.maxabs(Kcol[1:d + 1] - cd.kappa_up),
        "J_two_routes": gc.maxabs(cd.J.value - cd.J2.value),
    }


def projection(s: np.ndarray, d: int) -> np.ndarray:
    """Pi(s)^a = mu-part of X^B s_B^A = -(s X)."""
    s = np.asarray(s)
    return -(s[1:d + 1, d + 1])


# ---------------------------------------------------------------------------
# curvature checks


def curvature_checks(cd: ConfData) -> dict[str, float]:
    kt = cd.curvature.value
    J = cd.J.value
    d = cd.dim
    ik = np.einsum("a,abij->bij", cd.kappa_up, kt)
    comm = np.einsum("abik,kj->abij", kt, J) - np.einsum("ik,abkj->abij", J, kt)
    # complex trace of a complex-linear endomorphism: tr(s) and tr(J s) both vanish for su
    ctr = np.einsum("abii->ab", kt)
    jtr = np.einsum("ik,abki->ab", J, kt)
    return {
        "norm": gc.maxabs(kt),
        "i_kappa": gc.maxabs(ik),
        "complex_linear": gc.maxabs(comm),
        "trace": gc.maxabs(ctr),
        "J_trace": gc.maxabs(jtr),
    }


def _p_plus(cd: ConfData, j: int) -> np.ndarray:
    """Matrix of the dual basis element e^j in p_+: d_j-row of the Rho-block pattern."""
    d = cd.dim
    ginv = cd.lc.ginv.value
    E = np.zeros((d + 2, d + 2), dtype=complex)
    E[1:d + 1, 0] = ginv[j]
    E[d + 1, 1 + j] = -1.0
    return E


def conf_normality_residual(cd: ConfData, kt: np.ndarray | None = None) -> float:
    """max_a | sum_j [E^j, kt(a, j)] | with E^j the p_+ dual basis."""
    kt = cd.curvature.value if kt is None else kt
    d = cd.dim
    worst = 0.0
    for a in range(d):
        acc = np.zeros((d + 2, d + 2), dtype=complex)
        for j in range(d):
            E = _p_plus(cd, j)
            acc += E @ kt[a, j] - kt[a, j] @ E
        worst = max(worst, gc.maxabs(acc))
    return worst


def conj_linear_perturbation(cd: ConfData, eps: float, seed: int = 0) -> np.ndarray:
    """kt + eps * (conjugate-linear 2-form) built from a random h-skew endomorphism."""
    rng = np.random.default_rng(seed)
    d = cd.dim
    H = cd.H.value.real
    J = cd.J.value.real
    A = rng.normal(size=(d + 2, d + 2))
    s = np.linalg.solve(H, A - A.T)           # h-skew
    c = 0.5 * (s + J @ s @ J)                 # anticommutes with J
    kt = cd.curvature.value.copy()
    kt[0, 1] = kt[0, 1] + eps * c
    kt[1, 0] = kt[1, 0] - eps * c
    return kt


# ---------------------------------------------------------------------------
# splittings


def adjoint_split(s: np.ndarray, J: np.ndarray) -> tuple[np.ndarray, complex, np.ndarray]:
    """s = su + a J + c with c anticommuting with J and B(su, J) = 0."""
    s = np.asarray(s)
    J = np.asarray(J)
    conj_lin = 0.5 * (s + J @ s @ J)
    lin = s - conj_lin
    a = killing_form(lin, J) / killing_form(J, J)
    su = lin - a * J
    if abs(a.imag) < 1e-14 * max(1.0, abs(a)):
        a = a.real
    return su, a, conj_lin


def complexify_split(t: np.ndarray, J: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Columns: (1/2)(t - iJt), (1/2)(t + iJt)."""
    t = np.asarray(t, dtype=complex)
    Jt = np.asarray(J) @ t
    return 0.5 * (t - 1j * Jt), 0.5 * (t + 1j * Jt)


def complexify_split_row(V: np.ndarray, J: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rows: the holomorphic part is the one lowered from holomorphic columns."""
    V = np.asarray(V, dtype=complex)
    VJ = V @ np.asarray(J)
    return 0.5 * (V + 1j * VJ), 0.5 * (V - 1j * VJ)


# ---------------------------------------------------------------------------
# tractor-D and double-D on densities


def conf_tractor_D(cd: ConfData, f: Jet, w: float) -> Jet:
    """Row D_A f for a density of conformal weight w (components sigma, mu, rho)."""
    n = cd.n
    lap, Pk, ginv, df, f = _common(density_laplacian(f, cd.lc), cd.P, cd.lc.ginv, f.grad(), f)
    ptr = einsum("ab,ab->", ginv, Pk)
    top = -(lap + ptr * f * w)
    mid = df * (2 * n + 2 * w)
    bot = f * ((2 * n + 2 * w) * w)
    return gc.concat([top.reshape(1), mid, bot.reshape(1)], axis=0)


def conf_double_D(cd: ConfData, f: Jet, w: float) -> np.ndarray:
    """D_AB f = 2w X_[B Y_A] f + 2 X_[B Z_A]^a nabla_a f, value at the point (lower indices)."""
    d = cd.dim
    fv = complex(f.value)
    df = f.grad().value
    X, Y = cd.X_row, cd.Y_row
    Zf = np.zeros(d + 2, dtype=complex)
    Zf[1:d + 1] = df                               # Z_A^a nabla_a f
    out = w * (np.outer(Y, X) - np.outer(X, Y)) * fv
    out += np.outer(Zf, X) - np.outer(X, Zf)
    return out


def fundamental_derivative_density(cd: ConfData, s: Jet, f: Jet, w: float) -> complex:
    """D_s f = nu^a nabla_a f - (w/d) (nabla_a nu^a) f with nu = Pi(s).

    A weight-w density is f vol^(-w/d) in any scale, so this is its Lie
    derivative and does not depend on the scale.
    """
    d = cd.dim
    nu = -(s[list(range(1, d + 1))][:, d + 1])
    dnu = vector_derivative(nu, cd.lc)
    div = complex(dnu.trace().value)
    return complex(np.dot(nu.value, f.grad().value)) - (w / d) * div * complex(f.value)


# ---------------------------------------------------------------------------
# identities of the distinguished fields


def kappa_identities(cd: ConfData) -> dict[str, float]:
    """Killing, geodesic and Sparling-type identities for kappa and ell."""
    fp = cd.fp
    ku = cd.kappa_up
    g = cd.lc.g.value
    nk, nku = cd.nabla_kappa.value, cd.nabla_kappa_up.value
    P = cd.P.value
    ld, lu = cd.ell.value, cd.ell_up.value
    dell = covector_derivative(cd.ell, cd.lc).value
    return {
        "kappa_null": abs(ku @ g @ ku),
        "divergence": abs(np.trace(nku)),
        "killing_sym": gc.maxabs(nk + nk.T),
        "ell_schouten": gc.maxabs(ld - P @ ku),
        "sparling": abs(ku @ P @ ku - 1),
        "kappa_geodesic": gc.maxabs(ku @ nku),
        "ell_kappa": gc.maxabs(lu @ nku),
        "kappa_ell_parallel": gc.maxabs(ku @ dell),
        "square_minus_I": gc.maxabs(nku @ nku + cd.I.value.T),
        "kappa_theta": gc.maxabs(cd.kappa.value - 2 * fp.theta.value),
        "nabla_kappa_dtheta": gc.maxabs(nk - fp.dtheta.value),
        "reeb_projection": gc.maxabs(2 * lu[: cd.dim - 1] - fp.base.reeb.value),
    }


def metric_routes(cd: ConfData) -> float:
    """2 kappa.ell + h~ with h~ = I^T (pi*L) I, against pi*L + 4 tau.theta."""
    fp = cd.fp
    m = cd.dim - 1
    Lp = np.zeros((cd.dim, cd.dim))
    Lp[:m, :m] = fp.L.value
    I = cd.I.value
    ht = I.T @ Lp @ I
    kd, ld = cd.kappa.value, cd.ell.value
    tractor = np.outer(kd, ld) + np.outer(ld, kd) + ht
    tau, th = fp.tau.value, fp.theta.value
    formula = Lp + 2 * (np.outer(tau, th) + np.outer(th, tau))
    return gc.maxabs(tractor - formula)


def H_projector_rows(cd: ConfData, order: int | None = None) -> Jet:
    """Ia[alpha, b] = theta^alpha_a I^a_b with theta^alpha padded by a zero gamma slot."""
    fp = cd.fp
    d, n = fp.base, fp.n
    th = fp.up(d.coframe[list(range(1, n + 1))])
    th = gc.concat([th.T, (th[:, 0] * 0).reshape(1, n)], axis=0).T
    k = min(th.order, cd.I.order) if order is None else order
    return einsum("ab,bc->ac", th.truncate(k), cd.I.truncate(k))


def schouten_reassembly(cd: ConfData) -> tuple[float, float]:
    """Rebuild P~ from the pseudohermitian data; also the trace identity."""
    fp = cd.fp
    d = fp.base
    kl, ell = cd.kappa.value, cd.ell.value
    Ia = H_projector_rows(cd).value
    Ib = Ia.conj()
    T, A, Pab, S = d.T.value, d.A.value, d.P_ab.value, d.S.value
    sym = lambda M: 0.5 * (M + M.T)
    Pt = (np.outer(ell, ell) - 0.25 * S * np.outer(kl, kl)
          + 1j * sym(np.outer(kl, T @ Ia)) - 1j * sym(np.outer(kl, T.conj() @ Ib))
          + 0.5j * Ia.T @ A @ Ia - 0.5j * Ib.T @ A.conj() @ Ib
          + 0.5 * np.einsum("ab,ai,bj->ji", Pab, Ia, Ib)
          + 0.5 * np.einsum("ab,ai,bj->ji", Pab.conj(), Ib, Ia))
    full = gc.maxabs(Pt - cd.P.value)
    tr = abs(np.trace(cd.lc.ginv.value @ cd.P.value) - d.P.value)
    return full, tr


# ---------------------------------------------------------------------------
# CR correspondence


def density_eigen_residual(cd: ConfData, f) -> float:
    """D_J of a lifted density equals (w - w') i times it."""
    from .fefferman import lift_density

    ft = lift_density(cd.fp, f)
    lam = (f.w - f.wbar) * 1j
    DJ = fundamental_derivative_density(cd, cd.J, ft, f.w + f.wbar)
    nk = complex(ft.grad().value @ cd.kappa_up)
    return max(abs(DJ - lam * complex(ft.value)), abs(nk - lam * complex(ft.value)))


def H_lift_eigen_residual(cd: ConfData, xi: Jet, w: float, wbar: float, antiholomorphic: bool = False) -> float:
    from .fefferman import lift_H_section

    v = lift_H_section(cd.fp, xi, w, wbar, cd.ell, antiholomorphic=antiholomorphic)
    dv = vector_derivative(v, cd.lc).value
    lam = (w - wbar + (-1 if antiholomorphic else 1)) * 1j
    return gc.maxabs(cd.kappa_up @ dv - lam * v.value)


def _hol_row(V, J, conjugate: bool = False):
    sgn = -1j if conjugate else 1j
    if isinstance(V, Jet):
        return (V + einsum("A,AB->B", V, J) * sgn) * 0.5
    return 0.5 * (V + sgn * (V @ J))


def cr_row_basis(cd: ConfData, conjugate: bool = False) -> np.ndarray:
    """Holomorphic parts of Y, W~^alpha, X (rows), matching Y_Phi / 2, W_Phi^alpha, Z_Phi."""
    J = cd.J.value
    Ia = H_projector_rows(cd).value
    n = cd.n
    z = np.zeros(1)
    W = [np.concatenate([z, Ia[a].conj() if conjugate else Ia[a], z]) for a in range(n)]
    rows = [cd.Y_row] + W + [cd.X_row]
    return np.array([_hol_row(r, J, conjugate) for r in rows])


def cr_coordinates(cd: ConfData, V: np.ndarray, conjugate: bool = False) -> tuple[np.ndarray, float]:
    """Coefficients of a holomorphic row on (Y_Phi, W_Phi^alpha, Z_Phi) and the fit residual."""
    B = cr_row_basis(cd, conjugate)
    c = np.linalg.lstsq(B.T, V, rcond=None)[0]
    res = gc.maxabs(B.T @ c - V)
    c = c.copy()
    c[0] *= 0.5
    return c, res


def tractor_D_descent(cd: ConfData, f) -> dict[str, float]:
    """Conformal D_A of a lifted density against twice the CR D_Phi (and its conjugate)."""
    from .cr_tractor import cr_tractor_D
    from .fefferman import lift_density

    d = cd.fp.base
    ft = lift_density(cd.fp, f)
    DA = conf_tractor_D(cd, ft, f.w + f.wbar).value
    J = cd.J.value
    hol, ahol = complexify_split_row(DA, J)
    ch, rh = cr_coordinates(cd, hol, False)
    ca, ra = cr_coordinates(cd, ahol, True)
    Dp, Db = cr_tractor_D(d, f)
    return {"holomorphic": gc.maxabs(ch - 2 * Dp), "antiholomorphic": gc.maxabs(ca - 2 * Db),
            "fit": max(rh, ra)}


def double_D_descent(cd: ConfData, f) -> dict[str, float]:
    from .cr_tractor import cr_double_D
    from .fefferman import lift_density

    d = cd.fp.base
    ft = lift_density(cd.fp, f)
    DD = conf_double_D(cd, ft, f.w + f.wbar)
    ref = cr_double_D(d, f)
    J = cd.J.value
    out = {}
    for key, cA, cB in (("PhiPsi", False, False), ("PhibarPsibar", True, True), ("PhiPsibar", False, True)):
        sa = -1j if cA else 1j
        sb = -1j if cB else 1j
        Mx = 0.5 * (DD + sa * J.T @ DD)
        Mx = 0.5 * (Mx + sb * Mx @ J)
        BA, BB = cr_row_basis(cd, cA), cr_row_basis(cd, cB)
        pA, pB = np.linalg.pinv(BA.T), np.linalg.pinv(BB)
        c = pA @ Mx @ pB
        fit = gc.maxabs(BA.T @ c @ BB - Mx)
        c[0, :] *= 0.5
        c[:, 0] *= 0.5
        out[key] = gc.maxabs(c - ref[key])
        out[key + "_fit"] = fit
    return out


def lift_cr_tractor(cd: ConfData, t: Jet) -> Jet:
    """T_A = e^{i gamma} (2 sigma hol Y + tau_alpha hol W~^alpha + rho hol X) for t = (sigma, tau, rho)."""
    fp = cd.fp
    n, D = cd.n, cd.dim
    Ia = H_projector_rows(cd)
    k = min(cd.J.order, Ia.order)
    J = cd.J.truncate(k)
    Ia = Ia.truncate(k)
    e = np.eye(D + 2, dtype=complex)
    Yr, Xr = gc.lift(e[D + 1], J), gc.lift(e[0], J)
    zero = (Ia[0][0] * 0).reshape(1)
    W = [gc.concat([zero, Ia[a], zero], axis=0) for a in range(n)]
    hY, hX = _hol_row(Yr, J), _hol_row(Xr, J)
    tu = fp.up(t)
    T = hY * tu[0] * 2 + hX * tu[n + 1]
    for a in range(n):
        T = T + _hol_row(W[a], J) * tu[1 + a]
    ph = (fp.fiber_variable() * 1j).exp()
    return einsum("B,->B", T, ph.truncate(T.order))


def cr_tractor_descent(cd: ConfData, t: Jet) -> dict[str, float]:
    """Lifted CR tractor: parallel along kappa, and its derivatives descend to the CR connection."""
    from .cr_tractor import tractor_derivative
    from .fefferman import horizontal_lift

    fp = cd.fp
    d = fp.base
    T = lift_cr_tractor(cd, t)
    nT = row_derivative(T, cd.M).value
    fib = gc.maxabs(cd.kappa_up @ nT)
    crd = tractor_derivative(d, t).value
    worst, fit = 0.0, 0.0
    for A in range(2 * d.n + 1):
        vec = 2 * cd.ell_up.value if A == 0 else horizontal_lift(fp, d.frame[A], cd.ell).value
        c, r = cr_coordinates(cd, vec @ nT)
        worst = max(worst, gc.maxabs(c - crd[A]))
        fit = max(fit, r)
    return {"fiber": fib, "connection": worst, "fit": fit}
