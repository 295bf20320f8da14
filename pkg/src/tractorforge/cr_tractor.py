"""CR standard tractors in the splitting of a contact form.

Tractor components are columns ``(sigma, tau_1..tau_n, rho)``; weighted
components are taken relative to the trivialising density ``sigma_theta`` of
``E(1,0)`` attached to the contact form (see ``cr_geometry``), so a density of
weight (w, w') is stored as the function ``f / (sigma^w sigmabar^w')``.

Frame directions are indexed as in ``cr_geometry``: 0 is the Reeb field,
then ``Z_alpha`` and ``Z_alphabar``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geom_core as gc
from .cr_geometry import PseudohermitianData, pseudohermitian
from .errors import ZeroScale
from .geom_core import Jet, einsum, matmul
from .surface_dsl import CompiledExpression, compile_expr, complex_coordinates


# ---------------------------------------------------------------------------
# densities


@dataclass(frozen=True)
class Density:
    """Component function of a section of E(w, w') in the sigma trivialisation."""

    f: Jet
    w: float
    wbar: float


def density_from_expr(d: PseudohermitianData, expr: str | CompiledExpression,
                      w: float = 0.0, wbar: float = 0.0) -> Density:
    ex = expr if isinstance(expr, CompiledExpression) else compile_expr(expr, d.n + 1)
    val = ex(complex_coordinates(d.X))
    return Density(gc.lift(val, d.X) + 0j, w, wbar)


def full_gamma(d: PseudohermitianData) -> Jet:
    """Connection coefficients on the whole complex coframe, G[A, B, C].

    nabla_A omega_B = V_A omega_B - G[A, B, C] omega_C; the Reeb slot is parallel.
    """
    n = d.n
    G = d.gamma
    Gb = d.gamma_bar()
    m = 2 * n + 1
    c = np.zeros((m, m, m, G.c.shape[-1]), dtype=complex)
    c[:, 1:n + 1, 1:n + 1] = G.c
    c[:, n + 1:, n + 1:] = Gb.c
    return Jet(G.space, G.order, c)


def frame_cov(d: PseudohermitianData, t: Jet, w: float = 0.0, wbar: float = 0.0) -> Jet:
    """Covariant derivative of a weighted frame tensor with all lower frame slots.

    The new direction index comes first.
    """
    out = d.along(t)
    G = full_gamma(d)
    G = G.truncate(min(G.order, out.order))
    letters = "bcdefghijk"[:t.ndim]
    for pos in range(t.ndim):
        tgt = letters[:pos] + "z" + letters[pos + 1:]
        out = out - einsum(f"A{letters[pos]}z,{tgt}->A{letters}", G, t)
    if w or wbar:
        dens = d.beta * w + d.beta_bar() * wbar
        out = out + einsum(f"A,{letters}->A{letters}", dens, t)
    return out


def grad_density(d: PseudohermitianData, f: Density) -> Jet:
    """nabla_A f along every frame direction."""
    out = d.along(f.f)
    dens = d.beta * f.w + d.beta_bar() * f.wbar
    return out + dens * f.f


def hessian_density(d: PseudohermitianData, f: Density) -> Jet:
    """H[B, A] = nabla_B nabla_A f."""
    return frame_cov(d, grad_density(d, f), f.w, f.wbar)


def commutator_residual(d: PseudohermitianData, f: Density) -> float:
    """Residual of the commutator of nabla_alpha and nabla_betabar on a density."""
    n = d.n
    H = hessian_density(d, f)
    g = grad_density(d, f)
    k = H.order
    hol, ahol = list(range(1, n + 1)), list(range(n + 1, 2 * n + 1))
    lhs = H[hol][:, ahol] - H[ahol][:, hol].T
    dw = f.w - f.wbar
    rhs = (dw * d.P_ab.truncate(k) * f.f + dw / (n + 2) * d.P.truncate(k) * d.h.truncate(k) * f.f
           - 1j * d.h.truncate(k) * g[0])
    return gc.maxabs((lhs - rhs).value)


def laplacian_hol(d: PseudohermitianData, f: Density) -> Jet:
    """nabla^alpha nabla_alpha f = h^{alpha betabar} nabla_betabar nabla_alpha f."""
    n = d.n
    H = hessian_density(d, f)
    blk = H[list(range(n + 1, 2 * n + 1))][:, list(range(1, n + 1))]   # [betabar, alpha]
    return einsum("ba,ba->", d.hinv, blk)


# ---------------------------------------------------------------------------
# the tractor bundle in a scale


def tractor_metric(d: PseudohermitianData) -> Jet:
    """Matrix G with h(t, t') = t^T G conj(t')."""
    n = d.n
    k = d.hinv.order
    c = np.zeros((n + 2, n + 2, d.hinv.c.shape[-1]), dtype=complex)
    c[0, n + 1, 0] = 1.0
    c[n + 1, 0, 0] = 1.0
    c[1:n + 1, 1:n + 1] = d.hinv.T.c
    return Jet(d.hinv.space, k, c)


def cr_metric(d: PseudohermitianData, t, t2) -> complex:
    """sigma rho'bar + rho sigma'bar + h^{alpha betabar} tau_alpha tau'_betabar at the point."""
    G = tractor_metric(d).value
    t, t2 = np.asarray(t, dtype=complex), np.asarray(t2, dtype=complex)
    return complex(t @ G @ np.conj(t2))


@dataclass
class CRTractorFrame:
    """Injectors Y, W^alpha, Z as component columns and the dual rows from the metric."""

    Y: np.ndarray
    W: np.ndarray          # (n, n+2): W[alpha] is the column of W_Phi^alpha
    Z: np.ndarray
    Z_up: np.ndarray
    Y_up: np.ndarray
    W_up: np.ndarray       # (n, n+2): W_up[a] pairs to h^{alpha abar} tau_alpha
    G: np.ndarray

    def residuals(self, hinv: np.ndarray) -> dict[str, float]:
        return {
            "Y.Z^ = 1": abs(self.Z_up @ self.Y - 1),
            "Z^.Z = 0": abs(self.Z_up @ self.Z),
            "W block = h^-1": gc.maxabs(self.W_up @ self.W.T - hinv),
        }


def tractor_frame(d: PseudohermitianData) -> CRTractorFrame:
    n = d.n
    G = tractor_metric(d).value
    eye = np.eye(n + 2, dtype=complex)
    Y, Z = eye[0], eye[n + 1]
    W = eye[1:n + 1]
    # raising with the metric: X^Phi t_Phi = h(t, X)
    up = lambda col: G @ np.conj(col)
    Wup = np.array([up(W[a]) for a in range(n)])
    return CRTractorFrame(Y, W, Z, up(Z), up(Y), Wup, G)


def _zeros(d: PseudohermitianData, order: int, shape) -> np.ndarray:
    return np.zeros(tuple(shape) + (d.h.space.sizes[order],), dtype=complex)


def connection_matrices(d: PseudohermitianData) -> Jet:
    """M[A] with nabla_A t = V_A t + M[A] t on component columns."""
    n = d.n
    m = 2 * n + 1
    k = min(d.S.order, d.T.order, d.A.order, d.beta.order, d.gamma.order)
    cut = lambda j: j.truncate(k).c
    c = _zeros(d, k, (m, n + 2, n + 2))
    beta, betab = cut(d.beta), cut(d.beta_bar())
    G = cut(d.gamma)
    h, Hi = d.h.truncate(k), d.hinv.truncate(k)
    Pab = d.P_ab.truncate(k)
    P, S = cut(d.P), cut(d.S)
    T = d.T.truncate(k)
    A = d.A.truncate(k)
    Pmix = matmul(Pab, Hi).c                                   # P_beta^alpha at [beta, alpha]
    Tup = einsum("ba,b->a", Hi, T.conj()).c                    # T^alpha
    Abar_up = einsum("ga,bg->ba", Hi, A.conj()).c              # A_betabar^alpha at [beta, alpha]
    s, rho = 0, n + 1
    tau = slice(1, n + 1)
    eye = np.eye(n)
    one = np.zeros(c.shape[-1])
    one[0] = 1.0
    # weights and Webster-Tanaka part, all directions
    c[:, s, s] += beta
    c[:, tau, tau] += -G + eye[None, :, :, None] * beta[:, None, None, :]
    c[:, rho, rho] += -betab
    for b in range(n):
        Ah = 1 + b
        c[Ah, s, 1 + b] += -one
        c[Ah, tau, s] += 1j * A.c[:, b]
        c[Ah, rho, s] += T.c[b]
        c[Ah, rho, tau] += -Pmix[b]
        Aa = 1 + n + b
        c[Aa, tau, s] += Pab.c[:, b]
        c[Aa, tau, rho] += h.c[:, b]
        c[Aa, rho, s] += -np.conj(T.c[b])
        c[Aa, rho, tau] += 1j * Abar_up[b]
    ip = 1j * P / (n + 2)
    c[0, s, s] += ip
    c[0, s, rho] += -1j * one
    c[0, tau, s] += 2j * T.c
    c[0, tau, tau] += -1j * Pmix + eye[:, :, None] * ip
    c[0, rho, s] += 1j * S
    c[0, rho, tau] += 2j * Tup
    c[0, rho, rho] += ip
    return Jet(d.h.space, k, c)


def tractor_derivative(d: PseudohermitianData, t: Jet, M: Jet | None = None) -> Jet:
    """nabla_A t for a component-column field t; result [A, component]."""
    M = connection_matrices(d) if M is None else M
    out = d.along(t)
    return out + einsum("Aij,j->Ai", M.truncate(min(M.order, out.order)), t)


def curvature(d: PseudohermitianData, M: Jet | None = None) -> Jet:
    """Omega[A, B] = V_A M_B - V_B M_A + [M_A, M_B] - c_AB^C M_C."""
    M = connection_matrices(d) if M is None else M
    dM = d.along(M)
    k = dM.order
    Mk = M.truncate(k)
    comm = einsum("Aij,Bjk->ABik", Mk, Mk)
    c = d.c.truncate(k)
    return dM - dM.swapaxes(0, 1) + comm - comm.swapaxes(0, 1) - einsum("ABC,Cij->ABij", c, Mk)


def metric_compatibility_residual(d: PseudohermitianData, M: Jet | None = None) -> float:
    """V_A G - M_A^T G - G conj(M_Abar), max over directions."""
    M = connection_matrices(d) if M is None else M
    G = tractor_metric(d)
    dG = d.along(G)
    k = min(dG.order, M.order)
    Mk = M.truncate(k)
    Gk = G.truncate(k)
    Mbar = Mk[d.cidx].conj()
    res = dG.truncate(k) - einsum("Aji,jk->Aik", Mk, Gk) - einsum("ij,Ajk->Aik", Gk, Mbar)
    return gc.maxabs(res.value)


def curvature_trace_residual(d: PseudohermitianData, Om: Jet) -> float:
    """h^{alpha betabar} Omega_{alpha betabar} (the trace identity)."""
    n = d.n
    blk = Om[list(range(1, n + 1))][:, list(range(n + 1, 2 * n + 1))]
    tr = einsum("ba,abij->ij", d.hinv.truncate(blk.order), blk)
    return gc.maxabs(tr.value)


def curvature_values_su(d: PseudohermitianData, Om: Jet) -> dict[str, float]:
    """Complex trace and skew-Hermitian defect of Omega(xi, eta) for real frame pairs."""
    G = tractor_metric(d).value
    O = Om.value
    n = d.n
    m = 2 * n + 1
    cid = d.cidx
    worst_tr = 0.0
    worst_sk = 0.0
    for a in range(m):
        for b in range(m):
            X = O[a, b]
            worst_tr = max(worst_tr, abs(np.trace(X)))
            # Omega(V_a, V_b) with conj pair Omega(V_abar, V_bbar) must be skew for h
            Xb = O[cid[a], cid[b]]
            worst_sk = max(worst_sk, gc.maxabs(X.T @ G + G @ np.conj(Xb)))
    return {"trace": worst_tr, "skew": worst_sk}


# -- normality ---------------------------------------------------------------


def one_form_matrix(d: PseudohermitianData, phi: np.ndarray) -> np.ndarray:
    """Matrix of a one-form with frame components phi[A] as a filtration-raising element."""
    n = d.n
    Hi = d.hinv.value
    out = np.zeros((n + 2, n + 2), dtype=complex)
    out[1:n + 1, 0] = phi[1:n + 1]
    out[n + 1, 0] = -1j * phi[0]
    out[n + 1, 1:n + 1] = -(Hi.T @ phi[n + 1:])
    return out


def soldering_matrix(d: PseudohermitianData, xi: np.ndarray) -> np.ndarray:
    """Element of the adjoint bundle projecting to the vector with frame components xi."""
    n = d.n
    h = d.h.value
    out = np.zeros((n + 2, n + 2), dtype=complex)
    out[0, 1:n + 1] = -xi[1:n + 1]
    out[0, n + 1] = -1j * xi[0]
    out[1:n + 1, n + 1] = h @ xi[n + 1:]
    return out


def projection(d: PseudohermitianData, a: np.ndarray) -> np.ndarray:
    """Pi: read the vector part off the upper triangle."""
    n = d.n
    xi = np.zeros(2 * n + 1, dtype=complex)
    xi[1:n + 1] = -a[0, 1:n + 1]
    xi[0] = 1j * a[0, n + 1]
    xi[n + 1:] = np.linalg.solve(d.h.value, a[1:n + 1, n + 1])
    return xi


def normality_residual(d: PseudohermitianData, Om: Jet | None = None, scale_P: float = 0.0) -> float:
    """Max over frame vectors xi of the normalisation expression, with complex dual frames."""
    if Om is None:
        M = connection_matrices(d)
        if scale_P:
            M = perturb_P(d, M, scale_P)
        Om = curvature(d, M)
    O = Om.value
    m = 2 * d.n + 1
    eye = np.eye(m)
    etas = [one_form_matrix(d, eye[j]) for j in range(m)]
    worst = 0.0
    for k in range(m):
        xi = eye[k]
        A = soldering_matrix(d, xi)
        first = sum(etas[j] @ O[k, j] - O[k, j] @ etas[j] for j in range(m))
        second = np.zeros_like(first)
        for j in range(m):
            v = projection(d, etas[j] @ A - A @ etas[j])
            second = second + np.einsum("a,aij->ij", v, O[:, j])
        worst = max(worst, gc.maxabs(first + 0.5 * second))
    return worst


def perturb_P(d: PseudohermitianData, M: Jet, eps: float) -> Jet:
    """Connection with P_{alpha betabar} replaced by P_{alpha betabar} + eps h_{alpha betabar}."""
    n = d.n
    k = M.order
    c = M.c.copy()
    h = d.h.truncate(k).c
    for b in range(n):
        c[1 + n + b, 1:n + 1, 0] += eps * h[:, b]
        c[1 + b, n + 1, 1 + b] += -eps
    c[0, 1:n + 1, 1:n + 1] += -1j * eps * np.eye(n)[:, :, None] * (np.arange(c.shape[-1]) == 0)
    return Jet(M.space, k, c)


# -- change of scale ---------------------------------------------------------


def scale_change_matrix(d: PseudohermitianData, upsilon: str | CompiledExpression,
                        rescale: bool = True) -> Jet:
    """C with [t]_{e^U theta} = C [t]_theta.

    With ``rescale`` the result also accounts for sigma_hat = e^{-U/2} sigma, so it
    maps component functions; without it, it is the law on abstract densities.
    """
    n = d.n
    ex = upsilon if isinstance(upsilon, CompiledExpression) else compile_expr(upsilon, n + 1)
    U = gc.lift(ex(complex_coordinates(d.X)), d.X).real + 0j
    dU = d.along(U)
    k = min(dU.order, d.hinv.order)
    dU = dU.truncate(k)
    U = U.truncate(k)
    Hi = d.hinv.truncate(k)
    Ul = dU[list(range(1, n + 1))]                       # Upsilon_beta
    Ub = dU[list(range(n + 1, 2 * n + 1))]               # Upsilon_betabar
    Uup = einsum("ba,b->a", Hi, Ub)                      # Upsilon^alpha
    UU = einsum("a,a->", Ul, Uup)
    c = _zeros(d, k, (n + 2, n + 2))
    one = np.zeros(c.shape[-1])
    one[0] = 1.0
    s, rho = 0, n + 1
    c[s, s] = one
    c[1:n + 1, 1:n + 1] = np.eye(n)[:, :, None] * one
    c[1:n + 1, s] = Ul.c
    c[rho, rho] = one
    c[rho, 1:n + 1] = -Uup.c
    c[rho, s] = -0.5 * (UU + 1j * dU[0]).c
    C = Jet(d.h.space, k, c)
    if not rescale:
        return C
    up = (0.5 * U).exp()
    dn = (-0.5 * U).exp()
    fac = gc.stack([up] * (n + 1) + [dn])
    return einsum("i,ij->ij", fac, C)


def change_of_scale(d: PseudohermitianData, t, upsilon, rescale: bool = True) -> np.ndarray:
    """Components of the same tractor in the splitting of e^Upsilon theta (pointwise)."""
    C = scale_change_matrix(d, upsilon, rescale).value
    return C @ np.asarray(t, dtype=complex)


def covariance_residual(d: PseudohermitianData, dh: PseudohermitianData, upsilon) -> float:
    """Check hat M(X) = C M(X) C^-1 - X(C) C^-1 along the hatted frame."""
    C = scale_change_matrix(d, upsilon)
    M = connection_matrices(d)
    Mh = connection_matrices(dh)
    dC = C.grad()
    k = min(dC.order, M.order, Mh.order, 0)
    Ci = np.linalg.inv(C.value)
    Vh = dh.frame.value                                  # hatted frame in chart components
    E = d.coframe.value
    coeff = Vh @ E.T                                     # coeff[A, B] = E^B(Vh_A)
    worst = 0.0
    for a in range(Vh.shape[0]):
        MX = np.einsum("b,bij->ij", coeff[a], M.value)
        XC = np.einsum("ijv,v->ij", dC.value, Vh[a])
        pred = C.value @ MX @ Ci - XC @ Ci
        worst = max(worst, gc.maxabs(Mh.value[a] - pred))
    return worst


# ---------------------------------------------------------------------------
# tractor-D and double-D on densities


def cr_tractor_D(d: PseudohermitianData, f: Density) -> tuple[np.ndarray, np.ndarray]:
    """(D_Phi f, D_Phibar f) as component columns at the point.

    D_Phi f has weight (w-1, w'), D_Phibar f weight (w, w'-1).
    """
    n = d.n
    w, wb = f.w, f.wbar
    g = grad_density(d, f).value
    lap = laplacian_hol(d, f).value
    P = d.P.value
    fv = f.f.value
    out = np.zeros(n + 2, dtype=complex)
    out[0] = (n + w + wb) * w * fv
    out[1:n + 1] = (n + w + wb) * g[1:n + 1]
    out[n + 1] = -(1j * w * g[0] + lap + w * (1 + (wb - w) / (n + 2)) * P * fv)
    # conjugate-side operator: conj(D_Phi conj f) for the conjugate density
    fc = Density(f.f.conj(), wb, w)
    gc_ = grad_density(d, fc).value
    lapc = laplacian_hol(d, fc).value
    outb = np.zeros(n + 2, dtype=complex)
    outb[0] = (n + w + wb) * wb * fc.f.value
    outb[1:n + 1] = (n + w + wb) * gc_[1:n + 1]
    outb[n + 1] = -(1j * wb * gc_[0] + lapc + wb * (1 + (w - wb) / (n + 2)) * P * fc.f.value)
    return out, np.conj(outb)


def cr_double_D(d: PseudohermitianData, f: Density) -> dict[str, np.ndarray]:
    """The three double-D blocks as (n+2)x(n+2) component matrices.

    Keys: ``"PhiPsi"`` (both holomorphic tractor slots), ``"PhibarPsibar"``
    and ``"PhiPsibar"`` (first slot holomorphic, second antiholomorphic).
    Components are taken against the injectors Y, W, Z of each slot.
    """
    n = d.n
    w, wb = f.w, f.wbar
    g = grad_density(d, f).value
    fv = f.f.value
    P = d.P.value
    e = np.eye(n + 2, dtype=complex)
    Y, Z = e[0], e[n + 1]
    Wa = [e[1 + a] for a in range(n)]
    skew = lambda a, b: np.outer(a, b) - np.outer(b, a)
    # Z_[Psi Y_Phi] with Phi the first slot: 2 Z_[Psi Y_Phi] = Z_Psi Y_Phi - Z_Phi Y_Psi
    dPP = w * skew(Y, Z) * fv
    dBB = wb * skew(Y, Z) * fv
    for a in range(n):
        dPP = dPP + skew(Wa[a], Z) * g[1 + a]
        dBB = dBB + skew(Wa[a], Z) * g[1 + n + a]
    dPB = w * np.outer(Y, Z) * fv - wb * np.outer(Z, Y) * fv
    for a in range(n):
        dPB = dPB + np.outer(Wa[a], Z) * g[1 + a] - np.outer(Z, Wa[a]) * g[1 + n + a]
    dPB = dPB - np.outer(Z, Z) * (1j * g[0] + (wb - w) / (n + 2) * P * fv)
    return {"PhiPsi": dPP, "PhibarPsibar": dBB, "PhiPsibar": dPB}


# ---------------------------------------------------------------------------
# CR-Einstein scales


def tspe_residual(d: PseudohermitianData) -> tuple[float, float]:
    from .cr_geometry import tspe_residual as _t

    return _t(d)


def holomorphic_volume_scale(d: PseudohermitianData) -> Density:
    """The E(1,0) density whose -(n+2)nd power is dz_1 ^ ... ^ dz_(n+1)."""
    n = d.n
    X = d.X
    dX = X.grad()
    dz = gc.stack([dX[2 * j] + 1j * dX[2 * j + 1] for j in range(n + 1)])     # (j, i)
    Vs = d.frame[list(range(0, n + 1))]                                      # r, Z_alpha
    F = gc.det(einsum("ji,Ai->Aj", dz, Vs.truncate(min(Vs.order, dz.order))))
    dh = gc.det(d.h).real + 0j
    k = min(F.order, dh.order)
    f = F.truncate(k).power(-1.0 / (n + 2)) * dh.truncate(k).power(1.0 / (2 * (n + 2)))
    if abs(f.value) < 1e-10:
        raise ZeroScale("holomorphic volume scale vanishes")
    return Density(f, 1.0, 0.0)


def holo_system_residual(d: PseudohermitianData, s: Density) -> float:
    """Residual of nabla_betabar sigma = 0 and nabla_alpha nabla_beta sigma + i sigma A = 0."""
    n = d.n
    g = grad_density(d, s)
    H = hessian_density(d, s)
    hol, ahol = list(range(1, n + 1)), list(range(n + 1, 2 * n + 1))
    r1 = gc.maxabs(g.value[ahol])
    Hh = H.value[np.ix_(hol, hol)]
    r2 = gc.maxabs(Hh + 1j * s.f.value * d.A.value)
    return max(r1, r2)


def einstein_tractor_field(d: PseudohermitianData, s: Density) -> Jet:
    """I = (1/(n+1)) D_Phi sigma as a component-column jet field."""
    n = d.n
    if abs(s.f.value) < 1e-10:
        raise ZeroScale("scale vanishes at the point")
    g = grad_density(d, s)
    lap = laplacian_hol(d, s)
    k = lap.order
    f = s.f.truncate(k)
    P = d.P.truncate(k)
    w, wb = s.w, s.wbar
    comps = [(n + w + wb) * w * f]
    comps += [(n + w + wb) * g.truncate(k)[1 + a] for a in range(n)]
    comps += [-(1j * w * g.truncate(k)[0] + lap + w * (1 + (wb - w) / (n + 2)) * P * f)]
    return gc.stack(comps) / (n + 1)


def einstein_parallel_residual(d: PseudohermitianData, s: Density) -> float:
    I = einstein_tractor_field(d, s)
    return gc.maxabs(tractor_derivative(d, I).value)


def einstein_closed_form_residual(d: PseudohermitianData, s: Density) -> float:
    """|| I - (sigma Y - (1/n) P sigma Z) ||, valid when the scale is CR-Einstein."""
    n = d.n
    I = einstein_tractor_field(d, s).value
    ref = np.zeros(n + 2, dtype=complex)
    ref[0] = s.f.value
    ref[n + 1] = -d.P.value * s.f.value / n
    return gc.maxabs(I - ref)


def fiber_sign_changes(s: Density, samples: int = 64) -> bool:
    """Whether 2 Re(sigma e^{i gamma}) changes sign along the fibre."""
    gam = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    vals = 2 * np.real(s.f.value * np.exp(1j * gam))
    return bool(vals.min() < 0 < vals.max())
