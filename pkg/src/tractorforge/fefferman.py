"""Fefferman space over a pseudohermitian patch.

The chart on the circle bundle is ``(u, gamma)`` with ``u`` the base chart
and ``gamma`` the fibre angle of the trivialising density ``sigma_theta``;
in these coordinates ``kappa = d/dgamma`` and every metric component is
independent of ``gamma``.  Jets upstairs live in ``2n+2`` variables with
``gamma`` last, expanded about ``gamma = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geom_core as gc
from .cr_geometry import HypersurfacePatch, PseudohermitianData, pseudohermitian
from .cr_tractor import Density
from .errors import NotProjectable
from .geom_core import Jet, einsum, jet_space


@dataclass
class FeffermanPointData:
    """Upstairs data at the point over ``base.x`` with ``gamma = 0``."""

    base: PseudohermitianData
    order: int
    g: Jet = None
    ginv: Jet = None
    tau: Jet = None
    L: Jet = None
    theta: Jet = None
    dtheta: Jet = None
    kappa_up: np.ndarray = None
    kappa: Jet = None              # kappa_a
    extras: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def dim(self) -> int:
        return 2 * self.base.n + 2

    @property
    def space(self):
        return self.g.space

    def up(self, j: Jet) -> Jet:
        """Pull a base jet back to the Fefferman chart."""
        sp = jet_space(self.dim, self.order)
        return j.embed(sp, list(range(self.dim - 1)))

    def fiber_variable(self) -> Jet:
        sp = jet_space(self.dim, self.order)
        return sp.variable(self.dim - 1, 0.0)


def _pad_gamma(cov: Jet, value: float = 0.0) -> Jet:
    """Append a gamma component to a covector jet."""
    extra = cov[0] * 0.0 + value
    return gc.concat([cov, extra.reshape(1)], axis=0)


def tau_form(d: PseudohermitianData) -> Jet:
    """Base part of tau as a covector in u.

    In the phase convention of ``cr_geometry`` the fibre angle runs against
    the phase of the trivialising density, so the imaginary part enters with
    a minus sign; conformal flatness of the model pins this.
    """
    n = d.n
    E = d.coframe
    k = min(d.beta.order, d.P.order)
    beta_form = einsum("A,Ai->i", d.beta.truncate(k), E.truncate(k))
    return -beta_form.imag - (d.P.truncate(k) * d.theta.truncate(k)).real / (n + 2)


def levi_metric(d: PseudohermitianData) -> Jet:
    """L(X, Y) = 2 Re h(theta^alpha(X), conj theta^beta(Y)); annihilates the Reeb field."""
    n = d.n
    ta = d.coframe[list(range(1, n + 1))]
    k = min(ta.order, d.h.order)
    ta = ta.truncate(k)
    w = einsum("ab,ai->bi", d.h.truncate(k), ta)
    L = einsum("bi,bj->ij", w, ta.conj())
    return (L + L.conj()).real


def fefferman_point(patch: HypersurfacePatch, x, order: int = gc.DEFAULT_ORDER,
                    upsilon=None, phase=None, data: PseudohermitianData | None = None) -> FeffermanPointData:
    d = data if data is not None else pseudohermitian(patch, x, order, upsilon=upsilon, phase=phase)
    return fefferman_from_base(d)


def fefferman_from_base(d: PseudohermitianData) -> FeffermanPointData:
    fp = FeffermanPointData(d, d.order)
    m = 2 * d.n + 1
    tauM = tau_form(d)
    L = levi_metric(d)
    th = d.theta.real
    k = min(tauM.order, L.order)
    tauM, L, th = tauM.truncate(k), L.truncate(k), th.truncate(k)
    gb = L + 2 * (einsum("i,j->ij", tauM, th) + einsum("i,j->ij", th, tauM))
    c = np.zeros((m + 1, m + 1, gb.c.shape[-1]))
    c[:m, :m] = gb.c
    c[:m, m] = 2 * th.c
    c[m, :m] = 2 * th.c
    base_g = Jet(gb.space, k, c)
    fp.g = fp.up(base_g)
    fp.ginv = gc.inv(fp.g)
    fp.tau = fp.up(_pad_gamma(tauM, 1.0))
    fp.L = fp.up(L)
    fp.theta = fp.up(_pad_gamma(th))
    dth = d.dtheta.real
    c2 = np.zeros((m + 1, m + 1, dth.c.shape[-1]))
    c2[:m, :m] = dth.c
    fp.dtheta = fp.up(Jet(dth.space, dth.order, c2))
    kap = np.zeros(m + 1)
    kap[m] = 1.0
    fp.kappa_up = kap
    fp.kappa = einsum("ab,b->a", fp.g, kap)
    return fp


# ---------------------------------------------------------------------------
# lifts and descent


def lift_density(fp: FeffermanPointData, f: Density) -> Jet:
    """f(x) e^{i (w - w') gamma}: the lift in the trivialisation of the CR scale."""
    gam = fp.fiber_variable()
    return fp.up(f.f) * (1j * (f.w - f.wbar) * gam).exp()


def horizontal_lift(fp: FeffermanPointData, v: Jet, ell: Jet) -> Jet:
    """Lift of a base vector field in H into kappa-perp cap ell-perp."""
    vu = fp.up(v)
    k = min(vu.order, ell.order)
    vu = vu.truncate(k)
    lg = -einsum("i,i->", ell.truncate(k)[list(range(fp.dim - 1))], vu)
    return gc.concat([vu, lg.reshape(1)], axis=0)


def lift_H_section(fp: FeffermanPointData, xi: Jet, w: float, wbar: float, ell: Jet,
                   antiholomorphic: bool = False) -> Jet:
    """Lift xi^alpha Z_alpha (or xi^alphabar Z_alphabar) with the fibre factor of weight (w, w')."""
    d = fp.base
    n = d.n
    Zs = d.frame[list(range(n + 1, 2 * n + 1))] if antiholomorphic else d.frame[list(range(1, n + 1))]
    k = min(xi.order, Zs.order)
    v = einsum("a,ai->i", xi.truncate(k), Zs.truncate(k))
    lifted = horizontal_lift(fp, v, ell)
    gam = fp.fiber_variable()
    return lifted * (1j * (w - wbar) * gam).exp()


def descend_section(phi: Jet, connection_gamma: Jet | None = None, tol: float = 1e-8,
                    gamma_index: int = -1) -> np.ndarray:
    """Return the value of ``phi`` if it is parallel along the fibre, else raise NotProjectable.

    ``connection_gamma`` is the connection matrix in the fibre direction acting on
    the components of ``phi`` (None for densities).
    """
    dphi = phi.grad()
    der = dphi.value[..., gamma_index]
    if connection_gamma is not None:
        M = np.asarray(connection_gamma)
        der = der + M @ phi.value if phi.ndim == 1 else der + np.einsum("ij,...j->...i", M, phi.value)
    res = gc.maxabs(der)
    scale = max(1.0, gc.maxabs(phi.value))
    if res > tol * scale:
        raise NotProjectable(res)
    return phi.value


# ---------------------------------------------------------------------------
# metric, distinguished fields and projectors


def fefferman_metric(fp: FeffermanPointData) -> np.ndarray:
    """Value of g = pi*L + 4 tau . pi*theta at the point."""
    return fp.g.value.real


def signature(g: np.ndarray, tol: float = 1e-10) -> tuple[int, int]:
    ev = np.linalg.eigvalsh(0.5 * (g + g.T))
    return int((ev > tol).sum()), int((ev < -tol).sum())


def formula_metric(fp: FeffermanPointData) -> np.ndarray:
    """pi*L + 4 tau . theta with symmetrisation a.b = (ab + ba)/2."""
    tau, L, th = fp.tau.value.real, fp.L.value.real, fp.theta.value.real
    m = fp.dim - 1
    Lp = np.zeros((fp.dim, fp.dim))
    Lp[:m, :m] = L
    return Lp + 2.0 * (np.outer(tau, th) + np.outer(th, tau))


def tau_phase_residual(patch: HypersurfacePatch, x, phase: str, order: int = 5) -> float:
    """tau does not depend on the phase of sigma.

    Rotating sigma by e^{i phi} moves the fibre coordinate by phi, so the
    chart components differ exactly by d(phi).
    """
    d0 = pseudohermitian(patch, x, order)
    d1 = pseudohermitian(patch, x, order, phase=phase)
    t0, t1 = tau_form(d0), tau_form(d1)
    dphi = d1.extras["phase"].grad()
    k = min(t0.order, t1.order, dphi.order)
    return gc.maxabs((t1.truncate(k) + dphi.truncate(k) - t0.truncate(k)).c)


def kappa_ell(cd) -> dict:
    """kappa and ell with both index positions, plus their defining residuals."""
    fp = cd.fp
    g = cd.lc.g.value
    ku, kd = cd.kappa_up, cd.kappa.value
    lu, ld = cd.ell_up.value, cd.ell.value
    r = fp.base.reeb.value.real
    P = cd.P.value
    res = {
        "kappa_null": abs(ku @ g @ ku),
        "ell_null": abs(lu @ ld),
        "kappa_ell": abs(ku @ ld - 1),
        "sparling": abs(ku @ P @ ku - 1),
        "reeb_projection": gc.maxabs(2 * lu[: fp.dim - 1] - r),
        "kappa_theta": gc.maxabs(kd - 2 * fp.theta.value),
        "ell_tau": gc.maxabs(ld - fp.tau.value),
    }
    return {"kappa_up": ku, "kappa": kd, "ell_up": lu, "ell": ld, "residuals": res}


def projectors(cd) -> dict:
    """I^a_b = delta - kappa^a ell_b - ell^a kappa_b and the covector splitting."""
    I = cd.I.value
    ku, kd = cd.kappa_up, cd.kappa.value
    lu, ld = cd.ell_up.value, cd.ell.value

    def split(w):
        w = np.asarray(w)
        return (w @ ku) * ld, (w @ lu) * kd, w @ I

    s = np.linalg.svd(I, compute_uv=False)
    return {
        "I": I,
        "split": split,
        "rank": int((s > 1e-9 * s.max()).sum()),
        "idempotent": gc.maxabs(I @ I - I),
        "I_kappa": gc.maxabs(I @ ku),
        "ell_I": gc.maxabs(ld @ I),
    }


def conformal_rescale(fp: FeffermanPointData, upsilon: Jet) -> FeffermanPointData:
    """The same Fefferman chart with g replaced by e^(2 upsilon) g.

    Only the metric quantities are rescaled; tau, L and theta keep referring
    to the CR scale and are dropped.
    """
    k = min(upsilon.order, fp.g.order)
    e = (upsilon.truncate(k) * 2.0).exp()
    out = FeffermanPointData(fp.base, fp.order)
    out.g = fp.g.truncate(k) * e
    out.ginv = fp.ginv.truncate(k) * e.reciprocal()
    out.kappa_up = fp.kappa_up
    out.kappa = einsum("ab,b->a", out.g, fp.kappa_up)
    out.extras["upsilon"] = upsilon
    return out


def fiber_scan(f: Density, samples: int = 64) -> tuple[np.ndarray, bool]:
    """Values of the lift of f + conj(f) around the fibre, and whether they change sign."""
    gam = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    vals = 2 * np.real(complex(f.f.value) * np.exp(1j * (f.w - f.wbar) * gam))
    return vals, bool(vals.min() < 0 < vals.max())
