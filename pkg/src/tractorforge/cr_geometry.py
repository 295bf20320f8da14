"""Pseudohermitian data of a real hypersurface M = {rho = 0} in C^(n+1).

Everything is computed as jets in a graph chart: one real ambient coordinate
is solved for, the remaining 2n+1 are the chart coordinates ``u``.  Frame
indices follow the layout ``0 -> r``, ``1..n -> Z_alpha``, ``n+1..2n -> Z_alphabar``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import geom_core as gc
from .errors import CriticalPoint, Degenerate, DepthExceeded, ManifoldError, RankDeficient
from .geom_core import Dual, Jet, einsum, jet_space, matmul
from .surface_dsl import CompiledExpression, compile_expr, complex_coordinates

SURFACE_TOL = 1e-12


# ---------------------------------------------------------------------------
# manifolds and sampling


@dataclass(frozen=True)
class HypersurfacePatch:
    """A hypersurface {rho = 0} with its CR dimension."""

    name: str
    rho: CompiledExpression
    n: int
    signature: tuple[int, int] | None = None
    scale: float = 0.8

    @property
    def ambient_dim(self) -> int:
        return 2 * self.n + 2

    def rho_real(self, x) -> float:
        return self.rho.at_real(x).real

    def gradient(self, x) -> np.ndarray:
        j = jet_lift_real(self.rho, x, 1)
        return np.real(j.grad().value)

    def check_real(self, x) -> float:
        return abs(self.rho.at_real(x).imag)


def jet_lift_real(expr: CompiledExpression, x, order: int) -> Jet:
    sp = jet_space(2 * expr.arity, order)
    out = expr(complex_coordinates(sp.variables(np.asarray(x, float))))
    if not isinstance(out, Jet):
        out = sp.constant(complex(out))
    return out


def sphere(n: int) -> HypersurfacePatch:
    src = " + ".join(f"|z{j + 1}|^2" for j in range(n + 1)) + " - 1"
    return HypersurfacePatch(f"sphere({n})", compile_expr(src, n + 1), n, (n, 0))


def ellipsoid(n: int, axes: Sequence[float]) -> HypersurfacePatch:
    """Real ellipsoid sum_j (x_j^2 + a_j y_j^2) = 1; a_j = 1 for all j is the sphere."""
    axes = [float(a) for a in axes]
    if len(axes) != n + 1 or min(axes) <= 0:
        raise ManifoldError(f"ellipsoid({n}, ...) needs {n + 1} positive axis parameters")
    terms = [f"re(z{j + 1})^2 + {a!r} * im(z{j + 1})^2" for j, a in enumerate(axes)]
    label = ", ".join(f"{a:g}" for a in axes)
    return HypersurfacePatch(f"ellipsoid({n}, {label})", compile_expr(" + ".join(terms) + " - 1", n + 1), n, (n, 0))


def hyperquadric(p: int, q: int) -> HypersurfacePatch:
    n = p + q
    if n < 1:
        raise ManifoldError("hyperquadric needs p + q >= 1")
    terms = [f"{'+' if a < p else '-'} |z{a + 1}|^2" for a in range(n)]
    src = " ".join(terms).lstrip("+ ").strip() + f" - im(z{n + 1})"
    return HypersurfacePatch(f"hyperquadric({p},{q})", compile_expr(src, n + 1), n, (p, q))


def heisenberg(n: int) -> HypersurfacePatch:
    hq = hyperquadric(n, 0)
    return HypersurfacePatch(f"heisenberg({n})", hq.rho, n, (n, 0))


REGISTRY_HELP = {
    "sphere(n)": "unit sphere sum |z_j|^2 = 1 in C^(n+1)",
    "ellipsoid(n, a1..a_{n+1})": "real ellipsoid sum (x_j^2 + a_j y_j^2) = 1",
    "heisenberg(n)": "Heisenberg model sum |z_alpha|^2 = Im z_(n+1)",
    "hyperquadric(p,q)": "hyperquadric of signature (p,q), n = p + q",
}


def manifold_from_name(spec: str) -> HypersurfacePatch:
    """Resolve a registry name such as ``sphere(2)`` or ``ellipsoid(1, 1, 2)``."""
    m = re.fullmatch(r"\s*([a-z]+)\s*\(([^)]*)\)\s*", spec)
    if not m:
        raise ManifoldError(f"cannot parse manifold name {spec!r}")
    kind, args = m.group(1), [a.strip() for a in m.group(2).split(",") if a.strip()]
    try:
        nums = [float(a) for a in args]
    except ValueError as exc:
        raise ManifoldError(f"non-numeric argument in {spec!r}") from exc

    def as_int(v):
        if v != int(v) or v < 0:
            raise ManifoldError(f"expected a non-negative integer in {spec!r}")
        return int(v)

    if kind == "sphere" and len(nums) == 1 and as_int(nums[0]) >= 1:
        return sphere(as_int(nums[0]))
    if kind == "ellipsoid" and len(nums) >= 2:
        n = as_int(nums[0])
        return ellipsoid(n, nums[1:])
    if kind == "heisenberg" and len(nums) == 1 and as_int(nums[0]) >= 1:
        return heisenberg(as_int(nums[0]))
    if kind == "hyperquadric" and len(nums) == 2:
        return hyperquadric(as_int(nums[0]), as_int(nums[1]))
    raise ManifoldError(f"unknown manifold {spec!r}; known: {', '.join(REGISTRY_HELP)}")


def patch_from_rho(source: str, n: int) -> HypersurfacePatch:
    return HypersurfacePatch(f"rho[{source}]", compile_expr(source, n + 1), n)


def _root_along(patch: HypersurfacePatch, x0: np.ndarray, k: int) -> np.ndarray | None:
    f = lambda t: patch.rho_real(np.where(np.arange(x0.size) == k, x0[k] + t, x0))
    ts = np.linspace(-3.0, 3.0, 121)
    vals = np.array([f(t) for t in ts])
    idx = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)
    if idx.size == 0:
        return None
    i = idx[np.argmin(np.abs(ts[idx]))]
    a, b = ts[i], ts[i + 1]
    fa = vals[i]
    for _ in range(80):
        mid = 0.5 * (a + b)
        fm = f(mid)
        if fm == 0:
            a = b = mid
            break
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b = mid
    t = 0.5 * (a + b)
    x = x0.copy()
    x[k] += t
    for _ in range(3):
        g = patch.gradient(x)[k]
        if abs(g) < 1e-14:
            break
        x[k] -= patch.rho_real(x) / g
    return x


def sample_points(patch: HypersurfacePatch, count: int, seed: int) -> list[np.ndarray]:
    """Deterministic surface points from 1D root solves along random coordinates."""
    rng = np.random.default_rng(seed)
    pts: list[np.ndarray] = []
    tries = 0
    while len(pts) < count:
        tries += 1
        if tries > 200 * max(count, 1):
            raise ManifoldError(f"could not sample {count} points on {patch.name}")
        x0 = rng.normal(size=patch.ambient_dim) * patch.scale
        k = int(rng.integers(patch.ambient_dim))
        x = _root_along(patch, x0, k)
        if x is None or abs(patch.rho_real(x)) > SURFACE_TOL:
            continue
        if patch.check_real(x) > SURFACE_TOL:
            raise ManifoldError(f"defining function of {patch.name} is not real-valued near {x}")
        g = patch.gradient(x)
        if np.linalg.norm(g) < 1e-6:
            continue
        gz = g[0::2] ** 2 + g[1::2] ** 2
        if gz.max() < 0.05 * np.linalg.norm(g) ** 2:
            continue
        pts.append(x)
    return pts


# ---------------------------------------------------------------------------
# charts


@dataclass(frozen=True)
class Chart:
    """Graph chart: real coordinate ``solved`` is a function of the others."""

    solved: int
    transverse: int
    free: tuple[int, ...]
    holo: tuple[int, ...]

    @staticmethod
    def at(patch: HypersurfacePatch, x) -> "Chart":
        g = patch.gradient(x)
        if np.linalg.norm(g) < 1e-10:
            raise CriticalPoint(f"d rho vanishes at {np.asarray(x)}")
        gz = g[0::2] ** 2 + g[1::2] ** 2
        j = int(np.argmax(gz))
        k = 2 * j if abs(g[2 * j]) >= abs(g[2 * j + 1]) else 2 * j + 1
        free = tuple(i for i in range(patch.ambient_dim) if i != k)
        holo = tuple(i for i in range(patch.n + 1) if i != j)
        return Chart(k, j, free, holo)

    def to_chart(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)[list(self.free)]

    def to_ambient(self, patch: HypersurfacePatch, u, guess: float | None = None) -> np.ndarray:
        """Solve for the missing coordinate by Newton iteration."""
        x = np.zeros(patch.ambient_dim)
        x[list(self.free)] = u
        x[self.solved] = 0.0 if guess is None else guess
        for _ in range(60):
            g = patch.gradient(x)[self.solved]
            if abs(g) < 1e-14:
                raise CriticalPoint("chart degenerates")
            step = patch.rho_real(x) / g
            x[self.solved] -= step
            if abs(step) < 1e-15:
                break
        return x


def embedding_jet(patch: HypersurfacePatch, chart: Chart, x, order: int) -> Jet:
    """Jet of the ambient real coordinates as functions of the chart coordinates."""
    m = patch.ambient_dim - 1
    sp = jet_space(m, order)
    u = sp.variables(chart.to_chart(x))
    comps: list[Jet | None] = [None] * patch.ambient_dim
    for v, i in enumerate(chart.free):
        comps[i] = u[v] + 0j
    y = sp.constant(complex(x[chart.solved]))
    g0 = patch.gradient(x)[chart.solved]
    for _ in range(order + 2):
        comps[chart.solved] = y
        X = gc.stack(comps)
        F = patch.rho(complex_coordinates(X)).real
        y = y - F / g0
        y = Jet(sp, order, y.c.real + 0j)
    comps[chart.solved] = y
    return gc.stack(comps)


def ambient_gradient(expr: CompiledExpression, X: Jet) -> tuple[Jet, Jet]:
    """Value and real ambient gradient of ``expr`` composed with the embedding jet."""
    m = X.shape[0]
    sp = X.space
    zs = []
    for j in range(m // 2):
        e = np.zeros(m, dtype=complex)
        e[2 * j] = 1.0
        e[2 * j + 1] = 1j
        zs.append(Dual(X[2 * j] + 1j * X[2 * j + 1], sp.constant(e, X.order)))
    out = expr(zs)
    return out.val, out.grad


# ---------------------------------------------------------------------------
# pseudohermitian data


def _conj_index(n: int) -> np.ndarray:
    return np.array([0] + list(range(n + 1, 2 * n + 1)) + list(range(1, n + 1)))


@dataclass
class PseudohermitianData:
    """All downstairs frame data at one point, stored as jets in the chart."""

    patch: HypersurfacePatch
    chart: Chart
    x: np.ndarray
    order: int
    n: int
    X: Jet = None
    theta: Jet = None
    dtheta: Jet = None
    reeb: Jet = None
    coframe: Jet = None       # rows theta, theta^alpha, theta^alphabar
    frame: Jet = None         # rows r, Z_alpha, Z_alphabar
    h: Jet = None
    hinv: Jet = None          # h^{alpha betabar} stored as hinv[beta, alpha]
    c: Jet = None             # structure functions c[A, B, C]
    gamma: Jet = None         # Gamma[A, beta, gamma]
    beta: Jet = None          # sigma^{-1} nabla sigma on frame directions
    A: Jet = None
    ric: Jet = None
    R: Jet = None
    P_ab: Jet = None
    P: Jet = None
    T: Jet = None
    S: Jet = None
    upsilon: str | None = None
    phase: str | None = None
    extras: dict = field(default_factory=dict)

    # index helpers
    @property
    def hol(self) -> slice:
        return slice(1, self.n + 1)

    @property
    def ahol(self) -> slice:
        return slice(self.n + 1, 2 * self.n + 1)

    @property
    def cidx(self) -> np.ndarray:
        return _conj_index(self.n)

    def along(self, t: Jet) -> Jet:
        """Frame derivatives V_A t, new leading axis A."""
        return einsum("...j,Aj->A...", t.grad(), self.frame)

    def gamma_bar(self) -> Jet:
        return self.gamma[self.cidx].conj()

    def beta_bar(self) -> Jet:
        return self.beta[self.cidx].conj()

    def cov(self, t: Jet, slots: str, w: float = 0.0, wbar: float = 0.0) -> Jet:
        """Webster-Tanaka derivative of a frame tensor, all directions A leading.

        ``slots`` has one letter per tensor axis: ``h``/``H`` holomorphic
        down/up, ``a``/``A`` antiholomorphic down/up.  Weighted objects carry
        the density connection of the sigma trivialisation.
        """
        out = self.along(t)
        G = self.gamma
        Gb = self.gamma_bar()
        k = out.order
        G = G.truncate(min(k, G.order))
        Gb = Gb.truncate(min(k, Gb.order))
        nd = len(slots)
        letters = "bcdefghijk"[:nd]
        for pos, s in enumerate(slots):
            src = letters
            tgt = letters[:pos] + "z" + letters[pos + 1:]
            if s == "h":
                term = einsum(f"A{letters[pos]}z,{tgt}->A{src}", G, t)
                out = out - term
            elif s == "H":
                term = einsum(f"Az{letters[pos]},{tgt}->A{src}", G, t)
                out = out + term
            elif s == "a":
                term = einsum(f"A{letters[pos]}z,{tgt}->A{src}", Gb, t)
                out = out - term
            elif s == "A":
                term = einsum(f"Az{letters[pos]},{tgt}->A{src}", Gb, t)
                out = out + term
            else:
                raise ValueError(f"unknown slot letter {s!r}")
        if w or wbar:
            dens = self.beta * w + self.beta_bar() * wbar
            out = out + einsum(f"A,{letters}->A{letters}", dens, t)
        return out

    # convenience values
    def values(self) -> dict[str, np.ndarray]:
        out = {}
        for name in ("theta", "reeb", "h", "A", "P_ab", "P", "T", "S"):
            j = getattr(self, name)
            if j is not None:
                out[name] = j.value
        return out


def _levi_check(data: PseudohermitianData):
    h0 = data.h.value
    if abs(np.linalg.det(h0)) < 1e-10:
        raise Degenerate(f"Levi form degenerate at {data.x}")


def pseudohermitian(patch: HypersurfacePatch, x, order: int = gc.DEFAULT_ORDER,
                    chart: Chart | None = None, upsilon: str | CompiledExpression | None = None,
                    phase: str | CompiledExpression | None = None) -> PseudohermitianData:
    """Compute pseudohermitian data at ``x`` for the contact form e^Upsilon theta.

    Quantities whose derivative depth exceeds ``order`` are left as ``None``.
    """
    x = np.asarray(x, dtype=float)
    n = patch.n
    if abs(patch.rho_real(x)) > 1e-9:
        raise ManifoldError(f"point is not on {patch.name}: rho = {patch.rho_real(x):.3e}")
    chart = chart or Chart.at(patch, x)
    d = PseudohermitianData(patch, chart, x, order, n)
    d.upsilon = upsilon.source if isinstance(upsilon, CompiledExpression) else upsilon
    d.phase = phase.source if isinstance(phase, CompiledExpression) else phase
    X = embedding_jet(patch, chart, x, order)
    d.X = X
    _, grad = ambient_gradient(patch.rho, X)
    grad = grad.real
    dX = X.grad()                      # (ambient k, chart i)
    # theta = Im(d rho^(1,0)) = sum_j (-rho_y dx + rho_x dy) / 2
    amb = gc.stack([(-0.5 * grad[k + 1] if k % 2 == 0 else 0.5 * grad[k - 1]) for k in range(2 * n + 2)])
    theta = einsum("k,ki->i", amb, dX)
    if upsilon is not None:
        ups = upsilon if isinstance(upsilon, CompiledExpression) else compile_expr(upsilon, n + 1)
        U = ups(complex_coordinates(X))
        U = gc.lift(U, X).real
        d.extras["upsilon"] = U
        theta = theta * U.exp()
    d.theta = theta
    if theta.order < 1:
        return d
    dth = theta.grad()                  # dth[j, i] = d_i theta_j
    dtheta = dth.swapaxes(0, 1) - dth   # dtheta[i, j] = d_i theta_j - d_j theta_i
    d.dtheta = dtheta
    K = dtheta + einsum("i,j->ij", theta, theta)
    # at a non-critical point K is singular exactly when d theta degenerates on H
    reeb = gc.solve(K.T, theta.reshape(2 * n + 1, 1), error=Degenerate).reshape(2 * n + 1)
    d.reeb = reeb
    dz = gc.stack([dX[2 * j] + 1j * dX[2 * j + 1] for j in chart.holo])      # (alpha, i)
    dz_r = einsum("ai,i->a", dz, reeb)
    th_a = dz - einsum("a,i->ai", dz_r, theta)
    E = gc.concat([theta.reshape(1, 2 * n + 1) + 0j, th_a, th_a.conj()], axis=0)
    d.coframe = E
    try:
        F = gc.inv(E, error=RankDeficient)
    except RankDeficient:
        raise
    V = F.T
    d.frame = V
    Z = V[1:n + 1]
    Zb = V[n + 1:]
    h = -1j * einsum("aj,bj->ab", einsum("ij,ai->aj", dtheta, Z), Zb)
    d.h = h
    _levi_check(d)
    d.hinv = gc.inv(h, error=Degenerate)
    if h.order < 1:
        return d
    # structure functions
    DV = V.grad()                                  # (A, i, j) = d_j V_A^i
    W = einsum("Aj,Bij->ABi", V, DV)
    br = W - W.swapaxes(0, 1)
    c = einsum("ABi,Ci->ABC", br, E)
    d.c = c
    hol, ahol = list(range(1, n + 1)), list(range(n + 1, 2 * n + 1))
    G_abar = c[ahol][:, hol][:, :, hol]               # Gamma_{abar beta}^gamma
    G_0 = c[0][hol][:, hol].reshape(1, n, n)
    Zh = einsum("bgj,aj->abg", h.grad(), Z)           # Z_alpha h_{beta gammabar}
    rhs = Zh - einsum("be,age->abg", h, G_abar.conj())
    G_a = einsum("abg,gd->abd", rhs, d.hinv)
    gamma = gc.concat([G_0, G_a, G_abar], axis=0)
    d.gamma = gamma
    # pseudohermitian torsion A_{alpha gamma} = -h_{alpha betabar} c_{0 gamma}^{betabar}
    Aup = c[0][hol][:, ahol]                           # (gamma, beta)
    d.A = -einsum("ab,gb->ag", h, Aup)
    # density connection of the sigma trivialisation
    trG = gamma.trace(1, 2)
    logdet = gc.det(h).real.log()
    beta = trG / (n + 2) - d.along(logdet) / (2 * (n + 2))
    if phase is not None:
        ph = phase if isinstance(phase, CompiledExpression) else compile_expr(phase, n + 1)
        phj = gc.lift(ph(complex_coordinates(X)), X).real
        beta = beta + 1j * d.along(phj)
        d.extras["phase"] = phj
    d.beta = beta
    if gamma.order < 1:
        return d
    # Webster Ricci from the trace of the curvature of the connection
    dtr = d.along(trG)                                 # dtr[A, B] = V_A tr Gamma_B
    trPi = dtr - dtr.swapaxes(0, 1) - einsum("ABC,C->AB", c, trG)
    ric = trPi[hol][:, ahol]
    d.ric = ric
    d.extras["trPi"] = trPi
    R = einsum("ba,ab->", d.hinv, ric)
    d.R = R
    hh = h.truncate(R.order)
    d.P_ab = (ric - R * hh / (2 * (n + 1))) / (n + 2)
    d.P = einsum("ba,ab->", d.hinv, d.P_ab)
    if d.P.order < 1:
        return d
    dA = d.cov(d.A, "hh")
    divA = einsum("gb,gab->a", d.hinv, dA[ahol])       # nabla^beta A_{alpha beta}
    dP = d.along(d.P)[hol]
    d.T = (dP - 1j * divA) / (n + 2)
    if d.T.order < 1:
        return d
    dT = d.cov(d.T, "h")
    divT = einsum("ba,ba->", d.hinv, dT[ahol])         # nabla^alpha T_alpha
    Pk = d.P_ab.truncate(divT.order)
    Hi = d.hinv.truncate(divT.order)
    Ak = d.A.truncate(divT.order)
    PP = einsum("ab,ba->", matmul(Pk, Hi), matmul(Pk, Hi))
    M1 = einsum("gb,db->gd", einsum("ga,ab->gb", Hi, Ak), Hi)
    AA = einsum("gd,gd->", M1, Ak.conj())
    d.S = -(divT + divT.conj() + PP - AA) / n
    return d


# ---------------------------------------------------------------------------
# checks that belong to the downstairs geometry


def levi_form(data: PseudohermitianData) -> tuple[np.ndarray, tuple[int, int]]:
    h0 = data.h.value
    ev = np.linalg.eigvalsh(0.5 * (h0 + h0.conj().T))
    if np.min(np.abs(ev)) < 1e-10 or abs(np.linalg.det(h0)) < 1e-10:
        raise Degenerate("Levi form is degenerate")
    return h0, (int(np.sum(ev > 0)), int(np.sum(ev < 0)))


def levi_identity_residual(data: PseudohermitianData) -> float:
    """|| d theta - i h theta^alpha ^ theta^betabar ||."""
    n = data.n
    E = data.coframe.truncate(data.h.order)
    ta, tb = E[1:n + 1], E[n + 1:]
    w = einsum("ab,ai->bi", data.h, ta)
    wedge = einsum("bi,bj->ij", w, tb)
    return gc.maxabs(data.dtheta.value - 1j * (wedge.value - wedge.value.T))


def tnorm_residual(data: PseudohermitianData) -> float:
    th, r, dth = data.theta.value, data.reeb.value, data.dtheta.value
    return max(abs(th @ r - 1), gc.maxabs(r @ dth))


def coframe_residuals(data: PseudohermitianData) -> dict[str, float]:
    n = data.n
    E, V = data.coframe.value, data.frame.value
    r = data.reeb.value
    ta = E[1:n + 1]
    return {
        "theta_alpha(r)": gc.maxabs(ta @ r),
        "annihilates H01": gc.maxabs(ta @ V[n + 1:].T),
        "span det": float(abs(np.linalg.det(ta @ V[1:n + 1].T))),
    }


def integrability_residual(data: PseudohermitianData) -> tuple[float, float]:
    """(partial, full): components of [Z_alpha, Z_beta] outside H_C and outside H^{1,0}."""
    n = data.n
    c = data.c.value
    hol = list(range(1, n + 1))
    blk = c[np.ix_(hol, hol)]
    partial = gc.maxabs(blk[..., 0])
    full = max(partial, gc.maxabs(blk[..., n + 1:]))
    return partial, full


def connection_residuals(data: PseudohermitianData) -> dict[str, float]:
    """Residuals of the Webster-Tanaka property list (nabla h, torsion, symmetries)."""
    n = data.n
    dh = data.cov(data.h, "ha")
    c = data.c.value
    G = data.gamma.value
    hol = list(range(1, n + 1))
    tors = G[hol] - np.swapaxes(G[hol], 0, 1) - c[np.ix_(hol, hol, hol)]
    A = data.A.value
    out = {
        "nabla h": gc.maxabs(dh),
        "torsion Z,Z": gc.maxabs(tors),
        "h hermitian": gc.maxabs(data.h.value - data.h.value.conj().T),
        "density connection real part": gc.maxabs(data.beta.value + data.beta_bar().value),
        "A symmetric": gc.maxabs(A - A.T),
    }
    if data.P_ab is not None:
        out["P hermitian"] = gc.maxabs(data.P_ab.value - data.P_ab.value.conj().T)
        out["P real"] = abs(np.imag(data.P.value))
    return out


def tspe_residual(data: PseudohermitianData) -> tuple[float, float]:
    """(||A||, ||tracefree part of P_{alpha betabar}||)."""
    n = data.n
    P = data.P_ab.value
    tf = P - data.P.value / n * data.h.value
    return gc.maxabs(data.A.value), gc.maxabs(tf)
