"""Suite orchestration and JSON reports.

An identity is a named residual with a tolerance.  ``run_suite`` evaluates
every applicable identity at each sampled point and collects the results in
a schema-stable report.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import __version__
from . import conf_tractor as ct
from . import cr_tractor as crt
from . import geom_core as gc
from .cr_geometry import (HypersurfacePatch, coframe_residuals, connection_residuals, integrability_residual,
                          levi_identity_residual, manifold_from_name, patch_from_rho, pseudohermitian,
                          sample_points, tnorm_residual)
from .errors import ConfigError, NotKilling, TractorForgeError
from .fefferman import (fefferman_from_base, fiber_scan, kappa_ell, projectors, signature, tau_phase_residual)
from .killing import (KILLING_ORDER, candidate_from_exprs, conformal_killing_residual, decompose,
                      kappa_field, killing_tractor_residual, lift_candidate, model_generators, nck_proportionality,
                      second_derivative_identity, splitting, w_alpha_residuals, wedge_power, form_derivative)
from .oracle import fd_oracle

MODELS = ("sphere", "heisenberg", "hyperquadric")
TEST_DENSITY = "z1*z1*conj(z2) + conj(z2) + 2 + z2*z1"
TEST_WEIGHTS = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (2.0, -1.0))
TEST_PHASE = "0.3*re(z1) + im(z2)^2"


@dataclass
class SuiteConfig:
    manifold: str = "sphere(1)"
    rho: str | None = None
    n: int | None = None
    scale: str | None = None
    points: int = 20
    fiber_samples: int = 64
    seed: int = 7
    order: int = 7
    tolerances: dict[str, float] = field(default_factory=dict)
    killing: list[str] = field(default_factory=list)

    def patch(self) -> HypersurfacePatch:
        if self.rho:
            if not self.n:
                raise ConfigError("a rho expression needs n")
            return patch_from_rho(self.rho, self.n)
        return manifold_from_name(self.manifold)

    def validate(self) -> None:
        if self.points < 1:
            raise ConfigError("points must be positive")
        if self.fiber_samples < 2:
            raise ConfigError("fiber samples must be at least 2")
        if not 4 <= self.order <= 10:
            raise ConfigError("jet order must lie in 4..10")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


@dataclass
class Identity:
    name: str
    anchor: str
    tol: float | None                  # None marks an informational diagnostic
    fn: Callable[["PointContext"], float]
    applies: Callable[["PointContext"], bool] = lambda ctx: True


class PointContext:
    """Lazily computed data at one sampled point."""

    def __init__(self, patch: HypersurfacePatch, x: np.ndarray, cfg: SuiteConfig):
        self.patch = patch
        self.x = x
        self.cfg = cfg
        self.extras: dict = {}

    @property
    def kind(self) -> str:
        return self.patch.name.split("(")[0]

    @property
    def is_model(self) -> bool:
        return self.kind in MODELS

    @cached_property
    def d(self):
        return pseudohermitian(self.patch, self.x, self.cfg.order)

    @cached_property
    def fp(self):
        return fefferman_from_base(self.d)

    @cached_property
    def cd(self):
        return ct.conf_data(self.fp)

    def density(self, w: float, wbar: float):
        return crt.density_from_expr(self.d, TEST_DENSITY, w, wbar)

    @cached_property
    def volume_scale(self):
        return crt.holomorphic_volume_scale(self.d)


def _max(dct) -> float:
    return float(max(dct.values())) if dct else 0.0


def _scale_covariance(ctx: PointContext) -> float:
    dh = pseudohermitian(ctx.patch, ctx.x, ctx.cfg.order, upsilon=ctx.cfg.scale)
    return crt.covariance_residual(ctx.d, dh, ctx.cfg.scale)


def _signature(ctx: PointContext) -> float:
    p, q = ctx.patch.signature or (ctx.d.n, 0)
    got = signature(ctx.fp.g.value.real)
    return 0.0 if got in ((2 * p + 1, 2 * q + 1), (2 * q + 1, 2 * p + 1)) else 1.0


def _over_weights(fn):
    def run(ctx: PointContext) -> float:
        return max(_max(fn(ctx.cd, ctx.density(w, wb))) for w, wb in TEST_WEIGHTS)
    return run


def _H_eigen(ctx: PointContext) -> float:
    n = ctx.d.n
    xi = gc.lift(np.arange(1, n + 1) * (1 + 0.5j), ctx.d.frame)
    return max(ct.H_lift_eigen_residual(ctx.cd, xi, w, wb, ah) for w, wb in TEST_WEIGHTS for ah in (False, True))


def _cr_tractor_lift(ctx: PointContext) -> float:
    n = ctx.d.n
    u = ctx.d.X.space.variables(np.zeros(2 * n + 1))
    comps = [u[0] * 0 + 1.0 + 0.3j + u[1]] + [u[(a + 2) % (2 * n + 1)] * 0.5 + 0.2 * (a + 1) + u[0] * u[1]
                                             for a in range(n)] + [u[0] * 2 - 0.7j]
    t = gc.stack(comps) + 0j
    return _max(ct.cr_tractor_descent(ctx.cd, t))


def _tspe_model(ctx: PointContext) -> float:
    return max(crt.tspe_residual(ctx.d))


def _einstein_parallel(ctx: PointContext) -> float:
    return crt.einstein_parallel_residual(ctx.d, ctx.volume_scale)


def _fiber_sign(ctx: PointContext) -> float:
    _, changes = fiber_scan(ctx.volume_scale, ctx.cfg.fiber_samples)
    return 0.0 if changes else 1.0


def _nabla_wedge(ctx: PointContext) -> float:
    return gc.maxabs(form_derivative(wedge_power(ctx.cd, 2), ctx.cd.M).value)


def _nck_constant(ctx: PointContext) -> float:
    c, fit = nck_proportionality(ctx.cd, 1)
    ctx.extras["nck_constant"] = c
    return fit


IDENTITIES: list[Identity] = [
    Identity("cr.levi_identity", "d theta = i h theta^alpha ^ theta^betabar", 1e-8,
             lambda c: levi_identity_residual(c.d)),
    Identity("cr.reeb_normalisation", "theta(r) = 1 and i_r d theta = 0", 1e-8, lambda c: tnorm_residual(c.d)),
    Identity("cr.coframe", "admissible coframe annihilates the right subbundles", 1e-8,
             lambda c: max(v for k, v in coframe_residuals(c.d).items() if k != "span det")),
    Identity("cr.integrability", "[H10, H10] stays in H10", 1e-8, lambda c: max(integrability_residual(c.d))),
    Identity("cr.webster_tanaka", "Webster-Tanaka connection properties", 1e-7,
             lambda c: _max(connection_residuals(c.d))),
    Identity("crt.metric_compatibility", "CR tractor connection preserves the tractor metric", 1e-8,
             lambda c: crt.metric_compatibility_residual(c.d)),
    Identity("crt.curvature_trace", "CR tractor curvature is trace-free", 1e-7,
             lambda c: crt.curvature_trace_residual(c.d, crt.curvature(c.d))),
    Identity("crt.normality", "CR tractor curvature satisfies the normalisation condition", 1e-6,
             lambda c: crt.normality_residual(c.d)),
    Identity("crt.model_flatness", "CR tractor curvature vanishes on the model", 1e-6,
             lambda c: gc.maxabs(crt.curvature(c.d).value), lambda c: c.is_model),
    Identity("crt.curvature_norm", "CR tractor curvature (diagnostic)", None,
             lambda c: gc.maxabs(crt.curvature(c.d).value)),
    Identity("crt.density_commutator", "commutator of density derivatives", 1e-7,
             lambda c: crt.commutator_residual(c.d, c.density(1.0, 0.0))),
    Identity("crt.scale_covariance", "tractor connection transforms under a change of contact form", 1e-7,
             _scale_covariance, lambda c: c.cfg.scale is not None),
    Identity("crt.tspe_model", "standard scale of the model is transversally symmetric pseudo-Einstein", 1e-8,
             _tspe_model, lambda c: c.kind == "sphere"),
    Identity("crt.einstein_parallel", "Einstein tractor of the standard scale is parallel", 1e-7,
             _einstein_parallel, lambda c: c.kind == "sphere"),
    Identity("crt.tspe_defect", "TSPE defect of the holomorphic volume scale (diagnostic)", None, _tspe_model),
    Identity("fef.signature", "Fefferman metric has signature (2p+1, 2q+1)", 0.5, _signature),
    Identity("fef.kappa_ell", "kappa and ell: null, paired, Sparling, Reeb lift", 1e-7,
             lambda c: _max(kappa_ell(c.cd)["residuals"])),
    Identity("fef.projectors", "I is an idempotent of rank 2n killing kappa and ell", 1e-10,
             lambda c: max(projectors(c.cd)["idempotent"], projectors(c.cd)["I_kappa"], projectors(c.cd)["ell_I"],
                           float(projectors(c.cd)["rank"] != 2 * c.d.n))),
    Identity("fef.tau_phase", "tau depends only on theta", 1e-9,
             lambda c: tau_phase_residual(c.patch, c.x, TEST_PHASE)),
    Identity("fef.metric_routes", "2 kappa.ell + h~ against pi*L + 4 tau.theta", 1e-7, lambda c: ct.metric_routes(c.cd)),
    Identity("conf.kappa_identities", "Killing, geodesic and Sparling identities of kappa", 1e-7,
             lambda c: _max(ct.kappa_identities(c.cd))),
    Identity("conf.J", "J is a parallel complex structure agreeing on two routes", 1e-7,
             lambda c: _max(ct.J_residuals(c.cd))),
    Identity("conf.curvature_su", "conformal tractor curvature is su-valued and kills kappa", 1e-7,
             lambda c: max(v for k, v in ct.curvature_checks(c.cd).items() if k != "norm")),
    Identity("conf.model_flatness", "conformal tractor curvature vanishes over the model", 1e-6,
             lambda c: ct.curvature_checks(c.cd)["norm"], lambda c: c.is_model),
    Identity("conf.curvature_norm", "conformal tractor curvature (diagnostic)", None,
             lambda c: ct.curvature_checks(c.cd)["norm"]),
    Identity("conf.normality", "conformal tractor curvature satisfies the normalisation condition", 1e-6,
             lambda c: ct.conf_normality_residual(c.cd)),
    Identity("conf.metric_compatibility", "conformal tractor connection preserves the tractor metric", 1e-8,
             lambda c: ct.metric_compatibility_residual(c.cd.M, c.cd.H)),
    Identity("conf.schouten_reassembly", "P~ rebuilt from pseudohermitian data, and its trace", 1e-6,
             lambda c: max(ct.schouten_reassembly(c.cd))),
    Identity("conf.density_eigen", "D_J on lifted densities has eigenvalue (w - w') i", 1e-8,
             lambda c: max(ct.density_eigen_residual(c.cd, c.density(w, wb)) for w, wb in TEST_WEIGHTS)),
    Identity("conf.H_eigen", "nabla_kappa on lifted H sections has eigenvalue (w - w' +- 1) i", 1e-8, _H_eigen),
    Identity("conf.tractor_D", "conformal tractor-D of lifted densities is twice the CR one", 1e-6,
             _over_weights(ct.tractor_D_descent)),
    Identity("conf.double_D", "conformal double-D of lifted densities matches the CR blocks", 1e-6,
             _over_weights(ct.double_D_descent)),
    Identity("conf.cr_tractor_lift", "lifted CR tractors are fibre-parallel and descend the connection", 1e-7,
             _cr_tractor_lift),
    Identity("conf.fiber_sign_change", "lift of sigma + conj(sigma) changes sign on the fibre", 0.5, _fiber_sign),
    Identity("conf.wedge_parallel", "J ^ J is parallel", 1e-6, _nabla_wedge),
    Identity("conf.nck_fit", "kappa ^ nabla kappa is proportional to the projection of J ^ J", 1e-6, _nck_constant),
    Identity("oracle.first_derivatives", "jet first derivatives against central differences", 1e-6,
             lambda c: _max(fd_oracle(c.patch, c.x))),
]


# ---------------------------------------------------------------------------
# running


def _threads() -> int:
    raw = os.environ.get("TRACTOR_FORGE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ConfigError(f"TRACTOR_FORGE_THREADS must be an integer, got {raw!r}") from exc


def _evaluate(identities: list[Identity], ctx: PointContext) -> dict[str, float | str | None]:
    out: dict[str, float | str | None] = {}
    for ident in identities:
        if not ident.applies(ctx):
            out[ident.name] = None
            continue
        try:
            out[ident.name] = float(ident.fn(ctx))
        except NotKilling as exc:
            out[ident.name] = exc.residual
        except TractorForgeError as exc:
            out[ident.name] = f"{type(exc).__name__}: {exc}"
    return out


def _records(identities: list[Identity], per_point: list[dict], cfg: SuiteConfig) -> list[dict]:
    records = []
    for ident in identities:
        tol = cfg.tolerances.get(ident.name, ident.tol)
        pts, res, errors = [], [], []
        for i, row in enumerate(per_point):
            v = row.get(ident.name)
            if v is None:
                continue
            if isinstance(v, str):
                errors.append({"point": i, "error": v})
                continue
            pts.append(i)
            res.append(v)
        if not pts and not errors:
            continue
        mx = max(res) if res else None
        ok = not errors and (tol is None or (mx is not None and mx < tol))
        rec = {"name": ident.name, "anchor": ident.anchor, "tolerance": tol, "points": pts,
               "residuals": res, "maxResidual": mx, "pass": ok}
        if tol is None:
            rec["diagnostic"] = True
        if errors:
            rec["errors"] = errors
        records.append(rec)
    return records


def run_suite(cfg: SuiteConfig, identities: list[Identity] | None = None) -> dict:
    cfg.validate()
    patch = cfg.patch()
    identities = IDENTITIES if identities is None else identities
    unknown = set(cfg.tolerances) - {i.name for i in identities} - {"conf.nck_constant_spread"}
    if unknown:
        raise ConfigError(f"tolerance given for unknown identities: {', '.join(sorted(unknown))}")
    pts = sample_points(patch, cfg.points, cfg.seed)
    ctxs = [PointContext(patch, x, cfg) for x in pts]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        per_point = list(pool.map(lambda c: _evaluate(identities, c), ctxs))
    records = _records(identities, per_point, cfg)
    consts = [c.extras["nck_constant"] for c in ctxs if "nck_constant" in c.extras]
    if consts:
        spread = [abs(c - consts[0]) / max(abs(consts[0]), 1e-300) for c in consts]
        tol = cfg.tolerances.get("conf.nck_constant_spread", 1e-6)
        records.append({"name": "conf.nck_constant_spread",
                        "anchor": "one proportionality constant serves every point",
                        "tolerance": tol, "points": list(range(len(consts))), "residuals": spread,
                        "maxResidual": max(spread), "pass": max(spread) < tol,
                        "constant": {"real": float(np.real(consts[0])), "imag": float(np.imag(consts[0]))}})
    return {
        "environment": {"version": __version__, "config": _config_echo(cfg), "manifold": patch.name},
        "samplePoints": [list(map(float, x)) for x in pts],
        "identities": records,
        "pass": all(r["pass"] for r in records),
    }


def _config_echo(cfg: SuiteConfig) -> dict:
    out = asdict(cfg)
    out["tolerances"] = dict(sorted(cfg.tolerances.items()))
    return out


# ---------------------------------------------------------------------------
# Killing suite


def killing_suite(cfg: SuiteConfig) -> dict:
    cfg.validate()
    patch = cfg.patch()
    cands = [candidate_from_exprs(cfg.killing, patch.n + 1)] if cfg.killing else model_generators(patch)
    if not cands:
        raise ConfigError(f"no built-in symmetry generators for {patch.name}; pass --killing")
    pts = sample_points(patch, cfg.points, cfg.seed)
    order = max(cfg.order, KILLING_ORDER)

    def per_point(x):
        d = pseudohermitian(patch, x, order)
        fp = fefferman_from_base(d)
        cd = ct.conf_data(fp)
        rows = {}
        kv = kappa_field(fp)
        ks = splitting(cd, kv)
        rows["kappa"] = {"conformal_killing": conformal_killing_residual(cd, kv),
                         "splitting_is_J": gc.maxabs(ks.value - cd.J.value),
                         "tractor_equation": killing_tractor_residual(cd, ks)}
        for cand in cands:
            r: dict[str, float | str] = {}
            lf = lift_candidate(fp, cand)
            r.update({f"lift_{k}": v for k, v in lf.diagnostics.items()})
            r["conformal_killing"] = conformal_killing_residual(cd, lf.v)
            try:
                s = splitting(cd, lf.v)
                r["tractor_equation"] = killing_tractor_residual(cd, s)
                dec = decompose(cd, lf.v, s)
                r["a"] = float(np.real(dec.a))
                r.update({f"decompose_{k}": v for k, v in dec.diagnostics.items()})
                r.update({f"w_{k}": v for k, v in w_alpha_residuals(cd, lf.v).items()})
                r["second_derivative_identity"] = second_derivative_identity(cd, lf.v)
            except NotKilling as exc:
                r["error"] = str(exc)
            rows[cand.name] = r
        return rows

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(per_point, pts))
    tol = {"conformal_killing": 1e-7, "tractor_equation": 1e-6, "decompose_resum": 1e-7,
           "decompose_part1_projectable": 1e-6, "w_trace_part": 1e-6, "w_skew_part": 1e-6,
           "w_holomorphic_eigen": 1e-6, "second_derivative_identity": 1e-5, "splitting_is_J": 1e-7}
    tol.update(cfg.tolerances)
    fields = []
    for name in ["kappa"] + [c.name for c in cands]:
        entry = {"name": name, "checks": {}}
        keys = sorted({k for r in results for k in r[name]})
        ok = True
        for key in keys:
            vals = [r[name].get(key) for r in results]
            if key == "error" or any(isinstance(v, str) for v in vals):
                entry["checks"][key] = {"values": vals, "pass": False}
                ok = False
                continue
            mx = max(abs(v) for v in vals)
            t = tol.get(key)
            p = True if t is None or key == "a" else mx < t
            ok = ok and p
            entry["checks"][key] = {"values": vals, "maxResidual": mx, "tolerance": t, "pass": p}
        entry["pass"] = ok
        fields.append(entry)
    return {
        "environment": {"version": __version__, "config": _config_echo(cfg), "manifold": patch.name},
        "samplePoints": [list(map(float, x)) for x in pts],
        "fields": fields,
        "pass": all(f["pass"] for f in fields),
    }


# ---------------------------------------------------------------------------
# dumps


def _arr(a) -> object:
    a = np.asarray(a)
    if np.iscomplexobj(a):
        if np.max(np.abs(a.imag), initial=0.0) == 0.0:
            return a.real.tolist()
        return {"real": a.real.tolist(), "imag": a.imag.tolist()}
    return a.tolist()


DUMP_TARGETS = ("pseudohermitian", "metric", "tractorFrame", "J", "schouten")


def dump(cfg: SuiteConfig, what: str, point: int = 0) -> dict:
    if what not in DUMP_TARGETS:
        raise ConfigError(f"unknown dump target {what!r}; choose from {', '.join(DUMP_TARGETS)}")
    cfg.validate()
    patch = cfg.patch()
    pts = sample_points(patch, point + 1, cfg.seed)
    x = pts[point]
    d = pseudohermitian(patch, x, cfg.order)
    out: dict = {"manifold": patch.name, "point": list(map(float, x)), "target": what}
    if what == "pseudohermitian":
        n = d.n
        out["fields"] = {
            "theta": {"value": _arr(d.theta.value), "indices": "_i (chart)"},
            "reeb": {"value": _arr(d.reeb.value), "indices": "^i (chart)"},
            "h": {"value": _arr(d.h.value), "indices": "_{alpha betabar}", "weight": [0, 0]},
            "A": {"value": _arr(d.A.value), "indices": "_{alpha beta}", "weight": [0, 0]},
            "P_ab": {"value": _arr(d.P_ab.value), "indices": "_{alpha betabar}", "weight": [0, 0]},
            "P": {"value": _arr(d.P.value), "indices": "scalar", "weight": [0, 0]},
            "T": {"value": _arr(d.T.value), "indices": "_alpha", "weight": [0, 0]},
            "S": {"value": _arr(d.S.value), "indices": "scalar", "weight": [0, 0]},
            "n": n,
        }
    elif what == "metric":
        fp = fefferman_from_base(d)
        g = fp.g.value.real
        out["fields"] = {"g": {"value": _arr(g), "indices": "_{ab} (chart, gamma last)"},
                         "signature": list(signature(g)),
                         "symmetry_residual": gc.maxabs(g - g.T)}
    elif what == "tractorFrame":
        fr = crt.tractor_frame(d)
        out["fields"] = {"Y": _arr(fr.Y), "W": _arr(fr.W), "Z": _arr(fr.Z), "metric": _arr(fr.G),
                         "weights": {"Y": [1, 0], "W": [1, 0], "Z": [0, -1]},
                         "residuals": fr.residuals(d.hinv.value)}
    elif what == "J":
        cd = ct.conf_data(fefferman_from_base(d))
        J = cd.J.value
        out["fields"] = {"J": {"value": _arr(J), "indices": "^A_B (sigma, mu_a, rho)"},
                         "J_squared_plus_id": gc.maxabs(J @ J + np.eye(J.shape[0]))}
    else:
        cd = ct.conf_data(fefferman_from_base(d))
        out["fields"] = {"schouten": {"value": _arr(cd.P.value.real), "indices": "_{ab} (chart, gamma last)"},
                         "trace": float(np.real(np.trace(cd.lc.ginv.value @ cd.P.value)))}
    return out


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, complex):
        return {"real": o.real, "imag": o.imag}
    raise TypeError(f"cannot serialise {type(o).__name__}")
