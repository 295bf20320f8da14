"""Finite-difference oracle for jet first derivatives.

Every quantity checked here is a chart-component field that does not depend
on a choice of frame, so its value at a displaced point can be recomputed
from scratch in the same chart and differenced.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from . import geom_core as gc
from .conf_tractor import conf_data
from .cr_geometry import HypersurfacePatch, PseudohermitianData, pseudohermitian
from .fefferman import fefferman_from_base, levi_metric, tau_form

FD_STEP = 2e-5


def _base_fields(d: PseudohermitianData) -> dict[str, object]:
    return {
        "embedding": d.X,
        "theta": d.theta,
        "reeb": d.reeb,
        "levi_metric": levi_metric(d),
        "tau": tau_form(d),
        "webster_scalar": d.P,
    }


def _upstairs_fields(d: PseudohermitianData) -> dict[str, object]:
    fp = fefferman_from_base(d)
    cd = conf_data(fp)
    return {
        "fefferman_metric": fp.g,
        "schouten": cd.P,
        "ell": cd.ell,
        "nabla_kappa": cd.nabla_kappa,
    }


FIELD_GROUPS: dict[str, tuple[Callable, int]] = {
    "base": (_base_fields, 6),
    "fefferman": (_upstairs_fields, 7),
}


def fd_oracle(patch: HypersurfacePatch, x, step: float = FD_STEP, floor: float = 1.0,
              groups=("base", "fefferman")) -> dict[str, float]:
    """Relative error between jet and central-difference first derivatives, per field."""
    x = np.asarray(x, dtype=float)
    out: dict[str, float] = {}
    for grp in groups:
        build, order = FIELD_GROUPS[grp]
        d0 = pseudohermitian(patch, x, order)
        chart = d0.chart
        fields = build(d0)
        u0 = chart.to_chart(x)
        m = u0.size
        plus, minus = [], []
        for i in range(m):
            e = np.zeros(m)
            e[i] = step
            xp = chart.to_ambient(patch, u0 + e, guess=x[chart.solved])
            xm = chart.to_ambient(patch, u0 - e, guess=x[chart.solved])
            plus.append(build(pseudohermitian(patch, xp, order, chart=chart)))
            minus.append(build(pseudohermitian(patch, xm, order, chart=chart)))
        for name, jet in fields.items():
            grad = jet.grad().value                  # [..., i]
            nvar = grad.shape[-1]
            fd = np.stack([(plus[i][name].value - minus[i][name].value) / (2 * step) for i in range(m)], axis=-1)
            if nvar > m:
                # fibre direction: every upstairs field here is gamma-independent
                fd = np.concatenate([fd, np.zeros(fd.shape[:-1] + (nvar - m,))], axis=-1)
            out[name] = gc.rel_err(grad, fd, floor)
    return out
