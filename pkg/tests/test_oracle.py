import numpy as np
import pytest

from conftest import patch, points
from tractorforge import geom_core as gc
from tractorforge import oracle


@pytest.mark.parametrize("name", ["sphere(1)", "ellipsoid(2, 1, 2, 3)", "hyperquadric(1,1)"])
def test_jets_agree_with_finite_differences(name):
    for x in points(name)[:2]:
        res = oracle.fd_oracle(patch(name), x)
        assert set(res) == {"embedding", "theta", "reeb", "levi_metric", "tau", "webster_scalar",
                            "fefferman_metric", "schouten", "ell", "nabla_kappa"}
        assert max(res.values()) < 1e-6, res


def _skew_first_order(jet, factor):
    """Scale the degree-one Taylor coefficients of a jet."""
    c = jet.c.copy()
    for multi, pos in jet.space.index.items():
        if sum(multi) == 1:
            c[..., pos] *= factor
    return gc.Jet(jet.space, jet.order, c)


def test_oracle_catches_a_wrong_derivative(monkeypatch):
    real_tau = oracle.tau_form
    monkeypatch.setattr(oracle, "tau_form", lambda d: _skew_first_order(real_tau(d), 1.01))
    x = points("ellipsoid(1, 1, 2)")[0]
    res = oracle.fd_oracle(patch("ellipsoid(1, 1, 2)"), x, groups=("base",))
    assert res["tau"] > 1e-3
    assert res["theta"] < 1e-6


def test_step_size_tradeoff():
    x = points("ellipsoid(1, 1, 2)")[1]
    p = patch("ellipsoid(1, 1, 2)")
    fine = max(oracle.fd_oracle(p, x, groups=("base",)).values())
    coarse = max(oracle.fd_oracle(p, x, step=1e-2, groups=("base",)).values())
    assert fine < 1e-6 < coarse
    assert np.isfinite(coarse)
