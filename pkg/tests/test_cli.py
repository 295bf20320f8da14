import json

import numpy as np
import pytest
from click.testing import CliRunner

from tractorforge import __version__
from tractorforge.cli import main, read_config
from tractorforge.errors import ConfigError


def run(*args, env=None):
    return CliRunner().invoke(main, list(args), env=env)


def report(res):
    return json.loads(res.output)


def test_list_manifolds():
    res = run("list-manifolds")
    assert res.exit_code == 0
    for kind in ("sphere", "ellipsoid", "heisenberg", "hyperquadric"):
        assert kind in res.output


def test_version():
    res = run("--version")
    assert res.exit_code == 0
    assert __version__ in res.output


def test_check_sphere_passes():
    res = run("check", "--manifold", "sphere(1)", "--points", "3", "--seed", "7")
    assert res.exit_code == 0, res.output
    rep = report(res)
    assert rep["pass"]
    assert rep["environment"]["manifold"] == "sphere(1)"
    assert rep["environment"]["config"]["points"] == 3
    assert len(rep["samplePoints"]) == 3
    for rec in rep["identities"]:
        assert {"name", "anchor", "tolerance", "points", "residuals", "maxResidual", "pass"} <= set(rec)
        assert rec["anchor"]
        assert rec["maxResidual"] == max(rec["residuals"])
        assert len(rec["points"]) == len(rec["residuals"])


def test_check_ellipsoid_reports_curvature_and_normality():
    rep = report(run("check", "-m", "ellipsoid(1, 1, 2)", "--points", "2"))
    recs = {r["name"]: r for r in rep["identities"]}
    assert recs["conf.curvature_norm"].get("diagnostic")
    assert recs["conf.curvature_norm"]["maxResidual"] > 1e-3
    assert recs["crt.curvature_norm"]["maxResidual"] > 1e-3
    assert recs["conf.normality"]["pass"] and recs["crt.normality"]["pass"]
    assert "conf.model_flatness" not in recs


def test_check_with_scale_runs_the_covariance_suite():
    res = run("check", "-m", "sphere(1)", "--points", "2", "--scale", "re(z1)")
    assert res.exit_code == 0, res.output
    names = [r["name"] for r in report(res)["identities"]]
    assert any("covariance" in n for n in names)


def test_reports_are_byte_identical_across_runs_and_threads(tmp_path):
    args = ("check", "-m", "ellipsoid(1, 1, 2)", "--points", "3", "--seed", "11")
    a = run(*args).output
    b = run(*args).output
    c = run(*args, env={"TRACTOR_FORGE_THREADS": "4"}).output
    assert a == b == c
    out = tmp_path / "r.json"
    res = run(*args, "--out", str(out))
    assert res.exit_code == 0 and res.output == ""
    assert out.read_text() == a


def test_seed_determines_the_points():
    a = report(run("check", "-m", "sphere(1)", "--points", "2", "--seed", "1"))["samplePoints"]
    b = report(run("check", "-m", "sphere(1)", "--points", "2", "--seed", "2"))["samplePoints"]
    assert not np.allclose(a, b)


def test_identity_failure_exits_one():
    res = run("check", "-m", "sphere(1)", "--points", "2", "--tol", "conf.J=1e-300")
    assert res.exit_code == 1
    rep = report(res)
    assert not rep["pass"]
    bad = [r["name"] for r in rep["identities"] if not r["pass"]]
    assert bad == ["conf.J"]


@pytest.mark.parametrize("args", [
    ("--tol", "nonexistent.identity=1"),
    ("--tol", "conf.J=abc"),
    ("--tol", "conf.J"),
    ("--order", "3"),
    ("--points", "0"),
    ("--fiber-samples", "1"),
])
def test_configuration_errors_exit_two(args):
    res = run("check", "-m", "sphere(1)", "--points", "1", *args)
    assert res.exit_code == 2
    assert "error:" in res.output


@pytest.mark.parametrize("args", [
    ("-m", "torus(1)"),
    ("--rho", "|z1|^2 + |z2|^2 - 1"),
    ("--rho", "|z1|^2 + + 1", "--n", "1"),
    ("--rho", "|z1|^2 + |z2|^2 - 1 + im(z1)*z2", "--n", "1"),
])
def test_manifold_errors_exit_two(args):
    res = run("check", "--points", "1", *args)
    assert res.exit_code == 2


def test_rho_expression_matches_the_registry():
    a = report(run("check", "-m", "sphere(1)", "--points", "2"))
    b = report(run("check", "--rho", "|z1|^2 + |z2|^2 - 1", "--n", "1", "--points", "2"))
    assert a["samplePoints"] == b["samplePoints"]
    ra = {r["name"]: r["pass"] for r in a["identities"]}
    rb = {r["name"]: r["pass"] for r in b["identities"]}
    assert all(rb.values())
    assert set(rb) <= set(ra)


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "suite.cfg"
    cfg.write_text("# sample\nmanifold = ellipsoid(1, 1, 2)\npoints = 2\nseed = 3\ntol.conf.J = 1e-300\n")
    res = run("check", "--config", str(cfg))
    assert res.exit_code == 1
    rep = report(res)
    assert rep["environment"]["manifold"] == "ellipsoid(1, 1, 2)"
    assert rep["environment"]["config"]["tolerances"] == {"conf.J": 1e-300}
    res = run("check", "--config", str(cfg), "--tol", "conf.J=1e-6", "--points", "1")
    assert res.exit_code == 0
    rep = report(res)
    assert rep["environment"]["config"]["points"] == 1
    assert rep["environment"]["config"]["tolerances"] == {"conf.J": 1e-6}


def test_read_config_rejects_bad_lines(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("colour = blue\n")
    with pytest.raises(ConfigError):
        read_config(f)
    f.write_text("points = many\n")
    with pytest.raises(ConfigError):
        read_config(f)
    f.write_text("just words\n")
    with pytest.raises(ConfigError):
        read_config(f)
    f.write_text("fiber_samples = 8  # trailing comment\n")
    assert read_config(f)["fiber-samples"] == 8
    res = run("check", "--config", str(tmp_path / "missing.cfg"))
    assert res.exit_code == 2


def test_dump_metric_is_symmetric_lorentzian():
    res = run("dump", "-m", "sphere(1)", "--what", "metric")
    assert res.exit_code == 0
    g = np.array(report(res)["fields"]["g"]["value"])
    assert g.shape == (4, 4)
    assert np.allclose(g, g.T, atol=1e-14)
    ev = np.linalg.eigvalsh(g)
    assert (ev > 0).sum() == 3 and (ev < 0).sum() == 1


def test_dump_J_and_pseudohermitian():
    rep = report(run("dump", "-m", "sphere(1)", "--what", "J"))
    assert np.array(rep["fields"]["J"]["value"]).shape == (6, 6)
    assert rep["fields"]["J_squared_plus_id"] < 1e-8
    rep = report(run("dump", "-m", "ellipsoid(1, 1, 2)", "--what", "pseudohermitian", "--point", "2"))
    assert {"h", "A", "P_ab", "P", "T", "S"} <= set(rep["fields"])
    assert rep["fields"]["n"] == 1
    assert all("indices" in e for k, e in rep["fields"].items() if k != "n")


def test_dump_needs_a_target():
    assert run("dump", "-m", "sphere(1)").exit_code == 2
    assert run("dump", "-m", "sphere(1)", "--what", "nonsense").exit_code == 2


def test_killing_builtin_generators_pass():
    res = run("killing", "-m", "sphere(1)", "--points", "2")
    assert res.exit_code == 0, res.output
    rep = report(res)
    assert [f["name"] for f in rep["fields"]] == ["kappa", "rotation", "unitary-mix", "boost", "boost-i"]


def test_killing_user_field():
    ok = run("killing", "-m", "ellipsoid(1, 2, 2)", "--points", "1", "--killing", "0 - z2; z1")
    assert ok.exit_code == 0, ok.output
    bad = run("killing", "-m", "sphere(1)", "--points", "1", "--killing", "z1^2; 0")
    assert bad.exit_code == 1
    user = report(bad)["fields"][1]
    assert not user["pass"]
    assert user["checks"]["conformal_killing"]["maxResidual"] > 1e-3


def test_killing_without_generators_needs_a_field():
    assert run("killing", "-m", "ellipsoid(1, 2, 3)", "--points", "1").exit_code == 2
    assert run("killing", "-m", "sphere(1)", "--points", "1", "--killing", "z1").exit_code == 2
