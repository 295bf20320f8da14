"""Command-line front end: ``tractorforge check|dump|killing|list-manifolds``."""
from __future__ import annotations

import sys
from pathlib import Path

import click

from .cr_geometry import REGISTRY_HELP
from .errors import ConfigError, TractorForgeError
from .report import DUMP_TARGETS, SuiteConfig, dump, killing_suite, run_suite, to_json

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

_INT_KEYS = {"points", "fiber-samples", "seed", "order", "n", "point"}
_STR_KEYS = {"manifold", "rho", "scale", "killing", "what"}


def read_config(path: str | Path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; ``tol.<identity>`` sets a tolerance."""
    out: dict = {"tolerances": {}}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        try:
            if key.startswith("tol."):
                out["tolerances"][key[4:]] = float(val)
            elif key in _INT_KEYS:
                out[key] = int(val)
            elif key in _STR_KEYS:
                out[key] = val
            else:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {val!r}") from exc
    return out


def _parse_tol(items) -> dict[str, float]:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--tol expects name=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError as exc:
            raise ConfigError(f"--tol {item!r}: not a number") from exc
    return out


def build_config(config_file, **flags) -> tuple[SuiteConfig, dict]:
    base = read_config(config_file) if config_file else {"tolerances": {}}
    merged = dict(base)
    for k, v in flags.items():
        key = k.replace("_", "-")
        if v is not None and v != ():
            merged[key] = v
    tol = dict(base.get("tolerances", {}))
    tol.update(_parse_tol(flags.get("tol") or ()))
    killing = merged.get("killing")
    cfg = SuiteConfig(
        manifold=merged.get("manifold", "sphere(1)"),
        rho=merged.get("rho"),
        n=merged.get("n"),
        scale=merged.get("scale"),
        points=merged.get("points", 20),
        fiber_samples=merged.get("fiber-samples", 64),
        seed=merged.get("seed", 7),
        order=merged.get("order", 7),
        tolerances=tol,
        killing=[s.strip() for s in killing.split(";") if s.strip()] if killing else [],
    )
    return cfg, merged


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _common(f):
    opts = [
        click.option("--manifold", "-m", help="Registry name, e.g. 'sphere(1)' or 'ellipsoid(1, 1, 2)'."),
        click.option("--rho", help="Defining function in the expression language (with --n)."),
        click.option("--n", type=int, help="CR dimension for --rho."),
        click.option("--points", type=int, help="Number of sampled points (default 20)."),
        click.option("--seed", type=int, help="Sampling seed (default 7)."),
        click.option("--order", type=int, help="Jet order (default 7)."),
        click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
                     help="Flat key = value file; flags win."),
        click.option("--out", type=click.Path(dir_okay=False), help="Write the JSON report here."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _run(fn):
    try:
        return fn()
    except (ConfigError, TractorForgeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Tractor calculus checks for CR manifolds and their Fefferman spaces."""


@main.command()
@_common
@click.option("--scale", help="Upsilon: also check covariance under theta -> e^Upsilon theta.")
@click.option("--fiber-samples", type=int, help="Samples per fibre scan (default 64).")
@click.option("--tol", multiple=True, help="Override a tolerance: identity=value.")
def check(config_file, out, **flags):
    """Run every identity at the sampled points."""
    def go():
        cfg, _ = build_config(config_file, **flags)
        rep = run_suite(cfg)
        _emit(to_json(rep), out)
        return rep["pass"]
    ok = _run(go)
    sys.exit(EXIT_OK if ok else EXIT_FAIL)


@main.command()
@_common
@click.option("--what", type=click.Choice(DUMP_TARGETS), help="Which data to dump.")
@click.option("--point", type=int, help="Index of the sampled point (default 0).")
def dump_cmd(config_file, out, **flags):
    """Dump component arrays at one sampled point."""
    def go():
        cfg, merged = build_config(config_file, **flags)
        what = merged.get("what")
        if not what:
            raise ConfigError("--what is required")
        _emit(to_json(dump(cfg, what, merged.get("point", 0))), out)
    _run(go)
    sys.exit(EXIT_OK)


main.add_command(dump_cmd, name="dump")
main.commands.pop("dump-cmd", None)


@main.command()
@_common
@click.option("--killing", help="User field: ';'-separated components zdot_1..zdot_(n+1).")
@click.option("--tol", multiple=True, help="Override a tolerance: check=value.")
def killing(config_file, out, **flags):
    """Lift symmetry generators and run the Killing decomposition checks."""
    def go():
        cfg, _ = build_config(config_file, **flags)
        rep = killing_suite(cfg)
        _emit(to_json(rep), out)
        return rep["pass"]
    ok = _run(go)
    sys.exit(EXIT_OK if ok else EXIT_FAIL)


@main.command("list-manifolds")
def list_manifolds():
    """Show the manifold registry."""
    for name, text in REGISTRY_HELP.items():
        click.echo(f"{name:28s} {text}")


if __name__ == "__main__":
    main()
