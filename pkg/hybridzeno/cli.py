"""CLI entry point for hybridzeno"""

import functools
import json
import logging
import sys

import click

from .helpers.errors import HybridZenoError

EXIT_CHECK_FAILED = 5


def _handle_errors(func):
    """Print library errors and exit with their exit code."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except HybridZenoError as e:
            click.echo(f"❌ Error: {e}", err=True)
            sys.exit(e.exit_code)

    return wrapper


def system_options(func):
    func = click.option("--param", "params", multiple=True, help="Parameter override NAME=VALUE (repeatable)")(func)
    func = click.option("--scenario", default=None, help="Built-in scenario name")(func)
    func = click.option("--system", "system_path", default=None, type=click.Path(), help="SystemSpec JSON file")(func)
    func = click.option("--config", "config_path", default=None, type=click.Path(), help="Config file (default: ./hybridzeno.yaml)")(func)
    return func


def sim_options(func):
    func = click.option("--zeno-window", type=int, default=None, help="Jump gaps in the Zeno certificate")(func)
    func = click.option("--max-jumps", type=int, default=None, help="Maximum jumps per run")(func)
    func = click.option("--step", type=float, default=None, help="RK4 step size (s)")(func)
    func = click.option("--horizon", type=float, default=None, help="Simulation horizon (s)")(func)
    return func


def _overrides(horizon, step, max_jumps, zeno_window):
    return {"horizon": horizon, "step": step, "max_jumps": max_jumps, "zeno_window": zeno_window}


@click.group()
@click.version_option(version="0.1.0")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
def main(verbose):
    """hybridzeno - Zeno prolongation and stability checks for hybrid systems."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )


@main.command()
@click.option("--defaults", is_flag=True, help="Write the defaults without prompting")
def init(defaults):
    """Write a hybridzeno.yaml configuration in the current directory."""
    from .init.run_init import run_init
    run_init(use_defaults=defaults)


@main.group()
def scenario():
    """Inspect the built-in scenarios."""
    pass


@scenario.command("list")
def scenario_list():
    """List the built-in scenarios."""
    from .helpers.scenarios import SCENARIOS, scenario_names
    for name in scenario_names():
        click.echo(f"{name:15s} {SCENARIOS[name]['description']} (e.g. --x0 {SCENARIOS[name]['example_x0']})")


@scenario.command("show")
@click.argument("name")
@click.option("--param", "params", multiple=True, help="Parameter override NAME=VALUE (repeatable)")
@_handle_errors
def scenario_show(name, params):
    """Print a built-in scenario as a SystemSpec JSON document."""
    from .helpers.scenarios import scenario_document
    from .helpers.system_files import parse_params
    click.echo(json.dumps(scenario_document(name, parse_params(params)), indent=2))


@scenario.command("info")
@click.option("--height", type=float, default=1.0, help="Release height a")
@click.option("--velocity", type=float, default=0.0, help="Initial vertical velocity b")
@click.option("--lam", type=float, default=0.5, help="Restitution coefficient")
@click.option("--g", type=float, default=9.81, help="Gravity")
def scenario_info(height, velocity, lam, g):
    """Closed-form Zeno times of a bouncing ball."""
    from .helpers.scenarios import ball_zeno_time, closed_form_zeno_time
    oracle = ball_zeno_time(height, velocity, lam, g)
    closed = closed_form_zeno_time(height, velocity, lam, g)
    click.echo(f"Bounce recursion Zeno time: {oracle:.6f}")
    click.echo(f"Published closed form:      {closed:.6f}")
    if abs(oracle - closed) > 1e-9:
        click.echo("⚠ The closed form disagrees with the bounce recursion; simulations follow the recursion")


@main.command()
@system_options
@sim_options
@click.option("--x0", required=True, help="Initial state, comma separated")
@click.option("--out", default=None, type=click.Path(), help="Output file (default: trajectory.<format>)")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@click.option("--sample-dt", type=float, default=None, help="Output sample spacing (default: every step)")
@_handle_errors
def simulate(config_path, system_path, scenario, params, horizon, step, max_jumps, zeno_window, x0, out, fmt, sample_dt):
    """Simulate one classical solution."""
    from .simulate.run_simulate import run_simulate
    run_simulate(
        system_path=system_path, scenario=scenario, params=params, x0=x0, config_path=config_path,
        overrides=_overrides(horizon, step, max_jumps, zeno_window), out=out, fmt=fmt, sample_dt=sample_dt,
    )


@main.command("simulate-extended")
@system_options
@sim_options
@click.option("--x0", required=True, help="Initial state, comma separated")
@click.option("--max-zeno", type=int, default=None, help="Maximum Zeno index")
@click.option("--max-branches", type=int, default=None, help="Maximum number of branches")
@click.option("--out", default=None, type=click.Path(), help="Output file (default: trajectory.<format>)")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="json")
@click.option("--sample-dt", type=float, default=None, help="Output sample spacing (default: every step)")
@_handle_errors
def simulate_extended(config_path, system_path, scenario, params, horizon, step, max_jumps, zeno_window,
                      x0, max_zeno, max_branches, out, fmt, sample_dt):
    """Simulate an extended solution, prolonging Zeno runs from their omega-limit points."""
    from .simulate.run_simulate import run_simulate
    run_simulate(
        system_path=system_path, scenario=scenario, params=params, x0=x0, config_path=config_path,
        overrides=_overrides(horizon, step, max_jumps, zeno_window), out=out, fmt=fmt, sample_dt=sample_dt,
        extended=True, max_zeno=max_zeno, max_branches=max_branches,
    )


@main.command()
@click.argument("kind", type=click.Choice(["lyapunov", "narrowing", "attractivity", "ugs", "sfpi"]))
@system_options
@sim_options
@click.option("--cert", "cert_path", default=None, type=click.Path(), help="Lyapunov certificate JSON")
@click.option("--chain", "chain_path", default=None, type=click.Path(), help="Narrowing chain JSON")
@click.option("--set", "set_path", default=None, type=click.Path(), help="Target set JSON")
@click.option("--bounds", default=None, help="Sample box lo:hi,lo:hi,...")
@click.option("--n-points", type=int, default=None, help="Number of low-discrepancy samples")
@click.option("--seed", type=int, default=None, help="Sampling seed")
@click.option("--x0", "x0s", multiple=True, help="Extra sample point (repeatable)")
@click.option("--eps", type=float, default=0.05, help="Attractivity neighbourhood radius")
@click.option("--r", "radius", type=float, default=1.0, help="Attractivity initial distance bound")
@click.option("--mode", type=click.Choice(["classical", "extended"]), default="classical")
@click.option("--radii", default="0.01,0.1,1", help="UGS envelope radii, comma separated")
@click.option("--samples-per-radius", type=int, default=16)
@click.option("--max-zeno", type=int, default=None, help="Maximum Zeno index (extended mode)")
@click.option("--workers", type=int, default=None, help="Worker processes")
@click.option("--out", default=None, type=click.Path(), help="Report file (default: <kind>_report.json)")
@_handle_errors
def check(kind, config_path, system_path, scenario, params, horizon, step, max_jumps, zeno_window,
          cert_path, chain_path, set_path, bounds, n_points, seed, x0s, eps, radius, mode, radii,
          samples_per_radius, max_zeno, workers, out):
    """Run a stability check: lyapunov, narrowing, attractivity, ugs or sfpi."""
    from .check.run_check import run_check
    passed = run_check(
        kind, system_path=system_path, scenario=scenario, params=params, config_path=config_path,
        overrides=_overrides(horizon, step, max_jumps, zeno_window), cert_path=cert_path,
        chain_path=chain_path, set_path=set_path, bounds=bounds, n_points=n_points, seed=seed, x0s=x0s,
        eps=eps, r=radius, mode=mode, radii=radii, samples_per_radius=samples_per_radius,
        max_zeno=max_zeno, workers=workers, out=out,
    )
    if not passed:
        sys.exit(EXIT_CHECK_FAILED)


@main.command("interconnect")
@click.argument("sub1", type=click.Path())
@click.argument("sub2", type=click.Path())
@click.option("--h1", default=None, type=click.Path(), help="Output map of SUB1 feeding SUB2's inputs")
@click.option("--h2", default=None, type=click.Path(), help="Output map of SUB2 feeding SUB1's inputs")
@click.option("--out", default="interconnection.json", type=click.Path())
@_handle_errors
def interconnect_cmd(sub1, sub2, h1, h2, out):
    """Compose two subsystems into one SystemSpec document."""
    from .interconnect.run_interconnect import run_interconnect
    run_interconnect(sub1_path=sub1, sub2_path=sub2, h1_path=h1, h2_path=h2, out=out)


if __name__ == "__main__":
    main()
