"""Run the simulate and simulate-extended commands."""

import os
import sys
import time

import click

from ..helpers.config_utils import load_config, setting, sim_config
from ..helpers.file_info import create_info_file
from ..helpers.prolongation import BranchBudgetExceeded, simulate_extended
from ..helpers.simulator import simulate
from ..helpers.system_files import parse_params, parse_vector, resolve_system
from .trajectory_export import (
    run_document,
    run_records,
    solution_document,
    solution_records,
    write_csv,
    write_json,
)


def _fmt_state(x):
    return "[" + ", ".join(f"{float(v):.6g}" for v in x) + "]"


def _write(out, fmt, sys_data, x0, *, run=None, solution=None, sample_dt=None, started=None):
    if fmt == "csv":
        records = run_records(run, sample_dt=sample_dt) if run is not None else solution_records(solution, sample_dt=sample_dt)
        write_csv(out, records, sys_data.dim)
        size = f"{len(records)} rows"
    else:
        if run is not None:
            document = run_document(sys_data, x0, run, sample_dt=sample_dt)
        else:
            document = solution_document(sys_data, x0, solution, sample_dt=sample_dt)
        write_json(out, document)
        size = f"{len(document['branches'])} branches"
    create_info_file(out, time.time() - started, command=sys.argv)
    click.echo(f"✓ Wrote {out} ({size})")


def _banner(title):
    click.echo("=" * 60)
    click.echo(title)
    click.echo("=" * 60)


def run_simulate(
    *,
    system_path=None,
    scenario=None,
    params=(),
    x0,
    config_path=None,
    overrides=None,
    out=None,
    fmt="csv",
    sample_dt=None,
    extended=False,
    max_zeno=None,
    max_branches=None,
):
    """
    Simulate a classical run (or an extended solution) and write it to out.

    overrides holds SimConfig fields given on the command line; None values
    fall back to the config file.
    """
    started = time.time()
    config = load_config(config_path)
    cfg = sim_config(config, **(overrides or {}))
    sys_data = resolve_system(
        system_path=system_path, scenario=scenario, params=parse_params(params), eq_tol=config["eq_tol"]
    )
    state = parse_vector(x0)
    out = out or f"trajectory.{fmt}"
    if sample_dt is not None and sample_dt <= 0:
        sample_dt = None

    _banner(f"{'Extended s' if extended else 'S'}imulation of {sys_data.name} from x0 = {_fmt_state(state)}")

    if not extended:
        run = simulate(sys_data, state, cfg)
        term = run.termination
        if term.kind == "ZenoDetected":
            click.echo(f"✓ Termination: Zeno, τ̂ = {term.zeno_time:.6f} after {len(run.jumps)} jumps")
        elif term.kind == "Horizon":
            click.echo(f"✓ Termination: Horizon at t = {run.final_time:.6g} after {len(run.jumps)} jumps")
        else:
            click.echo(f"⚠ Termination: {term.kind} at t = {run.final_time:.6g} ({term.message})")
        click.echo(f"Final state: {_fmt_state(run.final_state)}")
        _write(out, fmt, sys_data, state, run=run, sample_dt=sample_dt, started=started)
        return run

    max_zeno = setting(config, "max_zeno", max_zeno)
    max_branches = setting(config, "max_branches", max_branches)
    try:
        solution = simulate_extended(
            sys_data, state, cfg,
            max_zeno=max_zeno, max_branches=max_branches, omega_tol=config["omega_tol"],
        )
    except BranchBudgetExceeded as e:
        if e.partial is not None and e.partial.branches:
            partial_out = os.path.splitext(out)[0] + ".partial.json"
            write_json(partial_out, solution_document(sys_data, state, e.partial, sample_dt=sample_dt))
            click.echo(f"⚠ Partial branch tree written to {partial_out}")
        raise

    click.echo(f"Branches: {len(solution.branches)}")
    for leaf in solution.leaves():
        events = solution.zeno_events(leaf.branch_id)
        lineage = " -> ".join(str(b.branch_id) for b in solution.path(leaf.branch_id))
        click.echo(f"Path {lineage}: {leaf.status}")
        for tau, k in events:
            click.echo(f"  Zeno event k={k}: τ̂ = {tau:.6f}")
        click.echo(f"  Final state: {_fmt_state(leaf.final_state)}")
    _write(out, fmt, sys_data, state, solution=solution, sample_dt=sample_dt, started=started)
    return solution
