"""Run the check commands: lyapunov, narrowing, attractivity, ugs and sfpi."""

import sys
import time

import click
import numpy as np

from ..helpers.config_utils import load_config, setting, sim_config
from ..helpers.file_info import create_info_file
from ..helpers.sampling import box_samples
from ..helpers.simulator import InvalidInitialCondition
from ..helpers.system_files import InputFileError, parse_params, parse_vector, resolve_system
from ..helpers.stability import (
    check_attractivity,
    check_lyapunov,
    check_sfpi,
    check_ugs_envelope,
    sequential_narrowing,
)
from ..simulate.trajectory_export import write_json
from .check_files import document_bounds, load_certificate, load_chain, load_set, parse_bounds, unit_bounds

CHECKS = ("lyapunov", "narrowing", "attractivity", "ugs", "sfpi")


def _extra_points(x0s, dim):
    points = []
    for text in x0s or ():
        values = parse_vector(text)
        if len(values) != dim:
            raise InvalidInitialCondition(f"--x0 '{text}' has {len(values)} entries, system dimension is {dim}")
        points.append(values)
    return points


def _print_margins(report):
    for label, margin in report.margins.items():
        if margin is None:
            click.echo(f"  {label}: no samples")
        else:
            marker = "✓" if margin >= -1e-9 else "❌"
            click.echo(f"  {marker} {label}: worst slack {margin:.6g}")
    for label, problems in report.comparison_problems.items():
        for problem in problems:
            click.echo(f"  ❌ {label}: {problem}")


def run_check(
    kind,
    *,
    system_path=None,
    scenario=None,
    params=(),
    config_path=None,
    overrides=None,
    cert_path=None,
    chain_path=None,
    set_path=None,
    bounds=None,
    n_points=None,
    seed=None,
    x0s=(),
    eps=0.05,
    r=1.0,
    mode="classical",
    radii="0.01,0.1,1",
    samples_per_radius=16,
    max_zeno=None,
    workers=None,
    out=None,
):
    """
    Run one check and write its JSON report.

    Returns
    -------
    bool
        True when the check passes
    """
    if kind not in CHECKS:
        raise ValueError(f"Unknown check {kind!r}")
    started = time.time()
    config = load_config(config_path)
    cfg = sim_config(config, **(overrides or {}))
    eq_tol = config["eq_tol"]
    seed = setting(config, "seed", seed)
    workers = setting(config, "workers", workers)
    max_zeno = setting(config, "max_zeno", max_zeno)
    sys_data = resolve_system(
        system_path=system_path, scenario=scenario, params=parse_params(params), eq_tol=eq_tol
    )
    dim = sys_data.dim
    out = out or f"{kind}_report.json"

    click.echo("=" * 60)
    click.echo(f"Check {kind} on {sys_data.name}")
    click.echo("=" * 60)

    if kind == "lyapunov":
        if cert_path is None:
            raise InputFileError("check lyapunov needs --cert")
        cert, document = load_certificate(cert_path, dim=dim, eq_tol=eq_tol)
        box = document_bounds(document, dim) if bounds is None else None
        box = box or parse_bounds(bounds, dim)
        points = box_samples(box, n_points or 10000, seed=seed, extra=_extra_points(x0s, dim))
        report = check_lyapunov(sys_data, cert, points)
        _print_margins(report)
        passed = report.passed
        result = report.to_dict()

    elif kind == "narrowing":
        if chain_path is None:
            raise InputFileError("check narrowing needs --chain")
        chain, document = load_chain(chain_path, dim=dim, eq_tol=eq_tol)
        box = document_bounds(document, dim) if bounds is None else None
        box = box or parse_bounds(bounds, dim)
        report = sequential_narrowing(
            sys_data, chain, bounds=box, n_points=n_points or 4096, seed=seed, cfg=cfg,
            omega_tol=config["omega_tol"], workers=workers,
        )
        for stage in report.stages:
            marker = "✓" if stage["lyapunov"]["passed"] else "❌"
            click.echo(f"  {marker} Stage {stage['stage']} ({stage['set']} on {stage['system']})")
            if stage["lyapunov"]["n_points"]["jump"] == 0:
                click.echo("    jump set empty on samples")
        for note in report.notes:
            click.echo(f"  ⚠ {note}")
        click.echo(f"Verdict: {report.verdict}")
        passed = report.passed
        result = report.to_dict()

    else:
        if set_path is None and cert_path is None:
            raise InputFileError(f"check {kind} needs --set (or --cert)")
        target, document = load_set(set_path or cert_path, dim=dim, eq_tol=eq_tol)
        box = document_bounds(document, dim) if bounds is None else None
        box = box or parse_bounds(bounds, dim)
        extra = _extra_points(x0s, dim)

        if kind == "ugs":
            radii_values = [float(v) for v in radii.split(",")]
            report = check_ugs_envelope(
                sys_data, target, radii_values, unit_bounds=unit_bounds(box),
                samples_per_radius=samples_per_radius, cfg=cfg, extended=(mode == "extended"),
                max_zeno=max_zeno, max_branches=config["max_branches"], omega_tol=config["omega_tol"],
                seed=seed, workers=workers,
            )
            for radius, m in zip(report.radii, report.envelope):
                click.echo(f"  m({radius:g}) = {'n/a' if m is None else f'{m:.6g}'}")
            for note in report.notes:
                click.echo(f"  ⚠ {note}")
        elif kind == "sfpi":
            points = box_samples(box, n_points or 256, seed=seed, extra=extra)
            on_set = points[target.contains_batch(points)] if len(points) else points
            report = check_sfpi(sys_data, target, list(on_set), cfg, workers=workers)
            click.echo(f"  Samples on {target.name}: {report.n_samples}")
            click.echo(f"  Max distance along runs: {report.max_distance:.6g}")
        else:
            points = box_samples(box, n_points or 64, seed=seed, extra=extra)
            report = check_attractivity(
                sys_data, target, list(points), eps=eps, r=r, cfg=cfg, mode=mode,
                max_zeno=max_zeno, max_branches=config["max_branches"], omega_tol=config["omega_tol"],
                workers=workers,
            )
            if report.passed:
                click.echo(f"  T = {report.T:.6g}, K = {report.K} ({report.n_samples} samples)")
        passed = report.passed
        result = report.to_dict()
        witness = result.get("witness")
        if witness:
            click.echo(f"  Witness: {witness}")

    result = {"check": kind, "system": sys_data.name, **result}
    write_json(out, _jsonable(result))
    create_info_file(out, time.time() - started, command=sys.argv)
    if passed:
        click.echo(f"✓ {kind} check passed; report written to {out}")
    else:
        click.echo(f"❌ {kind} check failed; report written to {out}")
    return passed


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value
