"""Run the init command to write a hybridzeno.yaml configuration."""

import os
import sys

import click
import yaml

from ..helpers.config_utils import CONFIG_FILENAME, default_config, write_config
from ..helpers.errors import ConfigError

PROMPTS = [
    ("step", "RK4 step size (s)"),
    ("event_tol", "Event localization tolerance (s)"),
    ("horizon", "Simulation horizon (s)"),
    ("max_jumps", "Maximum jumps per run"),
    ("zeno_window", "Zeno detection window (jump gaps)"),
    ("zeno_ratio_tol", "Zeno gap-ratio tolerance"),
    ("zeno_time_eps", "Zeno remaining-time tolerance (s)"),
    ("jump_priority", "Jump when in C and D"),
    ("eq_tol", "Equality tolerance for =="),
    ("max_zeno", "Maximum Zeno index for extended runs"),
    ("max_branches", "Maximum branches per extended run"),
    ("omega_tol", "Omega-limit estimation tolerance"),
    ("workers", "Worker processes for stability sweeps"),
    ("seed", "Sampling seed"),
]


def run_init(*, use_defaults=False):
    """Prompt for simulation and check settings and write hybridzeno.yaml."""
    config_path = os.path.join(os.getcwd(), CONFIG_FILENAME)

    if os.path.exists(config_path):
        click.echo(f"Configuration file already exists: {CONFIG_FILENAME}")
        click.echo("If you want to reinitialize, please delete the existing config file first.")
        return

    click.echo("=" * 60)
    click.echo("Initializing hybridzeno configuration")
    click.echo("=" * 60)
    click.echo()

    config = default_config()
    if not use_defaults:
        for name, label in PROMPTS:
            default = config[name]
            if isinstance(default, bool):
                config[name] = click.confirm(label, default=default)
            else:
                config[name] = click.prompt(label, default=default, type=type(default))

    try:
        write_config(config_path, config)
    except ConfigError as e:
        click.echo(f"❌ Error: {e}", err=True)
        sys.exit(1)

    click.echo()
    click.echo("=" * 60)
    click.echo("Configuration summary:")
    click.echo("=" * 60)
    click.echo(yaml.safe_dump(config, default_flow_style=False, sort_keys=False))
    click.echo(f"✓ Configuration file created: {config_path}")
    click.echo()
    click.echo("Next steps:")
    click.echo("1. Run 'hybridzeno scenario list' to see the built-in systems")
    click.echo("2. Run 'hybridzeno simulate --scenario bouncing_ball --x0 1,0'")
    click.echo()
