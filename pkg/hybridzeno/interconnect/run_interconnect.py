"""Run the interconnect command."""

import sys
import time

import click

from ..helpers.file_info import create_info_file
from ..helpers.interconnection import OutputMap, Subsystem, interconnect, vacuous_interconnection
from ..helpers.spec_lang import dump_system
from ..helpers.system_files import read_json
from ..simulate.trajectory_export import write_json


def run_interconnect(*, sub1_path, sub2_path, h1_path=None, h2_path=None, out="interconnection.json"):
    """Compose two subsystem documents and write the result as a SystemSpec document."""
    started = time.time()
    sub1 = Subsystem.from_document(read_json(sub1_path))
    sub2 = Subsystem.from_document(read_json(sub2_path))

    if h1_path is None and h2_path is None:
        composed = vacuous_interconnection(sub1, sub2)
    else:
        h1 = OutputMap.from_document(read_json(h1_path), owner_dim=sub1.n, params=sub1.params) if h1_path else OutputMap()
        h2 = OutputMap.from_document(read_json(h2_path), owner_dim=sub2.n, params=sub2.params) if h2_path else OutputMap()
        composed = interconnect(sub1, sub2, h1, h2)

    write_json(out, dump_system(composed))
    create_info_file(out, time.time() - started, command=sys.argv)
    click.echo(f"✓ Composed {composed.name} (dimension {composed.dim}) written to {out}")
    return composed
