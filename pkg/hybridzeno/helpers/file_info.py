"""Helper functions for creating .info files next to written artifacts."""

import json
from datetime import datetime, timezone


def create_info_file(filepath, elapsed_time_sec, *, command=None):
    """
    Create a .info JSON file for an output file.

    Parameters
    ----------
    filepath : str
        Path to the output file (e.g., "run.csv")
    elapsed_time_sec : float
        Elapsed time in seconds for creating the file
    command : list of str, optional
        Command line that produced the file
    """
    info_path = str(filepath) + ".info"

    info_data = {
        "timestamp": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "elapsed_time_sec": elapsed_time_sec,
    }
    if command is not None:
        info_data["command"] = list(command)

    with open(info_path, "w") as f:
        json.dump(info_data, f, indent=2)
