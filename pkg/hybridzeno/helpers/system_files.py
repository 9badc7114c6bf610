"""Loading systems, certificates and command-line vectors from files and flags."""

import json
import os

from .errors import HybridZenoError
from .scenarios import builtin_scenario
from .simulator import InvalidInitialCondition
from .spec_lang import EQ_TOL, SchemaError, load_system


class InputFileError(HybridZenoError):
    exit_code = 1


def read_json(path):
    if not os.path.exists(path):
        raise InputFileError(f"File not found: {path}")
    with open(path, "r") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as err:
            raise InputFileError(f"{path} is not valid JSON: {err}") from err


def parse_params(items):
    """Parse repeated NAME=VALUE flags into a dict."""
    params = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise SchemaError(f"Parameter '{item}' must have the form NAME=VALUE")
        try:
            params[name.strip()] = float(value)
        except ValueError:
            raise SchemaError(f"Parameter '{item}' has a non-numeric value") from None
    return params


def parse_vector(text, *, label="x0"):
    """Parse a comma-separated list of numbers."""
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidInitialCondition(f"{label} must be a comma-separated list of numbers, got '{text}'") from None
    if not values:
        raise InvalidInitialCondition(f"{label} is empty")
    return values


def resolve_system(*, system_path=None, scenario=None, params=None, eq_tol=EQ_TOL):
    """
    Load a system from a SystemSpec JSON file or a built-in scenario name.
    Exactly one of system_path and scenario must be given.
    """
    if (system_path is None) == (scenario is None):
        raise InputFileError("Give exactly one of --system and --scenario")
    if scenario is not None:
        return builtin_scenario(scenario, params, eq_tol=eq_tol)
    document = read_json(system_path)
    if params:
        if not isinstance(document, dict):
            raise SchemaError("System document must be a JSON object")
        document = dict(document)
        merged = dict(document.get("params", {}) or {})
        for name in params:
            if name not in merged:
                raise SchemaError(f"System has no parameter '{name}'")
        merged.update(params)
        document["params"] = merged
    return load_system(document, eq_tol=eq_tol)
