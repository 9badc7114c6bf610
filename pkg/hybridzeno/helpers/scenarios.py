"""
Built-in scenarios: bouncing ball, two bouncing balls, and the ball driving a
sign-flipping decaying state. Also closed-form Zeno times for the ball.
"""

import math
from typing import Dict, Optional

from .dynamics import SystemData
from .errors import HybridZenoError
from .spec_lang import EQ_TOL, load_system

GRAVITY = 9.81
DEFAULT_RESTITUTION = 0.5


class UnknownScenario(HybridZenoError):
    exit_code = 1


class ParamOutOfRange(HybridZenoError):
    exit_code = 1


# gravity switched off at rest so the origin is an equilibrium of the flow
GAMMA = "if(x{p} == 0 && x{v} == 0, 0, g)"

BALL_FLOW_SET = "x{p} > 0 || (x{p} == 0 && x{v} >= 0)"
BALL_JUMP_SET = "x{p} == 0 && x{v} < 0"


def _ball_sets(p: int, v: int):
    return BALL_FLOW_SET.format(p=p, v=v), BALL_JUMP_SET.format(p=p, v=v)


def _bouncing_ball_document(params: Dict[str, float]) -> dict:
    flow_set, jump_set = _ball_sets(1, 2)
    return {
        "name": "bouncing_ball",
        "dim": 2,
        "params": params,
        "flow_set": flow_set,
        "jump_set": jump_set,
        "flow_map": ["x2", "-" + GAMMA.format(p=1, v=2)],
        "jump_map": ["x1", "-lam*x2"],
    }


def _two_balls_document(params: Dict[str, float]) -> dict:
    c1, d1 = _ball_sets(1, 2)
    c2, d2 = _ball_sets(3, 4)
    return {
        "name": "two_balls",
        "dim": 4,
        "params": params,
        "flow_set": f"({c1}) && ({c2})",
        "jump_set": f"({d1}) || ({d2})",
        "flow_map": ["x2", "-" + GAMMA.format(p=1, v=2), "x4", "-" + GAMMA.format(p=3, v=4)],
        "jump_map": [
            "x1",
            f"if({d1}, -lam*x2, x2)",
            "x3",
            f"if({d2}, -lam*x4, x4)",
        ],
    }


def _example3_document(params: Dict[str, float]) -> dict:
    flow_set, jump_set = _ball_sets(1, 2)
    return {
        "name": "example3",
        "dim": 3,
        "params": params,
        "flow_set": flow_set,
        "jump_set": jump_set,
        "flow_map": ["x2", "-" + GAMMA.format(p=1, v=2), "-x3"],
        "jump_map": ["x1", "-lam*x2", "-x3"],
    }


SCENARIOS = {
    "bouncing_ball": {
        "builder": _bouncing_ball_document,
        "description": "Single bouncing ball; Zeno at the origin",
        "example_x0": "1,0",
    },
    "two_balls": {
        "builder": _two_balls_document,
        "description": "Vacuous interconnection of two bouncing balls; classical run freezes the higher ball",
        "example_x0": "3,0,1,0",
    },
    "example3": {
        "builder": _example3_document,
        "description": "Bouncing ball driving a decaying state that flips sign at every impact",
        "example_x0": "1,0,1",
    },
}


def scenario_names():
    return sorted(SCENARIOS)


def scenario_document(name: str, params: Optional[Dict[str, float]] = None) -> dict:
    """Return the SystemSpec document of a built-in scenario."""
    if name not in SCENARIOS:
        raise UnknownScenario(f"Unknown scenario '{name}'. Available: {', '.join(scenario_names())}")
    values = {"lam": DEFAULT_RESTITUTION, "g": GRAVITY}
    for key, value in (params or {}).items():
        if key not in values:
            raise ParamOutOfRange(f"Scenario '{name}' has no parameter '{key}' (parameters: lam, g)")
        values[key] = float(value)
    if not 0.0 < values["lam"] < 1.0:
        raise ParamOutOfRange(f"Restitution coefficient lam must lie in (0, 1), got {values['lam']}")
    if values["g"] <= 0:
        raise ParamOutOfRange(f"Gravity g must be positive, got {values['g']}")
    return SCENARIOS[name]["builder"](values)


def builtin_scenario(name: str, params: Optional[Dict[str, float]] = None, *, eq_tol: float = EQ_TOL) -> SystemData:
    return load_system(scenario_document(name, params), eq_tol=eq_tol)


def ball_zeno_time(a: float, b: float = 0.0, lam: float = DEFAULT_RESTITUTION, g: float = GRAVITY) -> float:
    """
    Zeno time of a ball released at height a with vertical velocity b.

    First impact at (b + sqrt(b^2 + 2ga))/g with speed v = sqrt(b^2 + 2ga);
    the flights that follow last 2 lam^n v / g, a geometric series.
    """
    v = math.sqrt(b * b + 2.0 * g * a)
    return (b + v) / g + (2.0 * v / g) * lam / (1.0 - lam)


def closed_form_zeno_time(a: float, b: float = 0.0, lam: float = DEFAULT_RESTITUTION, g: float = GRAVITY) -> float:
    """Published closed form (b + 2 lam/(1 - lam) sqrt(b^2 + 2ga))/g; disagrees with ball_zeno_time for lam != 1."""
    return (b + (2.0 * lam / (1.0 - lam)) * math.sqrt(b * b + 2.0 * g * a)) / g
