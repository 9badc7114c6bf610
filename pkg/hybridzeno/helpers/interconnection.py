"""
Natural interconnection of two input-driven hybrid subsystems.

Subsystem i has state x_i, input u_i and data (C_i, f_i, D_i, g_i) over (x_i, u_i).
With u_1 = h_2(x_2) and u_2 = h_1(x_1), the composed system has
C = C_1 && C_2, D = D_1 || D_2, stacked flow, and a jump map that applies g_i
only where D_i holds. The inputs are substituted into the expressions, so the
result is an ordinary SystemData.
"""

import re
from dataclasses import dataclass, field
from typing import Dict, Tuple

from .dynamics import SystemData
from .errors import HybridZenoError
from .spec_lang import (
    EQ_TOL,
    RESERVED_NAMES,
    Expr,
    ExprError,
    If,
    Logic,
    SchemaError,
    StateVar,
    max_input_index,
    max_state_index,
    parse_expr,
    substitute,
)


class DimensionMismatch(HybridZenoError):
    exit_code = 1


class NotInputFree(HybridZenoError):
    exit_code = 1


@dataclass(frozen=True)
class Subsystem:
    name: str
    n: int
    m: int
    flow_set: Expr
    jump_set: Expr
    flow_map: Tuple[Expr, ...]
    jump_map: Tuple[Expr, ...]
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.flow_map) != self.n or len(self.jump_map) != self.n:
            raise DimensionMismatch(
                f"Subsystem '{self.name}': flow_map/jump_map need {self.n} entries, "
                f"got {len(self.flow_map)}/{len(self.jump_map)}"
            )
        for expr in (self.flow_set, self.jump_set) + self.flow_map + self.jump_map:
            if max_state_index(expr) > self.n or max_input_index(expr) > self.m:
                raise DimensionMismatch(
                    f"Subsystem '{self.name}' references variables beyond x1..x{self.n}, u1..u{self.m}"
                )

    @classmethod
    def from_system(cls, sys: SystemData) -> "Subsystem":
        """Input-free subsystem wrapping a closed system (used to nest interconnections)."""
        return cls(
            name=sys.name,
            n=sys.dim,
            m=0,
            flow_set=sys.flow_set,
            jump_set=sys.jump_set,
            flow_map=tuple(sys.flow_map),
            jump_map=tuple(sys.jump_map),
            params=dict(sys.params),
        )

    @classmethod
    def from_document(cls, document: dict) -> "Subsystem":
        """
        Build from a subsystem document: the SystemSpec schema plus an
        optional integer "inputs" (default 0).
        """
        if not isinstance(document, dict):
            raise SchemaError("Subsystem document must be a JSON object")
        for key in ("name", "dim", "flow_set", "jump_set", "flow_map", "jump_map"):
            if key not in document:
                raise SchemaError(f"Missing required field '{key}'")
        n = document["dim"]
        m = document.get("inputs", 0)
        for key, value, low in (("dim", n, 1), ("inputs", m, 0)):
            if isinstance(value, bool) or not isinstance(value, int) or value < low:
                raise SchemaError(f"{key} must be an integer >= {low}")
        params = document.get("params", {}) or {}
        if not isinstance(params, dict) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in params.values()
        ):
            raise SchemaError("params must be an object of name -> number")
        for name in params:
            if name in RESERVED_NAMES or re.match(r"^[xu][1-9][0-9]*$", name):
                raise SchemaError(f"Parameter name '{name}' is reserved")
        for key in ("flow_map", "jump_map"):
            entries = document[key]
            if not isinstance(entries, list) or len(entries) != n:
                raise SchemaError(f"{key} must be a list of {n} expression strings")

        def parse(text, where, want_bool):
            try:
                expr = parse_expr(text, dim=n, n_inputs=m, params=params)
            except ExprError as err:
                raise err.with_field(where) from err
            if expr.is_bool != want_bool:
                raise SchemaError(f"{where}: expected a {'boolean' if want_bool else 'real'} expression")
            return expr

        return cls(
            name=str(document["name"]),
            n=n,
            m=m,
            flow_set=parse(document["flow_set"], "flow_set", True),
            jump_set=parse(document["jump_set"], "jump_set", True),
            flow_map=tuple(parse(t, f"flow_map[{i}]", False) for i, t in enumerate(document["flow_map"])),
            jump_map=tuple(parse(t, f"jump_map[{i}]", False) for i, t in enumerate(document["jump_map"])),
            params={k: float(v) for k, v in params.items()},
        )


@dataclass(frozen=True)
class OutputMap:
    """h: owner state -> partner input, one expression per partner input."""

    exprs: Tuple[Expr, ...] = ()

    @classmethod
    def from_document(cls, document, *, owner_dim: int, params=None) -> "OutputMap":
        entries = document.get("outputs") if isinstance(document, dict) else document
        if not isinstance(entries, list) or not all(isinstance(e, str) for e in entries):
            raise SchemaError('Output map must be a list of expressions or {"outputs": [...]}')
        exprs = []
        for i, text in enumerate(entries):
            try:
                exprs.append(parse_expr(text, dim=owner_dim, n_inputs=0, params=params))
            except ExprError as err:
                raise err.with_field(f"outputs[{i}]") from err
        return cls(exprs=tuple(exprs))

    def __len__(self):
        return len(self.exprs)


def _merge_params(first: Dict[str, float], second: Dict[str, float]):
    """Union of parameters; a clashing name in the second set is renamed with a numeric suffix."""
    merged = dict(first)
    renames = {}
    for name, value in second.items():
        if name not in merged or merged[name] == value:
            merged[name] = value
            continue
        suffix = 2
        while f"{name}_{suffix}" in merged or f"{name}_{suffix}" in second:
            suffix += 1
        new_name = f"{name}_{suffix}"
        renames[name] = new_name
        merged[new_name] = value
    return merged, renames


def interconnect(sub1: Subsystem, sub2: Subsystem, h1: OutputMap, h2: OutputMap, *, eq_tol: float = EQ_TOL) -> SystemData:
    """
    Compose two subsystems with u1 = h2(x2) and u2 = h1(x1).

    Parameters
    ----------
    sub1, sub2 : Subsystem
    h1 : OutputMap
        Output of sub1 (over sub1's state), fed to sub2's inputs
    h2 : OutputMap
        Output of sub2 (over sub2's state), fed to sub1's inputs
    """
    if len(h1) != sub2.m:
        raise DimensionMismatch(f"h1 has {len(h1)} outputs but '{sub2.name}' takes {sub2.m} inputs")
    if len(h2) != sub1.m:
        raise DimensionMismatch(f"h2 has {len(h2)} outputs but '{sub1.name}' takes {sub1.m} inputs")
    for label, h, owner in (("h1", h1, sub1), ("h2", h2, sub2)):
        for expr in h.exprs:
            if max_input_index(expr) > 0 or max_state_index(expr) > owner.n:
                raise DimensionMismatch(f"{label} must be an expression over x1..x{owner.n} of '{owner.name}'")

    n1 = sub1.n
    params, renames = _merge_params(sub1.params, sub2.params)
    shift2 = {i: StateVar(n1 + i) for i in range(1, sub2.n + 1)}

    # inputs of sub1 read sub2's (shifted) state; inputs of sub2 read sub1's state
    u1 = {i + 1: substitute(e, states=shift2, params=renames) for i, e in enumerate(h2.exprs)}
    u2 = {i + 1: e for i, e in enumerate(h1.exprs)}

    def first(e):
        return substitute(e, inputs=u1)

    def second(e):
        return substitute(e, states=shift2, inputs=u2, params=renames)

    c1, d1 = first(sub1.flow_set), first(sub1.jump_set)
    c2, d2 = second(sub2.flow_set), second(sub2.jump_set)

    jump_map = tuple(If(d1, first(e), StateVar(i)) for i, e in enumerate(sub1.jump_map, start=1))
    jump_map += tuple(If(d2, second(e), StateVar(n1 + i)) for i, e in enumerate(sub2.jump_map, start=1))

    return SystemData(
        name=f"{sub1.name}*{sub2.name}",
        dim=n1 + sub2.n,
        params=params,
        flow_set=Logic("&&", c1, c2),
        jump_set=Logic("||", d1, d2),
        flow_map=tuple(first(e) for e in sub1.flow_map) + tuple(second(e) for e in sub2.flow_map),
        jump_map=jump_map,
        eq_tol=eq_tol,
    )


def vacuous_interconnection(sub1: Subsystem, sub2: Subsystem, *, eq_tol: float = EQ_TOL) -> SystemData:
    """Interconnection without coupling; both subsystems must be input-free."""
    for sub in (sub1, sub2):
        if sub.m != 0:
            raise NotInputFree(f"Subsystem '{sub.name}' takes {sub.m} inputs; a vacuous interconnection needs none")
    return interconnect(sub1, sub2, OutputMap(), OutputMap(), eq_tol=eq_tol)
