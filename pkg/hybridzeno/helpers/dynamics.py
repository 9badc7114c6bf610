"""Compiled hybrid system data (C, f, D, g)."""

from dataclasses import dataclass, field, replace
from typing import Dict, Tuple

import numpy as np

from .spec_lang import EQ_TOL, Expr, Logic, compile_expr


@dataclass(frozen=True)
class SystemData:
    """
    Hybrid system data: flow set C, flow map f, jump set D, jump map g.

    Expressions are compiled once at construction; evaluation never mutates
    the instance, so one SystemData can be shared by concurrent simulations.
    """

    name: str
    dim: int
    params: Dict[str, float]
    flow_set: Expr
    jump_set: Expr
    flow_map: Tuple[Expr, ...]
    jump_map: Tuple[Expr, ...]
    eq_tol: float = EQ_TOL
    _compiled: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.flow_map) != self.dim or len(self.jump_map) != self.dim:
            raise ValueError(
                f"System '{self.name}': flow_map/jump_map must have {self.dim} entries, "
                f"got {len(self.flow_map)}/{len(self.jump_map)}"
            )
        opts = dict(eq_tol=self.eq_tol)
        compiled = {
            "C": compile_expr(self.flow_set, self.params, **opts),
            "D": compile_expr(self.jump_set, self.params, **opts),
            "f": [compile_expr(e, self.params, **opts) for e in self.flow_map],
            "g": [compile_expr(e, self.params, **opts) for e in self.jump_map],
            "C_vec": compile_expr(self.flow_set, self.params, vectorized=True, **opts),
            "D_vec": compile_expr(self.jump_set, self.params, vectorized=True, **opts),
            "f_vec": [compile_expr(e, self.params, vectorized=True, **opts) for e in self.flow_map],
            "g_vec": [compile_expr(e, self.params, vectorized=True, **opts) for e in self.jump_map],
        }
        object.__setattr__(self, "_compiled", compiled)

    def __reduce__(self):
        # compiled closures are rebuilt on unpickling (worker processes)
        return (
            SystemData,
            (self.name, self.dim, dict(self.params), self.flow_set, self.jump_set,
             self.flow_map, self.jump_map, self.eq_tol),
        )

    def _point(self, x):
        if len(x) != self.dim:
            raise ValueError(f"System '{self.name}' has dimension {self.dim}, got a state of length {len(x)}")
        return [float(v) for v in x]

    def in_flow_set(self, x) -> bool:
        return bool(self._compiled["C"](self._point(x), ()))

    def in_jump_set(self, x) -> bool:
        return bool(self._compiled["D"](self._point(x), ()))

    def flow(self, x) -> np.ndarray:
        p = self._point(x)
        return np.array([fn(p, ()) for fn in self._compiled["f"]], dtype=float)

    def jump(self, x) -> np.ndarray:
        p = self._point(x)
        return np.array([fn(p, ()) for fn in self._compiled["g"]], dtype=float)

    # Batch forms take states of shape (N, dim)

    def in_flow_set_batch(self, states) -> np.ndarray:
        return self._compiled["C_vec"](np.asarray(states, dtype=float).T)

    def in_jump_set_batch(self, states) -> np.ndarray:
        return self._compiled["D_vec"](np.asarray(states, dtype=float).T)

    def flow_batch(self, states) -> np.ndarray:
        cols = np.asarray(states, dtype=float).T
        return np.stack([fn(cols) for fn in self._compiled["f_vec"]], axis=1)

    def jump_batch(self, states) -> np.ndarray:
        cols = np.asarray(states, dtype=float).T
        return np.stack([fn(cols) for fn in self._compiled["g_vec"]], axis=1)

    def restricted(self, membership: Expr, *, name: str = None, params: Dict[str, float] = None) -> "SystemData":
        """Same maps, with membership conjoined onto both C and D."""
        return replace(
            self,
            name=name or self.name,
            params={**self.params, **(params or {})},
            flow_set=Logic("&&", self.flow_set, membership),
            jump_set=Logic("&&", self.jump_set, membership),
        )


def in_flow_set(sys: SystemData, x) -> bool:
    return sys.in_flow_set(x)


def in_jump_set(sys: SystemData, x) -> bool:
    return sys.in_jump_set(x)


def flow(sys: SystemData, x) -> np.ndarray:
    return sys.flow(x)


def jump(sys: SystemData, x) -> np.ndarray:
    return sys.jump(x)
