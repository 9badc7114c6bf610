"""
Stability checks for closed sets of a hybrid system.

All verdicts are consistency checks over finite samples and horizons:
Lyapunov inequalities on a sample grid, strong forward pre-invariance,
pre-attractivity (classical, and over Zeno for extended solutions), a UGS
envelope sweep, and the sequential narrowing harness A_n in ... in A_1 in A_0 = C u D.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Optional, Sequence

import numpy as np

from .dynamics import SystemData
from .errors import HybridZenoError
from .prolongation import NonConvergentTail, estimate_omega, simulate_extended
from .sampling import box_samples, scaled_samples, sweep
from .simulator import IntegrationError, SimConfig, simulate
from .spec_lang import (
    EQ_TOL,
    Expr,
    ExprError,
    NotDifferentiable,
    SchemaError,
    compile_expr,
    gradient,
    parse_expr,
    to_text,
)

logger = logging.getLogger(__name__)

EPS_SLACK = 1e-9
EPS_INV = 1e-6
MAX_COUNTEREXAMPLES = 5


class NegativeDistance(HybridZenoError):
    pass


class GradientUnavailable(HybridZenoError):
    exit_code = 1


class ChainNotNested(HybridZenoError):
    exit_code = 1


class BudgetExceeded(HybridZenoError):
    pass


class SampleError(HybridZenoError):
    exit_code = 1


def _as_list(x) -> List[float]:
    return [float(v) for v in np.asarray(x, dtype=float).ravel()]


# ---------------------------------------------------------------------------
# Sets, comparison functions, certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClosedSetSpec:
    """A closed set given by a membership predicate and its (Euclidean) distance function."""

    membership: Expr
    distance_expr: Expr
    name: str = "A"
    params: Dict[str, float] = field(default_factory=dict)
    eq_tol: float = EQ_TOL
    _compiled: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        opts = dict(eq_tol=self.eq_tol)
        object.__setattr__(self, "_compiled", {
            "member": compile_expr(self.membership, self.params, **opts),
            "dist": compile_expr(self.distance_expr, self.params, **opts),
            "member_vec": compile_expr(self.membership, self.params, vectorized=True, **opts),
            "dist_vec": compile_expr(self.distance_expr, self.params, vectorized=True, **opts),
        })

    def __reduce__(self):
        return (ClosedSetSpec, (self.membership, self.distance_expr, self.name, dict(self.params), self.eq_tol))

    @classmethod
    def from_texts(cls, membership: str, distance: str, *, dim: int, params=None, name: str = "A", eq_tol=EQ_TOL):
        params = dict(params or {})
        try:
            member_expr = parse_expr(membership, dim=dim, params=params)
        except ExprError as err:
            raise err.with_field("set_membership") from err
        try:
            dist_expr = parse_expr(distance, dim=dim, params=params)
        except ExprError as err:
            raise err.with_field("set_distance") from err
        if not member_expr.is_bool:
            raise SchemaError("set_membership must be a boolean expression")
        if dist_expr.is_bool:
            raise SchemaError("set_distance must be a real expression")
        return cls(membership=member_expr, distance_expr=dist_expr, name=name, params=params, eq_tol=eq_tol)

    def contains(self, x) -> bool:
        return bool(self._compiled["member"](_as_list(x), ()))

    def distance(self, x) -> float:
        value = float(self._compiled["dist"](_as_list(x), ()))
        if value < 0:
            raise NegativeDistance(f"Distance to {self.name} is negative ({value}) at {_as_list(x)}")
        return value

    def contains_batch(self, states) -> np.ndarray:
        return self._compiled["member_vec"](np.asarray(states, dtype=float).T)

    def distance_batch(self, states) -> np.ndarray:
        values = self._compiled["dist_vec"](np.asarray(states, dtype=float).T)
        negative = values < 0
        if np.any(negative):
            idx = int(np.argmax(negative))
            raise NegativeDistance(
                f"Distance to {self.name} is negative ({values[idx]}) at {_as_list(np.asarray(states)[idx])}"
            )
        return values

    def inconsistent_points(self, states) -> np.ndarray:
        """Indices where (distance <= eq_tol) disagrees with membership."""
        states = np.asarray(states, dtype=float)
        if len(states) == 0:
            return np.empty(0, dtype=int)
        return np.flatnonzero((self.distance_batch(states) <= self.eq_tol) != self.contains_batch(states))


def distance(set_: ClosedSetSpec, x) -> float:
    return set_.distance(x)


@dataclass(frozen=True)
class ComparisonFn:
    """Scalar comparison function of s = |x|_A: class K-infinity ("kinf") or positive definite ("pd")."""

    expr: Expr
    kind: str
    params: Dict[str, float] = field(default_factory=dict)
    _compiled: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("kinf", "pd"):
            raise ValueError(f"Comparison function kind must be 'kinf' or 'pd', got {self.kind!r}")
        object.__setattr__(self, "_compiled", compile_expr(self.expr, self.params, vectorized=True))

    def __reduce__(self):
        return (ComparisonFn, (self.expr, self.kind, dict(self.params)))

    @classmethod
    def from_text(cls, text: str, kind: str, *, params=None, label: str = "comparison function"):
        params = dict(params or {})
        try:
            expr = parse_expr(text, dim=1, params=params, aliases={"s": 1})
        except ExprError as err:
            raise err.with_field(label) from err
        if expr.is_bool:
            raise SchemaError(f"{label} must be a real expression")
        return cls(expr=expr, kind=kind, params=params)

    def __call__(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return self._compiled(s.reshape(1, -1))

    def validate(self, s_max: float = 10.0, n: int = 256) -> List[str]:
        """Sampled class checks; returns a list of problems (empty when none)."""
        s_max = max(float(s_max), 1e-6)
        grid = np.linspace(0.0, s_max, n)
        values = self(grid)
        problems = []
        if not np.all(np.isfinite(values)):
            problems.append("non-finite values on [0, s_max]")
            return problems
        if abs(values[0]) > 1e-12:
            problems.append(f"value at 0 is {values[0]}, expected 0")
        if self.kind == "kinf":
            if np.any(np.diff(values) <= 0):
                problems.append("not strictly increasing on the sample grid")
            if not values[-1] > values[n // 2]:
                problems.append("no unbounded growth trend up to s_max")
        elif np.any(values[1:] <= 0):
            problems.append("not positive for s > 0")
        return problems


@dataclass(frozen=True)
class LyapunovCertificate:
    V: Expr
    alpha1: ComparisonFn
    alpha2: ComparisonFn
    rho: ComparisonFn
    target: ClosedSetSpec
    params: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_document(cls, document: dict, *, dim: int, eq_tol: float = EQ_TOL, name: str = "A"):
        """
        Parse a certificate document:
        {"V", "alpha1", "alpha2", "rho", "set_membership", "set_distance", "params"?, "name"?}
        """
        if not isinstance(document, dict):
            raise SchemaError("Certificate must be a JSON object")
        for key in ("V", "alpha1", "alpha2", "rho", "set_membership", "set_distance"):
            if not isinstance(document.get(key), str):
                raise SchemaError(f"Certificate field '{key}' must be an expression string")
        params = document.get("params", {}) or {}
        if not isinstance(params, dict):
            raise SchemaError("Certificate params must be an object of name -> number")
        params = {k: float(v) for k, v in params.items()}
        try:
            V = parse_expr(document["V"], dim=dim, params=params)
        except ExprError as err:
            raise err.with_field("V") from err
        if V.is_bool:
            raise SchemaError("V must be a real expression")
        return cls(
            V=V,
            alpha1=ComparisonFn.from_text(document["alpha1"], "kinf", params=params, label="alpha1"),
            alpha2=ComparisonFn.from_text(document["alpha2"], "kinf", params=params, label="alpha2"),
            rho=ComparisonFn.from_text(document["rho"], "pd", params=params, label="rho"),
            target=ClosedSetSpec.from_texts(
                document["set_membership"],
                document["set_distance"],
                dim=dim,
                params=params,
                name=document.get("name", name),
                eq_tol=eq_tol,
            ),
            params=params,
        )

    def to_document(self) -> dict:
        return {
            "name": self.target.name,
            "V": to_text(self.V),
            "alpha1": to_text(self.alpha1.expr),
            "alpha2": to_text(self.alpha2.expr),
            "rho": to_text(self.rho.expr),
            "set_membership": to_text(self.target.membership),
            "set_distance": to_text(self.target.distance_expr),
            "params": dict(self.params),
        }


def ball_certificate_document(lam: float = 0.5, g: float = 9.81) -> dict:
    """
    Certificate of the set {x1 = x2 = 0} for the bouncing ball (also valid for
    the ball driving a decaying state): V = (1 + theta atan(x2)) (x2^2/2 + g x1)
    with theta = (1 - lam^2) / (pi (1 + lam^2)).
    """
    theta = (1.0 - lam * lam) / (math.pi * (1.0 + lam * lam))
    return {
        "name": "A1",
        "V": "(1 + theta*atan(x2))*(x2^2/2 + g*x1)",
        "alpha1": "0.3*min(s^2, 2*g*s)",
        "alpha2": "0.75*s^2 + 1.5*g*s",
        "rho": "0.15*min(s^2, 2*g*s)/(1 + s^2)",
        "set_membership": "x1 == 0 && x2 == 0",
        "set_distance": "sqrt(x1^2 + x2^2)",
        "params": {"theta": theta, "g": g},
    }


# ---------------------------------------------------------------------------
# Lyapunov inequalities
# ---------------------------------------------------------------------------


@dataclass
class LyapunovReport:
    passed: bool
    margins: Dict[str, Optional[float]]
    counterexamples: Dict[str, List[dict]]
    n_points: Dict[str, int]
    comparison_problems: Dict[str, List[str]] = field(default_factory=dict)
    set_inconsistencies: int = 0

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "margins": self.margins,
            "counterexamples": self.counterexamples,
            "n_points": self.n_points,
            "comparison_problems": self.comparison_problems,
            "set_inconsistencies": self.set_inconsistencies,
        }


def _worst(slack: np.ndarray, states: np.ndarray, eps_slack: float):
    if slack.size == 0:
        return None, []
    order = np.argsort(slack, kind="stable")
    bad = [i for i in order[:MAX_COUNTEREXAMPLES] if slack[i] < -eps_slack]
    return float(slack[order[0]]), [{"state": _as_list(states[i]), "slack": float(slack[i])} for i in bad]


def _gradient_fns(V: Expr, dim: int, params: Dict[str, float], eq_tol: float):
    try:
        grad = gradient(V, dim)
    except NotDifferentiable as err:
        raise GradientUnavailable(str(err)) from err
    return [compile_expr(e, params, eq_tol=eq_tol, vectorized=True) for e in grad]


def finite_difference_gradient(expr: Expr, points, *, params=None, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of expr at points of shape (N, dim)."""
    points = np.asarray(points, dtype=float)
    fn = compile_expr(expr, params, vectorized=True)
    out = np.empty_like(points)
    for i in range(points.shape[1]):
        shift = np.zeros(points.shape[1])
        shift[i] = step
        out[:, i] = (fn((points + shift).T) - fn((points - shift).T)) / (2.0 * step)
    return out


def symbolic_gradient(expr: Expr, points, *, params=None) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    fns = _gradient_fns(expr, points.shape[1], dict(params or {}), EQ_TOL)
    return np.stack([fn(points.T) for fn in fns], axis=1)


def check_lyapunov(
    sys: SystemData,
    cert: LyapunovCertificate,
    points,
    *,
    eps_slack: float = EPS_SLACK,
) -> LyapunovReport:
    """
    Check the sandwich bound on C u D u g(D), the flow decrease on C and the
    jump decrease on D over the sample points.

    Parameters
    ----------
    sys : SystemData
    cert : LyapunovCertificate
    points : array of shape (N, dim)
        Sample grid; only points in C or D are used
    eps_slack : float
        A slack below -eps_slack fails the check
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or X.shape[1] != sys.dim:
        raise ValueError(f"Sample points must have shape (N, {sys.dim}), got {X.shape}")
    params = dict(cert.params)
    V = compile_expr(cert.V, params, eq_tol=sys.eq_tol, vectorized=True)
    grad_fns = _gradient_fns(cert.V, sys.dim, params, sys.eq_tol)
    target = cert.target

    in_c = sys.in_flow_set_batch(X)
    in_d = sys.in_jump_set_batch(X)
    XC, XD = X[in_c], X[in_d]
    G = sys.jump_batch(XD) if len(XD) else np.empty((0, sys.dim))
    S = np.concatenate([X[in_c | in_d], G])

    dS = target.distance_batch(S)
    vS = V(S.T)
    lower = vS - cert.alpha1(dS)
    upper = cert.alpha2(dS) - vS

    dC = target.distance_batch(XC)
    if len(XC):
        grads = np.stack([fn(XC.T) for fn in grad_fns], axis=1)
        if not np.all(np.isfinite(grads)):
            raise GradientUnavailable("Gradient of V is not finite at some flow-set samples")
        flow_slack = -cert.rho(dC) - np.sum(grads * sys.flow_batch(XC), axis=1)
    else:
        flow_slack = np.empty(0)

    dD = target.distance_batch(XD)
    jump_slack = -cert.rho(dD) - (V(G.T) - V(XD.T)) if len(XD) else np.empty(0)

    margins, counterexamples = {}, {}
    for label, slack, states in (
        ("lower_bound", lower, S),
        ("upper_bound", upper, S),
        ("flow_decrease", flow_slack, XC),
        ("jump_decrease", jump_slack, XD),
    ):
        margins[label], counterexamples[label] = _worst(slack, states, eps_slack)

    s_max = float(dS.max()) if dS.size else 1.0
    comparison_problems = {
        label: fn.validate(s_max)
        for label, fn in (("alpha1", cert.alpha1), ("alpha2", cert.alpha2), ("rho", cert.rho))
    }
    comparison_problems = {k: v for k, v in comparison_problems.items() if v}

    passed = not comparison_problems and all(m is None or m >= -eps_slack for m in margins.values())
    report = LyapunovReport(
        passed=passed,
        margins=margins,
        counterexamples=counterexamples,
        n_points={"sandwich": int(len(S)), "flow": int(len(XC)), "jump": int(len(XD))},
        comparison_problems=comparison_problems,
        set_inconsistencies=int(len(target.inconsistent_points(S))),
    )
    logger.info("Lyapunov check on %s: %s (margins %s)", sys.name, "pass" if passed else "fail", margins)
    return report


def restrict_system(sys: SystemData, set_: ClosedSetSpec) -> SystemData:
    """The system H restricted to A: flow set C & A, jump set D & A."""
    return sys.restricted(set_.membership, name=f"{sys.name}&{set_.name}", params=set_.params)


# ---------------------------------------------------------------------------
# Trajectory-based checks
# ---------------------------------------------------------------------------


def _run_states(run) -> np.ndarray:
    return np.concatenate([seg.states for seg in run.segments])


def _sfpi_worker(x0, *, sys, set_, cfg):
    run = simulate(sys, x0, cfg)
    states = _run_states(run)
    d = set_.distance_batch(states)
    i = int(np.argmax(d))
    return float(d[i]), _as_list(states[i])


@dataclass
class SfpiReport:
    passed: bool
    max_distance: float
    n_samples: int
    witness: Optional[dict] = None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "max_distance": self.max_distance, "n_samples": self.n_samples, "witness": self.witness}


def check_sfpi(
    sys: SystemData,
    set_: ClosedSetSpec,
    samples,
    cfg: Optional[SimConfig] = None,
    *,
    eps_inv: float = EPS_INV,
    workers: int = 1,
) -> SfpiReport:
    """Strong forward pre-invariance: runs started on the set never leave it (within eps_inv)."""
    cfg = cfg or SimConfig()
    # samples off the set or outside C u D are skipped
    samples = [
        x for x in (np.asarray(s, dtype=float) for s in samples)
        if set_.contains(x) and (sys.in_flow_set(x) or sys.in_jump_set(x))
    ]
    results = sweep(partial(_sfpi_worker, sys=sys, set_=set_, cfg=cfg), samples, workers=workers, label="runs")
    if not results:
        return SfpiReport(passed=True, max_distance=0.0, n_samples=0)
    worst = int(np.argmax([d for d, _ in results]))
    max_d, state = results[worst]
    passed = max_d <= eps_inv
    witness = None if passed else {"sample": _as_list(samples[worst]), "state": state, "distance": max_d}
    return SfpiReport(passed=passed, max_distance=max_d, n_samples=len(samples), witness=witness)


def _path_profiles(x0, *, sys, set_, eps, cfg, mode, max_zeno, max_branches, omega_tol):
    """
    Per solution path: the latest hybrid time t + j with distance > eps at each
    Zeno level, the path's sup Zeno index, and how its last run ended.
    """
    if mode == "classical":
        runs_by_path = [[simulate(sys, x0, cfg)]]
        statuses = [runs_by_path[0][0].termination.kind]
    else:
        solution = simulate_extended(
            sys, x0, cfg, max_zeno=max_zeno, max_branches=max_branches, omega_tol=omega_tol
        )
        runs_by_path, statuses = [], []
        for leaf in solution.leaves():
            runs_by_path.append([b.run for b in solution.path(leaf.branch_id) if b.run is not None])
            statuses.append(leaf.status)

    profiles = []
    for runs, status in zip(runs_by_path, statuses):
        late = {}
        witness = None
        for run in runs:
            for seg in run.segments:
                d = set_.distance_batch(seg.states)
                bad = np.flatnonzero(d > eps)
                if bad.size == 0:
                    continue
                i = int(bad[-1])
                tj = float(seg.times[i]) + seg.j
                if tj >= late.get(run.k, -np.inf):
                    late[run.k] = tj
                    witness = {
                        "sample": _as_list(x0),
                        "state": _as_list(seg.states[i]),
                        "t": float(seg.times[i]),
                        "j": seg.j,
                        "k": run.k,
                        "distance": float(d[i]),
                    }
        last = runs[-1]
        profiles.append({
            "late": late,
            "sup_zeno": last.k,
            "status": status,
            "final_outside": bool(set_.distance(last.final_state) > eps),
            "witness": witness,
        })
    return profiles


@dataclass
class AttractivityReport:
    passed: bool
    mode: str
    T: Optional[float]
    K: Optional[int]
    n_samples: int
    witness: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed, "mode": self.mode, "T": self.T, "K": self.K,
            "n_samples": self.n_samples, "witness": self.witness,
        }


def _grid_above(value: float, resolution: float) -> float:
    return (math.floor(value / resolution + 1e-6) + 1) * resolution


def check_attractivity(
    sys: SystemData,
    set_: ClosedSetSpec,
    samples,
    *,
    eps: float,
    r: float,
    cfg: Optional[SimConfig] = None,
    mode: str = "classical",
    max_zeno: int = 3,
    max_branches: int = 16,
    omega_tol: float = 1e-3,
    t_resolution: float = 1e-3,
    workers: int = 1,
) -> AttractivityReport:
    """
    Search the smallest K, then the smallest T on a t_resolution grid, such
    that every sampled solution point (t, j, k) with
    (t + j >= T and k = K) or k > K or (k = sup_zeno < K and t + j >= T)
    lies within eps of the set. Classical mode fixes K = 0.
    """
    if mode not in ("classical", "extended"):
        raise ValueError(f"mode must be 'classical' or 'extended', got {mode!r}")
    cfg = cfg or SimConfig()
    pool = []
    for x in samples:
        x = np.asarray(x, dtype=float)
        if (sys.in_flow_set(x) or sys.in_jump_set(x)) and set_.distance(x) <= r:
            pool.append(x)
    if not pool:
        raise SampleError(f"No samples in C u D within distance {r} of {set_.name}")

    worker = partial(
        _path_profiles, sys=sys, set_=set_, eps=eps, cfg=cfg, mode=mode,
        max_zeno=max_zeno, max_branches=max_branches, omega_tol=omega_tol,
    )
    profiles = [p for result in sweep(worker, pool, workers=workers, label="samples") for p in result]

    k_values = [0] if mode == "classical" else list(range(max_zeno + 1))
    undecided = None
    first_witness = None
    for K in k_values:
        T = t_resolution
        feasible, unresolved, witness = True, False, None
        for prof in profiles:
            if any(k > K for k in prof["late"]):
                feasible, witness = False, prof["witness"]
                break
            for k, tj in prof["late"].items():
                if k == K or (prof["sup_zeno"] < K and k == prof["sup_zeno"]):
                    T = max(T, _grid_above(tj, t_resolution))
            if prof["final_outside"] and prof["status"] != "Deadlock" and prof["sup_zeno"] <= K:
                if mode == "classical" and prof["status"] == "ZenoDetected":
                    feasible, witness = False, prof["witness"]
                    break
                unresolved = True
        if feasible and not unresolved:
            logger.info("Attractivity (%s): T=%.6g, K=%d", mode, T, K)
            return AttractivityReport(passed=True, mode=mode, T=T, K=K, n_samples=len(pool))
        if feasible and unresolved and undecided is None:
            undecided = K
        if first_witness is None:
            first_witness = witness
    if undecided is not None:
        raise BudgetExceeded(
            f"Solutions still outside the {eps}-neighbourhood at the end of the horizon (K={undecided}); "
            "increase the horizon, max_jumps or max_zeno"
        )
    return AttractivityReport(passed=False, mode=mode, T=None, K=None, n_samples=len(pool), witness=first_witness)


def _sup_distance_worker(x0, *, sys, set_, cfg, extended, max_zeno, max_branches, omega_tol, factor):
    """Supremum of the distance along all runs from x0, and whether the runs diverge."""
    try:
        if extended:
            solution = simulate_extended(
                sys, x0, cfg, max_zeno=max_zeno, max_branches=max_branches, omega_tol=omega_tol
            )
            runs = [b.run for b in solution.branches if b.run is not None]
        else:
            runs = [simulate(sys, x0, cfg)]
    except IntegrationError:
        return math.inf, True
    sup_d, diverged = 0.0, False
    for run in runs:
        if run.termination.kind == "EvalError":
            diverged = True
        d = set_.distance_batch(_run_states(run))
        if not np.all(np.isfinite(d)):
            return math.inf, True
        sup_d = max(sup_d, float(d.max()))
        if d[-1] >= d.max() and d[-1] > factor * d[0]:
            diverged = True
    return sup_d, diverged


@dataclass
class UgsReport:
    passed: bool
    radii: List[float]
    envelope: List[Optional[float]]
    slope: Optional[float]
    diverged: bool
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed, "radii": self.radii, "envelope": self.envelope,
            "slope": self.slope, "diverged": self.diverged, "notes": self.notes,
        }


def check_ugs_envelope(
    sys: SystemData,
    set_: ClosedSetSpec,
    radii: Sequence[float],
    *,
    unit_bounds,
    samples_per_radius: int = 16,
    cfg: Optional[SimConfig] = None,
    extended: bool = False,
    max_zeno: int = 3,
    max_branches: int = 16,
    omega_tol: float = 1e-3,
    divergence_factor: float = 10.0,
    seed: int = 0,
    workers: int = 1,
) -> UgsReport:
    """
    Envelope m(r) = max over samples at radius r of the supremum of the
    distance along their solutions. Passes when nothing diverges and m
    vanishes as r -> 0 (positive log-log slope).
    """
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise SampleError("radii must be positive and strictly increasing")
    cfg = cfg or SimConfig()
    envelope: List[Optional[float]] = []
    notes = []
    diverged = False
    for r in radii:
        candidates = scaled_samples(unit_bounds, r, 4 * samples_per_radius, seed=seed)
        keep = (sys.in_flow_set_batch(candidates) | sys.in_jump_set_batch(candidates))
        keep &= set_.distance_batch(candidates) <= r
        pool = list(candidates[keep][:samples_per_radius])
        if not pool:
            notes.append(f"no samples in C u D within radius {r}")
            envelope.append(None)
            continue
        worker = partial(
            _sup_distance_worker, sys=sys, set_=set_, cfg=cfg, extended=extended,
            max_zeno=max_zeno, max_branches=max_branches, omega_tol=omega_tol,
            factor=divergence_factor,
        )
        results = sweep(worker, pool, workers=workers, label=f"samples at r={r}")
        m = max(d for d, _ in results)
        diverged = diverged or any(flag for _, flag in results)
        envelope.append(m if math.isfinite(m) else None)

    finite = [(r, m) for r, m in zip(radii, envelope) if m is not None and m > 0]
    slope = None
    if len(finite) >= 2:
        rs, ms = zip(*finite)
        slope = float(np.polyfit(np.log(rs), np.log(ms), 1)[0])
    vanishing = slope is None or slope > 0
    if envelope and all(m is not None and m == 0 for m in envelope):
        vanishing = True
    passed = not diverged and all(m is not None for m in envelope) and vanishing
    if diverged:
        notes.append("envelope diverges")
    elif slope is not None and slope <= 0:
        notes.append("envelope does not vanish as r -> 0")
    return UgsReport(passed=passed, radii=radii, envelope=envelope, slope=slope, diverged=diverged, notes=notes)


# ---------------------------------------------------------------------------
# Sequential narrowing
# ---------------------------------------------------------------------------


def _narrowing_run(x0, *, sys, set_, cfg, reach_tol, omega_tol):
    run = simulate(sys, x0, cfg)
    d = set_.distance_batch(_run_states(run))
    outcome = {
        "sample": _as_list(x0),
        "termination": run.termination.kind,
        "min_distance": float(d.min()),
        "omega_distance": None,
    }
    if run.termination.kind == "ZenoDetected":
        try:
            omega = estimate_omega(run, tol=omega_tol, eq_tol=sys.eq_tol, ratio_tol=cfg.zeno_ratio_tol)
        except NonConvergentTail:
            omega = None
        if omega is not None:
            outcome["kind"] = "zeno"
            outcome["omega_distance"] = max(set_.distance(p) for p in omega.points)
            return outcome
    if outcome["min_distance"] <= reach_tol:
        outcome["kind"] = "reaches"
    else:
        outcome["kind"] = "neither"
        outcome["distance_decreasing"] = bool(np.all(np.diff(d) <= 0))
    return outcome


@dataclass
class NarrowingReport:
    verdict: str  # UGpASoZ-consistent | UGSoZ+GpAoZ-consistent | fail
    stages: List[dict]
    witness: Optional[dict] = None
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict != "fail"

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "stages": self.stages, "witness": self.witness, "notes": self.notes}


def sequential_narrowing(
    sys: SystemData,
    chain: Sequence[LyapunovCertificate],
    *,
    bounds,
    n_points: int = 4096,
    seed: int = 0,
    cfg: Optional[SimConfig] = None,
    n_runs: int = 8,
    reach_tol: float = 1e-3,
    omega_tol: float = 1e-3,
    eps_slack: float = EPS_SLACK,
    workers: int = 1,
) -> NarrowingReport:
    """
    Check a chain A_n in ... in A_1 in A_0 = C u D, one certificate per set.

    Every A_i must pass the Lyapunov check on H restricted to A_{i-1}; runs
    from A_{i-1} minus A_i (i < n) must be Zeno with a convergent omega-limit
    estimate, or meet A_i.
    """
    if not chain:
        raise ValueError("Narrowing chain is empty")
    cfg = cfg or SimConfig()
    points = box_samples(bounds, n_points, seed=seed)
    in_base = sys.in_flow_set_batch(points) | sys.in_jump_set_batch(points)

    outer = in_base
    for i, cert in enumerate(chain, start=1):
        inner = cert.target.contains_batch(points)
        escaped = np.flatnonzero(inner & ~outer)
        if escaped.size:
            raise ChainNotNested(
                f"A{i} ({cert.target.name}) is not contained in A{i - 1}: "
                f"sample {_as_list(points[escaped[0]])}"
            )
        outer = inner

    stages = []
    all_zeno = True
    notes = []
    for i, cert in enumerate(chain, start=1):
        base = sys if i == 1 else restrict_system(sys, chain[i - 2].target)
        lyap = check_lyapunov(base, cert, points, eps_slack=eps_slack)
        stage = {"stage": i, "set": cert.target.name, "system": base.name, "lyapunov": lyap.to_dict()}
        stages.append(stage)
        if not lyap.passed:
            return NarrowingReport(
                verdict="fail", stages=stages, notes=notes,
                witness={"stage": i, "reason": "lyapunov", "counterexamples": lyap.counterexamples},
            )
        if i == len(chain):
            break

        in_base_i = base.in_flow_set_batch(points) | base.in_jump_set_batch(points)
        candidates = points[in_base_i & ~cert.target.contains_batch(points)][:n_runs]
        worker = partial(_narrowing_run, sys=base, set_=cert.target, cfg=cfg, reach_tol=reach_tol, omega_tol=omega_tol)
        runs = sweep(worker, list(candidates), workers=workers, label=f"stage {i} runs")
        stage["runs"] = runs
        for outcome in runs:
            if outcome["kind"] == "neither":
                if outcome.get("distance_decreasing"):
                    notes.append(
                        f"stage {i}: run from {outcome['sample']} approaches {cert.target.name} "
                        "without meeting it"
                    )
                return NarrowingReport(
                    verdict="fail", stages=stages, notes=notes,
                    witness={"stage": i, "reason": "run neither Zeno nor meeting the set", "run": outcome},
                )
            if outcome["kind"] != "zeno":
                all_zeno = False

    verdict = "UGpASoZ-consistent" if all_zeno else "UGSoZ+GpAoZ-consistent"
    logger.info("Sequential narrowing on %s: %s", sys.name, verdict)
    return NarrowingReport(verdict=verdict, stages=stages, notes=notes)
