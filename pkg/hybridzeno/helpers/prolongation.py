"""
Prolongation of Zeno solutions past their Zeno time.

A Zeno run's omega-limit set is estimated from the tail of its post-jump
states; each limit point starts a new classical run at the Zeno time with
the Zeno index incremented. Several limit points make the solution branch.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .dynamics import SystemData
from .errors import HybridZenoError
from .simulator import ClassicalRun, SimConfig, simulate
from .spec_lang import EQ_TOL
from .time_domain import ExtendedHybridTimeDomain, concatenate

logger = logging.getLogger(__name__)

MAX_PERIOD = 4


class NotZeno(HybridZenoError):
    pass


class NonConvergentTail(HybridZenoError):
    pass


class EmptyOmega(HybridZenoError):
    pass


class BranchBudgetExceeded(HybridZenoError):
    """Raised when an extended solution needs more branches than allowed; carries the partial tree."""

    exit_code = 4

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class OmegaEstimate:
    points: Tuple[np.ndarray, ...]
    period: int
    residual: float


@dataclass(frozen=True)
class Continuation:
    state: np.ndarray
    t_start: float
    k: int
    deadlock: bool = False


def _extrapolate(values: np.ndarray, ratio_tol: float) -> float:
    """
    Limit of a sequence whose differences shrink geometrically; otherwise its
    last value. A limit past zero from a one-signed tail is clamped to 0.
    """
    if len(values) < 3:
        return float(values[-1])
    diffs = np.diff(values)
    if np.any(diffs == 0):
        return float(values[-1])
    ratios = diffs[1:] / diffs[:-1]
    r = float(np.median(ratios))
    if not 0.0 < r < 1.0 or np.any(np.abs(ratios - r) > ratio_tol):
        return float(values[-1])
    limit = float(values[-1] + diffs[-1] * r / (1.0 - r))
    if np.all(values > 0) and limit < 0 or np.all(values < 0) and limit > 0:
        return 0.0
    return limit


def estimate_omega(
    run: ClassicalRun,
    *,
    tol: float = 1e-3,
    eq_tol: float = EQ_TOL,
    ratio_tol: float = 0.05,
) -> OmegaEstimate:
    """
    Estimate the omega-limit set of a Zeno run.

    The tail of post-jump states is split into p interleaved clusters
    (p = 1..4, smallest first); each cluster's limit is extrapolated
    componentwise. The first p whose clusters converge within tol and are
    pairwise distinct is accepted.
    """
    if run.termination.kind != "ZenoDetected":
        raise NotZeno(f"Run terminated with {run.termination.kind}, not ZenoDetected")
    post = np.array(run.post_jump_states, dtype=float)
    window = len(run.termination.certificate.gaps)

    best_residual = np.inf
    for p in range(1, MAX_PERIOD + 1):
        n_tail = max(window, 2 * p)
        if n_tail > len(post):
            break
        tail = post[-n_tail:]
        limits = []
        residual = 0.0
        for c in range(p):
            samples = tail[c::p]
            limit = np.array([_extrapolate(samples[:, i], ratio_tol) for i in range(post.shape[1])])
            residual = max(
                residual,
                float(np.linalg.norm(samples[-1] - limit)),
                float(np.linalg.norm(samples[-2] - limit)),
            )
            limits.append(limit)
        best_residual = min(best_residual, residual)
        if residual > tol:
            continue
        distinct = all(
            np.linalg.norm(limits[a] - limits[b]) > tol for a in range(p) for b in range(a + 1, p)
        )
        if not distinct:
            continue
        # components within the estimate's accuracy of 0 are 0
        snap = max(10 * eq_tol, residual)
        points = []
        for limit in limits:
            snapped = np.where(np.abs(limit) <= snap, 0.0, limit)
            points.append(snapped)
        points.sort(key=lambda v: tuple(v.tolist()))
        logger.debug("omega estimate: period %d, residual %.3g, points %s", p, residual, [v.tolist() for v in points])
        return OmegaEstimate(points=tuple(points), period=p, residual=residual)
    raise NonConvergentTail(
        f"Post-jump tail does not converge to at most {MAX_PERIOD} points within {tol} "
        f"(best residual {best_residual:.3g})"
    )


def prolong(sys: SystemData, run: ClassicalRun, omega: OmegaEstimate) -> List[Continuation]:
    """One continuation per omega-limit point, starting at the Zeno time with k incremented."""
    if not omega.points:
        raise EmptyOmega("Omega-limit estimate has no points")
    tau = run.termination.zeno_time
    continuations = []
    for point in omega.points:
        deadlock = not (sys.in_flow_set(point) or sys.in_jump_set(point))
        continuations.append(Continuation(state=point, t_start=tau, k=run.k + 1, deadlock=deadlock))
    return continuations


@dataclass
class Branch:
    branch_id: int
    parent_id: Optional[int]
    k: int
    start_state: np.ndarray
    t_start: float
    run: Optional[ClassicalRun] = None
    omega: Optional[OmegaEstimate] = None
    status: str = ""
    children: List[int] = field(default_factory=list)

    @property
    def final_state(self) -> np.ndarray:
        return self.run.final_state if self.run is not None else self.start_state


@dataclass
class ExtendedSolution:
    """Branch tree of classical runs, stored in pre-order."""

    branches: List[Branch] = field(default_factory=list)

    @property
    def root(self) -> Branch:
        return self.branches[0]

    def leaves(self) -> List[Branch]:
        return [b for b in self.branches if not b.children]

    def path(self, branch_id: int) -> List[Branch]:
        chain = []
        current: Optional[Branch] = self.branches[branch_id]
        while current is not None:
            chain.append(current)
            current = self.branches[current.parent_id] if current.parent_id is not None else None
        return chain[::-1]

    def path_domain(self, branch_id: int) -> ExtendedHybridTimeDomain:
        domain = ExtendedHybridTimeDomain()
        for branch in self.path(branch_id):
            if branch.run is not None:
                domain = concatenate(domain, branch.run.domain)
        return domain

    def zeno_events(self, branch_id: int) -> List[Tuple[float, int]]:
        return [
            (b.run.termination.zeno_time, b.k)
            for b in self.path(branch_id)
            if b.run is not None and b.run.termination.kind == "ZenoDetected"
        ]

    def final_state(self, branch_id: Optional[int] = None) -> np.ndarray:
        if branch_id is None:
            branch_id = self.leaves()[0].branch_id
        return self.branches[branch_id].final_state


def simulate_extended(
    sys: SystemData,
    x0,
    cfg: Optional[SimConfig] = None,
    *,
    max_zeno: int = 3,
    max_branches: int = 16,
    omega_tol: float = 1e-3,
) -> ExtendedSolution:
    """
    Depth-first construction of an extended solution.

    Each Zeno run below max_zeno is prolonged from every point of its
    omega-limit estimate. Branch ids are assigned in pre-order.
    """
    cfg = (cfg or SimConfig()).validate()
    if max_zeno < 0:
        raise ValueError(f"max_zeno must be nonnegative, got {max_zeno}")
    solution = ExtendedSolution()

    def grow(state, t_start, k, parent_id, deadlock=False):
        if len(solution.branches) >= max_branches:
            raise BranchBudgetExceeded(
                f"Extended solution needs more than {max_branches} branches", partial=solution
            )
        branch = Branch(
            branch_id=len(solution.branches),
            parent_id=parent_id,
            k=k,
            start_state=np.asarray(state, dtype=float),
            t_start=t_start,
        )
        solution.branches.append(branch)
        if parent_id is not None:
            solution.branches[parent_id].children.append(branch.branch_id)
        if deadlock:
            branch.status = "Deadlock"
            logger.warning("Branch %d: omega-limit point %s lies outside C and D", branch.branch_id, state.tolist())
            return

        run = simulate(sys, state, cfg, t0=t_start, k=k)
        branch.run = run
        branch.status = run.termination.kind
        if run.termination.kind != "ZenoDetected" or k >= max_zeno:
            return
        try:
            omega = estimate_omega(run, tol=omega_tol, eq_tol=sys.eq_tol, ratio_tol=cfg.zeno_ratio_tol)
        except NonConvergentTail as err:
            branch.status = "NonConvergentTail"
            logger.warning("Branch %d not prolonged: %s", branch.branch_id, err)
            return
        branch.omega = omega
        for cont in prolong(sys, run, omega):
            grow(cont.state, cont.t_start, cont.k, branch.branch_id, deadlock=cont.deadlock)

    grow(np.asarray(x0, dtype=float), 0.0, 0, None)
    return solution
