"""
Classical solutions of a hybrid system at a fixed Zeno index.

Flow is integrated with fixed-step RK4; an exit from the flowing region is
localized by bisecting the step length. Jumps apply g exactly once. Runs stop
at the horizon, on a certified geometric accumulation of jump times (Zeno),
after max_jumps, or when the state leaves C and D.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import SystemData
from .errors import ConfigError, HybridZenoError
from .spec_lang import ExprError
from .time_domain import DomainSegment, ExtendedHybridTimeDomain, mark_zeno

logger = logging.getLogger(__name__)


class IntegrationError(HybridZenoError):
    pass


class NotInJumpSet(HybridZenoError):
    pass


class InvalidInitialCondition(HybridZenoError):
    exit_code = 2


@dataclass
class SimConfig:
    step: float = 1e-3
    event_tol: float = 1e-9
    horizon: float = 10.0
    max_jumps: int = 10000
    zeno_window: int = 8
    zeno_ratio_tol: float = 0.05
    zeno_time_eps: float = 1e-6
    jump_priority: bool = True
    max_bisections: int = 200

    def validate(self) -> "SimConfig":
        for name in ("step", "event_tol", "horizon", "zeno_ratio_tol", "zeno_time_eps"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
                raise ConfigError(f"{name} must be a positive number, got {value!r}")
        for name in ("max_jumps", "max_bisections", "zeno_window"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.zeno_window < 3:
            raise ConfigError(f"zeno_window must be at least 3, got {self.zeno_window}")
        if not isinstance(self.jump_priority, bool):
            raise ConfigError(f"jump_priority must be true or false, got {self.jump_priority!r}")
        return self


@dataclass(frozen=True)
class ArcSegment:
    """Samples of one flow interval: times shape (N,), states shape (N, dim)."""

    j: int
    k: int
    times: np.ndarray
    states: np.ndarray


@dataclass(frozen=True)
class JumpEvent:
    t: float
    j: int  # jump index before the jump
    pre: np.ndarray
    post: np.ndarray


@dataclass(frozen=True)
class ZenoCertificate:
    zeno_time: float
    ratio: float
    gaps: Tuple[float, ...]
    remaining: float

    def to_dict(self) -> dict:
        return {
            "zeno_time": self.zeno_time,
            "ratio": self.ratio,
            "gaps": list(self.gaps),
            "remaining": self.remaining,
        }


@dataclass(frozen=True)
class Termination:
    kind: str  # Horizon | ZenoDetected | MaxJumps | Deadlock | EvalError
    state: np.ndarray
    certificate: Optional[ZenoCertificate] = None
    message: str = ""

    @property
    def zeno_time(self) -> Optional[float]:
        return self.certificate.zeno_time if self.certificate is not None else None


@dataclass(frozen=True)
class FlowExit:
    kind: str  # EnteredD | HorizonReached | LeftCAndD
    t: float
    state: np.ndarray


@dataclass
class ClassicalRun:
    segments: List[ArcSegment]
    domain: ExtendedHybridTimeDomain
    termination: Termination
    jumps: List[JumpEvent] = field(default_factory=list)
    x0: np.ndarray = None
    t0: float = 0.0
    k: int = 0

    @property
    def jump_times(self) -> List[float]:
        return [ev.t for ev in self.jumps]

    @property
    def post_jump_states(self) -> List[np.ndarray]:
        return [ev.post for ev in self.jumps]

    @property
    def final_state(self) -> np.ndarray:
        return self.termination.state

    @property
    def final_time(self) -> float:
        return float(self.segments[-1].times[-1])

    def samples(self):
        """Iterate (t, j, x) over all samples in order."""
        for seg in self.segments:
            for t, x in zip(seg.times, seg.states):
                yield float(t), seg.j, x


def _rk4_step(sys: SystemData, x: np.ndarray, dt: float) -> np.ndarray:
    k1 = sys.flow(x)
    k2 = sys.flow(x + 0.5 * dt * k1)
    k3 = sys.flow(x + 0.5 * dt * k2)
    k4 = sys.flow(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _is_flowing(sys: SystemData, x, cfg: SimConfig) -> bool:
    if not sys.in_flow_set(x):
        return False
    return not (cfg.jump_priority and sys.in_jump_set(x))


def _localize_exit(sys: SystemData, x: np.ndarray, dt: float, y_hi: np.ndarray, cfg: SimConfig):
    """Bisect the step length in (0, dt] for the first state outside the flowing region."""
    lo, hi = 0.0, dt
    y_lo = x
    for _ in range(cfg.max_bisections):
        if hi - lo <= cfg.event_tol and sys.in_jump_set(y_hi):
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        y_mid = _rk4_step(sys, x, mid)
        if _is_flowing(sys, y_mid, cfg):
            lo, y_lo = mid, y_mid
        else:
            hi, y_hi = mid, y_mid
    return lo, y_lo, hi, y_hi


def flow_segment(sys: SystemData, x0, t0: float, cfg: SimConfig, *, t_end: Optional[float] = None):
    """
    Integrate the flow from (t0, x0) until the state leaves the flowing region or t_end.

    Returns
    -------
    (times, states, FlowExit)
        The samples include the start point and the exit point.
    """
    t_end = cfg.horizon if t_end is None else t_end
    x = np.asarray(x0, dtype=float)
    t = float(t0)
    times = [t]
    states = [x]
    while t < t_end:
        dt = min(cfg.step, t_end - t)
        y = _rk4_step(sys, x, dt)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"Non-finite state {y.tolist()} at t={t + dt}")
        if _is_flowing(sys, y, cfg):
            t = t_end if t_end - t <= cfg.step else t + dt
            x = y
            times.append(t)
            states.append(x)
            continue

        lo, y_lo, hi, y_hi = _localize_exit(sys, x, dt, y, cfg)
        if lo > 0:
            times.append(t + lo)
            states.append(y_lo)
        if sys.in_jump_set(y_hi):
            times.append(t + hi)
            states.append(y_hi)
            return times, states, FlowExit("EnteredD", t + hi, y_hi)
        if sys.in_jump_set(y_lo):
            return times, states, FlowExit("EnteredD", t + lo, y_lo)
        return times, states, FlowExit("LeftCAndD", t + lo, y_lo)
    return times, states, FlowExit("HorizonReached", t, x)


def apply_jump(sys: SystemData, x) -> np.ndarray:
    if not sys.in_jump_set(x):
        raise NotInJumpSet(f"State {list(map(float, x))} is not in the jump set")
    return sys.jump(x)


def detect_zeno(jump_times: Sequence[float], cfg: SimConfig) -> Optional[ZenoCertificate]:
    """
    Certify a geometric accumulation of the trailing jump times.

    The last zeno_window gaps must be positive with successive ratios within
    zeno_ratio_tol of their median r < 1, and the extrapolated remaining time
    gap_last * r / (1 - r) must not exceed zeno_time_eps.
    """
    m = cfg.zeno_window
    if len(jump_times) < m + 1:
        return None
    tail = np.asarray(jump_times[-(m + 1):], dtype=float)
    gaps = np.diff(tail)
    if np.any(gaps <= 0):
        return None
    ratios = gaps[1:] / gaps[:-1]
    r = float(np.median(ratios))
    if not 0.0 < r < 1.0:
        return None
    if np.any(np.abs(ratios - r) > cfg.zeno_ratio_tol):
        return None
    remaining = float(gaps[-1] * r / (1.0 - r))
    if remaining > cfg.zeno_time_eps:
        return None
    return ZenoCertificate(
        zeno_time=float(tail[-1]) + remaining,
        ratio=r,
        gaps=tuple(float(g) for g in gaps),
        remaining=remaining,
    )


def simulate(sys: SystemData, x0, cfg: Optional[SimConfig] = None, *, t0: float = 0.0, k: int = 0) -> ClassicalRun:
    """
    Compute one classical (maximal up to horizon/Zeno) solution at Zeno index k.

    Parameters
    ----------
    sys : SystemData
    x0 : sequence of float
        Initial state; must lie in C or D
    cfg : SimConfig, optional
    t0 : float
        Start time (the parent's Zeno time when prolonging)
    k : int
        Zeno index recorded on every domain segment

    Returns
    -------
    ClassicalRun
    """
    cfg = (cfg or SimConfig()).validate()
    x = np.asarray(x0, dtype=float)
    if x.shape != (sys.dim,):
        raise InvalidInitialCondition(f"Initial state has length {x.size}, system dimension is {sys.dim}")
    if not np.all(np.isfinite(x)):
        raise InvalidInitialCondition(f"Initial state {x.tolist()} is not finite")
    if not (sys.in_flow_set(x) or sys.in_jump_set(x)):
        raise InvalidInitialCondition(f"Initial state {x.tolist()} lies in neither the flow set nor the jump set")

    t = float(t0)
    j = 0
    arc: List[ArcSegment] = []
    bounds: List[Tuple[float, float]] = []
    jumps: List[JumpEvent] = []
    cur_times = [t]
    cur_states = [x]
    termination = None
    jump_pending = False

    def close_segment(t_end):
        arc.append(ArcSegment(j=j, k=k, times=np.array(cur_times), states=np.array(cur_states)))
        bounds.append((cur_times[0], t_end))

    try:
        while termination is None:
            in_d = jump_pending or sys.in_jump_set(x)
            if in_d and (jump_pending or cfg.jump_priority or not sys.in_flow_set(x)):
                jump_pending = False
                post = apply_jump(sys, x)
                jumps.append(JumpEvent(t=t, j=j, pre=x, post=post))
                logger.debug("jump %d at t=%.12g: %s -> %s", j, t, x.tolist(), post.tolist())
                close_segment(t)
                j += 1
                x = post
                cur_times, cur_states = [t], [x]
                cert = detect_zeno([ev.t for ev in jumps], cfg)
                if cert is not None:
                    close_segment(t)
                    termination = Termination("ZenoDetected", state=x, certificate=cert)
                elif len(jumps) >= cfg.max_jumps:
                    close_segment(t)
                    termination = Termination("MaxJumps", state=x, message=f"{len(jumps)} jumps without a Zeno certificate")
                continue

            if not sys.in_flow_set(x):
                close_segment(t)
                termination = Termination("Deadlock", state=x, message="State left both C and D")
                continue

            times, states, exit_ = flow_segment(sys, x, t, cfg)
            cur_times.extend(times[1:])
            cur_states.extend(states[1:])
            t, x = exit_.t, exit_.state
            if exit_.kind == "EnteredD":
                jump_pending = True
            elif exit_.kind == "HorizonReached":
                close_segment(math.inf if sys.in_flow_set(x) else t)
                termination = Termination("Horizon", state=x)
            else:
                close_segment(t)
                termination = Termination("Deadlock", state=x, message="Flow left C outside D")
    except (ExprError, IntegrationError) as err:
        close_segment(t)
        termination = Termination("EvalError", state=x, message=str(err))
        logger.warning("Simulation stopped at t=%.12g: %s", t, err)

    domain = ExtendedHybridTimeDomain.from_segments(DomainSegment(a, b, i, k) for i, (a, b) in enumerate(bounds))
    if termination.kind == "ZenoDetected":
        domain = mark_zeno(domain, k, termination.zeno_time)
    logger.info(
        "Run at level k=%d from t=%.6g: %s after %d jumps (t=%.6g)",
        k, t0, termination.kind, len(jumps), t,
    )
    return ClassicalRun(
        segments=arc,
        domain=domain,
        termination=termination,
        jumps=jumps,
        x0=np.asarray(x0, dtype=float),
        t0=float(t0),
        k=k,
    )
