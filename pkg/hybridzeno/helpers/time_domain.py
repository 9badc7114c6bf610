"""Classical and extended (three-index) hybrid time domains."""

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

from .errors import HybridZenoError


class MonotonicityViolation(HybridZenoError):
    """Raised when a segment does not continue the domain it is appended to."""
    pass


class UnknownLevel(HybridZenoError):
    """Raised when a Zeno index is not present in a domain."""
    pass


@dataclass(frozen=True)
class HybridTime:
    """A point (t, j, k) of an extended hybrid time domain."""

    t: float
    j: int
    k: int = 0

    def __post_init__(self):
        if self.t < 0 or self.j < 0 or self.k < 0:
            raise ValueError(f"Hybrid time components must be nonnegative, got {self}")


@dataclass(frozen=True)
class DomainSegment:
    """The interval [t_start, t_end] x {j} x {k}."""

    t_start: float
    t_end: float
    j: int
    k: int = 0

    def __post_init__(self):
        if not math.isfinite(self.t_start) or self.t_start < 0:
            raise MonotonicityViolation(f"Segment start must be finite and nonnegative: {self}")
        if self.t_end < self.t_start:
            raise MonotonicityViolation(
                f"Segment ends before it starts: [{self.t_start}, {self.t_end}] (j={self.j}, k={self.k})"
            )
        if self.j < 0 or self.k < 0:
            raise MonotonicityViolation(f"Segment indices must be nonnegative: {self}")

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.t_end)

    def contains(self, t: float) -> bool:
        return self.t_start <= t <= self.t_end


@dataclass(frozen=True)
class ClassicalTimeDomain:
    """
    A classical hybrid time domain: the union of [t_j, t_{j+1}] x {j}.

    Stored as (t_start, t_end, j) triples ordered by j.
    """

    intervals: Tuple[Tuple[float, float, int], ...] = ()

    def is_valid(self) -> bool:
        """Check interval endpoints are nondecreasing and jump indices consecutive."""
        for i, (t_start, t_end, j) in enumerate(self.intervals):
            if t_end < t_start:
                return False
            if i == 0:
                continue
            prev_start, prev_end, prev_j = self.intervals[i - 1]
            if j != prev_j + 1 or t_start != prev_end or math.isinf(prev_end):
                return False
        return True


@dataclass(frozen=True)
class ExtendedHybridTimeDomain:
    """
    Extended hybrid time domain: ordered segments ([t_{j,k}, t_{j+1,k}], j, k).

    zeno_times holds (k, tau) for every level certified Zeno; tau is the Zeno
    time at which level k+1 (if any) starts.
    """

    segments: Tuple[DomainSegment, ...] = ()
    zeno_times: Tuple[Tuple[int, float], ...] = ()

    @classmethod
    def from_segments(cls, segments: Iterable[DomainSegment], zeno_times=()) -> "ExtendedHybridTimeDomain":
        segments = tuple(segments)
        zeno_times = tuple(sorted((int(k), float(tau)) for k, tau in zeno_times))
        zeno_map = dict(zeno_times)
        prev = None
        for seg in segments:
            _check_step(prev, seg, zeno_map)
            prev = seg
        return cls(segments=segments, zeno_times=zeno_times)

    @property
    def levels(self) -> List[int]:
        return sorted({seg.k for seg in self.segments})

    def level(self, k: int) -> Tuple[DomainSegment, ...]:
        segs = tuple(seg for seg in self.segments if seg.k == k)
        if not segs:
            raise UnknownLevel(f"Zeno index {k} not present in domain (levels: {self.levels})")
        return segs

    def zeno_time(self, k: int) -> Optional[float]:
        """Return the certified Zeno time of level k, or None."""
        return dict(self.zeno_times).get(k)

    def __len__(self):
        return len(self.segments)


def _check_step(prev: Optional[DomainSegment], seg: DomainSegment, zeno_map) -> None:
    if prev is None:
        if seg.j != 0:
            raise MonotonicityViolation(f"First segment must have j=0, got j={seg.j}")
        return
    if prev.unbounded:
        raise MonotonicityViolation("Cannot append after an unbounded segment")
    if seg.k == prev.k:
        if seg.j != prev.j + 1:
            raise MonotonicityViolation(f"Jump index must step {prev.j} -> {prev.j + 1}, got {seg.j}")
        if seg.t_start != prev.t_end:
            raise MonotonicityViolation(
                f"Segment j={seg.j} starts at {seg.t_start} but segment j={prev.j} ends at {prev.t_end}"
            )
        return
    if seg.k == prev.k + 1:
        if seg.j != 0:
            raise MonotonicityViolation(f"New Zeno level must restart at j=0, got j={seg.j}")
        if seg.t_start < prev.t_end:
            raise MonotonicityViolation(
                f"Level {seg.k} starts at {seg.t_start}, before level {prev.k} ends at {prev.t_end}"
            )
        tau = zeno_map.get(prev.k)
        if tau is None:
            raise MonotonicityViolation(
                f"Level {seg.k} requires level {prev.k} to be Zeno (no accumulation recorded)"
            )
        if seg.t_start != tau:
            raise MonotonicityViolation(
                f"Level {seg.k} must start at the Zeno time {tau} of level {prev.k}, got {seg.t_start}"
            )
        return
    raise MonotonicityViolation(f"Illegal Zeno index step {prev.k} -> {seg.k}")


def append_segment(domain: ExtendedHybridTimeDomain, seg: DomainSegment) -> ExtendedHybridTimeDomain:
    """Return a new domain with seg appended after the current last segment."""
    prev = domain.segments[-1] if domain.segments else None
    _check_step(prev, seg, dict(domain.zeno_times))
    return ExtendedHybridTimeDomain(segments=domain.segments + (seg,), zeno_times=domain.zeno_times)


def mark_zeno(domain: ExtendedHybridTimeDomain, k: int, tau: float) -> ExtendedHybridTimeDomain:
    """Record that level k accumulates jumps at the Zeno time tau."""
    segs = domain.level(k)
    if any(seg.unbounded for seg in segs):
        raise MonotonicityViolation(f"Level {k} has unbounded ordinary time and cannot be Zeno")
    last_end = max(seg.t_end for seg in segs)
    if tau < last_end:
        raise MonotonicityViolation(f"Zeno time {tau} precedes the end {last_end} of level {k}")
    zeno = dict(domain.zeno_times)
    zeno[k] = float(tau)
    return ExtendedHybridTimeDomain(segments=domain.segments, zeno_times=tuple(sorted(zeno.items())))


def concatenate(first: ExtendedHybridTimeDomain, second: ExtendedHybridTimeDomain) -> ExtendedHybridTimeDomain:
    """Join two domains (e.g. a parent level and its prolongation), re-verifying all invariants."""
    return ExtendedHybridTimeDomain.from_segments(
        first.segments + second.segments,
        zeno_times=first.zeno_times + second.zeno_times,
    )


def suprema(domain: ExtendedHybridTimeDomain):
    """
    Componentwise suprema (sup_t, sup_j, sup_zeno) over all segments.

    An empty domain returns (0, 0, 0).
    """
    if not domain.segments:
        return 0.0, 0, 0
    sup_t = max(seg.t_end for seg in domain.segments)
    sup_j = max(seg.j for seg in domain.segments)
    sup_zeno = max(seg.k for seg in domain.segments)
    return sup_t, sup_j, sup_zeno


def is_complete(domain: ExtendedHybridTimeDomain, k: int) -> bool:
    """A level is complete when its ordinary time is unbounded or it carries a Zeno certificate."""
    segs = domain.level(k)
    return any(seg.unbounded for seg in segs) or domain.zeno_time(k) is not None


def is_zeno(domain: ExtendedHybridTimeDomain, k: int) -> bool:
    """Complete with finite sup_t."""
    segs = domain.level(k)
    return is_complete(domain, k) and not any(seg.unbounded for seg in segs)


def project_classical(domain: ExtendedHybridTimeDomain, k: int) -> ClassicalTimeDomain:
    """Drop the Zeno index of level k."""
    segs = domain.level(k)
    return ClassicalTimeDomain(intervals=tuple((seg.t_start, seg.t_end, seg.j) for seg in segs))


def domain_to_dict(domain: ExtendedHybridTimeDomain) -> dict:
    """JSON-ready form; unbounded ends are written as the string "inf"."""
    return {
        "segments": [
            {
                "t_start": seg.t_start,
                "t_end": "inf" if seg.unbounded else seg.t_end,
                "j": seg.j,
                "k": seg.k,
            }
            for seg in domain.segments
        ],
        "zeno_times": [{"k": k, "tau": tau} for k, tau in domain.zeno_times],
    }
