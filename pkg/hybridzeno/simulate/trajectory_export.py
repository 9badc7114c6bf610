"""CSV and JSON export of classical runs and extended solutions."""

import csv
import json

import numpy as np

from ..helpers.time_domain import domain_to_dict


def csv_header(dim):
    return ["t", "j", "k", "seg_id", "branch_id"] + [f"x{i}" for i in range(1, dim + 1)]


def _thin(times, sample_dt):
    """Indices kept when thinning to sample_dt; segment endpoints are always kept."""
    n = len(times)
    if sample_dt is None or n <= 2:
        return list(range(n))
    keep = [0]
    last = times[0]
    for i in range(1, n - 1):
        if times[i] - last >= sample_dt * (1.0 - 1e-9):
            keep.append(i)
            last = times[i]
    keep.append(n - 1)
    return keep


def run_records(run, *, branch_id=0, seg_offset=0, sample_dt=None):
    """
    Trajectory records (t, j, k, seg_id, branch_id, x) of one classical run,
    in (j, t) order.
    """
    records = []
    for i, seg in enumerate(run.segments):
        for idx in _thin(seg.times, sample_dt):
            records.append((float(seg.times[idx]), seg.j, seg.k, seg_offset + i, branch_id, seg.states[idx]))
    return records


def solution_records(solution, *, sample_dt=None):
    """Records of every branch of an extended solution, branches in pre-order."""
    records = []
    seg_offset = 0
    for branch in solution.branches:
        if branch.run is None:
            records.append((branch.t_start, 0, branch.k, seg_offset, branch.branch_id, branch.start_state))
            seg_offset += 1
            continue
        records.extend(
            run_records(branch.run, branch_id=branch.branch_id, seg_offset=seg_offset, sample_dt=sample_dt)
        )
        seg_offset += len(branch.run.segments)
    return records


def write_csv(path, records, dim):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(csv_header(dim))
        for t, j, k, seg_id, branch_id, x in records:
            writer.writerow([repr(t), j, k, seg_id, branch_id] + [repr(float(v)) for v in x])


def read_csv(path):
    """Read a trajectory CSV back into (t, j, k, seg_id, branch_id, x) records."""
    records = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        next(reader)
        for row in reader:
            records.append((
                float(row[0]), int(row[1]), int(row[2]), int(row[3]), int(row[4]),
                np.array([float(v) for v in row[5:]]),
            ))
    return records


def _termination_dict(termination):
    out = {
        "kind": termination.kind,
        "state": [float(v) for v in termination.state],
        "message": termination.message,
    }
    if termination.certificate is not None:
        out["zeno_certificate"] = termination.certificate.to_dict()
    return out


def _branch_dict(branch, records):
    out = {
        "branch_id": branch.branch_id,
        "parent_id": branch.parent_id,
        "k": branch.k,
        "t_start": branch.t_start,
        "start_state": [float(v) for v in branch.start_state],
        "status": branch.status,
        "children": list(branch.children),
    }
    if branch.run is not None:
        out["termination"] = _termination_dict(branch.run.termination)
        out["n_jumps"] = len(branch.run.jumps)
        out["domain"] = domain_to_dict(branch.run.domain)
    if branch.omega is not None:
        out["omega"] = {
            "points": [[float(v) for v in p] for p in branch.omega.points],
            "period": branch.omega.period,
            "residual": branch.omega.residual,
        }
    out["samples"] = [
        {"t": t, "j": j, "k": k, "seg_id": seg_id, "x": [float(v) for v in x]}
        for t, j, k, seg_id, branch_id, x in records
        if branch_id == branch.branch_id
    ]
    return out


def solution_document(sys, x0, solution, *, sample_dt=None):
    records = solution_records(solution, sample_dt=sample_dt)
    return {
        "system": sys.name,
        "dim": sys.dim,
        "x0": [float(v) for v in x0],
        "branches": [_branch_dict(b, records) for b in solution.branches],
    }


def run_document(sys, x0, run, *, sample_dt=None):
    """JSON document of a classical run: a one-branch tree."""
    from ..helpers.prolongation import Branch, ExtendedSolution

    branch = Branch(
        branch_id=0, parent_id=None, k=run.k, start_state=np.asarray(x0, dtype=float),
        t_start=run.t0, run=run, status=run.termination.kind,
    )
    return solution_document(sys, x0, ExtendedSolution(branches=[branch]), sample_dt=sample_dt)


def write_json(path, document):
    with open(path, "w") as f:
        json.dump(document, f, indent=2)
        f.write("\n")
