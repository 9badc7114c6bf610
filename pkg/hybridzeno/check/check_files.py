"""Certificate, chain, set and sample-box inputs of the check commands."""

from ..helpers.spec_lang import SchemaError
from ..helpers.stability import ClosedSetSpec, LyapunovCertificate
from ..helpers.system_files import read_json

DEFAULT_HALF_WIDTH = 5.0


def parse_bounds(text, dim):
    """
    Parse "lo:hi,lo:hi,..." (one interval per state coordinate). Without text
    the box is [-5, 5] in every coordinate.
    """
    if not text:
        return [(-DEFAULT_HALF_WIDTH, DEFAULT_HALF_WIDTH)] * dim
    bounds = []
    for part in text.split(","):
        lo, sep, hi = part.partition(":")
        try:
            interval = (float(lo), float(hi))
        except ValueError:
            raise SchemaError(f"Bounds entry '{part}' must have the form lo:hi") from None
        if not sep or interval[1] < interval[0]:
            raise SchemaError(f"Bounds entry '{part}' must have the form lo:hi with lo <= hi")
        bounds.append(interval)
    if len(bounds) != dim:
        raise SchemaError(f"Bounds give {len(bounds)} intervals, system dimension is {dim}")
    return bounds


def document_bounds(document, dim):
    """Bounds stored in a certificate or chain document, as [[lo, hi], ...], if any."""
    if not isinstance(document, dict) or "bounds" not in document:
        return None
    bounds = document["bounds"]
    if not isinstance(bounds, list) or len(bounds) != dim or not all(
        isinstance(b, list) and len(b) == 2 and b[0] <= b[1] for b in bounds
    ):
        raise SchemaError(f"bounds must be a list of {dim} [lo, hi] pairs")
    return [(float(lo), float(hi)) for lo, hi in bounds]


def unit_bounds(bounds):
    """Sign pattern of a box: [-1, 1], [0, 1] or [-1, 0] per coordinate."""
    return [(-1.0 if lo < 0 else 0.0, 1.0 if hi > 0 else 0.0) for lo, hi in bounds]


def load_certificate(path, *, dim, eq_tol):
    document = read_json(path)
    return LyapunovCertificate.from_document(document, dim=dim, eq_tol=eq_tol), document


def load_chain(path, *, dim, eq_tol):
    """
    A chain document is {"chain": [certificate, ...], "bounds"?: [...]},
    outermost set first; a bare list of certificates is accepted too.
    """
    document = read_json(path)
    entries = document.get("chain") if isinstance(document, dict) else document
    if not isinstance(entries, list) or not entries:
        raise SchemaError('Chain must be a non-empty list of certificates or {"chain": [...]}')
    chain = []
    for i, entry in enumerate(entries, start=1):
        try:
            chain.append(LyapunovCertificate.from_document(entry, dim=dim, eq_tol=eq_tol, name=f"A{i}"))
        except SchemaError as err:
            raise SchemaError(f"chain[{i - 1}]: {err}") from err
    return chain, document


def load_set(path, *, dim, eq_tol):
    """A set document has set_membership, set_distance and optional name/params (certificates qualify)."""
    document = read_json(path)
    if not isinstance(document, dict):
        raise SchemaError("Set document must be a JSON object")
    for key in ("set_membership", "set_distance"):
        if not isinstance(document.get(key), str):
            raise SchemaError(f"Set field '{key}' must be an expression string")
    params = document.get("params", {}) or {}
    if not isinstance(params, dict):
        raise SchemaError("Set params must be an object of name -> number")
    target = ClosedSetSpec.from_texts(
        document["set_membership"],
        document["set_distance"],
        dim=dim,
        params={k: float(v) for k, v in params.items()},
        name=document.get("name", "A"),
        eq_tol=eq_tol,
    )
    return target, document
