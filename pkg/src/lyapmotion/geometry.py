"""Convex hulls, GJK/EPA signed distance, and the convex-pair Gamma ratio.

Hulls are plain vertex sets with a reference point (default: vertex
centroid). All distance operations are pure functions of immutable inputs
and are safe to call concurrently.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import _kernels
from .errors import (
    DegenerateConfigurationError,
    InvalidArgumentError,
    NumericalFailureError,
)

_CONTACT_TOL = _kernels.pyfallback.CONTACT_TOL


def _as_points(vertices, name):
    v = np.asarray(vertices, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] not in (2, 3):
        raise InvalidArgumentError(f"{name} must be an (n, 2) or (n, 3) array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return np.ascontiguousarray(v)


def _affine_rank(vertices):
    if vertices.shape[0] < 2:
        return 0
    rel = vertices[1:] - vertices[0]
    scale = max(1.0, float(np.abs(rel).max()))
    return int(np.linalg.matrix_rank(rel, tol=1e-9 * scale))


def _in_convex_hull(vertices, point):
    """Convex-combination feasibility test via a small LP."""
    n, d = vertices.shape
    a_eq = np.vstack([vertices.T, np.ones((1, n))])
    b_eq = np.concatenate([point, [1.0]])
    res = linprog(np.zeros(n), A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * n, method="highs")
    return res.status == 0


@dataclass(frozen=True)
class ConvexHull:
    """Convex hull of a vertex set with an interior reference point.

    Degenerate inputs (fewer than d+1 affinely independent vertices) are
    accepted but flagged; distance operations reject them.
    """

    vertices: np.ndarray
    reference_point: np.ndarray = None
    degenerate: bool = field(init=False, default=False)

    def __post_init__(self):
        verts = _as_points(self.vertices, "vertices")
        object.__setattr__(self, "vertices", verts)
        d = verts.shape[1]
        degenerate = verts.shape[0] < d + 1 or _affine_rank(verts) < d
        object.__setattr__(self, "degenerate", degenerate)
        if self.reference_point is None:
            ref = verts.mean(axis=0)
        else:
            ref = np.asarray(self.reference_point, dtype=np.float64)
            if ref.shape != (d,):
                raise InvalidArgumentError(f"reference point must have shape ({d},)")
            if not degenerate and not _in_convex_hull(verts, ref):
                raise InvalidArgumentError("reference point lies outside the hull")
        object.__setattr__(self, "reference_point", ref)

    @property
    def dim(self):
        return self.vertices.shape[1]

    def translated(self, offset):
        """Hull shifted by ``offset``; skips revalidation (pure translation)."""
        offset = np.asarray(offset, dtype=np.float64)
        out = object.__new__(ConvexHull)
        object.__setattr__(out, "vertices", self.vertices + offset)
        object.__setattr__(out, "reference_point", self.reference_point + offset)
        object.__setattr__(out, "degenerate", self.degenerate)
        return out

    def to_dict(self):
        return {"vertices": self.vertices.tolist(), "reference": self.reference_point.tolist()}

    @classmethod
    def from_dict(cls, data):
        ref = data.get("reference")
        return cls(np.asarray(data["vertices"], dtype=np.float64),
                   None if ref is None else np.asarray(ref, dtype=np.float64))


@dataclass(frozen=True)
class DistanceWitness:
    """Signed distance with realizing boundary points.

    ``normal`` is the unit direction along which translating hull A
    increases the signed distance; at contact it comes from the touched
    face of the Minkowski difference (witness points coincide there).
    """

    signed_distance: float
    point_on_a: np.ndarray
    point_on_b: np.ndarray
    normal: np.ndarray


def _require_valid_pair(a, b):
    if a.degenerate or b.degenerate:
        raise InvalidArgumentError("distance operations require non-degenerate hulls")
    if a.dim != b.dim:
        raise InvalidArgumentError(f"dimension mismatch: {a.dim} vs {b.dim}")


def support(hull, direction):
    """Vertex of ``hull`` maximizing the dot product with ``direction``.

    Ties break to the lowest stored vertex index.
    """
    direction = np.asarray(direction, dtype=np.float64)
    if direction.shape != (hull.dim,):
        raise InvalidArgumentError(f"direction must have shape ({hull.dim},)")
    if float(direction @ direction) == 0.0:
        raise InvalidArgumentError("support direction must be nonzero")
    return hull.vertices[_kernels.support_index(hull.vertices, direction)].copy()


def gjk_separation(a, b):
    """Separation distance between two hulls (0.0 when touching/overlapping).

    Returns ``(distance, witness, simplex)`` where ``simplex`` is the final
    GJK simplex as a list of Minkowski-difference support-index pairs
    ``(ia, ib)``; it seeds :func:`epa_penetration` for overlapping hulls.
    """
    _require_valid_pair(a, b)
    va, vb = a.vertices, b.vertices
    status, dist, lam, ia, ib, _ = _kernels.gjk_distance(va, vb)
    scale = max(1.0, float(np.abs(va).max()), float(np.abs(vb).max()))
    if dist <= _CONTACT_TOL * scale:
        found, ia4, ib4, graze = _kernels.enclose_origin(va, vb, ia, ib)
        if found:
            simplex = list(zip(ia4.tolist(), ib4.tolist()))
        else:
            simplex = list(zip(ia.tolist(), ib.tolist()))
        pa = lam @ va[ia]
        pb = lam @ vb[ib]
        mid = 0.5 * (pa + pb)
        witness = DistanceWitness(0.0, mid, mid.copy(), _contact_normal(a, b))
        return 0.0, witness, simplex
    if status == _kernels.GJK_MAXITER:
        raise NumericalFailureError("GJK iteration cap exceeded", best_estimate=dist)
    pa = lam @ va[ia]
    pb = lam @ vb[ib]
    witness = DistanceWitness(dist, pa, pb, (pa - pb) / dist)
    return dist, witness, list(zip(ia.tolist(), ib.tolist()))


def _contact_normal(a, b):
    _, _, _, _, normal = _kernels.signed_distance(a.vertices, b.vertices)
    return normal


def epa_penetration(a, b, simplex):
    """Penetration depth for overlapping hulls from a GJK enclosing simplex.

    Raises InvalidArgumentError when the simplex does not contain the origin
    of the Minkowski difference (i.e. the hulls do not overlap).
    """
    _require_valid_pair(a, b)
    d = a.dim
    va, vb = a.vertices, b.vertices
    pairs = [(int(i), int(j)) for i, j in simplex]
    if len(pairs) != d + 1:
        raise InvalidArgumentError("EPA seed simplex must have d+1 vertices enclosing the origin")
    W = np.asarray([va[i] - vb[j] for i, j in pairs])
    lam = _kernels.pyfallback._origin_barycentrics(W)
    if lam is None or lam.min() < -1e-9:
        raise InvalidArgumentError("EPA seed simplex does not enclose the origin")
    ia = np.array([p[0] for p in pairs])
    ib = np.array([p[1] for p in pairs])
    if d == 2:
        status, depth, flam, fia, fib, n_out = _kernels.epa_2d(va, vb, ia, ib)
    else:
        status, depth, flam, fia, fib, n_out = _kernels.epa_3d(va, vb, ia, ib)
    if status == _kernels.EPA_MAXITER:
        raise NumericalFailureError("EPA expansion cap exceeded", best_estimate=depth)
    pa = flam @ va[fia]
    pb = flam @ vb[fib]
    return depth, DistanceWitness(-depth, pa, pb, -n_out)


def signed_distance(a, b):
    """Signed distance between two hulls (Eq.-style GJK minus EPA).

    Positive when separated, exactly 0.0 at contact, negative when
    penetrating. The returned witness carries the increasing-distance
    normal used by obstacle modulation and clearance gradients.
    """
    _require_valid_pair(a, b)
    status, sd, pa, pb, normal = _kernels.signed_distance(a.vertices, b.vertices)
    if status == _kernels.GJK_MAXITER:
        raise NumericalFailureError("GJK iteration cap exceeded", best_estimate=sd)
    if status == _kernels.EPA_MAXITER:
        raise NumericalFailureError("EPA expansion cap exceeded", best_estimate=sd)
    return DistanceWitness(float(sd), pa, pb, normal)


def gamma(a, b):
    """Obstacle-proximity ratio for the modulation matrix.

    ``Gamma = |A_ref - B_ref| / (|A_ref - B_ref| - sd(A, B))``: exactly 1 at
    contact, above 1 when separated, below 1 inside (in-collision regime).
    """
    witness = signed_distance(a, b)
    return gamma_from_sd(a.reference_point, b.reference_point, witness.signed_distance)


def gamma_from_sd(ref_a, ref_b, sd):
    """Gamma ratio from precomputed reference points and signed distance."""
    diff = np.asarray(ref_a, dtype=np.float64) - np.asarray(ref_b, dtype=np.float64)
    center_dist = float(np.linalg.norm(diff))
    if center_dist <= 0.0:
        raise InvalidArgumentError("reference points must be distinct")
    denom = center_dist - sd
    if denom <= 0.0:
        raise DegenerateConfigurationError(
            f"non-positive Gamma denominator: |refs|={center_dist:.6g}, sd={sd:.6g}")
    return center_dist / denom
