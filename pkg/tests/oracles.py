"""Independent brute-force distance oracles used to check the GJK/EPA path.

Nothing here touches lyapmotion._kernels: separation comes from dense
boundary sampling (2D) or exhaustive feature-pair enumeration (3D), and
penetration depth from a dense support-direction grid with local
refinement. scipy's Qhull provides facets/edges for the 3D oracle.
"""

import numpy as np
from scipy.spatial import ConvexHull as QHull


def sample_polygon_boundary(verts, n_per_edge):
    """Dense deterministic samples along a convex polygon boundary (ordered verts)."""
    pts = []
    m = len(verts)
    for i in range(m):
        a, b = verts[i], verts[(i + 1) % m]
        t = np.linspace(0.0, 1.0, n_per_edge, endpoint=False)[:, None]
        pts.append(a + t * (b - a))
    return np.vstack(pts)


def separation_2d(va, vb, n_per_edge=900):
    """Min distance between separated convex polygons by boundary sampling."""
    pa = sample_polygon_boundary(va, n_per_edge)
    pb = sample_polygon_boundary(vb, n_per_edge)
    best = np.inf
    for chunk in np.array_split(pa, max(1, len(pa) // 512)):
        d2 = ((chunk[:, None, :] - pb[None, :, :]) ** 2).sum(-1)
        best = min(best, float(d2.min()))
    return np.sqrt(best)


def _point_segment_dist2(p, a, b):
    e = b - a
    ee = float(e @ e)
    t = 0.0 if ee == 0.0 else min(1.0, max(0.0, float((p - a) @ e) / ee))
    diff = p - (a + t * e)
    return float(diff @ diff)


def _point_triangle_dist2(p, tri):
    a, b, c = tri
    ab, ac, ap = b - a, c - a, p - a
    n = np.cross(ab, ac)
    nn = float(n @ n)
    if nn > 0.0:
        # barycentric projection onto the plane
        d = p - n * (float(ap @ n) / nn)
        v0, v1, v2 = c - a, b - a, d - a
        dot00, dot01, dot02 = float(v0 @ v0), float(v0 @ v1), float(v0 @ v2)
        dot11, dot12 = float(v1 @ v1), float(v1 @ v2)
        denom = dot00 * dot11 - dot01 * dot01
        if denom != 0.0:
            u = (dot11 * dot02 - dot01 * dot12) / denom
            w = (dot00 * dot12 - dot01 * dot02) / denom
            if u >= 0.0 and w >= 0.0 and u + w <= 1.0:
                diff = p - d
                return float(diff @ diff)
    return min(_point_segment_dist2(p, a, b),
               _point_segment_dist2(p, b, c),
               _point_segment_dist2(p, c, a))


def _segment_segment_dist2(p1, q1, p2, q2):
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a, e, f = float(d1 @ d1), float(d2 @ d2), float(d2 @ r)
    c = float(d1 @ r)
    b = float(d1 @ d2)
    denom = a * e - b * b
    s = 0.0 if denom == 0.0 else min(1.0, max(0.0, (b * f - c * e) / denom))
    t = 0.0 if e == 0.0 else (b * s + f) / e
    if t < 0.0:
        t = 0.0
        s = min(1.0, max(0.0, -c / a)) if a > 0.0 else 0.0
    elif t > 1.0:
        t = 1.0
        s = min(1.0, max(0.0, (b - c) / a)) if a > 0.0 else 0.0
    diff = (p1 + s * d1) - (p2 + t * d2)
    return float(diff @ diff)


def separation_3d(va, vb):
    """Exact min distance between separated convex polytopes.

    Brute force over all vertex-facet and edge-edge feature pairs (the
    closest pair of convex polytopes realizes one of these).
    """
    ha, hb = QHull(va), QHull(vb)
    best = np.inf
    for p in va:
        for tri in hb.simplices:
            best = min(best, _point_triangle_dist2(p, vb[tri]))
    for p in vb:
        for tri in ha.simplices:
            best = min(best, _point_triangle_dist2(p, va[tri]))

    def edges(hull):
        es = set()
        for tri in hull.simplices:
            for i in range(3):
                e = (min(tri[i], tri[(i + 1) % 3]), max(tri[i], tri[(i + 1) % 3]))
                es.add(e)
        return es

    for (i, j) in edges(ha):
        for (k, l) in edges(hb):
            best = min(best, _segment_segment_dist2(va[i], va[j], vb[k], vb[l]))
    return np.sqrt(best)


def _support_width(va, vb, dirs):
    """h_{A-B}(u) = max_a u.a - min_b u.b for each row u of dirs."""
    return (dirs @ va.T).max(axis=1) - (dirs @ vb.T).min(axis=1)


def penetration_2d(va, vb, n_dirs=100_000):
    """Penetration depth by a dense angular grid over support directions."""
    th = np.linspace(0.0, 2.0 * np.pi, n_dirs, endpoint=False)
    dirs = np.column_stack([np.cos(th), np.sin(th)])
    return float(_support_width(va, vb, dirs).min())


def _fibonacci_sphere(n):
    i = np.arange(n) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / n)
    theta = np.pi * (1.0 + 5.0**0.5) * i
    return np.column_stack([np.cos(theta) * np.sin(phi),
                            np.sin(theta) * np.sin(phi),
                            np.cos(phi)])


def penetration_3d(va, vb, n_dirs=60_000, refine_rounds=3):
    """Penetration depth by a direction grid with local refinement."""
    dirs = _fibonacci_sphere(n_dirs)
    widths = _support_width(va, vb, dirs)
    order = np.argsort(widths)[:64]
    best = float(widths.min())
    centers = dirs[order]
    spread = np.sqrt(4.0 * np.pi / n_dirs)
    rng = np.random.default_rng(0)
    for _ in range(refine_rounds):
        jitter = rng.normal(size=(len(centers), 200, 3)) * spread
        cand = centers[:, None, :] + jitter
        cand = cand.reshape(-1, 3)
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        w = _support_width(va, vb, cand)
        best = min(best, float(w.min()))
        keep = np.argsort(w)[:64]
        centers = cand[keep]
        spread *= 0.2
    return best


def signed_distance_oracle(va, vb):
    """Signed distance via the independent oracles (dimension-dispatching)."""
    d = va.shape[1]
    pen = penetration_2d(va, vb) if d == 2 else penetration_3d(va, vb)
    if pen > 0.0:
        return -pen  # origin inside the Minkowski difference
    if d == 2:
        return separation_2d(va, vb)
    return separation_3d(va, vb)


def random_convex_polygon(rng, n_lo=3, n_hi=10, radius=1.0, center=(0.0, 0.0)):
    """Convex polygon with n_lo..n_hi vertices, CCW order."""
    while True:
        n = int(rng.integers(n_lo, n_hi + 1))
        pts = rng.uniform(-radius, radius, size=(n + 4, 2))
        try:
            h = QHull(pts)
        except Exception:
            continue
        verts = pts[h.vertices]
        if n_lo <= len(verts) <= n_hi:
            return verts + np.asarray(center)


def random_convex_polytope(rng, n_lo=4, n_hi=10, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Convex polytope with n_lo..n_hi extreme vertices."""
    while True:
        n = int(rng.integers(n_lo, n_hi + 1))
        pts = rng.uniform(-radius, radius, size=(n + 6, 3))
        try:
            h = QHull(pts)
        except Exception:
            continue
        verts = pts[np.unique(h.vertices)]
        if n_lo <= len(verts) <= n_hi:
            return verts + np.asarray(center)
