"""Pure-NumPy convex-distance kernels (GJK distance, origin enclosure, EPA).

Semantics reference for the compiled extension: ``_core.pyx`` mirrors this
module operation-for-operation so both backends agree to rounding error.
All functions work on raw ``(n, d)`` float64 vertex arrays with d in {2, 3};
hull validation lives in :mod:`lyapmotion.geometry`.

Conventions
-----------
* Minkowski-difference points are ``va[i] - vb[j]``; every simplex vertex
  tracks its ``(i, j)`` support-index pair so witness points on the original
  hulls can be reconstructed from barycentric coordinates.
* ``normal`` returned by :func:`signed_distance` is the unit direction along
  which translating hull A increases the signed distance. For separated
  hulls it equals ``(pa - pb) / |pa - pb|``; at contact it is the negated
  outward face normal of the Minkowski difference.
"""

import numpy as np

OK = 0
GJK_MAXITER = 1
EPA_MAXITER = 2

GJK_MAX_ITER = 128
EPA_MAX_ITER = 128
ENCLOSE_MAX_ITER = 64

PROGRESS_TOL = 1e-9   # relative simplex-progress termination
CONTACT_TOL = 1e-9    # |distance| below scale*this counts as contact
BARY_TOL = 1e-12      # barycentric validity slack
DEGEN_TOL = 1e-12     # relative Gram-determinant floor


def _scale(va, vb):
    s = max(np.abs(va).max(), np.abs(vb).max())
    return s if s > 1.0 else 1.0


def support_index(verts, direction):
    """Index of the vertex maximizing ``dot(vertex, direction)``.

    Ties resolve to the lowest index (``argmax`` keeps the first maximum).
    """
    return int(np.argmax(verts @ direction))


def _closest_on_simplex(W):
    """Closest point to the origin on the convex hull of the rows of ``W``.

    Enumerates supporting subsets by increasing cardinality and keeps the
    valid projection (all barycentrics nonnegative) of minimum norm.

    Returns ``(point, lam, keep)`` where ``keep`` lists the row indices of
    the minimal supporting face and ``lam`` its barycentric coordinates.
    """
    m = W.shape[0]
    best_d2 = np.inf
    best = None

    for i in range(m):
        d2 = float(W[i] @ W[i])
        if d2 < best_d2:
            best_d2 = d2
            best = (W[i].copy(), np.array([1.0]), [i])

    for i in range(m):
        for j in range(i + 1, m):
            s0, e = W[i], W[j] - W[i]
            ee = float(e @ e)
            if ee <= DEGEN_TOL * max(float(s0 @ s0), ee, 1e-300):
                continue
            t = -float(s0 @ e) / ee
            if t < -BARY_TOL or t > 1.0 + BARY_TOL:
                continue
            p = s0 + t * e
            d2 = float(p @ p)
            if d2 < best_d2:
                best_d2 = d2
                best = (p, np.array([1.0 - t, t]), [i, j])

    if m >= 3:
        for i in range(m):
            for j in range(i + 1, m):
                for k in range(j + 1, m):
                    res = _project_affine(W, [i, j, k])
                    if res is not None and res[0] < best_d2:
                        best_d2, best = res[0], res[1]

    if m >= 4:
        res = _project_affine(W, [0, 1, 2, 3])
        if res is not None and res[0] < best_d2:
            best_d2, best = res[0], res[1]

    return best


def _project_affine(W, idx):
    """Project the origin on the affine hull of ``W[idx]``.

    Returns ``(dist2, (point, lam, idx))`` when the projection lies inside
    the convex hull of the subset, else None. Degenerate subsets (rank
    deficient) are skipped; lower-cardinality subsets cover their faces.
    """
    k = len(idx)
    s0 = W[idx[0]]
    D = W[idx[1:]] - s0              # (k-1, d)
    G = D @ D.T                      # (k-1, k-1)
    diag_prod = float(np.prod(np.diag(G)))
    det = float(np.linalg.det(G))
    if det <= DEGEN_TOL * max(diag_prod, 1e-300):
        return None
    mu = np.linalg.solve(G, -D @ s0)
    lam = np.empty(k)
    lam[1:] = mu
    lam[0] = 1.0 - float(mu.sum())
    if np.any(lam < -BARY_TOL):
        return None
    p = s0 + mu @ D
    return float(p @ p), (p, lam, list(idx))


def gjk_distance(va, vb, max_iter=GJK_MAX_ITER):
    """Distance between the convex hulls of ``va`` and ``vb`` by GJK.

    Returns ``(status, dist, lam, ia, ib, W)``: the final simplex rows are
    ``W[k] = va[ia[k]] - vb[ib[k]]`` and the closest Minkowski point to the
    origin is ``lam @ W``. ``dist`` near zero means contact or penetration.
    """
    d = va.shape[1]
    scale = _scale(va, vb)
    touch2 = (CONTACT_TOL * scale) ** 2

    d0 = va.mean(axis=0) - vb.mean(axis=0)
    if float(d0 @ d0) < 1e-24:
        d0 = np.zeros(d)
        d0[0] = 1.0
    ia = [support_index(va, -d0)]
    ib = [support_index(vb, d0)]
    W = (va[ia[0]] - vb[ib[0]]).reshape(1, d)
    v = W[0].copy()
    lam = np.array([1.0])

    status = GJK_MAXITER
    prev_vv = np.inf
    for _ in range(max_iter):
        vv = float(v @ v)
        if vv <= touch2:
            status = OK
            break
        sa = support_index(va, -v)
        sb = support_index(vb, v)
        w = va[sa] - vb[sb]
        # relative progress of the support point past the current estimate
        if vv - float(v @ w) <= PROGRESS_TOL * vv:
            status = OK
            break
        dup = any(ia[k] == sa and ib[k] == sb for k in range(len(ia)))
        if dup or vv >= prev_vv:
            status = OK
            break
        prev_vv = vv
        ia.append(sa)
        ib.append(sb)
        W = np.vstack([W, w])
        v, lam, keep = _closest_on_simplex(W)
        ia = [ia[k] for k in keep]
        ib = [ib[k] for k in keep]
        W = W[keep]

    dist = float(np.linalg.norm(v))
    return status, dist, lam, np.asarray(ia), np.asarray(ib), W


def _witness(va, vb, lam, ia, ib):
    pa = lam @ va[ia]
    pb = lam @ vb[ib]
    return pa, pb


def _face_normal(F, d):
    """Unnormalized normal of the affine hull of the d points in ``F``."""
    if d == 2:
        e = F[1] - F[0]
        return np.array([e[1], -e[0]])
    return np.cross(F[1] - F[0], F[2] - F[0])


def _affine_independent(pts, w, scale):
    """True if appending ``w`` increases the affine rank of ``pts``."""
    if len(pts) == 0:
        return True
    base = pts[0]
    span = [p - base for p in pts[1:]]
    r = w - base
    for s in span:
        ss = float(s @ s)
        if ss > 0.0:
            r = r - s * (float(r @ s) / ss)
    return float(r @ r) > (1e-9 * scale) ** 2


def enclose_origin(va, vb, ia, ib):
    """Grow/walk a GJK contact simplex into a full simplex around the origin.

    Returns ``(found, ia4, ib4, graze)``. When ``found`` the index pairs
    describe d+1 affinely independent Minkowski vertices whose simplex
    contains the origin (EPA seed). Otherwise the origin sits on the
    boundary of the Minkowski difference and ``graze`` is
    ``(outward_normal, lam, ia_face, ib_face)`` for the touching face.
    """
    d = va.shape[1]
    scale = _scale(va, vb)

    pairs = []
    for k in range(len(ia)):
        if (ia[k], ib[k]) not in pairs:
            pairs.append((int(ia[k]), int(ib[k])))
    pts = [va[i] - vb[j] for i, j in pairs]

    # grow to d+1 affinely independent vertices
    probe = 0
    axis_dirs = []
    for ax in range(d):
        e = np.zeros(d)
        e[ax] = 1.0
        axis_dirs.extend([e, -e])
    while len(pts) < d + 1 and probe < 2 * d + 6:
        if len(pts) == 1:
            cand_dirs = [axis_dirs[probe % len(axis_dirs)]]
        elif len(pts) == 2:
            e = pts[1] - pts[0]
            if d == 2:
                n = np.array([e[1], -e[0]])
                cand_dirs = [n, -n]
            else:
                a = np.array([1.0, 0.0, 0.0]) if abs(e[0]) < 0.9 * np.linalg.norm(e) else np.array([0.0, 1.0, 0.0])
                n1 = np.cross(e, a)
                n2 = np.cross(e, n1)
                cand_dirs = [n1, -n1, n2, -n2]
        else:
            n = _face_normal(np.asarray(pts), d)
            cand_dirs = [n, -n]

        added = False
        for n in cand_dirs:
            nn = float(n @ n)
            if nn <= 0.0:
                continue
            sa = support_index(va, n)
            sb = support_index(vb, -n)
            if (sa, sb) in pairs:
                continue
            w = va[sa] - vb[sb]
            if _affine_independent(pts, w, scale):
                pairs.append((sa, sb))
                pts.append(w)
                added = True
                break
        if not added:
            probe += 1
            if len(pts) > 1 and probe >= 2:
                break
        else:
            probe = 0

    if len(pts) < d + 1:
        # Minkowski difference is (numerically) flat: grazing contact
        n = _face_normal(np.asarray(pts), d) if len(pts) >= d else axis_dirs[0]
        return False, None, None, _graze_data(va, vb, pairs, n)

    # walk: replace the vertex opposite the violated face until enclosing
    T = np.asarray(pts[: d + 1])
    tpairs = pairs[: d + 1]
    for _ in range(ENCLOSE_MAX_ITER):
        lam = _origin_barycentrics(T)
        if lam is None:
            n = _face_normal(T[:d], d)
            return False, None, None, _graze_data(va, vb, tpairs[:d], n)
        if lam.min() >= -1e-10:
            ia4 = np.array([p[0] for p in tpairs])
            ib4 = np.array([p[1] for p in tpairs])
            return True, ia4, ib4, None
        j = int(np.argmin(lam))
        face_rows = [k for k in range(d + 1) if k != j]
        F = T[face_rows]
        n = _face_normal(F, d)
        if float(n @ (T[j] - F[0])) > 0.0:
            n = -n
        nn = float(np.linalg.norm(n))
        if nn <= 0.0:
            return False, None, None, _graze_data(va, vb, [tpairs[k] for k in face_rows], n)
        n = n / nn
        sa = support_index(va, n)
        sb = support_index(vb, -n)
        w = va[sa] - vb[sb]
        progress = float(n @ (w - F[0]))
        if progress <= 1e-12 * scale or (sa, sb) in [tpairs[k] for k in face_rows]:
            # CSO does not extend past this face: origin lies on it
            return False, None, None, _graze_data(va, vb, [tpairs[k] for k in face_rows], n)
        T[j] = w
        tpairs[j] = (sa, sb)

    lam = _origin_barycentrics(T)
    if lam is not None and lam.min() >= -1e-8:
        ia4 = np.array([p[0] for p in tpairs])
        ib4 = np.array([p[1] for p in tpairs])
        return True, ia4, ib4, None
    n = _face_normal(T[:d], d)
    return False, None, None, _graze_data(va, vb, tpairs[:d], n)


def _graze_data(va, vb, face_pairs, n_out):
    """Witness data for a grazing contact: barycentrics on the touch face."""
    W = np.asarray([va[i] - vb[j] for i, j in face_pairs])
    p, lam, keep = _closest_on_simplex(W)
    ia = np.array([face_pairs[k][0] for k in keep])
    ib = np.array([face_pairs[k][1] for k in keep])
    nn = float(np.linalg.norm(n_out))
    n_unit = n_out / nn if nn > 0.0 else n_out
    return n_unit, lam, ia, ib


def _origin_barycentrics(T):
    """Barycentric coordinates of the origin in the full simplex ``T``."""
    d = T.shape[1]
    A = np.empty((d + 1, d + 1))
    A[:d, :] = T.T
    A[d, :] = 1.0
    b = np.zeros(d + 1)
    b[d] = 1.0
    try:
        lam = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(lam)):
        return None
    return lam


def epa_2d(va, vb, ia3, ib3, max_iter=EPA_MAX_ITER):
    """Expanding-polygon penetration depth in 2D.

    The seed triangle (index pairs) must contain the origin. Returns
    ``(status, depth, lam, ia_face, ib_face, n_out)`` where ``n_out`` is the
    outward unit normal of the penetrated face of the Minkowski difference.
    """
    scale = _scale(va, vb)
    tol = 1e-10 * scale
    pairs = [(int(ia3[k]), int(ib3[k])) for k in range(3)]
    P = [va[i] - vb[j] for i, j in pairs]
    # enforce counter-clockwise order
    area2 = (P[1][0] - P[0][0]) * (P[2][1] - P[0][1]) - (P[1][1] - P[0][1]) * (P[2][0] - P[0][0])
    if area2 < 0.0:
        P = [P[0], P[2], P[1]]
        pairs = [pairs[0], pairs[2], pairs[1]]

    status = EPA_MAXITER
    best_k = 0
    best_t = 0.0
    best_c = P[0]
    best_n = np.array([1.0, 0.0])
    for _ in range(max_iter):
        m = len(P)
        best_d2 = np.inf
        for k in range(m):
            p0, p1 = P[k], P[(k + 1) % m]
            e = p1 - p0
            ee = float(e @ e)
            t = 0.0 if ee <= 0.0 else min(1.0, max(0.0, -float(p0 @ e) / ee))
            c = p0 + t * e
            d2 = float(c @ c)
            if d2 < best_d2:
                best_d2 = d2
                best_k, best_t, best_c = k, t, c
        p0, p1 = P[best_k], P[(best_k + 1) % m]
        e = p1 - p0
        n = np.array([e[1], -e[0]])
        nn = float(np.linalg.norm(n))
        if nn <= 0.0:
            status = OK
            best_n = np.array([1.0, 0.0])
            break
        n = n / nn
        best_n = n
        sa = support_index(va, n)
        sb = support_index(vb, -n)
        w = va[sa] - vb[sb]
        if float(n @ (w - p0)) <= tol or (sa, sb) in pairs:
            status = OK
            break
        P.insert(best_k + 1, w)
        pairs.insert(best_k + 1, (sa, sb))

    m = len(P)
    k0, k1 = best_k, (best_k + 1) % m
    lam = np.array([1.0 - best_t, best_t])
    ia_face = np.array([pairs[k0][0], pairs[k1][0]])
    ib_face = np.array([pairs[k0][1], pairs[k1][1]])
    depth = float(np.linalg.norm(best_c))
    n_out = best_c / depth if depth > tol else best_n
    return status, depth, lam, ia_face, ib_face, n_out


def epa_3d(va, vb, ia4, ib4, max_iter=EPA_MAX_ITER):
    """Expanding-polytope penetration depth in 3D (triangulated faces).

    The seed tetrahedron (index pairs) must contain the origin. Face
    selection is keyed by plane distance to the origin; the witness comes
    from the clamped projection on the winning face.
    """
    scale = _scale(va, vb)
    tol = 1e-10 * scale
    pairs = [(int(ia4[k]), int(ib4[k])) for k in range(4)]
    V = [va[i] - vb[j] for i, j in pairs]
    interior = np.mean(V, axis=0)

    faces = []  # (i, j, k, n_unit, plane_dist)

    def add_face(i, j, k):
        n = np.cross(V[j] - V[i], V[k] - V[i])
        nn = float(np.linalg.norm(n))
        if nn <= 1e-14 * scale * scale:
            return
        n = n / nn
        if float(n @ (V[i] - interior)) < 0.0:
            n = -n
        faces.append((i, j, k, n, float(n @ V[i])))

    for (i, j, k) in ((0, 1, 2), (0, 2, 3), (0, 3, 1), (1, 3, 2)):
        add_face(i, j, k)
    if not faces:
        return EPA_MAXITER, 0.0, np.array([1.0]), np.array([pairs[0][0]]), np.array([pairs[0][1]]), np.array([0.0, 0.0, 1.0])

    status = EPA_MAXITER
    best = min(faces, key=lambda f: f[4])
    for _ in range(max_iter):
        best = min(faces, key=lambda f: f[4])
        n = best[3]
        sa = support_index(va, n)
        sb = support_index(vb, -n)
        w = va[sa] - vb[sb]
        if float(n @ w) - best[4] <= tol or (sa, sb) in pairs:
            status = OK
            break
        V.append(w)
        pairs.append((sa, sb))
        s_idx = len(V) - 1
        visible = [f for f in faces if float(f[3] @ (w - V[f[0]])) > 1e-12 * scale]
        if not visible:
            status = OK
            break
        faces = [f for f in faces if f not in visible]
        edge_count = {}
        for f in visible:
            for (a, b) in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
                if (b, a) in edge_count:
                    edge_count.pop((b, a))
                else:
                    edge_count[(a, b)] = True
        for (a, b) in edge_count:
            add_face(a, b, s_idx)
        if not faces:
            status = OK
            faces = visible
            break

    # the winning facet may be split into coplanar triangles; the projection
    # of the origin lands inside exactly one of them, so take the minimum
    # clamped projection over all remaining faces
    best_d2 = np.inf
    best_proj = None
    for f in faces:
        Wf = np.asarray([V[f[0]], V[f[1]], V[f[2]]])
        c, lam, keep = _closest_on_simplex(Wf)
        d2 = float(c @ c)
        if d2 < best_d2:
            best_d2 = d2
            best_proj = (c, lam, keep, f)
    c, lam, keep, f = best_proj
    rows = [(f[0], f[1], f[2])[r] for r in keep]
    ia_face = np.array([pairs[r][0] for r in rows])
    ib_face = np.array([pairs[r][1] for r in rows])
    depth = float(np.linalg.norm(c))
    n_out = c / depth if depth > tol else f[3]
    return status, depth, lam, ia_face, ib_face, n_out


def signed_distance(va, vb):
    """Signed distance with witness points and the increasing-sd normal.

    Returns ``(status, sd, pa, pb, normal)``. Positive when separated,
    exactly 0.0 at contact, negative when penetrating. ``normal`` is the
    unit direction along which translating hull A increases ``sd``.
    """
    d = va.shape[1]
    scale = _scale(va, vb)
    contact = CONTACT_TOL * scale

    status, dist, lam, ia, ib, W = gjk_distance(va, vb)
    if dist > contact:
        pa, pb = _witness(va, vb, lam, ia, ib)
        n = (pa - pb) / dist
        return status, dist, pa, pb, n

    found, ia4, ib4, graze = enclose_origin(va, vb, ia, ib)
    if not found:
        n_out, glam, gia, gib = graze
        pa, pb = _witness(va, vb, glam, gia, gib)
        return OK, 0.0, pa, pb, -n_out

    if d == 2:
        status, depth, flam, fia, fib, n_out = epa_2d(va, vb, ia4, ib4)
    else:
        status, depth, flam, fia, fib, n_out = epa_3d(va, vb, ia4, ib4)
    pa, pb = _witness(va, vb, flam, fia, fib)
    if depth <= contact:
        return status, 0.0, pa, pb, -n_out
    return status, -depth, pa, pb, -n_out
