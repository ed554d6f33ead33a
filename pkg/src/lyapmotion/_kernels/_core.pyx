# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled convex-distance kernels (GJK distance, origin enclosure, EPA).

Operation-for-operation port of ``pyfallback.py``; both backends agree to
rounding error. Only the hot entry points are exported: ``signed_distance``
and ``support_index``.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

cnp.import_array()

DEF GJK_MAX_ITER = 128
DEF EPA_MAX_ITER = 128
DEF ENCLOSE_MAX_ITER = 64
DEF PROGRESS_TOL = 1e-9
DEF CONTACT_TOL = 1e-9
DEF BARY_TOL = 1e-12
DEF DEGEN_TOL = 1e-12

DEF NV_CAP = 160          # EPA vertex capacity (4 + iterations + slack)
DEF NF_CAP = 640          # EPA face capacity
DEF NE_CAP = 512          # horizon edge scratch capacity

OK = 0
GJK_MAXITER = 1
EPA_MAXITER = 2


cdef inline double _dot(const double* a, const double* b, int d) nogil:
    cdef double s = a[0] * b[0] + a[1] * b[1]
    if d == 3:
        s += a[2] * b[2]
    return s


cdef inline void _cross3(const double* a, const double* b, double* out) nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef int _support_idx(const double[:, ::1] V, const double* direction) nogil:
    cdef int n = V.shape[0]
    cdef int d = V.shape[1]
    cdef int i, best_i = 0
    cdef double v, best = _dot(&V[0, 0], direction, d)
    for i in range(1, n):
        v = _dot(&V[i, 0], direction, d)
        if v > best:
            best = v
            best_i = i
    return best_i


cdef double _scale_of(const double[:, ::1] va, const double[:, ::1] vb) nogil:
    cdef double s = 1.0
    cdef double x
    cdef int i, k
    for i in range(va.shape[0]):
        for k in range(va.shape[1]):
            x = va[i, k]
            if x < 0:
                x = -x
            if x > s:
                s = x
    for i in range(vb.shape[0]):
        for k in range(vb.shape[1]):
            x = vb[i, k]
            if x < 0:
                x = -x
            if x > s:
                s = x
    return s


cdef bint _solve2(double a00, double a01, double a11,
                  double b0, double b1, double* x) nogil:
    cdef double det = a00 * a11 - a01 * a01
    cdef double dp = a00 * a11
    if dp < 0:
        dp = -dp
    if dp < 1e-300:
        dp = 1e-300
    if det <= DEGEN_TOL * dp:
        return False
    x[0] = (b0 * a11 - b1 * a01) / det
    x[1] = (a00 * b1 - a01 * b0) / det
    return True


cdef bint _solve3_sym(double* G, double* b, double* x) nogil:
    # symmetric 3x3 via Cramer with a relative determinant floor
    cdef double det = (G[0] * (G[4] * G[8] - G[5] * G[7])
                       - G[1] * (G[3] * G[8] - G[5] * G[6])
                       + G[2] * (G[3] * G[7] - G[4] * G[6]))
    cdef double dp = G[0] * G[4] * G[8]
    if dp < 0:
        dp = -dp
    if dp < 1e-300:
        dp = 1e-300
    if det <= DEGEN_TOL * dp:
        return False
    x[0] = (b[0] * (G[4] * G[8] - G[5] * G[7])
            - G[1] * (b[1] * G[8] - G[5] * b[2])
            + G[2] * (b[1] * G[7] - G[4] * b[2])) / det
    x[1] = (G[0] * (b[1] * G[8] - G[5] * b[2])
            - b[0] * (G[3] * G[8] - G[5] * G[6])
            + G[2] * (G[3] * b[2] - b[1] * G[6])) / det
    x[2] = (G[0] * (G[4] * b[2] - b[1] * G[7])
            - G[1] * (G[3] * b[2] - b[1] * G[6])
            + b[0] * (G[3] * G[7] - G[4] * G[6])) / det
    return True


cdef int _closest_on_simplex(double* W, int m, int d,
                             double* p_out, double* lam_out, int* keep_out) nogil:
    """Mirror of pyfallback._closest_on_simplex on row-major W (m x d)."""
    cdef double best_d2 = INFINITY
    cdef int best_k = 0
    cdef double p[3]
    cdef double lam[4]
    cdef int keep[4]
    cdef double cand_p[3]
    cdef double e[3]
    cdef double d1v[3]
    cdef double d2v[3]
    cdef double d3v[3]
    cdef double s0[3]
    cdef double mu2[2]
    cdef double G3[9]
    cdef double rhs3[3]
    cdef double mu3[3]
    cdef int i, j, k, kk
    cdef double dd, ee, t, g00, g01, g11, dp, l0, l1, l2, l3

    for i in range(m):
        dd = _dot(W + i * d, W + i * d, d)
        if dd < best_d2:
            best_d2 = dd
            best_k = 1
            keep[0] = i
            lam[0] = 1.0
            for kk in range(d):
                p[kk] = W[i * d + kk]

    for i in range(m):
        for j in range(i + 1, m):
            for kk in range(d):
                s0[kk] = W[i * d + kk]
                e[kk] = W[j * d + kk] - s0[kk]
            ee = _dot(e, e, d)
            dd = _dot(s0, s0, d)
            dp = dd if dd > ee else ee
            if dp < 1e-300:
                dp = 1e-300
            if ee <= DEGEN_TOL * dp:
                continue
            t = -_dot(s0, e, d) / ee
            if t < -BARY_TOL or t > 1.0 + BARY_TOL:
                continue
            for kk in range(d):
                cand_p[kk] = s0[kk] + t * e[kk]
            dd = _dot(cand_p, cand_p, d)
            if dd < best_d2:
                best_d2 = dd
                best_k = 2
                keep[0] = i
                keep[1] = j
                lam[0] = 1.0 - t
                lam[1] = t
                for kk in range(d):
                    p[kk] = cand_p[kk]

    if m >= 3:
        for i in range(m):
            for j in range(i + 1, m):
                for k in range(j + 1, m):
                    for kk in range(d):
                        s0[kk] = W[i * d + kk]
                        d1v[kk] = W[j * d + kk] - s0[kk]
                        d2v[kk] = W[k * d + kk] - s0[kk]
                    g00 = _dot(d1v, d1v, d)
                    g01 = _dot(d1v, d2v, d)
                    g11 = _dot(d2v, d2v, d)
                    if not _solve2(g00, g01, g11,
                                   -_dot(d1v, s0, d), -_dot(d2v, s0, d), mu2):
                        continue
                    l0 = 1.0 - mu2[0] - mu2[1]
                    if l0 < -BARY_TOL or mu2[0] < -BARY_TOL or mu2[1] < -BARY_TOL:
                        continue
                    for kk in range(d):
                        cand_p[kk] = s0[kk] + mu2[0] * d1v[kk] + mu2[1] * d2v[kk]
                    dd = _dot(cand_p, cand_p, d)
                    if dd < best_d2:
                        best_d2 = dd
                        best_k = 3
                        keep[0] = i
                        keep[1] = j
                        keep[2] = k
                        lam[0] = l0
                        lam[1] = mu2[0]
                        lam[2] = mu2[1]
                        for kk in range(d):
                            p[kk] = cand_p[kk]

    if m >= 4:
        for kk in range(d):
            s0[kk] = W[kk]
            d1v[kk] = W[d + kk] - s0[kk]
            d2v[kk] = W[2 * d + kk] - s0[kk]
            d3v[kk] = W[3 * d + kk] - s0[kk]
        G3[0] = _dot(d1v, d1v, d); G3[1] = _dot(d1v, d2v, d); G3[2] = _dot(d1v, d3v, d)
        G3[3] = G3[1];             G3[4] = _dot(d2v, d2v, d); G3[5] = _dot(d2v, d3v, d)
        G3[6] = G3[2];             G3[7] = G3[5];             G3[8] = _dot(d3v, d3v, d)
        rhs3[0] = -_dot(d1v, s0, d)
        rhs3[1] = -_dot(d2v, s0, d)
        rhs3[2] = -_dot(d3v, s0, d)
        if _solve3_sym(G3, rhs3, mu3):
            l0 = 1.0 - mu3[0] - mu3[1] - mu3[2]
            l1 = mu3[0]; l2 = mu3[1]; l3 = mu3[2]
            if l0 >= -BARY_TOL and l1 >= -BARY_TOL and l2 >= -BARY_TOL and l3 >= -BARY_TOL:
                for kk in range(d):
                    cand_p[kk] = s0[kk] + l1 * d1v[kk] + l2 * d2v[kk] + l3 * d3v[kk]
                dd = _dot(cand_p, cand_p, d)
                if dd < best_d2:
                    best_d2 = dd
                    best_k = 4
                    keep[0] = 0; keep[1] = 1; keep[2] = 2; keep[3] = 3
                    lam[0] = l0; lam[1] = l1; lam[2] = l2; lam[3] = l3
                    for kk in range(d):
                        p[kk] = cand_p[kk]

    for i in range(best_k):
        lam_out[i] = lam[i]
        keep_out[i] = keep[i]
    for kk in range(d):
        p_out[kk] = p[kk]
    return best_k


cdef int _gjk(const double[:, ::1] va, const double[:, ::1] vb,
              double* dist_out, double* lam, int* ia, int* ib, int* m_out) nogil:
    cdef int d = va.shape[1]
    cdef double scale = _scale_of(va, vb)
    cdef double touch2 = (CONTACT_TOL * scale) * (CONTACT_TOL * scale)
    cdef double W[12]
    cdef double v[3]
    cdef double w[3]
    cdef double d0[3]
    cdef double lam_new[4]
    cdef int keep[4]
    cdef int ia_l[4]
    cdef int ib_l[4]
    cdef int m = 1
    cdef int i, k, kk, it, sa, sb, newk
    cdef double vv, vw, prev_vv = INFINITY
    cdef int status = 1
    cdef bint dup

    for kk in range(d):
        d0[kk] = 0.0
    for i in range(va.shape[0]):
        for kk in range(d):
            d0[kk] += va[i, kk]
    for kk in range(d):
        d0[kk] /= va.shape[0]
    for i in range(vb.shape[0]):
        for kk in range(d):
            d0[kk] -= vb[i, kk] / vb.shape[0]
    if _dot(d0, d0, d) < 1e-24:
        for kk in range(d):
            d0[kk] = 0.0
        d0[0] = 1.0
    for kk in range(d):
        w[kk] = -d0[kk]
    ia_l[0] = _support_idx(va, w)
    ib_l[0] = _support_idx(vb, d0)
    for kk in range(d):
        W[kk] = va[ia_l[0], kk] - vb[ib_l[0], kk]
        v[kk] = W[kk]
    lam[0] = 1.0

    for it in range(GJK_MAX_ITER):
        vv = _dot(v, v, d)
        if vv <= touch2:
            status = 0
            break
        for kk in range(d):
            w[kk] = -v[kk]
        sa = _support_idx(va, w)
        sb = _support_idx(vb, v)
        for kk in range(d):
            w[kk] = va[sa, kk] - vb[sb, kk]
        vw = _dot(v, w, d)
        if vv - vw <= PROGRESS_TOL * vv:
            status = 0
            break
        dup = False
        for k in range(m):
            if ia_l[k] == sa and ib_l[k] == sb:
                dup = True
                break
        if dup or vv >= prev_vv:
            status = 0
            break
        prev_vv = vv
        ia_l[m] = sa
        ib_l[m] = sb
        for kk in range(d):
            W[m * d + kk] = w[kk]
        m += 1
        newk = _closest_on_simplex(W, m, d, v, lam_new, keep)
        for k in range(newk):
            ia_l[k] = ia_l[keep[k]]
            ib_l[k] = ib_l[keep[k]]
            lam[k] = lam_new[k]
            for kk in range(d):
                W[k * d + kk] = W[keep[k] * d + kk]
        m = newk

    dist_out[0] = sqrt(_dot(v, v, d))
    for k in range(m):
        ia[k] = ia_l[k]
        ib[k] = ib_l[k]
    m_out[0] = m
    return status


cdef void _face_normal_rm(const double* F, int d, double* n_out) nogil:
    # F row-major with row stride 3 (rows are points of the face)
    cdef double e0[3]
    cdef double e1[3]
    cdef int kk
    if d == 2:
        n_out[0] = F[3 + 1] - F[1]
        n_out[1] = -(F[3 + 0] - F[0])
        n_out[2] = 0.0
    else:
        for kk in range(3):
            e0[kk] = F[3 + kk] - F[kk]
            e1[kk] = F[6 + kk] - F[kk]
        _cross3(e0, e1, n_out)


cdef bint _affine_independent(const double* pts, int npts, const double* w,
                              int d, double scale) nogil:
    cdef double r[3]
    cdef double s[3]
    cdef int i, kk
    cdef double ss, proj
    if npts == 0:
        return True
    for kk in range(d):
        r[kk] = w[kk] - pts[kk]
    for i in range(npts - 1):
        for kk in range(d):
            s[kk] = pts[(i + 1) * d + kk] - pts[kk]
        ss = _dot(s, s, d)
        if ss > 0.0:
            proj = _dot(r, s, d) / ss
            for kk in range(d):
                r[kk] -= proj * s[kk]
    return _dot(r, r, d) > (1e-9 * scale) * (1e-9 * scale)


cdef bint _gauss_solve(double* A, double* b, int n, double* x) nogil:
    cdef int i, j, k, piv
    cdef double mx, v, f
    for i in range(n):
        piv = i
        mx = A[i * n + i]
        if mx < 0:
            mx = -mx
        for j in range(i + 1, n):
            v = A[j * n + i]
            if v < 0:
                v = -v
            if v > mx:
                mx = v
                piv = j
        if mx <= 1e-300:
            return False
        if piv != i:
            for k in range(n):
                v = A[i * n + k]
                A[i * n + k] = A[piv * n + k]
                A[piv * n + k] = v
            v = b[i]
            b[i] = b[piv]
            b[piv] = v
        for j in range(i + 1, n):
            f = A[j * n + i] / A[i * n + i]
            for k in range(i, n):
                A[j * n + k] -= f * A[i * n + k]
            b[j] -= f * b[i]
    for i in range(n - 1, -1, -1):
        v = b[i]
        for k in range(i + 1, n):
            v -= A[i * n + k] * x[k]
        x[i] = v / A[i * n + i]
        if x[i] != x[i]:
            return False
    return True


cdef bint _origin_bary(const double* T, int d, double* lam) nogil:
    cdef double A[16]
    cdef double b[4]
    cdef int i, j, n = d + 1
    for j in range(n):
        for i in range(d):
            A[i * n + j] = T[j * d + i]
        A[d * n + j] = 1.0
    for i in range(d):
        b[i] = 0.0
    b[d] = 1.0
    return _gauss_solve(A, b, n, lam)


cdef void _fill_graze(const double[:, ::1] va, const double[:, ::1] vb,
                      int* pa_i, int* pb_i, int m, int d, double* n_raw,
                      double* graze_n, double* graze_lam,
                      int* graze_ia, int* graze_ib, int* graze_m) nogil:
    cdef double W[12]
    cdef double p[3]
    cdef double lam[4]
    cdef int keep[4]
    cdef int i, kk, nk
    cdef double nn
    for i in range(m):
        for kk in range(d):
            W[i * d + kk] = va[pa_i[i], kk] - vb[pb_i[i], kk]
    nk = _closest_on_simplex(W, m, d, p, lam, keep)
    for i in range(nk):
        graze_lam[i] = lam[i]
        graze_ia[i] = pa_i[keep[i]]
        graze_ib[i] = pb_i[keep[i]]
    graze_m[0] = nk
    nn = sqrt(_dot(n_raw, n_raw, d))
    for kk in range(d):
        graze_n[kk] = n_raw[kk] / nn if nn > 0.0 else n_raw[kk]


cdef int _enclose(const double[:, ::1] va, const double[:, ::1] vb,
                  int* ia_in, int* ib_in, int m_in,
                  int* ia4, int* ib4,
                  double* graze_n, double* graze_lam,
                  int* graze_ia, int* graze_ib, int* graze_m) nogil:
    """1 when an enclosing (d+1)-simplex is found; 0 for grazing contact."""
    cdef int d = va.shape[1]
    cdef double scale = _scale_of(va, vb)
    cdef int pa_i[8]
    cdef int pb_i[8]
    cdef double pts[24]
    cdef int npts = 0
    cdef int i, k, kk, it, sa, sb, probe, ncand, worst_j
    cdef double n[3]
    cdef double e[3]
    cdef double a[3]
    cdef double w[3]
    cdef double F[9]
    cdef double T[12]
    cdef double lam[4]
    cdef double cands[18]
    cdef int tp_a[4]
    cdef int tp_b[4]
    cdef int face_rows[3]
    cdef double nn, progress, lmin
    cdef bint added, dup

    for k in range(m_in):
        dup = False
        for i in range(npts):
            if pa_i[i] == ia_in[k] and pb_i[i] == ib_in[k]:
                dup = True
                break
        if not dup:
            pa_i[npts] = ia_in[k]
            pb_i[npts] = ib_in[k]
            for kk in range(d):
                pts[npts * d + kk] = va[ia_in[k], kk] - vb[ib_in[k], kk]
            npts += 1

    probe = 0
    while npts < d + 1 and probe < 2 * d + 6:
        ncand = 0
        if npts == 1:
            kk = probe % (2 * d)
            for k in range(3):
                cands[k] = 0.0
            cands[kk // 2] = 1.0 if kk % 2 == 0 else -1.0
            ncand = 1
        elif npts == 2:
            for kk in range(d):
                e[kk] = pts[d + kk] - pts[kk]
            if d == 2:
                cands[0] = e[1]; cands[1] = -e[0]; cands[2] = 0.0
                cands[3] = -e[1]; cands[4] = e[0]; cands[5] = 0.0
                ncand = 2
            else:
                nn = sqrt(_dot(e, e, 3))
                if e[0] < 0.9 * nn and e[0] > -0.9 * nn:
                    a[0] = 1.0; a[1] = 0.0; a[2] = 0.0
                else:
                    a[0] = 0.0; a[1] = 1.0; a[2] = 0.0
                _cross3(e, a, n)
                cands[0] = n[0]; cands[1] = n[1]; cands[2] = n[2]
                cands[3] = -n[0]; cands[4] = -n[1]; cands[5] = -n[2]
                _cross3(e, n, w)
                cands[6] = w[0]; cands[7] = w[1]; cands[8] = w[2]
                cands[9] = -w[0]; cands[10] = -w[1]; cands[11] = -w[2]
                ncand = 4
        else:
            for i in range(d):
                for kk in range(d):
                    F[i * 3 + kk] = pts[i * d + kk]
            _face_normal_rm(F, d, n)
            for kk in range(3):
                cands[kk] = 0.0
                cands[3 + kk] = 0.0
            for kk in range(d):
                cands[kk] = n[kk]
                cands[3 + kk] = -n[kk]
            ncand = 2

        added = False
        for i in range(ncand):
            for kk in range(d):
                n[kk] = cands[i * 3 + kk]
            if _dot(n, n, d) <= 0.0:
                continue
            sa = _support_idx(va, n)
            for kk in range(d):
                w[kk] = -n[kk]
            sb = _support_idx(vb, w)
            dup = False
            for k in range(npts):
                if pa_i[k] == sa and pb_i[k] == sb:
                    dup = True
                    break
            if dup:
                continue
            for kk in range(d):
                w[kk] = va[sa, kk] - vb[sb, kk]
            if _affine_independent(pts, npts, w, d, scale):
                pa_i[npts] = sa
                pb_i[npts] = sb
                for kk in range(d):
                    pts[npts * d + kk] = w[kk]
                npts += 1
                added = True
                break
        if not added:
            probe += 1
            if npts > 1 and probe >= 2:
                break
        else:
            probe = 0

    if npts < d + 1:
        if npts >= d:
            for i in range(d):
                for kk in range(d):
                    F[i * 3 + kk] = pts[i * d + kk]
            _face_normal_rm(F, d, n)
        else:
            n[0] = 1.0; n[1] = 0.0; n[2] = 0.0
        _fill_graze(va, vb, pa_i, pb_i, npts if npts <= d else d, d, n,
                    graze_n, graze_lam, graze_ia, graze_ib, graze_m)
        return 0

    for i in range(d + 1):
        tp_a[i] = pa_i[i]
        tp_b[i] = pb_i[i]
        for kk in range(d):
            T[i * d + kk] = pts[i * d + kk]

    for it in range(ENCLOSE_MAX_ITER):
        if not _origin_bary(T, d, lam):
            for i in range(d):
                for kk in range(d):
                    F[i * 3 + kk] = T[i * d + kk]
                pa_i[i] = tp_a[i]
                pb_i[i] = tp_b[i]
            _face_normal_rm(F, d, n)
            _fill_graze(va, vb, pa_i, pb_i, d, d, n,
                        graze_n, graze_lam, graze_ia, graze_ib, graze_m)
            return 0
        lmin = lam[0]
        worst_j = 0
        for i in range(1, d + 1):
            if lam[i] < lmin:
                lmin = lam[i]
                worst_j = i
        if lmin >= -1e-10:
            for i in range(d + 1):
                ia4[i] = tp_a[i]
                ib4[i] = tp_b[i]
            return 1
        k = 0
        for i in range(d + 1):
            if i != worst_j:
                face_rows[k] = i
                k += 1
        for i in range(d):
            for kk in range(d):
                F[i * 3 + kk] = T[face_rows[i] * d + kk]
        _face_normal_rm(F, d, n)
        for kk in range(d):
            e[kk] = T[worst_j * d + kk] - F[kk]
        if _dot(n, e, d) > 0.0:
            for kk in range(d):
                n[kk] = -n[kk]
        nn = sqrt(_dot(n, n, d))
        if nn <= 0.0:
            for i in range(d):
                pa_i[i] = tp_a[face_rows[i]]
                pb_i[i] = tp_b[face_rows[i]]
            _fill_graze(va, vb, pa_i, pb_i, d, d, n,
                        graze_n, graze_lam, graze_ia, graze_ib, graze_m)
            return 0
        for kk in range(d):
            n[kk] /= nn
        sa = _support_idx(va, n)
        for kk in range(d):
            w[kk] = -n[kk]
        sb = _support_idx(vb, w)
        for kk in range(d):
            w[kk] = va[sa, kk] - vb[sb, kk]
        progress = 0.0
        for kk in range(d):
            progress += n[kk] * (w[kk] - F[kk])
        dup = False
        for i in range(d):
            if tp_a[face_rows[i]] == sa and tp_b[face_rows[i]] == sb:
                dup = True
                break
        if progress <= 1e-12 * scale or dup:
            for i in range(d):
                pa_i[i] = tp_a[face_rows[i]]
                pb_i[i] = tp_b[face_rows[i]]
            _fill_graze(va, vb, pa_i, pb_i, d, d, n,
                        graze_n, graze_lam, graze_ia, graze_ib, graze_m)
            return 0
        for kk in range(d):
            T[worst_j * d + kk] = w[kk]
        tp_a[worst_j] = sa
        tp_b[worst_j] = sb

    if _origin_bary(T, d, lam):
        lmin = lam[0]
        for i in range(1, d + 1):
            if lam[i] < lmin:
                lmin = lam[i]
        if lmin >= -1e-8:
            for i in range(d + 1):
                ia4[i] = tp_a[i]
                ib4[i] = tp_b[i]
            return 1
    for i in range(d):
        for kk in range(d):
            F[i * 3 + kk] = T[i * d + kk]
        pa_i[i] = tp_a[i]
        pb_i[i] = tp_b[i]
    _face_normal_rm(F, d, n)
    _fill_graze(va, vb, pa_i, pb_i, d, d, n,
                graze_n, graze_lam, graze_ia, graze_ib, graze_m)
    return 0


cdef int _support_idx_xy(const double[:, ::1] V, double dx, double dy) nogil:
    cdef int n = V.shape[0]
    cdef int i, best_i = 0
    cdef double v, best = V[0, 0] * dx + V[0, 1] * dy
    for i in range(1, n):
        v = V[i, 0] * dx + V[i, 1] * dy
        if v > best:
            best = v
            best_i = i
    return best_i


cdef int _epa_2d(const double[:, ::1] va, const double[:, ::1] vb,
                 int* ia3, int* ib3,
                 double* depth_out, double* lam_out,
                 int* ia_face, int* ib_face, double* n_out) nogil:
    cdef double scale = _scale_of(va, vb)
    cdef double tol = 1e-10 * scale
    cdef double Px[NV_CAP]
    cdef double Py[NV_CAP]
    cdef int Pa[NV_CAP]
    cdef int Pb[NV_CAP]
    cdef int m = 3
    cdef int i, k, it, sa, sb, best_k
    cdef double area2, e0, e1, ee, t, cx, cy, d2, best_d2, best_t, nx, ny, nn
    cdef double best_cx, best_cy, wx, wy
    cdef double bnx = 1.0, bny = 0.0
    cdef int status = 2
    cdef bint dup

    for i in range(3):
        Pa[i] = ia3[i]
        Pb[i] = ib3[i]
        Px[i] = va[ia3[i], 0] - vb[ib3[i], 0]
        Py[i] = va[ia3[i], 1] - vb[ib3[i], 1]
    area2 = (Px[1] - Px[0]) * (Py[2] - Py[0]) - (Py[1] - Py[0]) * (Px[2] - Px[0])
    if area2 < 0.0:
        i = Pa[1]; Pa[1] = Pa[2]; Pa[2] = i
        i = Pb[1]; Pb[1] = Pb[2]; Pb[2] = i
        cx = Px[1]; Px[1] = Px[2]; Px[2] = cx
        cy = Py[1]; Py[1] = Py[2]; Py[2] = cy

    best_k = 0
    best_t = 0.0
    best_cx = Px[0]
    best_cy = Py[0]
    for it in range(EPA_MAX_ITER):
        best_d2 = INFINITY
        for k in range(m):
            i = (k + 1) % m
            e0 = Px[i] - Px[k]
            e1 = Py[i] - Py[k]
            ee = e0 * e0 + e1 * e1
            if ee <= 0.0:
                t = 0.0
            else:
                t = -(Px[k] * e0 + Py[k] * e1) / ee
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            cx = Px[k] + t * e0
            cy = Py[k] + t * e1
            d2 = cx * cx + cy * cy
            if d2 < best_d2:
                best_d2 = d2
                best_k = k
                best_t = t
                best_cx = cx
                best_cy = cy
        i = (best_k + 1) % m
        e0 = Px[i] - Px[best_k]
        e1 = Py[i] - Py[best_k]
        nx = e1
        ny = -e0
        nn = sqrt(nx * nx + ny * ny)
        if nn <= 0.0:
            status = 0
            break
        nx /= nn
        ny /= nn
        bnx = nx
        bny = ny
        sa = _support_idx_xy(va, nx, ny)
        sb = _support_idx_xy(vb, -nx, -ny)
        dup = False
        for k in range(m):
            if Pa[k] == sa and Pb[k] == sb:
                dup = True
                break
        wx = va[sa, 0] - vb[sb, 0]
        wy = va[sa, 1] - vb[sb, 1]
        if (nx * (wx - Px[best_k]) + ny * (wy - Py[best_k])) <= tol or dup:
            status = 0
            break
        if m >= NV_CAP - 1:
            break
        for k in range(m, best_k + 1, -1):
            Px[k] = Px[k - 1]
            Py[k] = Py[k - 1]
            Pa[k] = Pa[k - 1]
            Pb[k] = Pb[k - 1]
        Px[best_k + 1] = wx
        Py[best_k + 1] = wy
        Pa[best_k + 1] = sa
        Pb[best_k + 1] = sb
        m += 1

    i = (best_k + 1) % m
    lam_out[0] = 1.0 - best_t
    lam_out[1] = best_t
    ia_face[0] = Pa[best_k]
    ia_face[1] = Pa[i]
    ib_face[0] = Pb[best_k]
    ib_face[1] = Pb[i]
    depth_out[0] = sqrt(best_cx * best_cx + best_cy * best_cy)
    if depth_out[0] > tol:
        n_out[0] = best_cx / depth_out[0]
        n_out[1] = best_cy / depth_out[0]
    else:
        n_out[0] = bnx
        n_out[1] = bny
    return status


cdef int _push_edge(int* ea, int* eb, bint* evalid, int ne, int a, int b) nogil:
    cdef int i
    for i in range(ne):
        if evalid[i] and ea[i] == b and eb[i] == a:
            evalid[i] = False
            return ne
    if ne < NE_CAP:
        ea[ne] = a
        eb[ne] = b
        evalid[ne] = True
        ne += 1
    return ne


cdef int _add_face_3d(double* Vx, double* Vy, double* Vz, double* interior,
                      int i, int j, int k,
                      int* fi, int* fj, int* fk,
                      double* fnx, double* fny, double* fnz, double* fd,
                      bint* alive, int nf, double scale) nogil:
    cdef double e0[3]
    cdef double e1[3]
    cdef double n[3]
    cdef double nn
    e0[0] = Vx[j] - Vx[i]; e0[1] = Vy[j] - Vy[i]; e0[2] = Vz[j] - Vz[i]
    e1[0] = Vx[k] - Vx[i]; e1[1] = Vy[k] - Vy[i]; e1[2] = Vz[k] - Vz[i]
    _cross3(e0, e1, n)
    nn = sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2])
    if nn <= 1e-14 * scale * scale:
        return nf
    n[0] /= nn; n[1] /= nn; n[2] /= nn
    if (n[0] * (Vx[i] - interior[0]) + n[1] * (Vy[i] - interior[1])
            + n[2] * (Vz[i] - interior[2])) < 0.0:
        n[0] = -n[0]; n[1] = -n[1]; n[2] = -n[2]
    fi[nf] = i; fj[nf] = j; fk[nf] = k
    fnx[nf] = n[0]; fny[nf] = n[1]; fnz[nf] = n[2]
    fd[nf] = n[0] * Vx[i] + n[1] * Vy[i] + n[2] * Vz[i]
    alive[nf] = True
    return nf + 1


cdef int _epa_3d(const double[:, ::1] va, const double[:, ::1] vb,
                 int* ia4, int* ib4,
                 double* depth_out, double* lam_out, int* lam_m,
                 int* ia_face, int* ib_face, double* n_out) nogil:
    cdef double scale = _scale_of(va, vb)
    cdef double tol = 1e-10 * scale
    cdef double Vx[NV_CAP]
    cdef double Vy[NV_CAP]
    cdef double Vz[NV_CAP]
    cdef int Pa[NV_CAP]
    cdef int Pb[NV_CAP]
    cdef int fi[NF_CAP]
    cdef int fj[NF_CAP]
    cdef int fk[NF_CAP]
    cdef double fnx[NF_CAP]
    cdef double fny[NF_CAP]
    cdef double fnz[NF_CAP]
    cdef double fd[NF_CAP]
    cdef bint alive[NF_CAP]
    cdef int ea[NE_CAP]
    cdef int eb[NE_CAP]
    cdef bint evalid[NE_CAP]
    cdef int nv = 4, nf = 0, ne
    cdef int i, j, k, it, sa, sb, best_f, s_idx, nvis
    cdef double interior[3]
    cdef double n[3]
    cdef double w[3]
    cdef double best_d
    cdef int status = 2
    cdef bint dup, found
    cdef double W3[9]
    cdef double p[3]
    cdef double lam[4]
    cdef int keep[4]
    cdef int rows[3]
    cdef int nk
    cdef int tris[12]

    for i in range(4):
        Pa[i] = ia4[i]
        Pb[i] = ib4[i]
        Vx[i] = va[ia4[i], 0] - vb[ib4[i], 0]
        Vy[i] = va[ia4[i], 1] - vb[ib4[i], 1]
        Vz[i] = va[ia4[i], 2] - vb[ib4[i], 2]
    interior[0] = (Vx[0] + Vx[1] + Vx[2] + Vx[3]) / 4.0
    interior[1] = (Vy[0] + Vy[1] + Vy[2] + Vy[3]) / 4.0
    interior[2] = (Vz[0] + Vz[1] + Vz[2] + Vz[3]) / 4.0

    tris[0] = 0; tris[1] = 1; tris[2] = 2
    tris[3] = 0; tris[4] = 2; tris[5] = 3
    tris[6] = 0; tris[7] = 3; tris[8] = 1
    tris[9] = 1; tris[10] = 3; tris[11] = 2
    for it in range(4):
        nf = _add_face_3d(Vx, Vy, Vz, interior,
                          tris[it * 3], tris[it * 3 + 1], tris[it * 3 + 2],
                          fi, fj, fk, fnx, fny, fnz, fd, alive, nf, scale)
    if nf == 0:
        depth_out[0] = 0.0
        lam_out[0] = 1.0
        lam_m[0] = 1
        ia_face[0] = Pa[0]
        ib_face[0] = Pb[0]
        n_out[0] = 0.0; n_out[1] = 0.0; n_out[2] = 1.0
        return 2

    best_f = -1
    for it in range(EPA_MAX_ITER):
        best_f = -1
        best_d = INFINITY
        for i in range(nf):
            if alive[i] and fd[i] < best_d:
                best_d = fd[i]
                best_f = i
        if best_f < 0:
            break
        n[0] = fnx[best_f]; n[1] = fny[best_f]; n[2] = fnz[best_f]
        sa = _support_idx(va, n)
        w[0] = -n[0]; w[1] = -n[1]; w[2] = -n[2]
        sb = _support_idx(vb, w)
        dup = False
        for i in range(nv):
            if Pa[i] == sa and Pb[i] == sb:
                dup = True
                break
        w[0] = va[sa, 0] - vb[sb, 0]
        w[1] = va[sa, 1] - vb[sb, 1]
        w[2] = va[sa, 2] - vb[sb, 2]
        if (n[0] * w[0] + n[1] * w[1] + n[2] * w[2]) - best_d <= tol or dup:
            status = 0
            break
        if nv >= NV_CAP - 1 or nf >= NF_CAP - 8:
            break
        Vx[nv] = w[0]; Vy[nv] = w[1]; Vz[nv] = w[2]
        Pa[nv] = sa; Pb[nv] = sb
        s_idx = nv
        nv += 1
        ne = 0
        nvis = 0
        for i in range(nf):
            if not alive[i]:
                continue
            if (fnx[i] * (w[0] - Vx[fi[i]]) + fny[i] * (w[1] - Vy[fi[i]])
                    + fnz[i] * (w[2] - Vz[fi[i]])) > 1e-12 * scale:
                nvis += 1
                alive[i] = False
                ne = _push_edge(ea, eb, evalid, ne, fi[i], fj[i])
                ne = _push_edge(ea, eb, evalid, ne, fj[i], fk[i])
                ne = _push_edge(ea, eb, evalid, ne, fk[i], fi[i])
        if nvis == 0:
            status = 0
            break
        for i in range(ne):
            if evalid[i] and nf < NF_CAP:
                nf = _add_face_3d(Vx, Vy, Vz, interior, ea[i], eb[i], s_idx,
                                  fi, fj, fk, fnx, fny, fnz, fd, alive, nf, scale)
        found = False
        for i in range(nf):
            if alive[i]:
                found = True
                break
        if not found:
            status = 0
            break

    # the winning facet may be split into coplanar triangles; the projection
    # of the origin lands inside exactly one of them, so take the minimum
    # clamped projection over all remaining faces
    cdef double cand[3]
    cdef double cand_lam[4]
    cdef int cand_keep[4]
    cdef int cand_nk
    cdef double best_d2 = INFINITY
    cdef double dd2
    if best_f < 0:
        best_f = 0
    for i in range(nf):
        if not alive[i]:
            continue
        W3[0] = Vx[fi[i]]; W3[1] = Vy[fi[i]]; W3[2] = Vz[fi[i]]
        W3[3] = Vx[fj[i]]; W3[4] = Vy[fj[i]]; W3[5] = Vz[fj[i]]
        W3[6] = Vx[fk[i]]; W3[7] = Vy[fk[i]]; W3[8] = Vz[fk[i]]
        cand_nk = _closest_on_simplex(W3, 3, 3, cand, cand_lam, cand_keep)
        dd2 = cand[0] * cand[0] + cand[1] * cand[1] + cand[2] * cand[2]
        if dd2 < best_d2:
            best_d2 = dd2
            best_f = i
            nk = cand_nk
            for j in range(3):
                p[j] = cand[j]
            for j in range(cand_nk):
                lam[j] = cand_lam[j]
                keep[j] = cand_keep[j]
    if best_d2 == INFINITY:
        # stitching emptied the face list; fall back to the last best face
        W3[0] = Vx[fi[best_f]]; W3[1] = Vy[fi[best_f]]; W3[2] = Vz[fi[best_f]]
        W3[3] = Vx[fj[best_f]]; W3[4] = Vy[fj[best_f]]; W3[5] = Vz[fj[best_f]]
        W3[6] = Vx[fk[best_f]]; W3[7] = Vy[fk[best_f]]; W3[8] = Vz[fk[best_f]]
        nk = _closest_on_simplex(W3, 3, 3, p, lam, keep)
    rows[0] = fi[best_f]; rows[1] = fj[best_f]; rows[2] = fk[best_f]
    for i in range(nk):
        lam_out[i] = lam[i]
        ia_face[i] = Pa[rows[keep[i]]]
        ib_face[i] = Pb[rows[keep[i]]]
    lam_m[0] = nk
    depth_out[0] = sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])
    if depth_out[0] > tol:
        n_out[0] = p[0] / depth_out[0]
        n_out[1] = p[1] / depth_out[0]
        n_out[2] = p[2] / depth_out[0]
    else:
        n_out[0] = fnx[best_f]
        n_out[1] = fny[best_f]
        n_out[2] = fnz[best_f]
    return status


def support_index(double[:, ::1] verts, double[::1] direction):
    """Index of the vertex maximizing dot(vertex, direction); first max wins."""
    cdef double d[3]
    cdef int k
    for k in range(verts.shape[1]):
        d[k] = direction[k]
    return _support_idx(verts, d)


def signed_distance(double[:, ::1] va, double[:, ::1] vb):
    """Signed distance with witnesses and the increasing-sd normal.

    Same contract as ``pyfallback.signed_distance``:
    returns ``(status, sd, pa, pb, normal)``.
    """
    cdef int d = va.shape[1]
    cdef double scale = _scale_of(va, vb)
    cdef double contact = CONTACT_TOL * scale
    cdef double dist
    cdef double lam[4]
    cdef int ia[4]
    cdef int ib[4]
    cdef int m, i, kk
    cdef int status = _gjk(va, vb, &dist, lam, ia, ib, &m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pa = np.zeros(d)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pb = np.zeros(d)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] nrm = np.zeros(d)

    if dist > contact:
        for i in range(m):
            for kk in range(d):
                pa[kk] += lam[i] * va[ia[i], kk]
                pb[kk] += lam[i] * vb[ib[i], kk]
        for kk in range(d):
            nrm[kk] = (pa[kk] - pb[kk]) / dist
        return status, dist, pa, pb, nrm

    cdef int ia4[4]
    cdef int ib4[4]
    cdef double graze_n[3]
    cdef double graze_lam[4]
    cdef int graze_ia[4]
    cdef int graze_ib[4]
    cdef int graze_m
    cdef int found = _enclose(va, vb, ia, ib, m, ia4, ib4,
                              graze_n, graze_lam, graze_ia, graze_ib, &graze_m)
    if found == 0:
        for i in range(graze_m):
            for kk in range(d):
                pa[kk] += graze_lam[i] * va[graze_ia[i], kk]
                pb[kk] += graze_lam[i] * vb[graze_ib[i], kk]
        for kk in range(d):
            nrm[kk] = -graze_n[kk]
        return 0, 0.0, pa, pb, nrm

    cdef double depth
    cdef double flam[4]
    cdef int fia[4]
    cdef int fib[4]
    cdef double n_out[3]
    cdef int fm
    if d == 2:
        status = _epa_2d(va, vb, ia4, ib4, &depth, flam, fia, fib, n_out)
        fm = 2
    else:
        status = _epa_3d(va, vb, ia4, ib4, &depth, flam, &fm, fia, fib, n_out)
    for i in range(fm):
        for kk in range(d):
            pa[kk] += flam[i] * va[fia[i], kk]
            pb[kk] += flam[i] * vb[fib[i], kk]
    for kk in range(d):
        nrm[kk] = -n_out[kk]
    if depth <= contact:
        return status, 0.0, pa, pb, nrm
    return status, -depth, pa, pb, nrm
