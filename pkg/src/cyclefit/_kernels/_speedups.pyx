# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: QR least squares and the bootstrap resample loop.

Same contracts as ``_pure``; LAPACK (dgeqrf/dormqr/dtrtrs) does the
orthogonal-decomposition work, and the whole resample loop runs without the
GIL.
"""

from libc.stdlib cimport free, malloc
from libc.math cimport fabs

cimport numpy as cnp
import numpy as np

from scipy.linalg.cython_lapack cimport dgeqrf, dormqr, dtrtrs

cnp.import_array()

DEF RANK_RCOND = 1e-10


cdef int _qr_solve(double* xf, double* yb, int m, int p, int lda,
                   double* tau, double* work, int lwork) noexcept nogil:
    """QR-factor xf (m x p, column-major, leading dim lda) and solve in place.

    On success the first p entries of yb hold beta. Returns 0 on success,
    1 on rank deficiency, 2 on a LAPACK error.
    """
    cdef int info = 0
    cdef int one = 1
    cdef int j
    cdef double d, dmax, dmin
    cdef char side = b'L'[0]
    cdef char trans = b'T'[0]
    cdef char uplo = b'U'[0]
    cdef char notrans = b'N'[0]
    cdef char nonunit = b'N'[0]

    if m < p:
        return 1
    dgeqrf(&m, &p, xf, &lda, tau, work, &lwork, &info)
    if info != 0:
        return 2
    dmax = 0.0
    dmin = -1.0
    for j in range(p):
        d = fabs(xf[j + j * lda])
        if d > dmax:
            dmax = d
        if dmin < 0.0 or d < dmin:
            dmin = d
    if dmax == 0.0 or dmin <= RANK_RCOND * dmax:
        return 1
    dormqr(&side, &trans, &m, &one, &p, xf, &lda, tau, yb, &m, work, &lwork, &info)
    if info != 0:
        return 2
    dtrtrs(&uplo, &notrans, &nonunit, &p, &one, xf, &lda, yb, &m, &info)
    if info != 0:
        return 1
    return 0


def lstsq_qr(X, y):
    """Solve min ||y - X b|| by QR; (None, False) when X is rank deficient."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode='c'] Xc = np.ascontiguousarray(X, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yc = np.ascontiguousarray(y, dtype=np.float64)
    cdef int m = Xc.shape[0]
    cdef int p = Xc.shape[1]
    if m < p:
        return None, False

    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode='fortran'] XF = np.asfortranarray(Xc)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yb = yc.copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tau = np.empty(p, dtype=np.float64)

    # workspace query
    cdef double wq = 0.0
    cdef int lwork = -1
    cdef int info = 0
    dgeqrf(&m, &p, &XF[0, 0], &m, &tau[0], &wq, &lwork, &info)
    lwork = <int>wq
    if lwork < p * 64:
        lwork = p * 64
    cdef cnp.ndarray[cnp.float64_t, ndim=1] work = np.empty(lwork, dtype=np.float64)

    cdef int rc = _qr_solve(&XF[0, 0], &yb[0], m, p, m, &tau[0], &work[0], lwork)
    if rc != 0:
        return None, False
    return yb[:p].copy(), True


def bootstrap_curves(y, design, user_ptr, draws, grid_design):
    """Refit the model on each user-resample and evaluate it on the grid."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode='c'] dm = np.ascontiguousarray(design, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ptr = np.ascontiguousarray(user_ptr, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2, mode='c'] dr = np.ascontiguousarray(draws, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode='c'] gd = np.ascontiguousarray(grid_design, dtype=np.float64)

    cdef int n_b = dr.shape[0]
    cdef int n_slots = dr.shape[1]
    cdef int p = dm.shape[1]
    cdef int n_grid = gd.shape[0]

    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode='c'] curves = np.zeros((n_b, n_grid), dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] ok = np.zeros(n_b, dtype=np.uint8)

    # capacity = largest resample size
    cdef long long cap = 0, tot
    cdef int b, s
    cdef long long u
    for b in range(n_b):
        tot = 0
        for s in range(n_slots):
            u = dr[b, s]
            tot += ptr[u + 1] - ptr[u]
        if tot > cap:
            cap = tot
    if cap == 0 or p == 0:
        return curves, ok.astype(bool)

    cdef int capi = <int>cap
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tau = np.empty(p, dtype=np.float64)

    # workspace query at capacity
    cdef double wq = 0.0
    cdef int lwork = -1
    cdef int info = 0
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode='fortran'] XF = np.empty((capi, p), dtype=np.float64, order='F')
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yb = np.empty(capi, dtype=np.float64)
    dgeqrf(&capi, &p, &XF[0, 0], &capi, &tau[0], &wq, &lwork, &info)
    lwork = <int>wq
    if lwork < p * 64:
        lwork = p * 64
    cdef cnp.ndarray[cnp.float64_t, ndim=1] work = np.empty(lwork, dtype=np.float64)

    cdef double* yp = &yv[0]
    cdef double* dp = &dm[0, 0]
    cdef double* gp = &gd[0, 0]
    cdef double* xfp = &XF[0, 0]
    cdef double* ybp = &yb[0]
    cdef double* cp = &curves[0, 0]
    cdef long long* pp = &ptr[0]
    cdef long long* drp = &dr[0, 0]
    cdef cnp.uint8_t* okp = &ok[0]

    cdef long long start, ln, i
    cdef int j, g, m, rc
    cdef long long off
    cdef double acc

    with nogil:
        for b in range(n_b):
            off = 0
            for s in range(n_slots):
                u = drp[b * n_slots + s]
                start = pp[u]
                ln = pp[u + 1] - start
                for i in range(ln):
                    ybp[off + i] = yp[start + i]
                    for j in range(p):
                        xfp[off + i + j * cap] = dp[(start + i) * p + j]
                off += ln
            m = <int>off
            rc = _qr_solve(xfp, ybp, m, p, capi, &tau[0], &work[0], lwork)
            if rc == 0:
                okp[b] = 1
                for g in range(n_grid):
                    acc = 0.0
                    for j in range(p):
                        acc += gp[g * p + j] * ybp[j]
                    cp[b * n_grid + g] = acc

    return curves, ok.astype(bool)
