# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of npkernels; same contracts, same results to roundoff."""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport atan, fabs, floor, hypot, log, sqrt

cnp.import_array()

DEF NEAR_FACTOR = 4.0


cdef inline double _f_log(double x, double na) nogil:
    cdef double r2 = x * x + na * na
    cdef double out = 0.0
    if r2 > 0.0:
        out = 0.5 * x * log(r2)
    out -= x
    if na > 0.0:
        out += na * atan(x / na)
    return out


def contour_velocity(qx, qy, vx, vy, loop_start, loop_len, strength,
                     block=0):
    """See npkernels.contour_velocity; ``block`` is accepted and ignored."""
    cdef cnp.ndarray[double, ndim=1] qx_ = np.ascontiguousarray(qx, dtype=np.float64).ravel()
    cdef cnp.ndarray[double, ndim=1] qy_ = np.ascontiguousarray(qy, dtype=np.float64).ravel()
    cdef cnp.ndarray[double, ndim=1] vx_ = np.ascontiguousarray(vx, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] vy_ = np.ascontiguousarray(vy, dtype=np.float64)
    cdef cnp.ndarray[long, ndim=1] ls_ = np.ascontiguousarray(loop_start, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1] ll_ = np.ascontiguousarray(loop_len, dtype=np.int64)

    # flatten the segments once (closing edge of each loop included)
    cdef Py_ssize_t nseg = 0, k, j, i
    for k in range(ls_.shape[0]):
        nseg += ll_[k]
    cdef cnp.ndarray[double, ndim=1] ax = np.empty(nseg), ay = np.empty(nseg)
    cdef cnp.ndarray[double, ndim=1] ex = np.empty(nseg), ey = np.empty(nseg)
    cdef Py_ssize_t m = 0
    cdef Py_ssize_t st, ln
    for k in range(ls_.shape[0]):
        st = ls_[k]; ln = ll_[k]
        for j in range(ln):
            ax[m] = vx_[st + j]
            ay[m] = vy_[st + j]
            if j + 1 < ln:
                ex[m] = vx_[st + j + 1] - ax[m]
                ey[m] = vy_[st + j + 1] - ay[m]
            else:
                ex[m] = vx_[st] - ax[m]
                ey[m] = vy_[st] - ay[m]
            m += 1

    cdef cnp.ndarray[double, ndim=1] out_x = np.zeros(qx_.shape[0])
    cdef cnp.ndarray[double, ndim=1] out_y = np.zeros(qy_.shape[0])

    cdef double pref = -float(strength) / (2.0 * np.pi)
    cdef double gl1 = 0.5 - 0.5 / sqrt(3.0)
    cdef double gl2 = 0.5 + 0.5 / sqrt(3.0)

    cdef double QX, QY, L, uxh, uyh, zx, zy, s, n, dist2, Ibar
    cdef double d1x, d1y, d2x, d2y, acc_x, acc_y, w, s2a, s2b
    cdef Py_ssize_t nq = qx_.shape[0]

    for i in prange(nq, nogil=True, schedule="static"):
        QX = qx_[i]; QY = qy_[i]
        acc_x = 0.0; acc_y = 0.0
        for j in range(nseg):
            L = hypot(ex[j], ey[j])
            if L == 0.0:
                continue
            uxh = ex[j] / L; uyh = ey[j] / L
            zx = QX - ax[j]; zy = QY - ay[j]
            s = zx * uxh + zy * uyh
            n = -zx * uyh + zy * uxh
            if s >= 0.0 and s <= L:
                dist2 = n * n
            else:
                s2a = s * s + n * n
                s2b = (s - L) * (s - L) + n * n
                dist2 = s2a if s2a < s2b else s2b
            if dist2 < (NEAR_FACTOR * NEAR_FACTOR) * L * L:
                Ibar = (_f_log(s, fabs(n)) - _f_log(s - L, fabs(n))) / L
            else:
                d1x = QX - (ax[j] + gl1 * ex[j])
                d1y = QY - (ay[j] + gl1 * ey[j])
                d2x = QX - (ax[j] + gl2 * ex[j])
                d2y = QY - (ay[j] + gl2 * ey[j])
                Ibar = 0.25 * log((d1x * d1x + d1y * d1y)
                                  * (d2x * d2x + d2y * d2y))
            w = Ibar * L
            acc_x = acc_x + w * uxh
            acc_y = acc_y + w * uyh
        out_x[i] = pref * acc_x
        out_y[i] = pref * acc_y
    return out_x, out_y


cdef inline double _h00(double t) nogil:
    return (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t)

cdef inline double _h10(double t) nogil:
    return t * (1.0 - t) * (1.0 - t)

cdef inline double _h01(double t) nogil:
    return t * t * (3.0 - 2.0 * t)

cdef inline double _h11(double t) nogil:
    return t * t * (t - 1.0)


def hermite_bicubic(u, ux, uy, uxy, double x0, double y0, double dx,
                    double dy, qx, qy):
    """See npkernels.hermite_bicubic."""
    cdef cnp.ndarray[double, ndim=2] u_ = np.ascontiguousarray(u, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] ux_ = np.ascontiguousarray(ux, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] uy_ = np.ascontiguousarray(uy, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] uxy_ = np.ascontiguousarray(uxy, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] qx_ = np.ascontiguousarray(qx, dtype=np.float64).ravel()
    cdef cnp.ndarray[double, ndim=1] qy_ = np.ascontiguousarray(qy, dtype=np.float64).ravel()
    cdef Py_ssize_t ny = u_.shape[0], nx = u_.shape[1], nq = qx_.shape[0], i
    cdef cnp.ndarray[double, ndim=1] out = np.empty(nq)
    cdef double tx, ty, fx, fy
    cdef Py_ssize_t ix0, iy0, ix1, iy1
    cdef double hx0, hx1, gx0, gx1, hy0, hy1, gy0, gy1

    with nogil:
        for i in range(nq):
            tx = (qx_[i] - x0) / dx
            ty = (qy_[i] - y0) / dy
            fx = tx - floor(tx)
            fy = ty - floor(ty)
            ix0 = <Py_ssize_t> (floor(tx)) % nx
            iy0 = <Py_ssize_t> (floor(ty)) % ny
            if ix0 < 0:
                ix0 += nx
            if iy0 < 0:
                iy0 += ny
            ix1 = ix0 + 1
            if ix1 == nx:
                ix1 = 0
            iy1 = iy0 + 1
            if iy1 == ny:
                iy1 = 0
            hx0 = _h00(fx); hx1 = _h01(fx)
            gx0 = _h10(fx) * dx; gx1 = _h11(fx) * dx
            hy0 = _h00(fy); hy1 = _h01(fy)
            gy0 = _h10(fy) * dy; gy1 = _h11(fy) * dy
            out[i] = (
                hx0 * (hy0 * u_[iy0, ix0] + hy1 * u_[iy1, ix0]
                       + gy0 * uy_[iy0, ix0] + gy1 * uy_[iy1, ix0])
                + hx1 * (hy0 * u_[iy0, ix1] + hy1 * u_[iy1, ix1]
                         + gy0 * uy_[iy0, ix1] + gy1 * uy_[iy1, ix1])
                + gx0 * (hy0 * ux_[iy0, ix0] + hy1 * ux_[iy1, ix0]
                         + gy0 * uxy_[iy0, ix0] + gy1 * uxy_[iy1, ix0])
                + gx1 * (hy0 * ux_[iy0, ix1] + hy1 * ux_[iy1, ix1]
                         + gy0 * uxy_[iy0, ix1] + gy1 * uxy_[iy1, ix1])
            )
    return out
