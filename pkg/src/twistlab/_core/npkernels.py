"""Pure numpy implementations of the hot kernels.

Reference semantics for the compiled twin in ``cykernels.pyx``; the two
must agree to roundoff (enforced by tests).  Memory is kept in check by
blocking over query points.
"""

import numpy as np

# far/near split: a segment is "near" a query when the query sits closer
# than NEAR_FACTOR segment lengths; near segments get the exact log
# integral, far ones a 2-point Gauss-Legendre rule.
NEAR_FACTOR = 4.0
_GL_T1 = 0.5 - 0.5 / np.sqrt(3.0)
_GL_T2 = 0.5 + 0.5 / np.sqrt(3.0)


def _log_segment_mean(s, n, L):
    """(1/L) * integral_0^L log|q - a - tau*e| dtau, exactly.

    ``s``/``n`` are the query coordinates along/transverse to the
    segment frame, ``L`` the segment length.  Vectorized over any shape.
    """
    na = np.abs(n)

    def f(x):
        r2 = x * x + na * na
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(r2 > 0.0, 0.5 * x * np.log(r2), 0.0)
            at = np.where(na > 0.0, na * np.arctan(np.divide(
                x, np.where(na > 0.0, na, 1.0))), 0.0)
        return term - x + at

    return (f(s) - f(s - L)) / L


def contour_velocity(qx, qy, vx, vy, loop_start, loop_len, strength,
                     block: int = 256):
    """Velocity induced by uniform-vorticity patches bounded by polylines.

    ``vx, vy`` hold the vertices of all closed loops back to back;
    ``loop_start[k]:loop_start[k]+loop_len[k]`` indexes loop k, whose
    closing segment (last vertex -> first vertex) is implied.  Loop
    orientation carries the sign (counterclockwise outer boundaries,
    clockwise holes).  ``strength`` is the vorticity value inside.

    u(q) = -(strength / 2 pi) * sum over segments of e_seg * integral of
    log|q - y| d ell(y), with the exact integral on near segments and a
    2-point Gauss rule on far ones.
    """
    qx = np.asarray(qx, dtype=float).ravel()
    qy = np.asarray(qy, dtype=float).ravel()
    ax_parts, ay_parts, bx_parts, by_parts = [], [], [], []
    for st, ln in zip(loop_start, loop_len):
        idx = np.arange(st, st + ln)
        nxt = np.concatenate([idx[1:], idx[:1]])
        ax_parts.append(vx[idx])
        ay_parts.append(vy[idx])
        bx_parts.append(vx[nxt])
        by_parts.append(vy[nxt])
    ax = np.concatenate(ax_parts)
    ay = np.concatenate(ay_parts)
    bx = np.concatenate(bx_parts)
    by = np.concatenate(by_parts)
    ex, ey = bx - ax, by - ay
    L = np.hypot(ex, ey)
    keep = L > 0.0
    ax, ay, ex, ey, L = ax[keep], ay[keep], ex[keep], ey[keep], L[keep]
    ux_hat, uy_hat = ex / L, ey / L

    gx1 = ax + _GL_T1 * ex
    gy1 = ay + _GL_T1 * ey
    gx2 = ax + _GL_T2 * ex
    gy2 = ay + _GL_T2 * ey

    out_x = np.empty_like(qx)
    out_y = np.empty_like(qy)
    pref = -strength / (2.0 * np.pi)
    for lo in range(0, qx.size, block):
        hi = min(lo + block, qx.size)
        zx = qx[lo:hi, None] - ax[None, :]
        zy = qy[lo:hi, None] - ay[None, :]
        s = zx * ux_hat + zy * uy_hat
        n = -zx * uy_hat + zy * ux_hat
        # distance to the segment decides near/far
        dperp = np.abs(n)
        dend = np.minimum(np.hypot(s, n), np.hypot(s - L, n))
        dist = np.where((s >= 0.0) & (s <= L), dperp, dend)
        nearm = dist < NEAR_FACTOR * L
        Ibar = np.empty_like(s)
        if nearm.any():
            Ibar[nearm] = _log_segment_mean(
                s[nearm], n[nearm], np.broadcast_to(L, s.shape)[nearm])
        farm = ~nearm
        if farm.any():
            d1s = (qx[lo:hi, None] - gx1[None, :]) ** 2 \
                + (qy[lo:hi, None] - gy1[None, :]) ** 2
            d2s = (qx[lo:hi, None] - gx2[None, :]) ** 2 \
                + (qy[lo:hi, None] - gy2[None, :]) ** 2
            Ibar[farm] = 0.25 * np.log(d1s[farm] * d2s[farm])
        w = Ibar * L
        out_x[lo:hi] = pref * (w @ ux_hat)
        out_y[lo:hi] = pref * (w @ uy_hat)
    return out_x, out_y


def hermite_bicubic(u, ux, uy, uxy, x0, y0, dx, dy, qx, qy):
    """C1 Hermite bicubic interpolation on a doubly periodic uniform grid.

    Tables are (ny, nx) with values f[j, i] at (x0 + i dx, y0 + j dy);
    the derivative tables hold exact partials (typically spectral).
    Queries wrap periodically in both directions.
    """
    u = np.asarray(u)
    ny, nx = u.shape
    tx = (np.asarray(qx, dtype=float).ravel() - x0) / dx
    ty = (np.asarray(qy, dtype=float).ravel() - y0) / dy
    ix = np.floor(tx).astype(np.int64)
    iy = np.floor(ty).astype(np.int64)
    fx = tx - ix
    fy = ty - iy
    ix0 = np.mod(ix, nx)
    iy0 = np.mod(iy, ny)
    ix1 = np.mod(ix + 1, nx)
    iy1 = np.mod(iy + 1, ny)

    def h00(t):
        return (1 + 2 * t) * (1 - t) ** 2

    def h10(t):
        return t * (1 - t) ** 2

    def h01(t):
        return t * t * (3 - 2 * t)

    def h11(t):
        return t * t * (t - 1)

    hx = (h00(fx), h01(fx), h10(fx) * dx, h11(fx) * dx)
    hy = (h00(fy), h01(fy), h10(fy) * dy, h11(fy) * dy)

    def corner(tab, jj, ii):
        return tab[jj, ii]

    # explicit 16-term tensor product
    val = (
        hx[0] * (hy[0] * corner(u, iy0, ix0) + hy[1] * corner(u, iy1, ix0)
                 + hy[2] * corner(uy, iy0, ix0) + hy[3] * corner(uy, iy1, ix0))
        + hx[1] * (hy[0] * corner(u, iy0, ix1) + hy[1] * corner(u, iy1, ix1)
                   + hy[2] * corner(uy, iy0, ix1) + hy[3] * corner(uy, iy1, ix1))
        + hx[2] * (hy[0] * corner(ux, iy0, ix0) + hy[1] * corner(ux, iy1, ix0)
                   + hy[2] * corner(uxy, iy0, ix0) + hy[3] * corner(uxy, iy1, ix0))
        + hx[3] * (hy[0] * corner(ux, iy0, ix1) + hy[1] * corner(ux, iy1, ix1)
                   + hy[2] * corner(uxy, iy0, ix1) + hy[3] * corner(uxy, iy1, ix1))
    )
    return val
