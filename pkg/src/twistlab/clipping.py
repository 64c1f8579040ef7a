"""Polygon areas, convex clipping, and symmetric differences.

Sutherland-Hodgman clipping against a convex window (here: a fine
polygonal disc) plus shoelace areas give |patch ∩ disc|; the symmetric
difference follows from inclusion-exclusion.  A rasterized fallback
covers degenerate clips.
"""

from __future__ import annotations

import numpy as np

from .errors import ClippingDegeneracy


def shoelace_area(vertices: np.ndarray) -> float:
    """Signed polygon area (counterclockwise positive)."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_second_moment(vertices: np.ndarray) -> float:
    """Signed integral of |x|^2 over the polygon (orientation carries sign)."""
    v = np.asarray(vertices, dtype=float)
    a = v
    b = np.roll(v, -1, axis=0)
    cross = a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]
    xx = a[:, 0] ** 2 + a[:, 0] * b[:, 0] + b[:, 0] ** 2
    yy = a[:, 1] ** 2 + a[:, 1] * b[:, 1] + b[:, 1] ** 2
    return float(np.sum(cross * (xx + yy)) / 12.0)


def disc_polygon(radius: float = 1.0, n: int = 2048) -> np.ndarray:
    th = np.linspace(0.0, 2 * np.pi, n + 1)[:-1]
    return np.column_stack([radius * np.cos(th), radius * np.sin(th)])


def clip_convex(subject: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of ``subject`` by convex ccw ``window``."""
    out = [tuple(p) for p in np.asarray(subject, dtype=float)]
    win = np.asarray(window, dtype=float)
    n = len(win)
    for k in range(n):
        if not out:
            return np.empty((0, 2))
        cp1 = win[k]
        cp2 = win[(k + 1) % n]
        ex, ey = cp2[0] - cp1[0], cp2[1] - cp1[1]

        def inside(p):
            return ex * (p[1] - cp1[1]) - ey * (p[0] - cp1[0]) >= 0.0

        def intersect(s, e):
            dx, dy = e[0] - s[0], e[1] - s[1]
            denom = ex * dy - ey * dx
            if denom == 0.0:
                return e
            t = (ex * (s[1] - cp1[1]) - ey * (s[0] - cp1[0])) / -denom
            return (s[0] + t * dx, s[1] + t * dy)

        src = out
        out = []
        s = src[-1]
        s_in = inside(s)
        for e in src:
            e_in = inside(e)
            if e_in:
                if not s_in:
                    out.append(intersect(s, e))
                out.append(e)
            elif s_in:
                out.append(intersect(s, e))
            s, s_in = e, e_in
    return np.asarray(out) if out else np.empty((0, 2))


def intersection_area_with_disc(contours, radius: float = 1.0,
                                n_disc: int = 2048) -> float:
    """Signed area of (union with holes) ∩ disc.

    ``contours`` yield (vertices, orientation); holes are clockwise and
    subtract.  Clockwise inputs are reversed before clipping and their
    clipped area negated.
    """
    window = disc_polygon(radius, n_disc)
    total = 0.0
    for verts in contours:
        v = np.asarray(verts, dtype=float)
        if v.shape[0] < 3:
            continue
        sign = 1.0 if shoelace_area(v) >= 0 else -1.0
        poly = v if sign > 0 else v[::-1]
        clipped = clip_convex(poly, window)
        if clipped.shape[0] >= 3:
            a = shoelace_area(clipped)
            if a < -1e-12:
                raise ClippingDegeneracy("negative clipped area")
            total += sign * max(a, 0.0)
    return total


def rasterized_intersection_area(contours, radius: float = 1.0,
                                 n_cells: int = 2000):
    """Fallback: rasterize winding parity on a grid over the disc.

    Returns (area, cell_size) so callers can report the resolution.
    """
    xs = np.linspace(-radius, radius, n_cells)
    cell = xs[1] - xs[0]
    X, Y = np.meshgrid(xs, xs)
    inside_disc = X ** 2 + Y ** 2 <= radius ** 2
    acc = np.zeros_like(X)
    for verts in contours:
        v = np.asarray(verts, dtype=float)
        acc += _winding_parity(v, X, Y)
    area = float(np.sum((acc > 0.5) & inside_disc)) * cell ** 2
    return area, cell


def _winding_parity(v, X, Y):
    """Crossing-number parity of grid points w.r.t. one polygon (signed)."""
    sign = 1.0 if shoelace_area(v) >= 0 else -1.0
    inside = np.zeros(X.shape, dtype=int)
    n = v.shape[0]
    for i in range(n):
        x1, y1 = v[i]
        x2, y2 = v[(i + 1) % n]
        cond = (y1 <= Y) != (y2 <= Y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x1 + (Y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= (cond & (X < xc)).astype(int)
    return sign * inside


def symmetric_difference_with_disc(contours, total_area: float,
                                   radius: float = 1.0, n_disc: int = 2048,
                                   fallback_cells: int = 2000):
    """|Omega △ B_radius| = |Omega| + |B| - 2 |Omega ∩ B|.

    Falls back to rasterization when the clip degenerates; returns
    (value, method, resolution).
    """
    disc_area = np.pi * radius ** 2 * _polygon_area_factor(n_disc)
    try:
        inter = intersection_area_with_disc(contours, radius, n_disc)
        method, res = "clip", 2 * np.pi * radius / n_disc
    except ClippingDegeneracy:
        inter, cell = rasterized_intersection_area(contours, radius,
                                                   fallback_cells)
        method, res = "raster", cell
    return total_area + disc_area - 2.0 * inter, method, res


def _polygon_area_factor(n: int) -> float:
    """Area of the inscribed n-gon relative to its circle."""
    return float(n * np.sin(2 * np.pi / n) / (2 * np.pi))
