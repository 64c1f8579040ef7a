"""Domains, universal covers, and continuous lifting.

A flow on an annular domain (periodic channel, torus, annulus, punctured
plane) is studied on its universal cover, where the angular coordinate
accumulates instead of wrapping.  A lifted position is a pair
``(angle_lift, radial)``: the unwrapped angular/horizontal coordinate and
the second coordinate (y for a channel, r for radial domains).  Winding
is then just horizontal displacement on the cover divided by the period.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import EmptyCurve, UnderSampled

CHANNEL = "periodic-channel"
TORUS = "flat-torus"
PUNCTURED_PLANE = "punctured-plane"
ANNULUS = "annulus"

_KINDS = (CHANNEL, TORUS, PUNCTURED_PLANE, ANNULUS)


class CoverPoint(NamedTuple):
    """A point on the universal cover."""

    angle_lift: float
    radial: float


@dataclass(frozen=True)
class DomainSpec:
    """Which surface we work on, with periods and radial bounds.

    ``x_period`` is the angular period (radians).  ``y_range`` gives the
    radial bounds for channel/annulus kinds and the y-extent of the torus
    fundamental domain.  ``far_field_radius`` truncates the punctured
    plane for quadrature; integrands there carry explicit decay.
    """

    kind: str
    x_period: float = 2.0 * np.pi
    y_range: tuple[float, float] = (0.0, 1.0)
    far_field_radius: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if not self.x_period > 0:
            raise ValueError("x_period must be positive")
        if not self.y_range[0] < self.y_range[1]:
            raise ValueError("y_range must be strictly ordered")
        if self.kind == PUNCTURED_PLANE:
            if not self.far_field_radius > 0:
                raise ValueError("punctured plane needs far_field_radius > 0")
            if self.y_range[0] < 0:
                raise ValueError("punctured plane radial bounds must be >= 0")

    @property
    def y_extent(self) -> float:
        return self.y_range[1] - self.y_range[0]

    @property
    def area(self) -> float:
        """Fundamental-domain area (finite for every kind but the plane)."""
        if self.kind == PUNCTURED_PLANE:
            r0, r1 = self.y_range
            r1 = min(r1, self.far_field_radius) if self.far_field_radius else r1
            return np.pi * (r1 ** 2 - r0 ** 2)
        return self.x_period * self.y_extent

    def wrap_angle(self, angle_lift):
        """Project an angle-lift to the fundamental interval [0, x_period)."""
        return np.mod(angle_lift, self.x_period)

    def project(self, cover_pts):
        """Project cover points (n, 2) down to the base domain."""
        pts = np.asarray(cover_pts, dtype=float)
        out = pts.copy()
        out[..., 0] = self.wrap_angle(out[..., 0])
        if self.kind == TORUS:
            y0, y1 = self.y_range
            out[..., 1] = y0 + np.mod(out[..., 1] - y0, y1 - y0)
        return out


def channel(x_period: float = 2.0 * np.pi, y_range=(0.0, 1.0)) -> DomainSpec:
    return DomainSpec(CHANNEL, x_period=x_period, y_range=y_range)


def torus(x_period: float = 2.0 * np.pi, y_range=(-np.pi, np.pi)) -> DomainSpec:
    return DomainSpec(TORUS, x_period=x_period, y_range=y_range)


def punctured_plane(far_field_radius: float = 50.0, r_min: float = 0.0) -> DomainSpec:
    return DomainSpec(
        PUNCTURED_PLANE,
        y_range=(r_min, far_field_radius),
        far_field_radius=far_field_radius,
    )


def annulus(y_range=(0.5, 1.5), x_period: float = 2.0 * np.pi) -> DomainSpec:
    return DomainSpec(ANNULUS, x_period=x_period, y_range=y_range)


def principal_increment(delta, period):
    """Reduce angular increments to the principal branch (-period/2, period/2]."""
    half = 0.5 * period
    return half - np.mod(half - np.asarray(delta, dtype=float), period)


def unwrap_increments(angles, period, rtol: float = 1e-9):
    """Continuously unwrap a sampled angular signal.

    The seam sits at the fundamental-domain edge; each consecutive
    increment is reduced to its principal value.  The lift is stored as
    ``angle + period * k`` with integer seam-crossing counts ``k``, so
    rounding never accumulates along the trajectory.  An increment whose
    magnitude reaches half a period is ambiguous and raises
    :class:`UnderSampled`.
    """
    angles = np.asarray(angles, dtype=float)
    if angles.ndim != 1:
        raise ValueError("expected a 1-d sequence of angles")
    if angles.size == 0:
        return angles.copy()
    raw = np.diff(angles)
    inc = principal_increment(raw, period)
    if inc.size and np.max(np.abs(inc)) >= 0.5 * period * (1.0 - rtol):
        k = int(np.argmax(np.abs(inc)))
        raise UnderSampled(
            f"increment |{inc[k]:.6g}| at sample {k + 1} reaches half the "
            f"period {period:.6g}; winding ambiguous"
        )
    # signed seam crossings per step, then cumulative winding count
    crossings = np.rint((inc - raw) / period)
    k = np.concatenate([[0.0], np.cumsum(crossings)])
    return angles + period * k


def lift_trajectory(samples, domain: DomainSpec):
    """Continuously lift a sampled base trajectory to the cover.

    ``samples`` is (n, 2): base angular coordinate (or x) and the radial
    coordinate, ordered in time.  Consecutive samples must be closer than
    half the period in the angular direction.  The first lifted angle
    equals the first sample's angle as given.
    """
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    if pts.shape[0] == 0:
        return pts.copy()
    lifted = pts.copy()
    lifted[:, 0] = unwrap_increments(pts[:, 0], domain.x_period)
    return lifted


def winding_number(lifted, domain: DomainSpec):
    """Accumulated turns of a lifted trajectory: net lift / period."""
    lifted = np.atleast_2d(np.asarray(lifted, dtype=float))
    return (lifted[-1, 0] - lifted[0, 0]) / domain.x_period


def polar_chord_points(curve):
    """Map cover points (phi, r) to the plane via (r cos phi, r sin phi)."""
    curve = np.atleast_2d(np.asarray(curve, dtype=float))
    phi, r = curve[:, 0], curve[:, 1]
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def cover_polyline_length(curve, metric: str = "euclidean-strip") -> float:
    """Length of a polyline on the cover.

    ``euclidean-strip`` sums flat segment lengths on R x [y0, y1];
    ``polar-plane`` maps each chordal piece through
    (phi, r) -> (r cos phi, r sin phi) and sums plane chord lengths,
    which realizes the polar metric dr^2 + r^2 dphi^2 under refinement.
    """
    curve = np.atleast_2d(np.asarray(curve, dtype=float))
    if curve.shape[0] < 2:
        raise EmptyCurve("polyline needs at least 2 points")
    if metric == "euclidean-strip":
        seg = np.diff(curve, axis=0)
    elif metric == "polar-plane":
        if np.any(curve[:, 1] <= 0):
            raise ValueError("polar-plane metric needs radial > 0 at all vertices")
        seg = np.diff(polar_chord_points(curve), axis=0)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return float(np.sum(np.hypot(seg[:, 0], seg[:, 1])))


def refine_polyline(curve, max_step: float):
    """Insert evenly spaced vertices so no parameter step exceeds max_step.

    Refinement happens in (angle, radial) coordinates; used to evaluate
    the polar-plane length of coarsely described curves.
    """
    curve = np.atleast_2d(np.asarray(curve, dtype=float))
    if curve.shape[0] < 2:
        return curve.copy()
    pieces = [curve[:1]]
    for a, b in zip(curve[:-1], curve[1:]):
        n = max(1, int(np.ceil(np.max(np.abs(b - a)) / max_step)))
        t = np.linspace(0.0, 1.0, n + 1)[1:, None]
        pieces.append(a[None, :] * (1 - t) + b[None, :] * t)
    return np.vstack(pieces)


# --- plain-text trajectory exchange format -------------------------------
#
# One sample per row: `t angle_lift radial`, whitespace separated,
# '#' starts a comment line.

def save_trajectory(path, times, lifted):
    times = np.asarray(times, dtype=float)
    lifted = np.atleast_2d(np.asarray(lifted, dtype=float))
    with open(path, "w") as fh:
        fh.write("# t angle_lift radial\n")
        for t, (a, r) in zip(times, lifted):
            fh.write(f"{t:.17g} {a:.17g} {r:.17g}\n")


def load_trajectory(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(tok) for tok in line.split()])
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        return np.empty(0), np.empty((0, 2))
    return arr[:, 0], arr[:, 1:3]
