"""Action-angle data for autonomous stream functions.

On an annular region foliated by closed non-contractible streamlines the
flow of an autonomous stream function is pure differential rotation: each
level curve {psi = c} is orbited in a travel time

    mu(c) = loop integral of dl / |grad psi|

and an angular coordinate theta advances along each streamline at the
uniform rate 2*pi/mu(c).  Both are computed by marching along level
curves with an RK4 arclength integrator that accumulates the flow time.

Velocity convention (package-wide): u = (d psi/dy, -d psi/dx); a channel
shear u = (v(y), 0) has psi'(y) = v(y), and a counterclockwise circular
flow u_theta = v(r) has psi'(r) = -v(r).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domains import PUNCTURED_PLANE, DomainSpec, principal_increment
from .errors import DegenerateGradient, LevelSetNotLoop

GRAD_TOL_SCALE = 1e-8  # |grad psi| floor relative to the domain diameter scale
CLOSURE_TOL = 1e-6


class AnalyticStream:
    """Autonomous stream function given by callables.

    ``psi_fn(x, y)`` is required; ``grad_fn(x, y) -> (dpsi_dx, dpsi_dy)``
    falls back to central differences when omitted.
    """

    def __init__(self, psi_fn: Callable, grad_fn: Callable | None = None,
                 domain: DomainSpec | None = None, fd_step: float = 1e-6):
        self.psi_fn = psi_fn
        self.grad_fn = grad_fn
        self.domain = domain
        self.fd_step = fd_step

    def psi(self, x, y):
        return self.psi_fn(x, y)

    def grad(self, x, y):
        if self.grad_fn is not None:
            return self.grad_fn(x, y)
        h = self.fd_step
        gx = (self.psi_fn(x + h, y) - self.psi_fn(x - h, y)) / (2 * h)
        gy = (self.psi_fn(x, y + h) - self.psi_fn(x, y - h)) / (2 * h)
        return gx, gy

    def velocity(self, x, y):
        gx, gy = self.grad(x, y)
        return gy, -gx


def shear_stream(v_profile: Callable, domain: DomainSpec,
                 n_quad: int = 4097) -> AnalyticStream:
    """Stream of the channel shear u = (v(y), 0)."""
    y0, y1 = domain.y_range
    ys = np.linspace(y0, y1, n_quad)
    vals = np.concatenate([[0.0], np.cumsum(
        0.5 * (v_profile(ys[1:]) + v_profile(ys[:-1])) * np.diff(ys))])

    def psi_fn(x, y):
        return np.interp(y, ys, vals)

    def grad_fn(x, y):
        return np.zeros_like(np.asarray(x, dtype=float)), v_profile(y)

    return AnalyticStream(psi_fn, grad_fn, domain)


def radial_stream(v_profile: Callable, domain: DomainSpec,
                  n_quad: int = 8193) -> AnalyticStream:
    """Stream of the circular flow u = v(r) e_theta (counterclockwise)."""
    r1 = domain.y_range[1]
    rs = np.linspace(0.0, r1 * 1.5, n_quad)
    vals = -np.concatenate([[0.0], np.cumsum(
        0.5 * (v_profile(rs[1:]) + v_profile(rs[:-1])) * np.diff(rs))])

    def psi_fn(x, y):
        return np.interp(np.hypot(x, y), rs, vals)

    def grad_fn(x, y):
        r = np.hypot(x, y)
        r = np.where(r == 0, 1.0, r)
        f = -v_profile(np.hypot(x, y))
        return f * x / r, f * y / r

    return AnalyticStream(psi_fn, grad_fn, domain)


@dataclass
class TracedLevel:
    """A level curve traced at unit speed from its reference point.

    ``partial_time[i]`` is the flow time to reach ``points[i]``; for a
    closed trace the travel time is ``partial_time[-1]`` and
    ``angle_advance`` is the net angular coordinate advance (one signed
    period for a non-contractible loop, ~0 for a contractible one).
    """

    level: float
    points: np.ndarray
    partial_time: np.ndarray
    arclength: np.ndarray
    angle_advance: float

    @property
    def travel_time(self) -> float:
        return float(self.partial_time[-1])


def _grad_floor(domain: DomainSpec) -> float:
    scale = max(domain.x_period, domain.y_extent)
    return GRAD_TOL_SCALE * scale


def _base_displacement(p, q, domain: DomainSpec):
    """Displacement from q to p in base-domain coordinates."""
    if domain.kind == PUNCTURED_PLANE:
        return p - q
    return np.array([principal_increment(p[0] - q[0], domain.x_period),
                     p[1] - q[1]])


def _angle_of(p, domain: DomainSpec) -> float:
    if domain.kind == PUNCTURED_PLANE:
        return float(np.arctan2(p[1], p[0]))
    return float(p[0])


def trace_level_curve(stream, seed, domain: DomainSpec, *, step: float = None,
                      target=None, max_steps: int = 400000) -> TracedLevel:
    """March along the flow direction of psi from ``seed``.

    Terminates on the Poincare section of ``target`` (the seed itself
    when ``target`` is None): after at least 8 steps, when the march
    re-enters the target's neighborhood and crosses the section through
    the target transversal to the local flow, the last partial step is
    bisected so the endpoint lands on the section within tolerance.
    """
    gfloor = _grad_floor(domain)
    seed = np.asarray(seed, dtype=float)
    level = float(stream.psi(seed[0], seed[1]))
    closing = target is None
    target = seed if closing else np.asarray(target, dtype=float)

    def tangent_and_speed(p):
        gx, gy = stream.grad(p[0], p[1])
        g = float(np.hypot(gx, gy))
        if g < gfloor:
            raise DegenerateGradient(
                f"|grad psi| = {g:.3e} < {gfloor:.3e} at ({p[0]:.4g}, {p[1]:.4g})")
        return np.array([gy / g, -gx / g]), g

    t_tgt, _ = tangent_and_speed(target)
    if step is None:
        if domain.kind == PUNCTURED_PLANE:
            step = max(2 * np.pi * np.hypot(*seed), 1e-3) / 512.0
        else:
            step = min(domain.x_period, domain.y_extent) / 512.0

    def section(p):
        return float(_base_displacement(p, target, domain) @ t_tgt)

    def near(p):
        d = _base_displacement(p, target, domain)
        return float(np.hypot(*d)) < 2.0 * step

    def rk4(p, h):
        k1, g1 = tangent_and_speed(p)
        k2, g2 = tangent_and_speed(p + 0.5 * h * k1)
        k3, g3 = tangent_and_speed(p + 0.5 * h * k2)
        k4, g4 = tangent_and_speed(p + h * k3)
        dp = (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        dtau = (h / 6.0) * (1 / g1 + 2 / g2 + 2 / g3 + 1 / g4)
        return dp, dtau

    pts = [seed.copy()]
    taus = [0.0]
    arcs = [0.0]
    p = seed.copy()
    angle = _angle_of(seed, domain)
    min_steps = 8 if closing else 0

    for it in range(max_steps):
        h = step
        dp, dtau = rk4(p, h)
        while np.hypot(*dp) < 0.2 * h and h > 1e-9 * step:
            h *= 0.5  # sharp turn: curvature radius below the step
            dp, dtau = rk4(p, h)
        p_new = p + dp
        s_old, s_new = section(p), section(p_new)
        if it >= min_steps and near(p_new) and s_old < 0.0 <= s_new:
            lo, hi = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                dpm, _ = rk4(p, h * mid)
                if section(p + dpm) < 0.0:
                    lo = mid
                else:
                    hi = mid
            frac = hi
            dpf, dtauf = rk4(p, h * frac)
            p_end = p + dpf
            miss = float(np.hypot(*_base_displacement(p_end, target, domain)))
            if miss <= max(CLOSURE_TOL, 0.5 * step):
                d_ang = _angle_of(p_end, domain) - _angle_of(p, domain)
                if domain.kind == PUNCTURED_PLANE:
                    d_ang = float(principal_increment(d_ang, 2 * np.pi))
                pts.append(p_end)
                taus.append(taus[-1] + dtauf)
                arcs.append(arcs[-1] + h * frac)
                return TracedLevel(level, np.asarray(pts), np.asarray(taus),
                                   np.asarray(arcs), angle + d_ang - _angle_of(seed, domain))
        d_ang = _angle_of(p_new, domain) - _angle_of(p, domain)
        if domain.kind == PUNCTURED_PLANE:
            d_ang = float(principal_increment(d_ang, 2 * np.pi))
        angle += d_ang
        p = p_new
        pts.append(p.copy())
        taus.append(taus[-1] + dtau)
        arcs.append(arcs[-1] + h)
    raise LevelSetNotLoop(
        f"level {level:.6g}: trace did not terminate in {max_steps} steps")


def _scan_line(domain: DomainSpec, n_scan: int):
    """Reference ray used for seeding and as the theta = 0 anchor."""
    lo, hi = domain.y_range
    if domain.kind == PUNCTURED_PLANE:
        lo = max(lo, 1e-4 * domain.far_field_radius)
    pad = 1e-9 * (hi - lo)
    ys = np.linspace(lo + pad, hi - pad, n_scan)
    if domain.kind == PUNCTURED_PLANE:
        return ys, ys, np.zeros_like(ys)  # positive x-axis ray
    return ys, np.zeros_like(ys), ys  # vertical line x = 0


def _seed_scan(stream, level, domain: DomainSpec, n_scan: int = 4096):
    """Crossing points of {psi = level} along the reference ray."""
    params, xs, ys = _scan_line(domain, n_scan)
    vals = np.asarray(stream.psi(xs, ys), dtype=float) - level
    sign = np.sign(vals)
    hits = []
    for j in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
        a, b = params[j], params[j + 1]
        fa = vals[j]

        def _at(t):
            if domain.kind == PUNCTURED_PLANE:
                return float(stream.psi(t, 0.0)) - level
            return float(stream.psi(0.0, t)) - level

        for _ in range(80):
            m = 0.5 * (a + b)
            fm = _at(m)
            if fa * fm <= 0:
                b = m
            else:
                a, fa = m, fm
        hits.append(0.5 * (a + b))
    return hits


def _seed_point(t, domain: DomainSpec):
    if domain.kind == PUNCTURED_PLANE:
        return np.array([t, 0.0])
    return np.array([0.0, t])


def travel_time(stream, level: float, domain: DomainSpec, *,
                step: float = None, return_curve: bool = False):
    """Orbit period of the level set {psi = level}.

    Requires the level set to be a single closed non-contractible curve
    with |grad psi| above tolerance along it.
    """
    hits = _seed_scan(stream, level, domain)
    if not hits:
        raise LevelSetNotLoop(f"level {level:.6g}: no crossing on the scan ray")
    traced = trace_level_curve(stream, _seed_point(hits[0], domain), domain, step=step)
    period = domain.x_period if domain.kind != PUNCTURED_PLANE else 2 * np.pi
    if abs(traced.angle_advance) < 0.5 * period:
        raise LevelSetNotLoop(
            f"level {level:.6g}: closed curve is contractible "
            f"(net angular advance {traced.angle_advance:.3g})")
    for t in hits[1:]:
        q = _seed_point(t, domain)
        d = np.array([float(np.hypot(*_base_displacement(pt, q, domain)))
                      for pt in traced.points])
        if d.min() > 2.5 * float(np.median(np.diff(traced.arclength))):
            raise LevelSetNotLoop(
                f"level {level:.6g}: extra component on the scan ray at {t:.6g}")
    if return_curve:
        return traced.travel_time, traced
    return traced.travel_time


@dataclass
class ActionAngleChart:
    """Travel times and the angular coordinate for sampled levels.

    theta(x) = 2*pi/mu(c) times the flow time from the level's reference
    point x0(c) (its scan-ray crossing) to x, accumulated along the flow,
    so theta advances at rate 2*pi/mu(c) along every orbit.
    """

    stream_levels: np.ndarray
    travel_times: np.ndarray
    reference_points: np.ndarray
    stream: object
    domain: DomainSpec
    step: float | None = None

    def mu(self, level) -> float:
        return float(np.interp(level, self.stream_levels, self.travel_times))

    def theta(self, x, y) -> float:
        """Angle of a base point, in [0, 2*pi)."""
        c = float(self.stream.psi(x, y))
        hits = _seed_scan(self.stream, c, self.domain)
        if not hits:
            raise LevelSetNotLoop(f"level {c:.6g}: no crossing on the scan ray")
        x0 = _seed_point(hits[0], self.domain)
        mu, _ = travel_time(self.stream, c, self.domain, step=self.step,
                            return_curve=True)
        if np.hypot(*_base_displacement(np.array([x, y]), x0, self.domain)) \
                <= CLOSURE_TOL:
            return 0.0
        partial = trace_level_curve(self.stream, x0, self.domain,
                                    step=self.step, target=np.array([x, y]))
        return float(np.mod(2 * np.pi * partial.travel_time / mu, 2 * np.pi))


def build_action_angle_chart(stream, levels, domain: DomainSpec,
                             step: float = None) -> ActionAngleChart:
    """Trace each level; every level must pass the travel-time checks."""
    levels = np.sort(np.asarray(levels, dtype=float))
    mus, refs = [], []
    for c in levels:
        mu, traced = travel_time(stream, float(c), domain, step=step,
                                 return_curve=True)
        mus.append(mu)
        refs.append(traced.points[0])
    return ActionAngleChart(levels, np.asarray(mus), np.asarray(refs),
                            stream, domain, step)
