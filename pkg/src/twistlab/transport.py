"""Lagrangian transport of particle ensembles and marker curves.

Particles are carried simultaneously on the base domain and its
universal cover: the integrator advances lifted coordinates directly
(velocity is sampled at the projected base point), so winding
accumulates through substep increments and never through endpoint
differences.  Quadrature weights are Lagrangian labels: fixed for all
time, summing to the domain area (or to the seeded band's plane measure
on the punctured plane).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domains import CHANNEL, PUNCTURED_PLANE, TORUS, DomainSpec
from .errors import (CFLViolation, InterpolationOutOfDomain, NodeBudgetExceeded,
                     StencilCollapse, UnderResolved)
from .interp import VelocityProvider

WALL_TOL = 1e-8
MAX_LIFT_STEP = np.pi / 4  # particle CFL: per-step angular displacement cap


@dataclass
class ParticleEnsemble:
    """Quadrature-weighted particles with lifted positions.

    ``labels`` are the initial base positions (angle, radial); ``cover``
    the current lifted positions.  ``grid_shape`` is set by the tensor
    seeding and enables label-space finite differences.
    """

    domain: DomainSpec
    labels: np.ndarray
    cover: np.ndarray
    weights: np.ndarray
    time: float = 0.0
    grid_shape: tuple | None = None

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def base_positions(self) -> np.ndarray:
        return self.domain.project(self.cover)

    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def copy(self) -> "ParticleEnsemble":
        return ParticleEnsemble(self.domain, self.labels.copy(),
                                self.cover.copy(), self.weights,
                                self.time, self.grid_shape)


def seed_midpoint_grid(domain: DomainSpec, n1: int, n2: int,
                       band=None) -> ParticleEnsemble:
    """Deterministic tensor-product midpoint seeding.

    On channel/torus: n1 x n2 cells over the fundamental domain, weight
    dx*dy each.  On the punctured plane: midpoint cells in (theta, r)
    over the radial ``band`` with plane-measure weights r*dr*dtheta.
    """
    L = domain.x_period
    if domain.kind == PUNCTURED_PLANE:
        r_lo, r_hi = band if band is not None else domain.y_range
        dth = L / n1
        dr = (r_hi - r_lo) / n2
        th = (np.arange(n1) + 0.5) * dth
        r = r_lo + (np.arange(n2) + 0.5) * dr
        TH, R = np.meshgrid(th, r, indexing="ij")
        labels = np.column_stack([TH.ravel(), R.ravel()])
        weights = (R * dth * dr).ravel()
    else:
        y0, y1 = domain.y_range
        dx = L / n1
        dy = (y1 - y0) / n2
        xs = (np.arange(n1) + 0.5) * dx
        ys = y0 + (np.arange(n2) + 0.5) * dy
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        labels = np.column_stack([X.ravel(), Y.ravel()])
        weights = np.full(labels.shape[0], dx * dy)
    return ParticleEnsemble(domain, labels, labels.copy(), weights,
                            grid_shape=(n1, n2))


def seed_low_discrepancy(domain: DomainSpec, n: int, seed: int,
                         band=None) -> ParticleEnsemble:
    """Scrambled-Sobol seeding with equal weights (seeded, reproducible)."""
    from scipy.stats import qmc

    sampler = qmc.Sobol(d=2, scramble=True, seed=seed)
    pts = sampler.random(n)
    L = domain.x_period
    if domain.kind == PUNCTURED_PLANE:
        r_lo, r_hi = band if band is not None else domain.y_range
        th = pts[:, 0] * L
        # uniform in area: r = sqrt(r_lo^2 + u (r_hi^2 - r_lo^2))
        r = np.sqrt(r_lo ** 2 + pts[:, 1] * (r_hi ** 2 - r_lo ** 2))
        labels = np.column_stack([th, r])
        area = np.pi * (r_hi ** 2 - r_lo ** 2)
    else:
        y0, y1 = domain.y_range
        labels = np.column_stack([pts[:, 0] * L, y0 + pts[:, 1] * (y1 - y0)])
        area = domain.area
    weights = np.full(n, area / n)
    return ParticleEnsemble(domain, labels, labels.copy(), weights)


def _cover_rhs(domain: DomainSpec, velocity: VelocityProvider,
               cover: np.ndarray, t: float) -> np.ndarray:
    """d(cover)/dt: velocity sampled at the projected base point."""
    if domain.kind == PUNCTURED_PLANE:
        th = cover[:, 0]
        r = cover[:, 1]
        x = r * np.cos(th)
        y = r * np.sin(th)
        u1, u2 = velocity.sample(x, y, t)
        r2 = np.maximum(r * r, 1e-300)
        dth = (x * u2 - y * u1) / r2          # angular velocity u . x_perp / |x|^2
        dr = (x * u1 + y * u2) / np.sqrt(r2)  # radial velocity u . x / |x|
        return np.column_stack([dth, dr])
    base = domain.project(cover)
    u1, u2 = velocity.sample(base[:, 0], base[:, 1], t)
    return np.column_stack([np.asarray(u1, float), np.asarray(u2, float)])


def advect(ensemble: ParticleEnsemble, velocity: VelocityProvider, dt: float,
           n_steps: int = 1) -> ParticleEnsemble:
    """RK4 advance of the lifted positions by n_steps of dt.

    The per-step angular displacement must stay under pi/4 (winding
    resolution); channel particles must stay inside the walls.
    """
    domain = ensemble.domain
    cover = ensemble.cover.copy()
    t = ensemble.time
    for _ in range(n_steps):
        k1 = _cover_rhs(domain, velocity, cover, t)
        k2 = _cover_rhs(domain, velocity, cover + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = _cover_rhs(domain, velocity, cover + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = _cover_rhs(domain, velocity, cover + dt * k3, t + dt)
        delta = (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        max_ang = float(np.max(np.abs(delta[:, 0]))) if delta.size else 0.0
        if max_ang >= MAX_LIFT_STEP:
            raise CFLViolation(
                f"angular displacement {max_ang:.3g} per step exceeds pi/4; "
                f"reduce dt")
        cover = cover + delta
        t += dt
        if domain.kind == CHANNEL:
            y0, y1 = domain.y_range
            over = max(float(np.max(cover[:, 1] - y1, initial=-np.inf)),
                       float(np.max(y0 - cover[:, 1], initial=-np.inf)))
            if over > WALL_TOL * (y1 - y0):
                raise InterpolationOutOfDomain(
                    f"particle crossed the wall by {over:.3e} at t = {t:.6g}")
            np.clip(cover[:, 1], y0, y1, out=cover[:, 1])
    out = ensemble.copy()
    out.cover = cover
    out.time = t
    return out


def equivariance_defect(velocity: VelocityProvider, domain: DomainSpec,
                        probes: np.ndarray, dt: float, n_steps: int) -> float:
    """Max deviation from the periodicity law of the lifted flow.

    Advects each probe x and its translate x + (x_period, 0); lifted
    images must differ by exactly (x_period, 0).
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    shift = np.array([domain.x_period, 0.0])
    ens_a = ParticleEnsemble(domain, probes, probes.copy(),
                             np.ones(len(probes)))
    ens_b = ParticleEnsemble(domain, probes + shift, probes + shift,
                             np.ones(len(probes)))
    a = advect(ens_a, velocity, dt, n_steps)
    b = advect(ens_b, velocity, dt, n_steps)
    return float(np.max(np.abs(b.cover - a.cover - shift)))


def jacobian_probe(centers: np.ndarray, velocity: VelocityProvider,
                   domain: DomainSpec, h: float, dt: float, n_steps: int,
                   record_every: int = 1):
    """Finite-difference flow-map Jacobian determinants along the flow.

    Four-point cross stencils of half-width h around each center; returns
    (times, dets) with dets[k, i] the determinant at center i.  The flow
    is area preserving, so |det - 1| measures integration error.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    n = centers.shape[0]
    offsets = np.array([[h, 0.0], [-h, 0.0], [0.0, h], [0.0, -h]])
    pts = (centers[:, None, :] + offsets[None, :, :]).reshape(-1, 2)
    ens = ParticleEnsemble(domain, pts, pts.copy(), np.ones(len(pts)))
    times = [ens.time]
    dets = [_stencil_dets(ens.cover.reshape(n, 4, 2), h)]
    for k in range(n_steps):
        ens = advect(ens, velocity, dt)
        if (k + 1) % record_every == 0 or k == n_steps - 1:
            times.append(ens.time)
            dets.append(_stencil_dets(ens.cover.reshape(n, 4, 2), h))
    return np.asarray(times), np.asarray(dets)


def _stencil_dets(quads: np.ndarray, h: float) -> np.ndarray:
    dxdir = (quads[:, 0, :] - quads[:, 1, :]) / (2 * h)
    dydir = (quads[:, 2, :] - quads[:, 3, :]) / (2 * h)
    sep = np.linalg.norm(quads[:, 0, :] - quads[:, 1, :], axis=1)
    if np.any(sep < 1e-12):
        raise StencilCollapse("stencil points within 1e-12; increase h")
    return dxdir[:, 0] * dydir[:, 1] - dxdir[:, 1] * dydir[:, 0]


def flow_gradient_l1(ensemble: ParticleEnsemble) -> float:
    """Discrete L1 norm of the label-space gradient of the lifted flow map.

    Requires tensor-grid seeding.  Horizontal label differences use the
    cover (periodicity adds one x_period across the label seam); vertical
    differences wrap only on the torus.  The entrywise norm
    sum_ij |dPhi_j/dx_i| integrates to 2|M| for the identity map.
    """
    if ensemble.grid_shape is None:
        raise ValueError("flow_gradient_l1 needs a tensor-seeded ensemble")
    n1, n2 = ensemble.grid_shape
    domain = ensemble.domain
    cov = ensemble.cover.reshape(n1, n2, 2)
    L = domain.x_period
    h1 = L / n1
    # d/d label_1: periodic wrap with the equivariance shift
    plus = np.roll(cov, -1, axis=0).copy()
    plus[-1, :, 0] += L
    minus = np.roll(cov, 1, axis=0).copy()
    minus[0, :, 0] -= L
    d1 = (plus - minus) / (2 * h1)
    gaps_x = np.abs(np.diff(cov[:, :, 0], axis=0))
    gaps_y = np.abs(np.diff(cov[:, :, 0], axis=1))
    worst = max(float(np.max(gaps_x, initial=0.0)),
                float(np.max(gaps_y, initial=0.0)))
    if worst > 0.5 * L:
        raise UnderResolved(
            f"neighbor angle-lift gap {worst:.3g} exceeds half a period; "
            f"refine the label grid")
    y0, y1 = domain.y_range
    h2 = (y1 - y0) / n2
    if domain.kind == TORUS:
        plus2 = np.roll(cov, -1, axis=1).copy()
        plus2[:, -1, 1] += (y1 - y0)
        minus2 = np.roll(cov, 1, axis=1).copy()
        minus2[:, 0, 1] -= (y1 - y0)
        d2 = (plus2 - minus2) / (2 * h2)
    else:
        d2 = np.empty_like(cov)
        d2[:, 1:-1, :] = (cov[:, 2:, :] - cov[:, :-2, :]) / (2 * h2)
        d2[:, 0, :] = (cov[:, 1, :] - cov[:, 0, :]) / h2
        d2[:, -1, :] = (cov[:, -1, :] - cov[:, -2, :]) / h2
    w = ensemble.weights.reshape(n1, n2)
    total = np.sum(w * (np.abs(d1[:, :, 0]) + np.abs(d1[:, :, 1])
                        + np.abs(d2[:, :, 0]) + np.abs(d2[:, :, 1])))
    return float(total)


@dataclass
class MarkerCurveHistory:
    times: list = field(default_factory=list)
    curves: list = field(default_factory=list)     # lifted polylines
    lengths: list = field(default_factory=list)
    truncated: bool = False

    def record(self, t: float, pts: np.ndarray):
        self.times.append(t)
        self.curves.append(pts.copy())
        seg = np.diff(pts, axis=0)
        self.lengths.append(float(np.sum(np.hypot(seg[:, 0], seg[:, 1]))))


def evolve_marker_curve(points, velocity: VelocityProvider,
                        domain: DomainSpec, dt: float, n_steps: int, *,
                        h_max: float = None, node_budget: int = 200000,
                        record_every: int = 1,
                        closed: bool = False) -> MarkerCurveHistory:
    """Advect a marker polyline, inserting nodes to keep segments short.

    ``points`` are lifted coordinates of a simple curve.  Nodes are
    inserted at segment midpoints whenever a segment exceeds ``h_max``
    (default: twice the initial mean spacing); nodes are never deleted.
    On budget exhaustion the history is returned truncated, not raised.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float)).copy()
    if closed and not np.allclose(pts[0], pts[-1]):
        pts = np.vstack([pts, pts[0]])
    seg = np.diff(pts, axis=0)
    mean_h = float(np.mean(np.hypot(seg[:, 0], seg[:, 1])))
    if h_max is None:
        h_max = 2.0 * mean_h
    hist = MarkerCurveHistory()
    hist.record(0.0, pts)
    t = 0.0
    for k in range(n_steps):
        ens = ParticleEnsemble(domain, pts, pts, np.ones(len(pts)), time=t)
        pts = advect(ens, velocity, dt).cover
        t += dt
        pts = _insert_nodes(pts, h_max)
        if pts.shape[0] > node_budget:
            hist.truncated = True
            hist.record(t, pts)
            return hist
        if (k + 1) % record_every == 0 or k == n_steps - 1:
            hist.record(t, pts)
    return hist


def _insert_nodes(pts: np.ndarray, h_max: float) -> np.ndarray:
    seg = np.diff(pts, axis=0)
    lens = np.hypot(seg[:, 0], seg[:, 1])
    if not np.any(lens > h_max):
        return pts
    out = [pts[0]]
    for i in range(len(lens)):
        a, b = pts[i], pts[i + 1]
        n_sub = int(np.ceil(lens[i] / h_max))
        for j in range(1, n_sub):
            out.append(a + (b - a) * (j / n_sub))
        out.append(b)
    return np.asarray(out)


# -- ensemble dump format -----------------------------------------------------
#
# Rows: `id x1_label x2_label angle_lift radial weight`; '#' comments.

def save_ensemble(path, ensemble: ParticleEnsemble):
    with open(path, "w") as fh:
        fh.write(f"# t = {ensemble.time:.17g}\n")
        fh.write("# id x1_label x2_label angle_lift radial weight\n")
        for i in range(ensemble.n):
            lb = ensemble.labels[i]
            cv = ensemble.cover[i]
            fh.write(f"{i} {lb[0]:.17g} {lb[1]:.17g} "
                     f"{cv[0]:.17g} {cv[1]:.17g} {ensemble.weights[i]:.17g}\n")


def load_ensemble(path, domain: DomainSpec) -> ParticleEnsemble:
    time = 0.0
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("# t ="):
                time = float(line.split("=", 1)[1])
            if not line or line.startswith("#"):
                continue
            rows.append([float(tok) for tok in line.split()])
    arr = np.asarray(rows, dtype=float)
    return ParticleEnsemble(domain, arr[:, 1:3], arr[:, 3:5], arr[:, 5],
                            time=time)
