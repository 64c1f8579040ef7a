"""Twist, winding, and filamentation diagnostics.

Every functional in which the stability-of-twisting inequalities are
stated lives here: winding functionals against highway profiles with
their remainder bounds, the twist defect against an ideal sheared map,
the streamline-migration norm with its sqrt(eps) log(1+t) bound, lifted
diameters, a computable floor for the energy-constrained isotopy time
("age"), level-set crossing counts and the sup-norm wandering gap.

Conventions: diagnostics are pure reductions over immutable ensemble or
grid snapshots; a DiagnosticSeries pairs each value with the inequality
right side it is checked against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .domains import PUNCTURED_PLANE, TORUS, DomainSpec
from .errors import (DegenerateHighways, DomainMismatch, EmptyRadialBand,
                     MisalignedHistories, NonIntegrableProfile)
from .profiles import WeightProfile
from .transport import ParticleEnsemble


# -- series container ---------------------------------------------------------

@dataclass
class DiagnosticSeries:
    """Time-stamped scalar diagnostic with an optional bound overlay."""

    name: str
    times: np.ndarray
    values: np.ndarray
    bound_values: np.ndarray | None = None
    metadata: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.bound_values is not None:
            self.bound_values = np.asarray(self.bound_values, dtype=float)
            if self.bound_values.shape != self.times.shape:
                raise ValueError("bound_values shape mismatch")
        if self.times.shape != self.values.shape:
            raise ValueError("times/values shape mismatch")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def violations(self, rel_margin: float = 0.01, abs_floor: float = 1e-12):
        """Samples where |value| exceeds the bound beyond the margin."""
        if self.bound_values is None:
            return np.zeros(self.times.shape, dtype=bool)
        return np.abs(self.values) > (self.bound_values * (1 + rel_margin)
                                      + abs_floor)

    def to_csv(self, path, rel_margin: float = 0.01):
        viol = self.violations(rel_margin)
        with open(path, "w") as fh:
            fh.write("t,value,bound,violated\n")
            for k in range(self.times.size):
                b = (f"{self.bound_values[k]:.17g}"
                     if self.bound_values is not None else "")
                fh.write(f"{self.times[k]:.17g},{self.values[k]:.17g},"
                         f"{b},{int(viol[k])}\n")
        with open(str(path) + ".meta.json", "w") as fh:
            json.dump({"name": self.name, **self.metadata}, fh, indent=1,
                      sort_keys=True)

    @classmethod
    def from_csv(cls, path):
        times, values, bounds, any_bound = [], [], [], False
        with open(path) as fh:
            next(fh)
            for line in fh:
                t, v, b, _ = line.strip().split(",")
                times.append(float(t))
                values.append(float(v))
                if b:
                    any_bound = True
                    bounds.append(float(b))
                else:
                    bounds.append(np.nan)
        meta = {}
        try:
            with open(str(path) + ".meta.json") as fh:
                meta = json.load(fh)
        except FileNotFoundError:
            pass
        name = meta.pop("name", "series")
        return cls(name, np.asarray(times), np.asarray(values),
                   np.asarray(bounds) if any_bound else None, meta)


def fit_linear(times, values, second_half: bool = True):
    """Least-squares line fit; returns (slope, intercept, r_squared).

    ``second_half`` discards the transient first half of the samples.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if second_half and t.size >= 8:
        k = t.size // 2
        t, v = t[k:], v[k:]
    A = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    resid = v - A @ coef
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


# -- winding functionals ------------------------------------------------------

def _require_channel_like(ensemble: ParticleEnsemble):
    if ensemble.domain.kind == PUNCTURED_PLANE:
        raise DomainMismatch("channel/torus ensemble required")


def _radial_now(ensemble: ParticleEnsemble) -> np.ndarray:
    """Current second coordinate, projected into the fundamental domain."""
    if ensemble.domain.kind == TORUS:
        return ensemble.base_positions()[:, 1]
    return ensemble.cover[:, 1]


def winding_functional(ensemble: ParticleEnsemble, F: WeightProfile) -> float:
    """F-weighted mean horizontal displacement on the cover.

    Quadrature value of integral (angle_lift - x1_label) F(radial) dx;
    grows like t * integral v F under a shear u = (v, 0).
    """
    _require_channel_like(ensemble)
    disp = ensemble.cover[:, 0] - ensemble.labels[:, 0]
    return float(np.sum(ensemble.weights * disp * F(_radial_now(ensemble))))


def ensemble_quadrature(ensemble: ParticleEnsemble, fn) -> float:
    """Weighted sum of fn(label positions) — the matching label quadrature."""
    vals = fn(ensemble.labels[:, 0], ensemble.labels[:, 1])
    return float(np.sum(ensemble.weights * vals))


def remainder_check(times, winding_values, velocity_times, main_integrand,
                    u2_band_l1, F: WeightProfile,
                    metadata: dict | None = None) -> DiagnosticSeries:
    """Winding remainder against its transversal-flux bound.

    R_F(t) = winding(t) - integral_0^t [integral u1 F dx] ds;
    |R_F(t)| <= 2 pi ||F'||_inf integral_0^t ||u2||_L1(band) ds.

    ``main_integrand`` and ``u2_band_l1`` are instantaneous grid
    reductions sampled at ``velocity_times``; both time integrals use
    the trapezoid rule on that grid.
    """
    times = np.asarray(times, dtype=float)
    vt = np.asarray(velocity_times, dtype=float)
    if times.shape != vt.shape or not np.allclose(times, vt, rtol=0, atol=1e-12):
        raise MisalignedHistories("ensemble and velocity time grids differ")
    main = _cumtrapz(np.asarray(main_integrand, dtype=float), vt)
    flux = _cumtrapz(np.asarray(u2_band_l1, dtype=float), vt)
    remainder = np.asarray(winding_values, dtype=float) - main
    bound = 2 * np.pi * F.derivative_bound * flux
    meta = {"derivative_bound": F.derivative_bound,
            "center": F.center, "half_width": F.half_width}
    meta.update(metadata or {})
    return DiagnosticSeries("winding_remainder", times, remainder, bound, meta)


def _cumtrapz(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


# -- twist defects ------------------------------------------------------------

def twist_defect(ensemble: ParticleEnsemble, v_profile) -> float:
    """L2 distance of the lifted map from the ideal sheared map.

    || Phi_1 - x_1 - t v(Phi_2) ||_L2 over the ensemble quadrature.
    """
    _require_channel_like(ensemble)
    resid = (ensemble.cover[:, 0] - ensemble.labels[:, 0]
             - ensemble.time * v_profile(_radial_now(ensemble)))
    return float(np.sqrt(np.sum(ensemble.weights * resid ** 2)))


def shear_defect_bound(eps: float, v_prime_sup: float, times) -> np.ndarray:
    """(sqrt(2 pi ||v'||_inf) + sqrt(eps)/2) sqrt(eps) t."""
    c = np.sqrt(2 * np.pi * v_prime_sup) + 0.5 * np.sqrt(eps)
    return c * np.sqrt(eps) * np.asarray(times, dtype=float)


def check_angular_profile(mu_profile, r_lo: float, r_hi: float,
                          n: int = 256) -> None:
    """Decay checks for a radial angular-velocity profile.

    The mass-weighted defect needs mu and r mu' square integrable for
    the plane measure; a far-field log-log slope shallower than -1 fails.
    """
    rs = np.geomspace(max(r_lo, 1e-3), r_hi, n)
    vals = np.abs(np.asarray(mu_profile(rs), dtype=float))
    tail = slice(int(0.7 * n), None)
    good = vals[tail] > 0
    if good.sum() < 8:
        return
    slope, _, _ = fit_linear(np.log(rs[tail][good]), np.log(vals[tail][good]),
                             second_half=False)
    if slope > -1.0 + 1e-9:
        raise NonIntegrableProfile(
            f"angular profile decays like r^{slope:.2f}; need faster than 1/r")


def angular_twist_defect(ensemble: ParticleEnsemble, mu_profile) -> float:
    """Punctured-plane analog of the twist defect, plane-measure weights."""
    if ensemble.domain.kind != PUNCTURED_PLANE:
        raise DomainMismatch("punctured-plane ensemble required")
    r_now = ensemble.cover[:, 1]
    check_angular_profile(mu_profile, float(np.min(r_now)),
                          max(float(np.max(r_now)),
                              ensemble.domain.far_field_radius))
    resid = (ensemble.cover[:, 0] - ensemble.labels[:, 0]
             - ensemble.time * mu_profile(r_now))
    return float(np.sqrt(np.sum(ensemble.weights * resid ** 2)))


def arnold_diffusion_q(ensemble: ParticleEnsemble, v_profile) -> float:
    """Streamline-migration norm || v(Phi_2(t)) - v(x_2) ||_L2."""
    _require_channel_like(ensemble)
    resid = v_profile(_radial_now(ensemble)) - v_profile(ensemble.labels[:, 1])
    return float(np.sqrt(np.sum(ensemble.weights * resid ** 2)))


def arnold_diffusion_bound(c0: float, eps: float, times) -> np.ndarray:
    return c0 * np.sqrt(eps) * np.log1p(np.asarray(times, dtype=float))


# -- diameters ----------------------------------------------------------------

def lifted_diameter(ensemble_or_cover, n_bins: int = 64,
                    brute_force: bool = False) -> float:
    """Max pairwise distance among lifted positions.

    Fast path: bin by the radial coordinate, keep each bin's angle-lift
    extremes (plus global radial extremes) and scan candidate pairs;
    exact up to the bin width.  ``brute_force`` scans all pairs.
    """
    cover = (ensemble_or_cover.cover
             if isinstance(ensemble_or_cover, ParticleEnsemble)
             else np.asarray(ensemble_or_cover, dtype=float))
    if brute_force:
        d2max = 0.0
        for i in range(cover.shape[0]):
            d = cover[i + 1:] - cover[i]
            if d.size:
                d2max = max(d2max, float(np.max(d[:, 0] ** 2 + d[:, 1] ** 2)))
        return float(np.sqrt(d2max))
    r = cover[:, 1]
    lo, hi = float(np.min(r)), float(np.max(r))
    if hi <= lo:
        return float(np.max(cover[:, 0]) - np.min(cover[:, 0]))
    bins = np.clip(((r - lo) / (hi - lo) * n_bins).astype(int), 0, n_bins - 1)
    cand = [int(np.argmin(r)), int(np.argmax(r))]
    for b in range(n_bins):
        idx = np.nonzero(bins == b)[0]
        if idx.size:
            cand.append(int(idx[np.argmin(cover[idx, 0])]))
            cand.append(int(idx[np.argmax(cover[idx, 0])]))
    pts = cover[sorted(set(cand))]
    d2max = 0.0
    for i in range(pts.shape[0]):
        d = pts[i + 1:] - pts[i]
        if d.size:
            d2max = max(d2max, float(np.max(d[:, 0] ** 2 + d[:, 1] ** 2)))
    return float(np.sqrt(d2max))


# -- age of the configuration -------------------------------------------------

def age_lower_bound(ensemble: ParticleEnsemble, F: WeightProfile,
                    G: WeightProfile, energy_budget: float):
    """Computable floor for the distance from the identity and the age.

    Mass near each highway (weights with current radial inside the
    supports) times the winding-functional gap, minus one period for the
    lift-choice ambiguity, through Cauchy-Schwarz down to the L2 metric:

        dist >= min(m_F, m_G) * max(0, |W_F - W_G| - x_period) / sqrt(|M|)

    Returns (dist_floor, age_floor) with age = dist / sqrt(energy).
    """
    _require_channel_like(ensemble)
    if F.overlaps(G):
        raise DegenerateHighways("profiles overlap; distinct highways required")
    r = _radial_now(ensemble)
    m_f = float(np.sum(ensemble.weights[(r > F.support[0]) & (r < F.support[1])]))
    m_g = float(np.sum(ensemble.weights[(r > G.support[0]) & (r < G.support[1])]))
    gap = abs(winding_functional(ensemble, F) - winding_functional(ensemble, G))
    area = ensemble.total_mass()
    dist = min(m_f, m_g) * max(0.0, gap - ensemble.domain.x_period) / np.sqrt(area)
    if energy_budget <= 0:
        raise ValueError("energy budget must be positive")
    return dist, dist / np.sqrt(energy_budget)


# -- level sets & wandering ---------------------------------------------------

@dataclass
class CrossingCount:
    count: int
    uncertain: bool


def level_set_intersections(field, level: float, x_value: float,
                            y_window=None, tangency_rel: float = 1e-3
                            ) -> CrossingCount:
    """Sign changes of omega(a, .) - level along the vertical line x = a.

    1-D crossing count on the grid column with linear interpolation; the
    count is periodic (wraps) on the torus unless a y window is given.
    Samples inside the tangency band |omega - level| < tangency_rel *
    osc(omega) that do not produce a crossing set the uncertainty flag.
    """
    grid = field.grid
    i = int(np.round((x_value - grid.x[0]) / grid.dx)) % grid.nx
    col = field.values[:, i].astype(float)
    ys = grid.y
    if y_window is not None:
        keep = (ys >= y_window[0]) & (ys <= y_window[1])
        col, ys = col[keep], ys[keep]
        wrap = False
    else:
        wrap = grid.domain.kind == TORUS
    f = col - level
    if wrap:
        f = np.concatenate([f, f[:1]])
    osc = float(np.max(field.values) - np.min(field.values))
    band = tangency_rel * osc
    sign = np.sign(f)
    # treat in-band samples as potentially tangent
    uncertain = bool(np.any(np.abs(f) < band))
    crossings = int(np.sum(sign[:-1] * sign[1:] < 0))
    exact_zeros = int(np.sum(f == 0.0))
    return CrossingCount(crossings + exact_zeros, uncertain)


def wandering_gap(field_ref, field_now) -> float:
    """Sup-norm gap between a reference vorticity and the current one."""
    return float(np.max(np.abs(field_ref.values - field_now.values)))
