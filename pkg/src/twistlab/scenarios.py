"""Scenario registry and orchestration.

A scenario couples the solver, transport, and diagnostics into a
deterministic pipeline: same config + seed gives bit-identical
diagnostic values at the stored precision.  Configs are flat text
(`key = value`, '#' comments); unknown keys are errors.  Every run
writes DiagnosticSeries CSVs, dumps at cadence, and a manifest.
"""

from __future__ import annotations

import json
import os
import time as _time
from dataclasses import dataclass

import numpy as np

from . import __version__
from ._core import backend_name
from . import diagnostics as dg
from . import spectral as sp
from . import transport as tr
from .domains import channel, punctured_plane, torus
from .errors import ConfigError, NodeBudgetExceeded, NumericalAbort, TwistlabError
from .interp import VelocityProvider, build_tables
from .profiles import WeightProfile

SCENARIOS = {}


def scenario(name, schema):
    def wrap(fn):
        SCENARIOS[name] = (fn, schema)
        return fn
    return wrap


# -- config -------------------------------------------------------------------

def parse_config_text(text: str) -> dict:
    out = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key] = _parse_value(val)
    return out


def _parse_value(val: str):
    low = val.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(val)
    except ValueError:
        pass
    try:
        return float(val)
    except ValueError:
        pass
    return val


def load_config(path) -> dict:
    with open(path) as fh:
        return parse_config_text(fh.read())


def validate_config(cfg: dict) -> dict:
    if "scenario" not in cfg:
        raise ConfigError("config needs a 'scenario' key")
    name = cfg["scenario"]
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; "
                          f"known: {sorted(SCENARIOS)}")
    _, schema = SCENARIOS[name]
    full = {"scenario": name}
    for key, (typ, default) in schema.items():
        if key in cfg:
            val = cfg[key]
            if typ is float and isinstance(val, int):
                val = float(val)
            if not isinstance(val, typ):
                raise ConfigError(f"key {key!r}: expected {typ.__name__}, "
                                  f"got {val!r}")
            full[key] = val
        elif default is None:
            raise ConfigError(f"missing required key {key!r}")
        else:
            full[key] = default
    unknown = set(cfg) - set(schema) - {"scenario"}
    if unknown:
        raise ConfigError(f"unknown keys for {name}: {sorted(unknown)}")
    if "seed" in schema and full.get("seed", -1) < 0:
        raise ConfigError("seed must be a non-negative integer")
    return full


def write_manifest(outdir, cfg, diagnostics, timing, incomplete=False):
    man = {
        "config": cfg,
        "code_version": __version__,
        "kernel_backend": backend_name(),
        "diagnostics": diagnostics,
        "timing": timing,
        "incomplete": bool(incomplete),
    }
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(man, fh, indent=1, sort_keys=True)
    return man


# -- coupled field + particle runner -----------------------------------------

class RollingVelocity(VelocityProvider):
    """Hermite-in-time window over the most recent velocity tables."""

    def __init__(self, domain):
        self.domain = domain
        self.window = []

    def push(self, tables):
        self.window.append(tables)
        if len(self.window) > 4:
            self.window.pop(0)

    def sample(self, x, y, t):
        w = self.window
        times = [s.time for s in w]
        k = None
        for i in range(len(w) - 1):
            if times[i] - 1e-12 <= t <= times[i + 1] + 1e-12:
                k = i
        if k is None:
            raise ValueError(f"time {t} outside rolling window {times}")
        t0, t1 = times[k], times[k + 1]
        h = t1 - t0
        s = (t - t0) / h
        f0 = np.array(w[k].sample(x, y))
        f1 = np.array(w[k + 1].sample(x, y))
        d0 = ((f1 - np.array(w[k - 1].sample(x, y))) / (t1 - times[k - 1])
              if k > 0 else (f1 - f0) / h)
        d1 = ((np.array(w[k + 2].sample(x, y)) - f0) / (times[k + 2] - t0)
              if k + 2 < len(w) else (f1 - f0) / h)
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        out = h00 * f0 + h01 * f1 + (h10 * d0 + h11 * d1) * h
        return out[0], out[1]


@dataclass
class ConservationGates:
    energy: float = 1e-4
    enstrophy: float = 1e-4
    # relative to max(1, |integral omega_0|); the channel's half-domain
    # integral carries a spectrally small truncation flux per step, so
    # this guards against sign/flux bugs rather than roundoff
    mean: float = 1e-5


class CoupledRun:
    """Advance an active scalar and a particle ensemble on one clock.

    The particle step lags the solver by one dt so the Hermite time
    window always brackets it with centered slopes.  Conservation gates
    abort the run (NumericalAbort) when relative drifts exceed them.
    """

    def __init__(self, omega0: sp.VorticityField, model: sp.AlphaModel,
                 ensemble: tr.ParticleEnsemble | None, dt: float,
                 gates: ConservationGates = ConservationGates()):
        self.solver = sp.ActiveScalarSolver(omega0.grid, model)
        self.model = model
        self.omega = omega0
        self.ensemble = ensemble
        self.dt = dt
        self.gates = gates
        self.rolling = RollingVelocity(omega0.grid.domain)
        self._push_tables()
        self.e0 = sp.energy(omega0, model)
        self.z0 = sp.enstrophy(omega0)
        self.m0 = omega0.integral()
        self.steps = 0
        self.max_drift = {"energy": 0.0, "enstrophy": 0.0, "mean": 0.0}

    def _push_tables(self):
        u1, u2 = self.solver.velocity_grids(self.omega)
        self.rolling.push(build_tables(self.omega.grid, u1, u2,
                                       time=self.omega.time))
        self._last_u = (u1, u2)

    def current_tables(self):
        return self.rolling.window[-1]

    def step(self):
        self.omega = self.solver.step(self.omega, self.dt)
        self._push_tables()
        if self.ensemble is not None and len(self.rolling.window) >= 2:
            # advance particles across the interval ending one dt back,
            # so Hermite slopes are centered whenever possible
            t_target = self.omega.time - self.dt
            if self.ensemble.time < t_target - 1e-12:
                self.ensemble = tr.advect(self.ensemble, self.rolling,
                                          t_target - self.ensemble.time, 1)
        self.steps += 1
        self._check_gates()

    def finish_particles(self):
        """Bring the ensemble up to the field time (end of run)."""
        if self.ensemble is not None and \
                self.ensemble.time < self.omega.time - 1e-12:
            self.ensemble = tr.advect(self.ensemble, self.rolling,
                                      self.omega.time - self.ensemble.time, 1)

    def _check_gates(self):
        e = abs(sp.energy(self.omega, self.model) - self.e0) / max(self.e0, 1e-300)
        z = abs(sp.enstrophy(self.omega) - self.z0) / max(self.z0, 1e-300)
        m = abs(self.omega.integral() - self.m0) / max(1.0, abs(self.m0))
        self.max_drift["energy"] = max(self.max_drift["energy"], e)
        self.max_drift["enstrophy"] = max(self.max_drift["enstrophy"], z)
        self.max_drift["mean"] = max(self.max_drift["mean"], m)
        if e > self.gates.energy:
            raise NumericalAbort(f"energy drift {e:.2e} exceeds gate "
                                 f"{self.gates.energy:.1e} at t={self.omega.time:.4g}")
        if z > self.gates.enstrophy:
            raise NumericalAbort(f"enstrophy drift {z:.2e} exceeds gate "
                                 f"{self.gates.enstrophy:.1e} at t={self.omega.time:.4g}")
        if m > self.gates.mean:
            raise NumericalAbort(f"mean drift {m:.2e} exceeds gate")


# -- channel perturbed shear ---------------------------------------------------

def base_shear_profile(y):
    """v*(y) = cos(pi y): cosine class, so its vorticity is sine class."""
    return np.cos(np.pi * np.asarray(y, dtype=float))


def base_shear_vorticity(grid):
    X, Y = grid.mesh()
    return np.pi * np.sin(np.pi * Y)


V_PRIME_SUP = np.pi  # sup |v*'| for v* = cos(pi y)


def seeded_channel_perturbation(grid, amp, seed, modes=3, shape="random"):
    """Seeded sine-class perturbation with L2 norm = amp.

    ``shape='single'`` uses one x-mode localized at mid-channel (where
    the base shear is stationary), which opens a mixing eye of width
    ~ sqrt(amp): the regime in which the streamline-migration bound
    scales like sqrt(eps) and one constant spans an amplitude sweep.
    """
    rng = np.random.default_rng(seed)
    X, Y = grid.mesh()
    if shape == "single":
        vals = np.cos(X) * np.sin(np.pi * Y)
    else:
        vals = np.zeros_like(X)
        for kx in range(1, modes + 1):
            for m in range(1, modes + 1):
                a, b = rng.standard_normal(2)
                vals += (a * np.cos(kx * X) + b * np.sin(kx * X)) \
                    * np.sin(m * np.pi * Y) / (kx + m) ** 2
    l2 = np.sqrt(np.sum(vals ** 2) * grid.cell_area)
    return amp * vals / l2


_CHANNEL_SCHEMA = {
    "nx": (int, 256), "ny": (int, 128),
    "eps_amp": (float, 1e-2),
    "horizon": (float, 200.0),
    "cadence": (float, 1.0),
    "cfl": (float, 0.4),
    "particles_x": (int, 128), "particles_y": (int, 128),
    "highway_y1": (float, 0.25), "highway_y2": (float, 0.75),
    "highway_halfwidth": (float, 0.05),
    "seed": (int, 1),
    "pert_shape": (str, "random"),
    "energy_gate": (float, 1e-4),
    "enstrophy_gate": (float, 1e-2),
}


@scenario("channel-perturbed-shear", _CHANNEL_SCHEMA)
def run_channel_perturbed_shear(cfg, outdir):
    dom = channel()
    grid = sp.GridSpec(cfg["nx"], cfg["ny"], dom)
    X, Y = grid.mesh()
    w_star = base_shear_vorticity(grid)
    pert = seeded_channel_perturbation(grid, cfg["eps_amp"], cfg["seed"],
                                       shape=cfg["pert_shape"])
    omega0 = sp.VorticityField(grid, w_star + pert)
    # stream of u* = (cos(pi y), 0) under u1 = d psi/dy
    psi_star = sp.StreamField(grid, np.sin(np.pi * Y) / np.pi)

    model = sp.AlphaModel(1.0)
    _, (u1, u2) = sp.invert_biot_savart(omega0, model)
    dt = cfg["cfl"] * sp.cfl_limit(grid, u1, u2)
    n_total = int(np.ceil(cfg["horizon"] / dt))
    every = max(1, int(round(cfg["cadence"] / dt)))

    ens = tr.seed_midpoint_grid(dom, cfg["particles_x"], cfg["particles_y"])
    F = WeightProfile(cfg["highway_y1"], cfg["highway_halfwidth"])
    G = WeightProfile(cfg["highway_y2"], cfg["highway_halfwidth"])
    gates = ConservationGates(cfg["energy_gate"], cfg["enstrophy_gate"])
    run = CoupledRun(omega0, model, ens, dt, gates)
    dist2 = sp.DistanceAccumulator(psi_star, mode="2")
    distA = sp.DistanceAccumulator(psi_star, mode="A",
                                   region=F.support)

    # per-solver-step accumulators for the time integrals
    f_row = F(grid.y)
    g_row = G(grid.y)
    band_f = f_row > 0
    ca = grid.cell_area

    def main_f(u1g):
        return float(np.sum(u1g * f_row[:, None]) * ca)

    def main_g(u1g):
        return float(np.sum(u1g * g_row[:, None]) * ca)

    def flux_f(u2g):
        return float(np.sum(np.abs(u2g[band_f, :])) * ca)

    cum = {"main_f": 0.0, "main_g": 0.0, "flux_f": 0.0}
    prev = {"main_f": main_f(u1), "main_g": main_g(u1), "flux_f": flux_f(u2)}

    rows = []
    series_meta = {"eps_amp": cfg["eps_amp"], "seed": cfg["seed"],
                   "v_prime_sup": V_PRIME_SUP, "nx": cfg["nx"], "ny": cfg["ny"],
                   "dt": dt, "y1": cfg["highway_y1"], "y2": cfg["highway_y2"]}

    def record():
        run.finish_particles()
        e = run.ensemble
        t = run.omega.time
        rows.append({
            "t": t,
            "winding_f": dg.winding_functional(e, F),
            "winding_g": dg.winding_functional(e, G),
            "main_f": cum["main_f"],
            "main_g": cum["main_g"],
            "flux_f": cum["flux_f"],
            "twist_defect": dg.twist_defect(e, base_shear_profile),
            "arnold_q": dg.arnold_diffusion_q(e, base_shear_profile),
            "diameter": dg.lifted_diameter(e),
            "grad_l1": tr.flow_gradient_l1(e),
            "eps2": dist2.value,
            "epsA": distA.value,
            "age_floor": dg.age_lower_bound(e, F, G, 2.0 * run.e0)[0],
        })

    t0 = _time.perf_counter()
    dist2.update(0.0, sp.invert_biot_savart(omega0, model)[0].values)
    distA.update(0.0, sp.invert_biot_savart(omega0, model)[0].values)
    record()
    incomplete = False
    abort_reason = ""
    try:
        for k in range(n_total):
            run.step()
            u1g, u2g = run._last_u
            cur = {"main_f": main_f(u1g), "main_g": main_g(u1g),
                   "flux_f": flux_f(u2g)}
            for key in cum:
                cum[key] += 0.5 * (prev[key] + cur[key]) * dt
            prev = cur
            psi_now = sp.invert_biot_savart(run.omega, model)[0]
            dist2.update(run.omega.time, psi_now.values)
            distA.update(run.omega.time, psi_now.values)
            if (k + 1) % every == 0 or k == n_total - 1:
                record()
    except NumericalAbort as exc:
        incomplete = True
        abort_reason = str(exc)

    wall = _time.perf_counter() - t0
    diag = _channel_series(rows, series_meta, outdir, F)
    diag["max_drift"] = run.max_drift
    diag["eps_measured_2"] = rows[-1]["eps2"]
    diag["eps_measured_A"] = rows[-1]["epsA"]
    if abort_reason:
        diag["abort"] = abort_reason
    tr.save_ensemble(os.path.join(outdir, "ensemble_final.txt"), run.ensemble)
    sp.save_field(os.path.join(outdir, "field_final.twlf"), run.omega)
    return write_manifest(outdir, cfg, diag,
                          {"wall_clock_s": wall, "steps": run.steps},
                          incomplete)


def _channel_series(rows, meta, outdir, F):
    t = np.array([r["t"] for r in rows])
    eps = max(rows[-1]["eps2"], 1e-300)
    keep = t > 0
    if keep.sum() < 2:
        return {"samples": int(keep.sum())}

    def s(name, vals, bounds=None):
        ser = dg.DiagnosticSeries(name, t[keep], np.asarray(vals)[keep],
                                  None if bounds is None
                                  else np.asarray(bounds)[keep], meta)
        ser.to_csv(os.path.join(outdir, f"{name}.csv"))
        return ser

    wind_f = np.array([r["winding_f"] for r in rows])
    wind_g = np.array([r["winding_g"] for r in rows])
    main_f = np.array([r["main_f"] for r in rows])
    flux_f = np.array([r["flux_f"] for r in rows])
    remainder = wind_f - main_f
    rem_bound = 2 * np.pi * F.derivative_bound * flux_f
    defect = np.array([r["twist_defect"] for r in rows])
    defect_bound = dg.shear_defect_bound(eps, meta["v_prime_sup"], t)
    q = np.array([r["arnold_q"] for r in rows])
    diam = np.array([r["diameter"] for r in rows])
    grad = np.array([r["grad_l1"] for r in rows])
    age = np.array([r["age_floor"] for r in rows])

    s("winding_f", wind_f)
    s("winding_g", wind_g)
    rem = s("winding_remainder", remainder, rem_bound)
    dser = s("twist_defect", defect, defect_bound)
    s("arnold_q", q)
    s("lifted_diameter", diam)
    s("flow_gradient_l1", grad)
    s("age_floor", age)
    s("winding_gap", wind_f - wind_g)

    sl_gap, _, r2_gap = dg.fit_linear(t[keep], (wind_f - wind_g)[keep])
    sl_diam, _, r2_diam = dg.fit_linear(t[keep], diam[keep])
    sl_grad, _, r2_grad = dg.fit_linear(t[keep], grad[keep])
    sl_age, _, r2_age = dg.fit_linear(t[keep], age[keep])
    return {
        "remainder_violations": int(rem.violations(0.01).sum()),
        "defect_violations": int(dser.violations(0.01).sum()),
        "winding_gap_slope": sl_gap, "winding_gap_r2": r2_gap,
        "diameter_slope": sl_diam, "diameter_r2": r2_diam,
        "grad_l1_slope": sl_grad, "grad_l1_r2": r2_grad,
        "age_floor_slope": sl_age, "age_floor_r2": r2_age,
        "samples": int(keep.sum()),
    }


# -- torus sine SQG -------------------------------------------------------------

_SQG_SCHEMA = {
    "n": (int, 256),
    "alpha": (float, 0.5),
    "amp": (float, 0.12),
    "horizon": (float, 40.0),
    "cadence": (float, 0.5),
    "cfl": (float, 0.4),
    "seed": (int, 3),
    "level_c1": (float, 0.15), "level_c2": (float, 0.3),
    "invariant_gate": (float, 1e-4),
    "tail_fraction_gate": (float, 1e-5),
}


@scenario("torus-sine-sqg", _SQG_SCHEMA)
def run_torus_sine_sqg(cfg, outdir):
    dom = torus()
    grid = sp.GridSpec(cfg["n"], cfg["n"], dom)
    X, Y = grid.mesh()
    # modulate the base state so its level sets span the half-torus
    # (they then cut across every streamline and shear indefinitely),
    # plus a small seeded generic odd component
    rng = np.random.default_rng(cfg["seed"])
    pert = np.zeros_like(X)
    for kx in range(1, 4):
        for ky in range(1, 4):
            a, b = rng.standard_normal(2)
            pert += (a * np.cos(kx * X) + b * np.sin(kx * X)) \
                * np.sin(ky * Y) / (kx + ky) ** 2
    pert *= 0.1 * cfg["amp"] / np.sqrt(np.sum(pert ** 2) * grid.cell_area)
    w0 = sp.VorticityField(grid,
                           np.sin(Y) * (1.0 + cfg["amp"] * np.cos(X)) + pert,
                           odd_in_y=True)
    w0.values -= w0.values.mean()
    model = sp.AlphaModel(cfg["alpha"])
    inv0 = sp.sqg_invariants(w0, model)
    grad0 = sp.grad_l1(w0)

    _, (u1, u2) = sp.invert_biot_savart(w0, model)
    dt = cfg["cfl"] * sp.cfl_limit(grid, u1, u2)
    n_total = int(np.ceil(cfg["horizon"] / dt))
    every = max(1, int(round(cfg["cadence"] / dt)))
    solver = sp.ActiveScalarSolver(grid, model)
    ops = sp.ops_for(grid)

    rows = []
    res_loss_time = None
    w = w0
    t0 = _time.perf_counter()
    for k in range(n_total):
        w = solver.step(w, dt)
        if (k + 1) % every == 0 or k == n_total - 1:
            inv = sp.sqg_invariants(w, model)
            spec = ops.to_spectral(w.values)
            tail = _tail_fraction(ops, spec)
            cross1 = dg.level_set_intersections(w, cfg["level_c1"], 0.7,
                                                y_window=(0.0, np.pi))
            cross2 = dg.level_set_intersections(w, cfg["level_c2"], 0.7,
                                                y_window=(0.0, np.pi))
            rows.append({
                "t": w.time,
                "grad_l1": sp.grad_l1(w),
                "inv_drift": max(abs(inv[0] - inv0[0]) / inv0[0],
                                 abs(inv[1] - inv0[1]) / inv0[1]),
                "tail": tail,
                "odd_defect": w.odd_defect(),
                "crossings": cross1.count + cross2.count,
            })
            if tail > cfg["tail_fraction_gate"] and res_loss_time is None:
                res_loss_time = w.time
    wall = _time.perf_counter() - t0

    t = np.array([r["t"] for r in rows])
    grad = np.array([r["grad_l1"] for r in rows])
    meta = {"alpha": cfg["alpha"], "amp": cfg["amp"], "seed": cfg["seed"],
            "n": cfg["n"], "dt": dt, "grad0": grad0}
    for name, vals in (("grad_l1", grad),
                       ("invariant_drift",
                        np.array([r["inv_drift"] for r in rows])),
                       ("spectral_tail",
                        np.array([r["tail"] for r in rows])),
                       ("level_crossings",
                        np.array([float(r["crossings"]) for r in rows]))):
        dg.DiagnosticSeries(name, t, vals, None, meta).to_csv(
            os.path.join(outdir, f"{name}.csv"))
    sl, _, r2 = dg.fit_linear(t, grad)
    sp.save_field(os.path.join(outdir, "field_final.twlf"), w,
                  alpha=cfg["alpha"])
    diag = {
        "grad_growth_factor": float(grad[-1] / grad0),
        "grad_slope": sl, "grad_slope_r2": r2,
        "invariant_drift_max": float(max(r["inv_drift"] for r in rows)),
        "odd_defect_max": float(max(r["odd_defect"] for r in rows)),
        "resolution_loss_time": res_loss_time,
        "void": res_loss_time is not None,
    }
    return write_manifest(outdir, cfg, diag,
                          {"wall_clock_s": wall, "steps": n_total})


def _tail_fraction(ops, spec):
    """Enstrophy fraction in the dealiased (top third) band."""
    full = float(np.sum(ops._parseval_w * np.abs(spec) ** 2))
    kept = float(np.sum(ops._parseval_w * np.abs(spec * ops.dealias_mask) ** 2))
    return (full - kept) / max(full, 1e-300)


# -- wandering ------------------------------------------------------------------

_WANDER_SCHEMA = {
    "nx": (int, 256), "ny": (int, 128),
    "shear_amp": (float, 0.2),
    "ridge_width": (float, 0.04),
    "horizon": (float, 30.0),
    "cadence": (float, 0.5),
    "cfl": (float, 0.4),
    "seed": (int, 5),
    "energy_gate": (float, 1e-4),
    "enstrophy_gate": (float, 5e-2),
    "marker_nodes": (int, 256),
    "node_budget": (int, 200000),
}


def _ridge_curve(a, b, n, x_c=np.pi, y_c=0.5, p=0.35):
    """Smooth rounded-rectangle loop inside the open channel."""
    s = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    cs, sn = np.cos(s), np.sin(s)
    x = x_c + a * np.sign(cs) * np.abs(cs) ** p
    y = y_c + b * np.sign(sn) * np.abs(sn) ** p
    return np.column_stack([x, y])


@scenario("wandering", _WANDER_SCHEMA)
def run_wandering(cfg, outdir):
    from scipy.spatial import cKDTree

    dom = channel()
    grid = sp.GridSpec(cfg["nx"], cfg["ny"], dom)
    X, Y = grid.mesh()
    w_base = cfg["shear_amp"] * np.pi * np.sin(np.pi * Y)

    curves = [_ridge_curve(np.pi - 0.55, 0.38, 4096),
              _ridge_curve(np.pi - 0.9, 0.30, 4096)]
    vals = np.zeros_like(X)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    for height, curve in zip((1.0, 2.0), curves):
        d, _ = cKDTree(curve).query(pts, k=1)
        vals += height * np.exp(-(d.reshape(X.shape) / cfg["ridge_width"]) ** 2)
    omega0 = sp.VorticityField(grid, w_base + vals)
    model = sp.AlphaModel(1.0)
    _, (u1, u2) = sp.invert_biot_savart(omega0, model)
    dt = cfg["cfl"] * sp.cfl_limit(grid, u1, u2)
    n_total = int(np.ceil(cfg["horizon"] / dt))
    every = max(1, int(round(cfg["cadence"] / dt)))

    gates = ConservationGates(cfg["energy_gate"], cfg["enstrophy_gate"])
    run = CoupledRun(omega0, model, None, dt, gates)

    stride = max(1, 4096 // cfg["marker_nodes"])
    trackers = [MarkerTracker(np.vstack([c[::stride], c[:1]]), dom,
                              node_budget=cfg["node_budget"])
                for c in curves]

    rows = [{"t": 0.0, "gap": 0.0,
             "len1": trackers[0].length(), "len2": trackers[1].length()}]
    t0 = _time.perf_counter()
    incomplete = False
    abort_reason = ""
    try:
        for k in range(n_total):
            run.step()
            if len(run.rolling.window) >= 2:
                t_target = run.omega.time - run.dt
                for m in trackers:
                    m.advance_to(t_target, run.rolling)
            if (k + 1) % every == 0 or k == n_total - 1:
                rows.append({
                    "t": run.omega.time,
                    "gap": dg.wandering_gap(omega0, run.omega),
                    "len1": trackers[0].length(),
                    "len2": trackers[1].length(),
                })
    except NumericalAbort as exc:
        incomplete = True
        abort_reason = str(exc)
    wall = _time.perf_counter() - t0

    t = np.array([r["t"] for r in rows])
    gap = np.array([r["gap"] for r in rows])
    len1 = np.array([r["len1"] for r in rows])
    len2 = np.array([r["len2"] for r in rows])
    meta = {"seed": cfg["seed"], "dt": dt, "shear_amp": cfg["shear_amp"]}
    for name, v in (("wandering_gap", gap), ("level_length_1", len1),
                    ("level_length_2", len2)):
        dg.DiagnosticSeries(name, t[1:], v[1:], None, meta).to_csv(
            os.path.join(outdir, f"{name}.csv"))
    above = gap > 0.25
    onset = float(t[np.argmax(above)]) if above.any() else None
    sustained = bool(above.any() and np.all(above[np.argmax(above):]))
    sl1, _, r21 = dg.fit_linear(t, len1)
    sl2, _, r22 = dg.fit_linear(t, len2)
    diag = {
        "gap_onset_time": onset,
        "gap_sustained": sustained,
        "gap_final": float(gap[-1]),
        "length_slope_1": sl1, "length_r2_1": r21,
        "length_slope_2": sl2, "length_r2_2": r22,
        "max_drift": run.max_drift,
    }
    if abort_reason:
        diag["abort"] = abort_reason
    sp.save_field(os.path.join(outdir, "field_final.twlf"), run.omega)
    return write_manifest(outdir, cfg, diag,
                          {"wall_clock_s": wall, "steps": run.steps},
                          incomplete)


class MarkerTracker:
    """Marker polyline advected on the run clock with node insertion."""

    def __init__(self, pts, domain, node_budget: int = 200000,
                 h_max: float = None):
        self.pts = np.asarray(pts, dtype=float).copy()
        self.domain = domain
        self.time = 0.0
        seg = np.diff(self.pts, axis=0)
        mean_h = float(np.mean(np.hypot(seg[:, 0], seg[:, 1])))
        self.h_max = 2.0 * mean_h if h_max is None else h_max
        self.node_budget = node_budget
        self.truncated = False

    def advance_to(self, t_target, velocity):
        if self.truncated or t_target <= self.time + 1e-12:
            return
        ens = tr.ParticleEnsemble(self.domain, self.pts, self.pts.copy(),
                                  np.ones(len(self.pts)), time=self.time)
        out = tr.advect(ens, velocity, t_target - self.time, 1)
        pts = tr._insert_nodes(out.cover, self.h_max)
        if pts.shape[0] > self.node_budget:
            self.truncated = True
        else:
            self.pts = pts
        self.time = t_target

    def length(self) -> float:
        seg = np.diff(self.pts, axis=0)
        return float(np.sum(np.hypot(seg[:, 0], seg[:, 1])))


# -- punctured-plane near-circular patch ---------------------------------------

_RANKINE_SCHEMA = {
    "amp": (float, 0.05),
    "n_nodes": (int, 512),
    "horizon": (float, 50.0),
    "cadence": (float, 1.0),
    "particles_th": (int, 24), "particles_r": (int, 24),
    "band_lo": (float, 0.3), "band_hi": (float, 3.0),
    "particle_dt_factor": (int, 5),
    "seed": (int, 7),
}


def rankine_angular_velocity(r):
    """Angular velocity of the unit disc patch: 1/2 inside, 1/(2 r^2) out."""
    r = np.asarray(r, dtype=float)
    return np.where(r < 1.0, 0.5, 0.5 / np.maximum(r, 1e-12) ** 2)


class PatchFieldVelocity(VelocityProvider):
    """Velocity provider backed by the instantaneous contour kernel."""

    def __init__(self, state, domain):
        self.state = state
        self.domain = domain

    def sample(self, x, y, t):
        from .patch_dynamics import induced_velocity

        return induced_velocity(self.state, np.asarray(x, float),
                                np.asarray(y, float))


@scenario("punctured-rankine", _RANKINE_SCHEMA)
def run_punctured_rankine(cfg, outdir):
    from .patch_dynamics import PatchEvolver
    from .patch_geometry import Contour, PatchState

    dom = punctured_plane(far_field_radius=cfg["band_hi"] * 4)
    th = np.linspace(0.0, 2 * np.pi, cfg["n_nodes"] + 1)[:-1]
    r_b = 1.0 + cfg["amp"] * np.cos(4 * th)
    verts = np.column_stack([r_b * np.cos(th), r_b * np.sin(th)])
    state = PatchState([Contour(verts, +1, 0)], fourfold=False)
    ev = PatchEvolver(state, check_every=200)
    ens = tr.seed_midpoint_grid(dom, cfg["particles_th"], cfg["particles_r"],
                                band=(cfg["band_lo"], cfg["band_hi"]))
    provider = PatchFieldVelocity(state, dom)

    rows = []
    mu = rankine_angular_velocity

    def norms():
        # migration norms of the instantaneous field on the band quadrature
        labels = ens.labels
        x = labels[:, 1] * np.cos(labels[:, 0])
        y = labels[:, 1] * np.sin(labels[:, 0])
        ux, uy = provider.sample(x, y, 0.0)
        r2 = x * x + y * y
        u_r = (x * ux + y * uy) / np.sqrt(r2)
        u_th = (x * uy - y * ux) / r2
        w = ens.weights
        n1 = np.sqrt(np.sum(w * (u_r / np.sqrt(r2)) ** 2))
        n2 = np.sqrt(np.sum(w * (u_th - mu(np.sqrt(r2))) ** 2))
        return float(n1), float(n2)

    t0 = _time.perf_counter()
    next_out = cfg["cadence"]
    sup_norm = 0.0
    rows.append({"t": 0.0, "defect": 0.0, "norm_sum": sum(norms())})
    k = 0
    while state.time < cfg["horizon"] - 1e-9:
        rep = ev.step()
        k += 1
        if k % cfg["particle_dt_factor"] == 0:
            ens_dt = state.time - ens.time
            globals()
            ens_new = tr.advect(ens, provider, ens_dt, 1)
            ens.cover = ens_new.cover
            ens.time = ens_new.time
        if state.time >= next_out - 1e-9:
            n1, n2 = norms()
            sup_norm = max(sup_norm, n1 + n2)
            rows.append({"t": ens.time,
                         "defect": dg.angular_twist_defect(ens, mu),
                         "norm_sum": n1 + n2})
            next_out += cfg["cadence"]
    wall = _time.perf_counter() - t0
    t = np.array([r["t"] for r in rows])
    defect = np.array([r["defect"] for r in rows])
    meta = {"amp": cfg["amp"], "n_nodes": cfg["n_nodes"], "seed": cfg["seed"]}
    dg.DiagnosticSeries("angular_twist_defect", t[1:], defect[1:], None,
                        meta).to_csv(os.path.join(outdir,
                                                  "angular_twist_defect.csv"))
    # fitted constant of defect <= C t sqrt(norm sum)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = defect[1:] / (t[1:] * np.sqrt(sup_norm))
    diag = {
        "defect_final": float(defect[-1]),
        "norm_sum_sup": sup_norm,
        "fitted_c": float(np.nanmax(ratio)) if ratio.size else 0.0,
        "area_drift": abs(state.total_area() - np.pi * (1 + cfg["amp"] ** 2 / 2)
                          * _inscribed(cfg["n_nodes"])) / np.pi,
    }
    return write_manifest(outdir, cfg, diag,
                          {"wall_clock_s": wall, "steps": k})


def _inscribed(n):
    return float(n * np.sin(2 * np.pi / n) / (2 * np.pi))


# -- holed patch perimeter growth ----------------------------------------------

_PATCH_SCHEMA = {
    "big_n": (float, 10.0),
    "delta": (float, 1e-2),
    "node_spacing": (float, 0.04),
    "horizon": (float, 50.0),
    "cadence": (float, 1.0),
    "cfl": (float, 0.25),
    "node_budget": (int, 200000),
    "r_floor": (float, 0.5),
    "seed": (int, 0),
    "resume": (bool, False),
}


@scenario("patch-perimeter", _PATCH_SCHEMA)
def run_patch_perimeter(cfg, outdir):
    from .patch_dynamics import (PatchEvolver, disc_stability_bound,
                                 symmetric_difference_area, winding_extremes)
    from .patch_geometry import (Contour, PatchRecipe, PatchState,
                                 build_initial_patch, save_patch)

    rec = PatchRecipe(big_n=cfg["big_n"], delta=cfg["delta"],
                      node_spacing=cfg["node_spacing"],
                      node_budget=cfg["node_budget"])
    ckpt = os.path.join(outdir, "checkpoint.npz")
    rows = []
    if cfg["resume"] and os.path.exists(ckpt):
        state, rows = _load_patch_checkpoint(ckpt)
    else:
        state = build_initial_patch(rec)
    band = rec.ring_outer_radius - rec.hole_radius
    ev = PatchEvolver(state, target_spacing=cfg["node_spacing"],
                      cfl=cfg["cfl"], node_budget=cfg["node_budget"],
                      sag_max=band / 4, check_every=25)
    bound0 = disc_stability_bound(state) if not rows else rows[0]["sive_bound"]
    area0 = state.total_area() if not rows else rows[0]["area0"]

    def snapshot():
        sd, method, _ = symmetric_difference_area(state)
        we = winding_extremes(state, cfg["r_floor"], cfg["big_n"] / 2)
        rows.append({
            "t": state.time,
            "perimeter": state.perimeter(),
            "area": state.total_area(),
            "area0": area0,
            "sym_diff": sd,
            "sive_bound": bound0,
            "winding_gap": we.gap,
            "max_lift": we.max_lift,
            "min_lift": we.min_lift,
            "nodes": state.node_count(),
            "symmetry_defect": state.symmetry_defect(),
        })

    if not rows:
        snapshot()
    t0 = _time.perf_counter()
    incomplete = False
    note = ""
    next_out = rows[-1]["t"] + cfg["cadence"]
    try:
        while state.time < cfg["horizon"] - 1e-9:
            ev.step()
            if state.time >= next_out - 1e-9:
                snapshot()
                _save_patch_checkpoint(ckpt, state, rows)
                next_out += cfg["cadence"]
    except (NodeBudgetExceeded, TwistlabError) as exc:
        incomplete = True
        note = f"{type(exc).__name__}: {exc}"
    wall = _time.perf_counter() - t0
    if rows[-1]["t"] < state.time - 1e-9:
        snapshot()
    _save_patch_checkpoint(ckpt, state, rows)

    t = np.array([r["t"] for r in rows])
    perim = np.array([r["perimeter"] for r in rows])
    gap = np.array([r["winding_gap"] for r in rows])
    sd = np.array([r["sym_diff"] for r in rows])
    area = np.array([r["area"] for r in rows])
    meta = {"big_n": cfg["big_n"], "delta": cfg["delta"],
            "node_spacing": cfg["node_spacing"], "seed": cfg["seed"]}
    keep = slice(1, None) if t.size > 1 and t[0] == 0 else slice(None)
    dg.DiagnosticSeries("perimeter", t[keep], perim[keep], None, meta).to_csv(
        os.path.join(outdir, "perimeter.csv"))
    dg.DiagnosticSeries("winding_gap", t[keep], gap[keep], None, meta).to_csv(
        os.path.join(outdir, "winding_gap.csv"))
    dg.DiagnosticSeries("sym_diff", t[keep], sd[keep],
                        np.full(t[keep].shape, bound0), meta).to_csv(
        os.path.join(outdir, "sym_diff.csv"))
    save_patch(os.path.join(outdir, "contours_final.txt"), state)

    sl_p, _, r2_p = dg.fit_linear(t, perim)
    sl_g, _, r2_g = dg.fit_linear(t, gap)
    diag = {
        "perimeter_slope": sl_p, "perimeter_r2": r2_p,
        "winding_gap_slope": sl_g, "winding_gap_r2": r2_g,
        "area_drift_rel": float(np.max(np.abs(area - area0)) / area0),
        "sive_violations": int(np.sum(sd > bound0 * 1.01)),
        "sive_bound": float(bound0),
        "symmetry_defect_max": float(max(r["symmetry_defect"] for r in rows)),
        "final_time": float(t[-1]),
        "note": note,
    }
    return write_manifest(outdir, cfg, diag,
                          {"wall_clock_s": wall, "steps": ev.steps_taken},
                          incomplete)


def _save_patch_checkpoint(path, state, rows):
    from .patch_geometry import PatchState

    arrays = {}
    meta = []
    for i, c in enumerate(state.contours):
        arrays[f"v{i}"] = c.vertices
        arrays[f"l{i}"] = c.lift
        meta.append((c.orientation, c.component_id))
    np.savez(path, time=state.time, meta=np.asarray(meta),
             fourfold=state.fourfold, n_contours=len(state.contours),
             rows=json.dumps(rows), **arrays)


def _load_patch_checkpoint(path):
    from .patch_geometry import Contour, PatchState

    dat = np.load(path, allow_pickle=False)
    n = int(dat["n_contours"])
    meta = dat["meta"]
    contours = [Contour(dat[f"v{i}"], int(meta[i][0]), int(meta[i][1]),
                        dat[f"l{i}"]) for i in range(n)]
    state = PatchState(contours, time=float(dat["time"]),
                       fourfold=bool(dat["fourfold"]))
    rows = json.loads(str(dat["rows"]))
    return state, rows


# -- spiral length bound campaign ------------------------------------------------

_GEOM_SCHEMA = {
    "n_curves": (int, 10000),
    "seed": (int, 11),
    "refine_step": (float, 2 * np.pi / 512),
}


@scenario("geom-lemma-campaign", _GEOM_SCHEMA)
def run_geom_campaign(cfg, outdir):
    from .patch_dynamics import sample_spiral_curves, spiral_length_floor

    t0 = _time.perf_counter()
    curves = sample_spiral_curves(cfg["n_curves"], cfg["seed"])
    ratios = []
    violations = 0
    for c in curves:
        res = spiral_length_floor(c, refine_step=cfg["refine_step"])
        if not res.satisfied:
            violations += 1
        ratios.append(res.length / max(res.bound, 1e-300))
    ratios = np.asarray(ratios)

    # near-extremal: drop to small radius, sweep one turn, climb back
    delta = 1e-3
    down = np.column_stack([np.full(40, 0.0), np.linspace(1.0, delta, 40)])
    sweep = np.column_stack([np.linspace(0.0, 2 * np.pi, 200),
                             np.full(200, delta)])
    up = np.column_stack([np.full(40, 2 * np.pi),
                          np.linspace(delta, 1.0 + 1e-6, 40)])
    extremal = np.vstack([down, sweep[1:], up[1:]])
    # jitter phi monotonically so the staircase is a genuine graph
    extremal[:40, 0] = np.linspace(0.0, 1e-4, 40)
    extremal[-40:, 0] = np.linspace(2 * np.pi - 1e-4, 2 * np.pi, 40)
    res_ext = spiral_length_floor(extremal, refine_step=cfg["refine_step"])
    wall = _time.perf_counter() - t0

    idx = np.arange(1, len(ratios) + 1, dtype=float)
    dg.DiagnosticSeries("length_to_bound_ratio", idx, ratios, None,
                        {"seed": cfg["seed"]}).to_csv(
        os.path.join(outdir, "length_to_bound_ratio.csv"))
    diag = {
        "violations": int(violations),
        "min_ratio": float(np.min(ratios)),
        "near_extremal_ratio": float(res_ext.length / res_ext.bound),
        "n_curves": len(curves),
    }
    return write_manifest(outdir, cfg, diag, {"wall_clock_s": wall,
                                              "steps": len(curves)})


# -- runner -------------------------------------------------------------------

def run_scenario(cfg: dict, outdir) -> dict:
    cfg = validate_config(cfg)
    os.makedirs(outdir, exist_ok=True)
    fn, _ = SCENARIOS[cfg["scenario"]]
    return fn(cfg, outdir)
