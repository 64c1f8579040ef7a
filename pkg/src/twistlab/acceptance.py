"""Acceptance criteria: every stability inequality at desk scale.

Each criterion runs a pipeline and checks its inequalities at the pinned
tolerances below.  ``quick`` reduces resolutions and horizons only;
tolerances and inequality forms never change between suites.  A
criterion can come back ``void`` (not failed) only where a run is
declared unresolved first (the alpha = 1/2 growth run), matching the
stated contract.
"""

from __future__ import annotations

import filecmp
import glob
import os
import shutil
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import diagnostics as dg
from . import spectral as sp
from . import transport as tr
from .domains import channel, torus
from .interp import SteadyShear
from .profiles import WeightProfile
from .scenarios import SCENARIOS, run_scenario, V_PRIME_SUP

# pinned tolerances (criterion id -> value); never relaxed by the suite
TOL = {
    "steady_linf": 1e-8,
    "steady_drift": 1e-6,
    "exact_defect": 1e-8,
    "exact_winding": 1e-6,
    "remainder_margin": 0.01,
    "defect_margin": 0.01,
    "q_start_time": 10.0,
    "gap_slope_rel": 0.20,
    "slope_r2": 0.95,
    "sqg_growth_factor": 2.0,
    "sqg_invariant_drift": 1e-4,
    "wander_gap": 0.25,
    "rankine_vel": 1e-4,
    "rankine_radius_drift": 1e-6,
    "patch_r2": 0.9,
    "patch_area_drift": 1e-3,
    "geom_near_extremal": 1.05,
}


@dataclass
class CriterionResult:
    cid: str
    name: str
    passed: bool
    margin: str
    void: bool = False
    details: dict = dc_field(default_factory=dict)

    def line(self) -> str:
        status = "VOID" if self.void else ("PASS" if self.passed else "FAIL")
        return f"[{status}] {self.cid}: {self.name} — {self.margin}"


PARAMS = {
    "quick": {
        "c1": {"n": 128, "steps": 1500},
        "c2": {"particles": (128, 80), "horizon": 100.0, "dt": 0.05},
        "c34_6": {"nx": 128, "ny": 64, "horizon": 60.0,
                  "particles": (96, 96), "cadence": 1.0},
        "c5": {"nx": 128, "ny": 64, "horizon": 240.0,
               "particles": (96, 96), "cadence": 2.0},
        "c7": {"nx": 128, "ny": 64, "horizon": 12.0, "cadence": 0.5},
        "c8": {"n": 128, "horizon": 30.0, "cadence": 0.5},
        "c9": {"nodes": 2048, "steps": 100},
        "c10": {"big_n": 6.0, "delta": 2e-2, "node_spacing": 0.04,
                "horizon": 6.0, "cadence": 0.5},
        "c11": {"n_curves": 1500},
        "c12": {"horizon": 3.0},
    },
    "full": {
        "c1": {"n": 128, "steps": 10000},
        "c2": {"particles": (400, 250), "horizon": 100.0, "dt": 0.05},
        "c34_6": {"nx": 256, "ny": 128, "horizon": 200.0,
                  "particles": (128, 128), "cadence": 1.0},
        "c5": {"nx": 128, "ny": 64, "horizon": 1000.0,
               "particles": (128, 128), "cadence": 2.0},
        "c7": {"nx": 256, "ny": 128, "horizon": 30.0, "cadence": 0.5},
        "c8": {"n": 512, "horizon": 40.0, "cadence": 0.5},
        "c9": {"nodes": 2048, "steps": 100},
        "c10": {"big_n": 10.0, "delta": 1e-2, "node_spacing": 0.03,
                "horizon": 50.0, "cadence": 1.0},
        "c11": {"n_curves": 10000},
        "c12": {"horizon": 3.0},
    },
}


# -- c1: steady-state fidelity --------------------------------------------------

def criterion_1(p, outdir):
    grid = sp.GridSpec(p["n"], p["n"], torus())
    X, Y = grid.mesh()
    w0 = sp.VorticityField(grid, np.sin(Y))
    solver = sp.ActiveScalarSolver(grid, sp.AlphaModel(1.0))
    dt = 0.4 * 0.5 * grid.dx  # CFL number 0.4 with max|u| = 1
    e0, z0 = sp.energy(w0), sp.enstrophy(w0)
    w = solver.run(w0, dt, p["steps"])
    linf = float(np.max(np.abs(w.values - w0.values)))
    de = abs(sp.energy(w) - e0) / e0
    dz = abs(sp.enstrophy(w) - z0) / z0
    ok = linf < TOL["steady_linf"] and de < TOL["steady_drift"] \
        and dz < TOL["steady_drift"]
    return CriterionResult(
        "c1", "steady state sin(y) fidelity", ok,
        f"Linf drift {linf:.2e} (tol {TOL['steady_linf']:.0e}), "
        f"energy {de:.2e}, enstrophy {dz:.2e} (tol {TOL['steady_drift']:.0e})",
        details={"linf": linf, "energy_drift": de, "enstrophy_drift": dz,
                 "steps": p["steps"]})


# -- c2: exact-shear twist identities --------------------------------------------

def criterion_2(p, outdir):
    dom = channel()
    n1, n2 = p["particles"]
    ens = tr.seed_midpoint_grid(dom, n1, n2)
    F = WeightProfile(0.25, 0.05)
    v = SteadyShear(lambda y: np.asarray(y, float), dom)
    n_steps = int(round(p["horizon"] / p["dt"]))
    worst_defect = 0.0
    worst_wind = 0.0
    cur = ens
    chunk = max(1, n_steps // 20)
    done = 0
    while done < n_steps:
        k = min(chunk, n_steps - done)
        cur = tr.advect(cur, v, p["dt"], k)
        done += k
        worst_defect = max(worst_defect,
                           dg.twist_defect(cur, lambda y: y))
        ref = cur.time * dg.ensemble_quadrature(cur, lambda x, y: y * F(y))
        worst_wind = max(worst_wind,
                         abs(dg.winding_functional(cur, F) - ref))
    ok = worst_defect < TOL["exact_defect"] and worst_wind < TOL["exact_winding"]
    return CriterionResult(
        "c2", "exact-shear twist identities", ok,
        f"defect max {worst_defect:.2e} (tol {TOL['exact_defect']:.0e}), "
        f"winding mismatch {worst_wind:.2e} (tol {TOL['exact_winding']:.0e})",
        details={"particles": n1 * n2, "defect": worst_defect,
                 "winding_mismatch": worst_wind})


# -- c3/c4/c6: perturbed-shear inequality battery --------------------------------

def _channel_run(p, outdir, eps_amp, seed=1, shape="random", tag_extra=""):
    cfg = {
        "scenario": "channel-perturbed-shear",
        "nx": p["nx"], "ny": p["ny"],
        "eps_amp": eps_amp,
        "horizon": p["horizon"],
        "cadence": p["cadence"],
        "particles_x": p["particles"][0], "particles_y": p["particles"][1],
        "seed": seed,
        "pert_shape": shape,
    }
    tag = f"eps{eps_amp:g}".replace(".", "p") + tag_extra
    out = os.path.join(outdir, f"channel_{tag}")
    os.makedirs(out, exist_ok=True)
    return run_scenario(cfg, out), out


_channel_cache = {}


def _channel_runs(p, outdir):
    key = (id(p), outdir)
    if key not in _channel_cache:
        _channel_cache[key] = [_channel_run(p, outdir, eps) for eps in
                               (1e-2, 4e-2)]
    return _channel_cache[key]


def criterion_3(p, outdir):
    runs = _channel_runs(p, outdir)
    viol = [man["diagnostics"]["remainder_violations"] for man, _ in runs]
    ok = all(v == 0 for v in viol) and not any(m.get("incomplete")
                                               for m, _ in runs)
    return CriterionResult(
        "c3", "winding remainder bound (two eps, two highways)",
        ok, f"violations {viol} (margin {TOL['remainder_margin']:.0%})",
        details={"violations": viol})


def criterion_4(p, outdir):
    runs = _channel_runs(p, outdir)
    viol = [man["diagnostics"]["defect_violations"] for man, _ in runs]
    eps = [man["diagnostics"]["eps_measured_2"] for man, _ in runs]
    ok = all(v == 0 for v in viol)
    return CriterionResult(
        "c4", "twist defect explicit-constant bound", ok,
        f"violations {viol} at measured eps {[f'{e:.3g}' for e in eps]}",
        details={"violations": viol, "eps_measured": eps})


def criterion_6(p, outdir):
    runs = _channel_runs(p, outdir)
    man = runs[0][0]["diagnostics"]
    dv = float(np.cos(np.pi * 0.25) - np.cos(np.pi * 0.75))  # v*(y1)-v*(y2)
    # the winding functional integrates over the full channel, so the
    # per-unit-mass separation rate is its slope divided by the period
    gap_rate = man["winding_gap_slope"] / (2 * np.pi)
    slope_ok = abs(gap_rate - dv) < TOL["gap_slope_rel"] * dv
    growth_ok = (man["diameter_slope"] > 0
                 and man["diameter_r2"] > TOL["slope_r2"]
                 and man["grad_l1_slope"] > 0
                 and man["grad_l1_r2"] > TOL["slope_r2"])
    ok = slope_ok and growth_ok
    return CriterionResult(
        "c6", "linear twisting growth (gap slope, diameter, gradient)", ok,
        f"gap rate {gap_rate:.3f} vs {dv:.3f} "
        f"(tol {TOL['gap_slope_rel']:.0%}); diameter slope "
        f"{man['diameter_slope']:.3f} (R2 {man['diameter_r2']:.3f}), "
        f"grad slope {man['grad_l1_slope']:.3f} (R2 {man['grad_l1_r2']:.3f})",
        details=man)


def criterion_5(p, outdir):
    # same seed and shape: a pure amplitude sweep of one perturbation,
    # in the mixing-eye regime where the sqrt(eps) scaling is realized
    man_a, out_a = _channel_run(p, outdir, 1e-2, seed=21, shape="single",
                                tag_extra="_mig")
    man_b, out_b = _channel_run(p, outdir, 4e-2, seed=21, shape="single",
                                tag_extra="_mig")
    res = []
    for man, out in ((man_a, out_a), (man_b, out_b)):
        ser = dg.DiagnosticSeries.from_csv(os.path.join(out, "arnold_q.csv"))
        eps = man["diagnostics"]["eps_measured_2"]
        keep = ser.times > TOL["q_start_time"]
        ratio = ser.values[keep] / (np.sqrt(eps) * np.log1p(ser.times[keep]))
        res.append((ratio, eps))
    c0 = float(np.max(res[0][0]))
    viol = int(np.sum(res[1][0] > c0 * 1.01))
    ok = viol == 0
    return CriterionResult(
        "c5", "streamline migration log bound with one constant", ok,
        f"C0 {c0:.3f} fitted at eps {res[0][1]:.3g}, reused at "
        f"{res[1][1]:.3g}: {viol} violations after t = {TOL['q_start_time']}",
        details={"c0": c0, "violations": viol,
                 "eps": [res[0][1], res[1][1]]})


# -- c7: wandering ---------------------------------------------------------------

def criterion_7(p, outdir):
    cfg = {"scenario": "wandering", "nx": p["nx"], "ny": p["ny"],
           "horizon": p["horizon"], "cadence": p["cadence"], "seed": 5}
    out = os.path.join(outdir, "wandering")
    os.makedirs(out, exist_ok=True)
    man = run_scenario(cfg, out)
    d = man["diagnostics"]
    ok = (d["gap_onset_time"] is not None and d["gap_sustained"]
          and d["gap_final"] > TOL["wander_gap"]
          and d["length_slope_1"] > 0 and d["length_slope_2"] > 0
          and not man.get("incomplete"))
    return CriterionResult(
        "c7", "wandering: sustained sup-norm gap + level-set growth", ok,
        f"onset {d['gap_onset_time']}, final gap {d['gap_final']:.3f} "
        f"(> {TOL['wander_gap']}), length slopes "
        f"{d['length_slope_1']:.3f}/{d['length_slope_2']:.3f}",
        details=d)


# -- c8: alpha = 1/2 gradient growth ----------------------------------------------

def criterion_8(p, outdir):
    cfg = {"scenario": "torus-sine-sqg", "n": p["n"], "alpha": 0.5,
           "amp": 0.35, "horizon": p["horizon"], "cadence": p["cadence"],
           "seed": 3}
    out = os.path.join(outdir, "sqg")
    os.makedirs(out, exist_ok=True)
    man = run_scenario(cfg, out)
    d = man["diagnostics"]
    if d["void"]:
        return CriterionResult(
            "c8", "alpha=1/2 gradient growth", False,
            f"void: resolution loss at t = {d['resolution_loss_time']:.3g}",
            void=True, details=d)
    ok = (d["grad_growth_factor"] >= TOL["sqg_growth_factor"]
          and d["grad_slope"] > 0
          and d["invariant_drift_max"] < TOL["sqg_invariant_drift"])
    return CriterionResult(
        "c8", "alpha=1/2 gradient growth with conserved invariants", ok,
        f"growth x{d['grad_growth_factor']:.2f} (need x"
        f"{TOL['sqg_growth_factor']:.0f}), slope {d['grad_slope']:.3f}, "
        f"invariant drift {d['invariant_drift_max']:.2e} "
        f"(tol {TOL['sqg_invariant_drift']:.0e})",
        details=d)


# -- c9: Rankine calibration -------------------------------------------------------

def criterion_9(p, outdir):
    from ._core import contour_velocity
    from .patch_dynamics import PatchEvolver
    from .patch_geometry import disc_patch

    n = p["nodes"]
    th = np.linspace(0, 2 * np.pi, n + 1)[:-1]
    vx, vy = np.cos(th), np.sin(th)
    ls, ll = np.array([0]), np.array([n])
    ux, uy = contour_velocity(np.array([0.5, 2.0]), np.array([0.0, 0.0]),
                              vx, vy, ls, ll, 1.0)
    err_in = abs(uy[0] - 0.25)
    err_out = abs(uy[1] - 0.25)
    disc = disc_patch(n)
    ev = PatchEvolver(disc)
    r0 = np.hypot(*disc.contours[0].vertices.T)[: n].copy()
    for _ in range(p["steps"]):
        ev.step()
    r1 = np.hypot(*disc.contours[0].vertices[:n].T)
    drift = float(np.max(np.abs(r1 - r0)))
    ok = (err_in < TOL["rankine_vel"] and err_out < TOL["rankine_vel"]
          and drift < TOL["rankine_radius_drift"])
    return CriterionResult(
        "c9", "disc calibration: r/2, 1/(2r), steadiness", ok,
        f"vel err in/out {err_in:.1e}/{err_out:.1e} (tol "
        f"{TOL['rankine_vel']:.0e}), radius drift {drift:.1e} over "
        f"{p['steps']} steps (tol {TOL['rankine_radius_drift']:.0e})",
        details={"err_in": err_in, "err_out": err_out, "drift": drift})


# -- c10: holed patch perimeter growth ----------------------------------------------

def criterion_10(p, outdir):
    cfg = {"scenario": "patch-perimeter", "big_n": p["big_n"],
           "delta": p["delta"], "node_spacing": p["node_spacing"],
           "horizon": p["horizon"], "cadence": p["cadence"], "resume": True}
    out = os.path.join(outdir, "patch")
    os.makedirs(out, exist_ok=True)
    man = run_scenario(cfg, out)
    d = man["diagnostics"]
    ok = (d["perimeter_slope"] > 0 and d["perimeter_r2"] > TOL["patch_r2"]
          and d["winding_gap_slope"] > 0
          and d["sive_violations"] == 0
          and d["area_drift_rel"] < TOL["patch_area_drift"]
          and d["final_time"] >= p["horizon"] - 1e-6)
    return CriterionResult(
        "c10", "holed-patch perimeter growth battery", ok,
        f"perimeter slope {d['perimeter_slope']:.3f} "
        f"(R2 {d['perimeter_r2']:.3f}), gap slope "
        f"{d['winding_gap_slope']:.3f}, disc-stability violations "
        f"{d['sive_violations']}, area drift {d['area_drift_rel']:.2e} "
        f"(tol {TOL['patch_area_drift']:.0e})",
        details=d)


# -- c11: spiral length bound campaign ------------------------------------------------

def criterion_11(p, outdir):
    cfg = {"scenario": "geom-lemma-campaign", "n_curves": p["n_curves"],
           "seed": 11}
    out = os.path.join(outdir, "geom")
    os.makedirs(out, exist_ok=True)
    man = run_scenario(cfg, out)
    d = man["diagnostics"]
    ok = (d["violations"] == 0
          and d["near_extremal_ratio"] < TOL["geom_near_extremal"])
    return CriterionResult(
        "c11", "spiral length floor campaign", ok,
        f"{d['violations']} violations in {d['n_curves']} curves; "
        f"near-extremal ratio {d['near_extremal_ratio']:.4f} "
        f"(< {TOL['geom_near_extremal']})",
        details=d)


# -- c12: determinism ------------------------------------------------------------------

def criterion_12(p, outdir):
    cfg = {"scenario": "channel-perturbed-shear", "nx": 64, "ny": 32,
           "eps_amp": 1e-2, "horizon": p["horizon"], "cadence": 0.5,
           "particles_x": 32, "particles_y": 32, "seed": 9}
    outs = []
    for tag in ("a", "b"):
        out = os.path.join(outdir, f"determinism_{tag}")
        if os.path.exists(out):
            shutil.rmtree(out)
        os.makedirs(out)
        run_scenario(dict(cfg), out)
        outs.append(out)
    mism = []
    for path in sorted(glob.glob(os.path.join(outs[0], "*.csv"))):
        other = os.path.join(outs[1], os.path.basename(path))
        if not (os.path.exists(other) and filecmp.cmp(path, other,
                                                      shallow=False)):
            mism.append(os.path.basename(path))
    ok = not mism
    return CriterionResult(
        "c12", "bit-identical rerun at stored precision", ok,
        "all series byte-identical" if ok else f"mismatch: {mism}",
        details={"mismatched": mism})


CRITERIA = [
    ("c1", criterion_1, "c1"),
    ("c2", criterion_2, "c2"),
    ("c3", criterion_3, "c34_6"),
    ("c4", criterion_4, "c34_6"),
    ("c5", criterion_5, "c5"),
    ("c6", criterion_6, "c34_6"),
    ("c7", criterion_7, "c7"),
    ("c8", criterion_8, "c8"),
    ("c9", criterion_9, "c9"),
    ("c10", criterion_10, "c10"),
    ("c11", criterion_11, "c11"),
    ("c12", criterion_12, "c12"),
]


def run_suite(suite: str, outdir: str, only=None):
    params = PARAMS[suite]
    os.makedirs(outdir, exist_ok=True)
    _channel_cache.clear()
    results = []
    for cid, fn, pkey in CRITERIA:
        if only and cid not in only:
            continue
        try:
            results.append(fn(params[pkey], outdir))
        except Exception as exc:  # a crash is a failure, not an abort
            results.append(CriterionResult(
                cid, fn.__name__, False,
                f"exception: {type(exc).__name__}: {exc}"))
    return results
