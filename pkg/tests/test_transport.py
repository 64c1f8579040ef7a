import numpy as np
import pytest

from twistlab import domains
from twistlab import spectral as sp
from twistlab import transport as tr
from twistlab.action_angle import radial_stream, travel_time
from twistlab.errors import (CFLViolation, InterpolationOutOfDomain,
                             StencilCollapse, UnderResolved)
from twistlab.interp import (AnalyticVelocity, FrozenFieldVelocity,
                             RadialFlow, SnapshotVelocity, SteadyShear,
                             build_tables)

TWO_PI = 2 * np.pi


def couette(domain):
    return SteadyShear(lambda y: np.asarray(y, float), domain)


def test_zero_velocity_leaves_ensemble_unchanged():
    dom = domains.channel()
    ens = tr.seed_midpoint_grid(dom, 16, 8)
    still = AnalyticVelocity(lambda x, y, t: (np.zeros_like(x), np.zeros_like(y)), dom)
    out = tr.advect(ens, still, 0.1, n_steps=10)
    assert np.array_equal(out.cover, ens.cover)
    assert out.time == pytest.approx(1.0)


def test_couette_advection_is_exact():
    dom = domains.channel()
    ens = tr.seed_midpoint_grid(dom, 20, 10)
    out = tr.advect(ens, couette(dom), 0.05, n_steps=200)  # t = 10
    expect = ens.labels.copy()
    expect[:, 0] += ens.labels[:, 1] * 10.0
    assert np.allclose(out.cover, expect, atol=1e-10)
    assert np.allclose(out.base_positions()[:, 1], ens.labels[:, 1])


def test_weights_and_mass():
    dom = domains.channel()
    ens = tr.seed_midpoint_grid(dom, 32, 16)
    assert ens.total_mass() == pytest.approx(dom.area, rel=1e-12)
    pp = domains.punctured_plane(far_field_radius=10.0)
    ens2 = tr.seed_midpoint_grid(pp, 20, 30, band=(0.5, 4.0))
    assert ens2.total_mass() == pytest.approx(np.pi * (16.0 - 0.25), rel=1e-12)
    ens3 = tr.seed_low_discrepancy(dom, 1024, seed=9)
    assert ens3.total_mass() == pytest.approx(dom.area, rel=1e-12)


def test_solid_rotation_winding_matches_travel_time():
    pp = domains.punctured_plane(far_field_radius=5.0, r_min=0.05)
    omega = 0.5
    flow = RadialFlow(lambda r: omega * np.asarray(r, float), pp)
    labels = np.array([[0.0, 1.0]])
    ens = tr.ParticleEnsemble(pp, labels, labels.copy(), np.array([1.0]))
    period = TWO_PI / omega
    stream = radial_stream(lambda r: omega * np.asarray(r, float), pp)
    mu = travel_time(stream, float(stream.psi(1.0, 0.0)), pp)
    assert mu == pytest.approx(period, rel=1e-6)
    n = 1000
    out = tr.advect(ens, flow, period / n, n_steps=n)
    assert abs(out.cover[0, 0] - TWO_PI) < 1e-6
    assert abs(out.cover[0, 1] - 1.0) < 1e-9


def test_equivariance_is_exact():
    dom = domains.channel()
    field = AnalyticVelocity(
        lambda x, y, t: (np.cos(np.pi * y)
                         + 0.1 * np.pi * np.sin(x - 0.3 * t) * np.cos(np.pi * y),
                         -0.1 * np.cos(x - 0.3 * t) * np.sin(np.pi * y)), dom)
    probes = np.array([[0.3, 0.4], [2.0, 0.7], [5.0, 0.2]])
    # projection of x + 2 pi is not bit-identical to x, so allow roundoff
    assert tr.equivariance_defect(field, dom, probes, 0.02, 100) < 1e-12


def test_time_reversal_round_trip():
    dom = domains.channel()
    T = 2.0

    def fwd(x, y, t):
        return (np.cos(np.pi * y) + 0.2 * np.sin(x) * np.cos(t),
                0.2 * np.cos(x) * np.sin(np.pi * y) * np.cos(t))

    def bwd(x, y, t):
        u1, u2 = fwd(x, y, T - t)
        return -u1, -u2

    ens = tr.seed_midpoint_grid(dom, 12, 12)
    mid = tr.advect(ens, AnalyticVelocity(fwd, dom), 0.01, 200)
    back = tr.advect(
        tr.ParticleEnsemble(dom, ens.labels, mid.cover.copy(), ens.weights),
        AnalyticVelocity(bwd, dom), 0.01, 200)
    assert np.max(np.abs(back.cover - ens.cover)) < 1e-9


def test_jacobian_zero_velocity_and_couette():
    dom = domains.channel()
    still = AnalyticVelocity(lambda x, y, t: (np.zeros_like(x), np.zeros_like(y)), dom)
    centers = np.array([[1.0, 0.5], [3.0, 0.25]])
    _, dets = tr.jacobian_probe(centers, still, dom, h=1e-4, dt=0.1, n_steps=5)
    assert np.allclose(dets, 1.0, atol=1e-12)
    _, dets2 = tr.jacobian_probe(centers, couette(dom), dom, h=1e-4,
                                 dt=0.05, n_steps=100)
    assert np.allclose(dets2, 1.0, atol=1e-10)


def test_jacobian_perturbed_shear_stays_area_preserving():
    dom = domains.channel()
    # stream sin(pi y)/pi + eps sin(x) sin(pi y): divergence-free by design
    field = AnalyticVelocity(
        lambda x, y, t: (np.cos(np.pi * y)
                         + 0.01 * np.pi * np.sin(x) * np.cos(np.pi * y),
                         -0.01 * np.cos(x) * np.sin(np.pi * y)), dom)
    centers = np.array([[1.0, 0.5], [4.0, 0.3], [2.5, 0.8]])
    _, dets = tr.jacobian_probe(centers, field, dom, h=1e-4, dt=0.025,
                                n_steps=2000)  # t = 50
    assert np.max(np.abs(dets - 1.0)) < 1e-3


def test_stencil_collapse():
    dom = domains.channel()
    still = AnalyticVelocity(lambda x, y, t: (np.zeros_like(x), np.zeros_like(y)), dom)
    with pytest.raises(StencilCollapse):
        tr.jacobian_probe(np.array([[1.0, 0.5]]), still, dom, h=1e-13,
                          dt=0.1, n_steps=1)


def test_flow_gradient_identity_and_couette():
    dom = domains.channel()
    ens = tr.seed_midpoint_grid(dom, 64, 32)
    area = dom.area
    assert tr.flow_gradient_l1(ens) == pytest.approx(2 * area, rel=1e-12)
    out = tr.advect(ens, couette(dom), 0.05, 100)  # t = 5: |M| (2 + t)
    assert tr.flow_gradient_l1(out) == pytest.approx(area * 7.0, rel=1e-9)


def test_flow_gradient_under_resolved():
    dom = domains.channel()
    ens = tr.seed_midpoint_grid(dom, 8, 8)
    out = tr.advect(ens, couette(dom), 0.05, n_steps=600)  # y-gap t/8 > pi
    with pytest.raises(UnderResolved):
        tr.flow_gradient_l1(out)


def test_particle_cfl_guard():
    dom = domains.channel()
    fast = AnalyticVelocity(
        lambda x, y, t: (np.full_like(x, 50.0), np.zeros_like(y)), dom)
    ens = tr.seed_midpoint_grid(dom, 4, 4)
    with pytest.raises(CFLViolation):
        tr.advect(ens, fast, 0.1)


def test_wall_crossing_detected():
    dom = domains.channel()
    up = AnalyticVelocity(
        lambda x, y, t: (np.zeros_like(x), np.full_like(y, 0.2)), dom)
    ens = tr.seed_midpoint_grid(dom, 4, 4)
    with pytest.raises(InterpolationOutOfDomain):
        tr.advect(ens, up, 0.05, n_steps=100)


def test_marker_curve_static_and_sheared():
    dom = domains.channel()
    still = AnalyticVelocity(lambda x, y, t: (np.zeros_like(x), np.zeros_like(y)), dom)
    seg = np.column_stack([np.zeros(33), np.linspace(0.0, 1.0, 33)])
    hist = tr.evolve_marker_curve(seg, still, dom, 0.1, 10)
    assert np.allclose(hist.lengths, 1.0, atol=1e-12)
    hist2 = tr.evolve_marker_curve(seg, couette(dom), dom, 0.02, 100,
                                   record_every=20)
    t_end = hist2.times[-1]
    assert hist2.lengths[-1] == pytest.approx(np.sqrt(1 + t_end ** 2), rel=1e-4)


def test_marker_curve_budget_truncates():
    dom = domains.channel()
    seg = np.column_stack([np.zeros(17), np.linspace(0.0, 1.0, 17)])
    hist = tr.evolve_marker_curve(seg, couette(dom), dom, 0.05, 400,
                                  node_budget=64)
    assert hist.truncated
    assert hist.times[-1] < 20.0


def test_snapshot_velocity_matches_frozen_field():
    dom = domains.torus()
    grid = sp.GridSpec(32, 32, dom)
    X, Y = grid.mesh()
    w = sp.VorticityField(grid, np.sin(Y))
    _, (u1, u2) = sp.invert_biot_savart(w, sp.AlphaModel(1.0))
    tabs = [build_tables(grid, u1, u2, time=float(t)) for t in (0.0, 0.5, 1.0, 1.5)]
    snap = SnapshotVelocity(tabs)
    frozen = FrozenFieldVelocity(tabs[0])
    qx = np.linspace(0, TWO_PI, 9)
    qy = np.linspace(-np.pi, np.pi, 9)
    for t in (0.0, 0.3, 0.74, 1.5):
        a = snap.sample(qx, qy, t)
        b = frozen.sample(qx, qy, t)
        assert np.allclose(a[0], b[0], atol=1e-12)
        assert np.allclose(a[1], b[1], atol=1e-12)


def test_snapshot_velocity_cubic_in_time():
    # tables that scale like t^3 are reproduced exactly by cubic Hermite
    dom = domains.torus()
    grid = sp.GridSpec(16, 16, dom)
    X, Y = grid.mesh()
    base1, base2 = np.cos(Y), np.sin(X)

    def poly(t):
        return 1.0 + t + 0.5 * t ** 2

    tabs = [build_tables(grid, poly(t) * base1, poly(t) * base2, time=t)
            for t in np.linspace(0.0, 3.0, 7)]
    snap = SnapshotVelocity(tabs)
    qx = np.array([0.3, 1.0])
    qy = np.array([0.2, 2.0])
    for t in (0.6, 1.23, 2.4):
        got = snap.sample(qx, qy, t)
        want = FrozenFieldVelocity(build_tables(grid, poly(t) * base1,
                                                poly(t) * base2)).sample(qx, qy, t)
        assert np.allclose(got[0], want[0], atol=1e-10)
        assert np.allclose(got[1], want[1], atol=1e-10)


def test_ensemble_dump_round_trip(tmp_path):
    dom = domains.channel()
    ens = tr.seed_midpoint_grid(dom, 6, 4)
    out = tr.advect(ens, couette(dom), 0.1, 7)
    path = tmp_path / "ens.txt"
    tr.save_ensemble(path, out)
    back = tr.load_ensemble(path, dom)
    assert np.array_equal(back.labels, out.labels)
    assert np.array_equal(back.cover, out.cover)
    assert np.array_equal(back.weights, out.weights)
    assert back.time == out.time
