"""Velocity sampling for Lagrangian transport.

Grid velocities are interpolated with a C1 Hermite bicubic built from
spectrally exact derivative tables (u, ux, uy, uxy), so RK4 particle
stepping keeps its design order.  In time, snapshot sequences are
interpolated with a cubic Hermite whose slopes come from centered
differences of neighboring snapshots (Catmull-Rom).

Channel tables are built on the doubled periodic grid with the correct
parity per component (u1 even in y about the walls, u2 odd), which bakes
wall tangency into the interpolant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._core import hermite_bicubic
from .domains import CHANNEL, PUNCTURED_PLANE, TORUS, DomainSpec
from .spectral import GridSpec, ops_for


@dataclass
class _Component:
    u: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    uxy: np.ndarray


@dataclass
class VelocityTables:
    """Hermite-bicubic tables for one velocity snapshot."""

    grid: GridSpec
    time: float
    comp1: _Component
    comp2: _Component
    x0: float
    y0: float
    dx: float
    dy: float

    def sample(self, qx, qy):
        args = (self.x0, self.y0, self.dx, self.dy, qx, qy)
        c1, c2 = self.comp1, self.comp2
        u1 = hermite_bicubic(c1.u, c1.ux, c1.uy, c1.uxy, *args)
        u2 = hermite_bicubic(c2.u, c2.ux, c2.uy, c2.uxy, *args)
        return u1, u2


def _component_tables(ops, values: np.ndarray, parity: int) -> _Component:
    if ops.channel:
        ext = np.concatenate([values, parity * values[::-1, :]], axis=0)
    else:
        ext = values
    spec = np.fft.rfft2(ext)
    shape = (ops.nyd, ops.grid.nx)
    return _Component(
        u=ext,
        ux=np.fft.irfft2(ops.ikx * spec, s=shape),
        uy=np.fft.irfft2(ops.iky * spec, s=shape),
        uxy=np.fft.irfft2(ops.ikx * ops.iky * spec, s=shape),
    )


def build_tables(grid: GridSpec, u1: np.ndarray, u2: np.ndarray,
                 time: float = 0.0) -> VelocityTables:
    """Spectral derivative tables for a velocity snapshot on ``grid``."""
    ops = ops_for(grid)
    y0 = grid.y[0]
    return VelocityTables(grid, time,
                          _component_tables(ops, u1, +1),
                          _component_tables(ops, u2, -1),
                          x0=float(grid.x[0]), y0=float(y0),
                          dx=grid.dx, dy=grid.dy)


class VelocityProvider:
    """Samples velocity at base positions and a time: sample(x, y, t)."""

    domain: DomainSpec

    def sample(self, x, y, t):  # pragma: no cover - interface
        raise NotImplementedError


class AnalyticVelocity(VelocityProvider):
    """Velocity from a closed form; fn(x, y, t) -> (u1, u2), vectorized."""

    def __init__(self, fn: Callable, domain: DomainSpec):
        self.fn = fn
        self.domain = domain

    def sample(self, x, y, t):
        return self.fn(x, y, t)


class SteadyShear(AnalyticVelocity):
    """u = (v(y), 0) on a channel-like domain."""

    def __init__(self, v_profile: Callable, domain: DomainSpec):
        self.v_profile = v_profile
        super().__init__(lambda x, y, t: (v_profile(y), np.zeros_like(np.asarray(y, float))),
                         domain)


class RadialFlow(AnalyticVelocity):
    """u = v(r) e_theta (counterclockwise) on the punctured plane."""

    def __init__(self, v_profile: Callable, domain: DomainSpec):
        self.v_profile = v_profile

        def fn(x, y, t):
            r = np.hypot(x, y)
            r_safe = np.where(r > 0, r, 1.0)
            v = np.where(r > 0, v_profile(r), 0.0)
            return -v * y / r_safe, v * x / r_safe

        super().__init__(fn, domain)


class FrozenFieldVelocity(VelocityProvider):
    """A single snapshot held fixed in time."""

    def __init__(self, tables: VelocityTables):
        self.tables = tables
        self.domain = tables.grid.domain

    def sample(self, x, y, t):
        return self.tables.sample(x, y)


class SnapshotVelocity(VelocityProvider):
    """Cubic-Hermite-in-time interpolation of a snapshot sequence.

    Slopes at interior snapshot times are centered differences; the first
    and last intervals fall back to one-sided slopes.  Sampling outside
    the covered time span raises.
    """

    def __init__(self, snapshots: Sequence[VelocityTables]):
        if len(snapshots) < 2:
            raise ValueError("need at least two snapshots")
        self.snaps = sorted(snapshots, key=lambda s: s.time)
        self.times = np.array([s.time for s in self.snaps])
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        self.domain = self.snaps[0].grid.domain

    def sample(self, x, y, t):
        ts = self.times
        if t < ts[0] - 1e-12 or t > ts[-1] + 1e-12:
            raise ValueError(f"time {t} outside snapshot span [{ts[0]}, {ts[-1]}]")
        k = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, ts.size - 2))
        t0, t1 = ts[k], ts[k + 1]
        h = t1 - t0
        s = (t - t0) / h
        f0 = np.array(self.snaps[k].sample(x, y))
        f1 = np.array(self.snaps[k + 1].sample(x, y))
        # slopes from neighbors (one-sided at the ends)
        if k > 0:
            fm = np.array(self.snaps[k - 1].sample(x, y))
            d0 = (f1 - fm) / (t1 - ts[k - 1])
        else:
            d0 = (f1 - f0) / h
        if k + 2 < ts.size:
            fp = np.array(self.snaps[k + 2].sample(x, y))
            d1 = (fp - f0) / (ts[k + 2] - t0)
        else:
            d1 = (f1 - f0) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        out = h00 * f0 + h01 * f1 + (h10 * d0 + h11 * d1) * h
        return out[0], out[1]
