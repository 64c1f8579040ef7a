"""Pseudospectral evolution of active scalars on torus and channel.

The active-scalar family interpolates between 2D Euler (alpha = 1) and
the surface quasi-geostrophic equation (alpha = 1/2):

    d omega/dt + u . grad omega = 0,      psi = (-Lap)^(-alpha) omega,

with the package velocity convention u = (d psi/dy, -d psi/dx), fixed by
the steady state omega = sin(y) <-> u = (cos(y), 0) on the torus.

The periodic channel is realized by odd reflection in y onto a doubled
periodic grid: fields live on cell-centered y nodes so the reflection is
grid-compatible, the inversion is the Dirichlet one (sine expansion),
and wall tangency (u2 = 0 at y = y0, y1) holds by symmetry.

Time stepping is plain RK4 (no dissipation) with 2/3-rule dealiasing of
the quadratic term.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .domains import CHANNEL, TORUS, DomainSpec
from .errors import (CFLViolation, EmptyHistory, NonZeroMean,
                     UnsupportedDomain)

MEAN_TOL = 1e-12
DIV_TOL = 1e-10
ODD_TOL = 1e-10


def _is_pow2(n: int) -> bool:
    return n >= 16 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on a torus or periodic channel.

    Arrays are (ny, nx), row j at height y_j.  Torus nodes sit at
    x0 + i*dx, y0 + j*dy; channel y nodes are cell-centered,
    y_j = y0 + (j + 1/2) * dy, so the odd reflection lands on the grid.
    """

    nx: int
    ny: int
    domain: DomainSpec

    def __post_init__(self):
        if not (_is_pow2(self.nx) and _is_pow2(self.ny)):
            raise ValueError("nx, ny must be powers of two >= 16")
        if self.domain.kind not in (TORUS, CHANNEL):
            raise UnsupportedDomain(
                f"grid solver supports torus/channel, not {self.domain.kind}")

    @property
    def dx(self) -> float:
        return self.domain.x_period / self.nx

    @property
    def dy(self) -> float:
        return self.domain.y_extent / self.ny

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.dx

    @property
    def y(self) -> np.ndarray:
        y0, _ = self.domain.y_range
        off = 0.5 if self.domain.kind == CHANNEL else 0.0
        return y0 + (np.arange(self.ny) + off) * self.dy

    def mesh(self):
        return np.meshgrid(self.x, self.y)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy


@dataclass
class VorticityField:
    grid: GridSpec
    values: np.ndarray
    time: float = 0.0
    odd_in_y: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.ny, self.grid.nx):
            raise ValueError("values must be shaped (ny, nx)")

    def mean(self) -> float:
        return float(np.mean(self.values))

    def integral(self) -> float:
        return float(np.sum(self.values)) * self.grid.cell_area

    def odd_defect(self) -> float:
        """Max |omega(x, y) + omega(x, -y)| on the torus."""
        if self.grid.domain.kind != TORUS:
            return 0.0
        v = self.values
        mirrored = np.roll(v[::-1, :], 1, axis=0)  # y_j -> -y_j for node grids
        return float(np.max(np.abs(v + mirrored)))


@dataclass
class StreamField:
    grid: GridSpec
    values: np.ndarray
    time: float = 0.0
    boundary_values: tuple = (0.0, 0.0)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class AlphaModel:
    """Inversion exponent: psi = (-Lap)^(-alpha) omega; alpha=1 is Euler."""

    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha < 0.5:
            raise ValueError("alpha must be >= 1/2")


class SpectralOps:
    """Cached wavenumbers, masks and transforms for one grid."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.channel = grid.domain.kind == CHANNEL
        nyd = 2 * grid.ny if self.channel else grid.ny
        self.nyd = nyd
        lx = grid.domain.x_period
        ly = grid.domain.y_extent * (2.0 if self.channel else 1.0)
        kx = 2 * np.pi * np.fft.rfftfreq(grid.nx, d=1.0 / grid.nx) / lx
        ky = 2 * np.pi * np.fft.fftfreq(nyd, d=1.0 / nyd) / ly
        self.kx = kx[None, :]
        self.ky = ky[:, None]
        self.k2 = self.kx ** 2 + self.ky ** 2
        self.ikx = 1j * self.kx
        self.iky = 1j * self.ky
        # 2/3-rule mask in index units
        mx = np.abs(np.fft.rfftfreq(grid.nx) * grid.nx) <= grid.nx // 3
        my = np.abs(np.fft.fftfreq(nyd) * nyd) <= nyd // 3
        self.dealias_mask = my[:, None] & mx[None, :]
        # Parseval weights for the rfft half-spectrum
        w = np.full(kx.size, 2.0)
        w[0] = 1.0
        if grid.nx % 2 == 0:
            w[-1] = 1.0
        self._parseval_w = w[None, :]
        self._area_d = lx * ly

    # -- real <-> spectral ------------------------------------------------
    def extend(self, values: np.ndarray) -> np.ndarray:
        """Odd-reflect channel data onto the doubled grid (no-op on torus)."""
        if not self.channel:
            return values
        return np.concatenate([values, -values[::-1, :]], axis=0)

    def restrict(self, doubled: np.ndarray) -> np.ndarray:
        return doubled[: self.grid.ny, :] if self.channel else doubled

    def to_spectral(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfft2(self.extend(values))

    def from_spectral(self, spec: np.ndarray) -> np.ndarray:
        return self.restrict(np.fft.irfft2(spec, s=(self.nyd, self.grid.nx)))

    def from_spectral_doubled(self, spec: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(spec, s=(self.nyd, self.grid.nx))

    # -- multipliers -------------------------------------------------------
    def inv_neg_lap_pow(self, spec: np.ndarray, alpha: float) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            mult = np.where(self.k2 > 0.0, self.k2 ** (-alpha), 0.0)
        return spec * mult

    def neg_lap_pow(self, spec: np.ndarray, alpha: float) -> np.ndarray:
        return spec * self.k2 ** alpha

    def spectral_l2(self, spec: np.ndarray) -> float:
        """L2 norm over the (possibly doubled) periodic domain, Parseval."""
        n = self.grid.nx * self.nyd
        s2 = float(np.sum(self._parseval_w * np.abs(spec) ** 2))
        return np.sqrt(s2 * self._area_d) / n


_OPS_CACHE: dict = {}


def ops_for(grid: GridSpec) -> SpectralOps:
    key = (grid.nx, grid.ny, grid.domain)
    if key not in _OPS_CACHE:
        _OPS_CACHE[key] = SpectralOps(grid)
    return _OPS_CACHE[key]


def _check_torus_mean(omega: VorticityField):
    if omega.grid.domain.kind == TORUS:
        scale = max(1.0, float(np.max(np.abs(omega.values))))
        if abs(omega.mean()) > MEAN_TOL * scale:
            raise NonZeroMean(
                f"torus inversion needs mean-free vorticity; mean = {omega.mean():.3e}")


def invert_biot_savart(omega: VorticityField, model: AlphaModel):
    """psi = (-Lap)^(-alpha) omega and u = (d psi/dy, -d psi/dx).

    Returns (StreamField, (u1, u2)) on the field's grid.  Torus input
    must be mean-free; the channel uses the Dirichlet (sine) inversion.
    """
    grid = omega.grid
    _check_torus_mean(omega)
    ops = ops_for(grid)
    what = ops.to_spectral(omega.values)
    phat = ops.inv_neg_lap_pow(what, model.alpha)
    psi = ops.from_spectral(phat)
    u1 = ops.from_spectral(ops.iky * phat)
    u2 = ops.from_spectral(-ops.ikx * phat)
    t = omega.time
    return StreamField(grid, psi, t), (u1, u2)


def divergence_max(grid: GridSpec, u1: np.ndarray, u2: np.ndarray) -> float:
    """Max spectral divergence of a velocity pair.

    On the channel, u1 is even about the walls and u2 odd; extensions
    respect those symmetries.
    """
    ops = ops_for(grid)
    if ops.channel:
        s1 = np.fft.rfft2(np.concatenate([u1, u1[::-1, :]], axis=0))
        s2 = np.fft.rfft2(np.concatenate([u2, -u2[::-1, :]], axis=0))
    else:
        s1 = np.fft.rfft2(u1)
        s2 = np.fft.rfft2(u2)
    d = np.fft.irfft2(ops.ikx * s1 + ops.iky * s2, s=(ops.nyd, grid.nx))
    return float(np.max(np.abs(d)))


def max_speed(grid: GridSpec, u1: np.ndarray, u2: np.ndarray) -> float:
    return float(np.max(np.hypot(u1, u2)))


def cfl_limit(grid: GridSpec, u1: np.ndarray, u2: np.ndarray) -> float:
    umax = max(max_speed(grid, u1, u2), 1e-300)
    return 0.5 * min(grid.dx, grid.dy) / umax


class ActiveScalarSolver:
    """RK4 pseudospectral stepper for one grid + alpha model."""

    def __init__(self, grid: GridSpec, model: AlphaModel = AlphaModel(1.0)):
        self.grid = grid
        self.model = model
        self.ops = ops_for(grid)

    def _tendency(self, what: np.ndarray, return_u: bool = False):
        ops = self.ops
        phat = ops.inv_neg_lap_pow(what, self.model.alpha)
        u1 = ops.from_spectral_doubled(ops.iky * phat)
        u2 = ops.from_spectral_doubled(-ops.ikx * phat)
        wx = ops.from_spectral_doubled(ops.ikx * what)
        wy = ops.from_spectral_doubled(ops.iky * what)
        adv = np.fft.rfft2(u1 * wx + u2 * wy)
        out = -adv * ops.dealias_mask
        if return_u:
            return out, (u1, u2)
        return out

    def velocity_grids(self, omega: VorticityField):
        _, (u1, u2) = invert_biot_savart(omega, self.model)
        return u1, u2

    def step(self, omega: VorticityField, dt: float) -> VorticityField:
        """One RK4 step; raises CFLViolation when dt exceeds the limit."""
        ops = self.ops
        _check_torus_mean(omega)
        what = ops.to_spectral(omega.values)
        k1, (u1, u2) = self._tendency(what, return_u=True)
        limit = cfl_limit(self.grid, u1, u2)
        if dt > limit * (1.0 + 1e-9):
            raise CFLViolation(f"dt = {dt:.3e} exceeds CFL limit {limit:.3e}")
        k2 = self._tendency(what + 0.5 * dt * k1)
        k3 = self._tendency(what + 0.5 * dt * k2)
        k4 = self._tendency(what + dt * k3)
        new_hat = what + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        vals = ops.from_spectral(new_hat)
        return VorticityField(self.grid, vals, omega.time + dt,
                              odd_in_y=omega.odd_in_y)

    def run(self, omega: VorticityField, dt: float, n_steps: int,
            callback=None) -> VorticityField:
        for k in range(n_steps):
            omega = self.step(omega, dt)
            if callback is not None:
                callback(k, omega)
        return omega


def step_active_scalar(omega: VorticityField, model: AlphaModel,
                       dt: float) -> VorticityField:
    """Single-shot convenience wrapper around ActiveScalarSolver.step."""
    return ActiveScalarSolver(omega.grid, model).step(omega, dt)


# -- conserved quantities ---------------------------------------------------

def energy(omega: VorticityField, model: AlphaModel = AlphaModel(1.0)) -> float:
    """Kinetic energy (1/2) integral |u|^2 over the domain."""
    _, (u1, u2) = invert_biot_savart(omega, model)
    return 0.5 * float(np.sum(u1 ** 2 + u2 ** 2)) * omega.grid.cell_area


def enstrophy(omega: VorticityField) -> float:
    return float(np.sum(omega.values ** 2)) * omega.grid.cell_area


def sqg_invariants(omega: VorticityField, model: AlphaModel):
    """The two conserved norms: ||omega||_L2 and ||(-Lap)^(-alpha/2) omega||_L2."""
    ops = ops_for(omega.grid)
    what = ops.to_spectral(omega.values)
    n0 = ops.spectral_l2(what)
    n1 = ops.spectral_l2(ops.inv_neg_lap_pow(what, 0.5 * model.alpha))
    if ops.channel:
        # doubled-domain Parseval counts the mirror copy too
        n0 /= np.sqrt(2.0)
        n1 /= np.sqrt(2.0)
    return float(n0), float(n1)


def grad_l1(omega: VorticityField) -> float:
    """||grad omega||_L1, spectral derivatives + grid quadrature."""
    ops = ops_for(omega.grid)
    what = ops.to_spectral(omega.values)
    wx = ops.restrict(ops.from_spectral_doubled(ops.ikx * what))
    wy = ops.restrict(ops.from_spectral_doubled(ops.iky * what))
    return float(np.sum(np.hypot(wx, wy))) * omega.grid.cell_area


# -- distances between stream histories -------------------------------------

def _band_mask(grid: GridSpec, region):
    if region is None:
        return np.ones((grid.ny, grid.nx), dtype=bool)
    y_lo, y_hi = region
    return ((grid.y >= y_lo) & (grid.y <= y_hi))[:, None] \
        & np.ones((1, grid.nx), dtype=bool)


class DistanceAccumulator:
    """Running sup_T of time-averaged stream distances.

    ``mode='A'`` accumulates ||psi - psi*||_L1(band) and
    ||u* . grad psi||_L1(band)  (the transversal coupling term);
    ``mode='2'`` accumulates ||psi - psi*||_L1(M) and ||u - u*||_L2(M).
    Trapezoid in time; the sup runs over every sampled T > t0.
    """

    def __init__(self, psi_star: StreamField, mode: str = "2", region=None):
        self.mode = mode
        self.grid = psi_star.grid
        self.ops = ops_for(self.grid)
        self.mask = _band_mask(self.grid, region)
        phat = self.ops.to_spectral(psi_star.values)
        self.psi_star = psi_star.values
        self.us1 = self.ops.from_spectral(self.ops.iky * phat)
        self.us2 = self.ops.from_spectral(-self.ops.ikx * phat)
        self.t_prev = None
        self.f_prev = None
        self.integral = 0.0
        self.sup = 0.0
        self.n_samples = 0

    def _instantaneous(self, psi_values: np.ndarray) -> float:
        ca = self.grid.cell_area
        if self.mode == "A":
            pa = self.ops.to_spectral(psi_values)
            px = self.ops.from_spectral(self.ops.ikx * pa)
            py = self.ops.from_spectral(self.ops.iky * pa)
            term1 = np.sum(np.abs(psi_values - self.psi_star)[self.mask]) * ca
            term2 = np.sum(np.abs(self.us1 * px + self.us2 * py)[self.mask]) * ca
            return float(term1 + term2)
        pa = self.ops.to_spectral(psi_values - self.psi_star)
        dx = self.ops.from_spectral(self.ops.ikx * pa)
        dy = self.ops.from_spectral(self.ops.iky * pa)
        term1 = np.sum(np.abs(psi_values - self.psi_star)) * ca
        term2 = np.sqrt(np.sum(dx ** 2 + dy ** 2) * ca)
        return float(term1 + term2)

    def update(self, t: float, psi_values: np.ndarray) -> float:
        f = self._instantaneous(psi_values)
        if self.t_prev is not None and t > self.t_prev:
            self.integral += 0.5 * (f + self.f_prev) * (t - self.t_prev)
            self.sup = max(self.sup, self.integral / t)
        elif self.t_prev is None and t == 0.0:
            pass  # averages start after the first positive time
        self.t_prev, self.f_prev = t, f
        self.n_samples += 1
        return self.sup

    @property
    def value(self) -> float:
        if self.n_samples == 0:
            raise EmptyHistory("no stream samples accumulated")
        if self.n_samples == 1:
            # single instantaneous sample: the T -> 0 limit of the average
            return self.f_prev
        return self.sup


def stream_distance(history: Iterable, psi_star: StreamField,
                    mode: str = "2", region=None) -> float:
    """sup over sampled T of time-averaged distance between histories.

    ``history`` yields (t, psi_values) pairs with increasing t.  With
    mode='A' the distance localizes to the y-band ``region`` and couples
    through the base flow (transversal term); mode='2' is the global one
    used for the stability bounds.
    """
    acc = DistanceAccumulator(psi_star, mode=mode, region=region)
    n = 0
    for t, vals in history:
        acc.update(float(t), np.asarray(vals, dtype=float))
        n += 1
    if n == 0:
        raise EmptyHistory("empty stream history")
    if region is not None and not acc.mask.any():
        return 0.0
    return acc.value


def stream_distance_A(history, psi_star: StreamField, region) -> float:
    return stream_distance(history, psi_star, mode="A", region=region)


def stream_distance_2(history, psi_star: StreamField) -> float:
    return stream_distance(history, psi_star, mode="2")


# -- checkpoint io -----------------------------------------------------------

_MAGIC = b"TWLF1\n"


def save_field(path, omega: VorticityField, alpha: float = 1.0):
    """Binary dump: text header + row-major float64 values; bit-exact."""
    g = omega.grid
    d = g.domain
    header = (f"kind={d.kind} nx={g.nx} ny={g.ny} time={omega.time!r} "
              f"alpha={alpha!r} x_period={d.x_period!r} "
              f"y0={d.y_range[0]!r} y1={d.y_range[1]!r} "
              f"odd_in_y={int(omega.odd_in_y)}\n")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header.encode())
        fh.write(np.ascontiguousarray(omega.values, dtype=float).tobytes())


def load_field(path):
    """Inverse of save_field; returns (VorticityField, alpha)."""
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path}: not a field checkpoint")
        header = fh.readline().decode().strip()
        raw = fh.read()
    kv = dict(tok.split("=", 1) for tok in header.split())
    kind = kv["kind"]
    nx, ny = int(kv["nx"]), int(kv["ny"])
    dom = DomainSpec(kind, x_period=float(kv["x_period"]),
                     y_range=(float(kv["y0"]), float(kv["y1"])))
    grid = GridSpec(nx, ny, dom)
    values = np.frombuffer(raw, dtype=float).reshape(ny, nx).copy()
    fld = VorticityField(grid, values, time=float(kv["time"]),
                         odd_in_y=bool(int(kv.get("odd_in_y", "0"))))
    return fld, float(kv["alpha"])
