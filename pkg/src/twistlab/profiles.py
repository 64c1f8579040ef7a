"""Localized unit-mass weight profiles ("highways").

A highway profile is a C2 bump of unit mass supported strictly inside
the channel, carried by a quintic smoothstep.  The analytic sup-norm of
its derivative feeds the winding-remainder bound, so both the value and
the bound come from closed forms rather than sampled maxima.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# quintic smoothstep S and its derivative: S(0)=0, S(1)=1, S'=S''=0 at ends
_SUP_DS = 30.0 / 16.0        # max of S'(u) = 30 u^2 (1-u)^2 at u = 1/2
_SUP_B = 1.0                 # max of the bump B(s) = S(1 - |s|)


def _smoothstep(u):
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def _smoothstep_d(u):
    return 30.0 * u * u * (1.0 - u) ** 2


@dataclass(frozen=True)
class WeightProfile:
    """Unit-mass C2 bump F centered at ``center`` with given half-width.

    F(y) = S(1 - |y - center| / half_width) / half_width on its support;
    integral F = 1 exactly, ||F'||_inf = 1.875 / half_width^2.
    """

    center: float
    half_width: float = 0.05

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.half_width, self.center + self.half_width)

    @property
    def derivative_bound(self) -> float:
        return _SUP_DS / self.half_width ** 2

    @property
    def sup(self) -> float:
        return _SUP_B / self.half_width

    def __call__(self, y):
        s = (np.asarray(y, dtype=float) - self.center) / self.half_width
        inside = np.abs(s) < 1.0
        out = np.zeros_like(s)
        out[inside] = _smoothstep(1.0 - np.abs(s[inside])) / self.half_width
        return out if out.ndim else float(out)

    def derivative(self, y):
        s = (np.asarray(y, dtype=float) - self.center) / self.half_width
        inside = np.abs(s) < 1.0
        out = np.zeros_like(s)
        out[inside] = (-np.sign(s[inside])
                       * _smoothstep_d(1.0 - np.abs(s[inside]))
                       / self.half_width ** 2)
        return out if out.ndim else float(out)

    def check_inside(self, y_range) -> bool:
        lo, hi = self.support
        return y_range[0] < lo and hi < y_range[1]

    def overlaps(self, other: "WeightProfile") -> bool:
        a, b = self.support
        c, d = other.support
        return a < d and c < b

    def mass_quadrature(self, n: int = 10001) -> float:
        """Trapezoid check of the unit mass (used by validation tests)."""
        lo, hi = self.support
        ys = np.linspace(lo, hi, n)
        return float(np.trapezoid(self(ys), ys))
