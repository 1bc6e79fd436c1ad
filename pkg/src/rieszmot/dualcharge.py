"""Coulomb-case dual charge: radial Laplacian, Newton potential, mass.

For s = d - 2 (d >= 3) the canonical potential is the attractive Coulomb
potential of a positive radial charge; differentiating the potential
recovers that charge, integrating the charge recovers the potential via
the shell decomposition.  Constant placement: with U = -|.|^(2-d) * rho and
-Delta |x|^(2-d) = c_d delta, consistency forces rho = Delta U / c_d, which
is what the round-trip identity validates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BadDimension, GridTooCoarse, WrongGeometry
from .model import (
    GeometryKind,
    OffsetConvention,
    PotentialField,
    radial_geometry,
)


def cd_constant(d):
    """d(d-2) pi^(d/2) / Gamma(d/2 + 1); equals 4*pi at d = 3."""
    if d < 3:
        raise BadDimension(f"Coulomb constant needs d >= 3, got {d}")
    return d * (d - 2) * math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def sphere_area(d):
    """Surface area of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


@dataclass(frozen=True)
class DualCharge:
    """Radial profile of the dual charge with its quadrature mass."""

    dimension: int
    radii: np.ndarray
    density_values: np.ndarray
    total_mass: float
    positivity_tol: float = 1e-8

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        p = np.asarray(self.density_values, dtype=float)
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "density_values", p)
        if self.dimension < 3:
            raise BadDimension("dual charge defined for d >= 3")
        if r.size != p.size or r.size < 2 or not np.all(np.diff(r) > 0):
            raise ValueError("radii must be increasing and match the profile")
        recomputed = _shell_mass(r, p, self.dimension)
        if abs(recomputed - self.total_mass) > 1e-9 * max(1.0, abs(self.total_mass)):
            raise ValueError(
                f"total_mass {self.total_mass} does not match quadrature {recomputed}"
            )
        floor = float(p.min())
        scale = float(np.max(np.abs(p))) or 1.0
        if floor < -self.positivity_tol * scale:
            warnings.warn(
                f"dual charge dips to {floor:.3e}; beyond discretization noise"
            )

    def cumulative_mass(self):
        r, p = self.radii, self.density_values
        shell = p * sphere_area(self.dimension) * r ** (self.dimension - 1)
        out = np.zeros(r.size)
        out[1:] = np.cumsum(0.5 * (shell[1:] + shell[:-1]) * np.diff(r))
        return out

    def to_rows(self):
        return np.column_stack([self.radii, self.density_values, self.cumulative_mass()])


def _shell_mass(r, profile, d):
    shell = profile * sphere_area(d) * r ** (d - 1)
    return float(np.trapz(shell, r))


def _stencil_weights(x0, x1, x2, order):
    """3-point Lagrange derivative weights at x1 (order 1) or anywhere
    (order 2); built so constants are annihilated bit-exactly."""
    h1, h2 = x1 - x0, x2 - x1
    if order == 1:
        w0 = -h2 / (h1 * (h1 + h2))
        w2 = h1 / (h2 * (h1 + h2))
    else:
        w0 = 2.0 / (h1 * (h1 + h2))
        w2 = 2.0 / (h2 * (h1 + h2))
    w1 = -(w0 + w2)
    return w0, w1, w2


def _edge_first_derivative(x, y, at_start):
    """One-sided quadratic first derivative at the first or last node."""
    if at_start:
        x0, x1, x2 = x[0], x[1], x[2]
        y0, y1, y2 = y[0], y[1], y[2]
        h1, h2 = x1 - x0, x2 - x0
        w1 = h2 * h2 / (h1 * h2 * (h2 - h1))
        w2 = -h1 * h1 / (h1 * h2 * (h2 - h1))
        w0 = -(w1 + w2)
        return w0 * y0 + w1 * y1 + w2 * y2
    x0, x1, x2 = x[-1], x[-2], x[-3]
    y0, y1, y2 = y[-1], y[-2], y[-3]
    h1, h2 = x0 - x1, x0 - x2
    w1 = -h2 * h2 / (h1 * h2 * (h2 - h1))
    w2 = h1 * h1 / (h1 * h2 * (h2 - h1))
    w0 = -(w1 + w2)
    return w0 * y0 + w1 * y1 + w2 * y2


def radial_laplacian(field, mollify_passes=0):
    """v'' + (d-1)/r v' by quadratic finite differences on the radial grid.

    Ends use one-sided quadratic stencils; a node at r = 0 uses the even
    symmetric extension (Laplacian there is d * v''(0)).  The optional
    3-point moving average smooths kink spikes before differentiating and
    must be reported by the caller when used.
    """
    if field.geometry.kind is not GeometryKind.RADIAL_SYMMETRIC:
        raise WrongGeometry("radial Laplacian needs a radial potential")
    r = field.nodes
    if r.size < 5:
        raise GridTooCoarse("need at least 5 radial nodes")
    d = field.geometry.dimension
    y = field.values.astype(float)
    for _ in range(mollify_passes):
        sm = y.copy()
        sm[1:-1] = (y[:-2] + y[1:-1] + y[2:]) / 3.0
        y = sm

    m = r.size
    d1 = np.empty(m)
    d2 = np.empty(m)
    for i in range(1, m - 1):
        w0, w1, w2 = _stencil_weights(r[i - 1], r[i], r[i + 1], order=1)
        d1[i] = w0 * y[i - 1] + w1 * y[i] + w2 * y[i + 1]
        w0, w1, w2 = _stencil_weights(r[i - 1], r[i], r[i + 1], order=2)
        d2[i] = w0 * y[i - 1] + w1 * y[i] + w2 * y[i + 1]
    d1[0] = _edge_first_derivative(r, y, at_start=True)
    d1[-1] = _edge_first_derivative(r, y, at_start=False)
    d2[0] = d2[1]
    d2[-1] = d2[-2]

    lap = np.empty(m)
    if r[0] == 0.0:
        lap[0] = d * d2[0]
        lap[1:] = d2[1:] + (d - 1) / r[1:] * d1[1:]
    else:
        lap = d2 + (d - 1) / r * d1
    return lap


def compute_dual_charge(field, d=None, mollify_passes=0):
    """Dual charge profile Delta v / c_d with its quadrature mass."""
    if field.geometry.kind is not GeometryKind.RADIAL_SYMMETRIC:
        raise WrongGeometry("dual charge needs a radial potential")
    dim = d if d is not None else field.geometry.dimension
    if dim != field.geometry.dimension:
        raise WrongGeometry(
            f"requested d = {dim} but field lives in d = {field.geometry.dimension}"
        )
    lap = radial_laplacian(field, mollify_passes=mollify_passes)
    profile = lap / cd_constant(dim)
    mass = _shell_mass(field.nodes, profile, dim)
    return DualCharge(
        dimension=dim,
        radii=field.nodes,
        density_values=profile,
        total_mass=mass,
    )


def potential_from_charge(charge):
    """Newton potential of a radial charge via the shell decomposition

        U(r) = -[ Q(r) / r^(d-2)  +  integral_{t > r} t^(2-d) dQ(t) ],

    with Q the cumulative mass.  Exact for single-node shells."""
    d = charge.dimension
    r = charge.radii
    q = charge.cumulative_mass()
    shell = (
        charge.density_values * sphere_area(d) * r ** (d - 1)
    )  # dQ/dt on the grid
    integrand = shell * r ** (2 - d)
    outer = np.zeros(r.size)
    seg = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(r)
    outer[:-1] = np.cumsum(seg[::-1])[::-1]
    values = -(q / r ** (d - 2) + outer)
    return PotentialField(
        geometry=radial_geometry(d),
        nodes=r,
        values=values,
        offset_convention=OffsetConvention.VANISHING_AT_INFINITY,
    )


def fold_line_potential(field, dimension):
    """Average a symmetric line potential onto the positive radii."""
    if field.geometry.kind is not GeometryKind.LINE_1D:
        raise WrongGeometry("expected a line potential")
    x, v = field.nodes, field.values
    pos = x > 0
    r = x[pos]
    v_pos = v[pos]
    v_neg = np.interp(-r, x, v)
    vals = 0.5 * (v_pos + v_neg)
    return PotentialField(
        geometry=radial_geometry(dimension),
        nodes=r,
        values=vals,
        offset_convention=field.offset_convention,
        tail=field.tail,
    )
