"""Core domain types: geometry, cost, densities, plans, potentials.

Everything here is immutable after construction and safe to share across
threads.  Discretization is atomic: a density is a list of weighted point
masses, a transport plan is a discrete measure on tuples of grid nodes.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InfeasibleDensity, OutOfDomain, WrongGeometry

#: Finite stand-in for an infinite pair cost.  Large enough to dominate any
#: finite cost on a desk-scale grid, small enough that sums of a few of them
#: do not overflow float64.
COST_INF = 1e300


class GeometryKind(enum.Enum):
    LINE_1D = "line1d"
    RADIAL_SYMMETRIC = "radial"


class Interpolation(enum.Enum):
    PIECEWISE_LINEAR = "piecewise_linear"


class OffsetConvention(enum.Enum):
    RAW = "raw"
    EQV_NORMALIZED = "eqv_normalized"
    VANISHING_AT_INFINITY = "vanishing_at_infinity"


def _frozen_array(values, dtype=float):
    arr = np.asarray(values, dtype=dtype)
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Geometry:
    """Ambient space of the problem.

    ``LINE_1D`` is the real line (dimension 1).  ``RADIAL_SYMMETRIC`` stands
    for a radially symmetric problem in dimension ``dimension`` >= 2 whose
    configurations are restricted to collinear placements on one axis
    through the origin (signed radii); densities then carry shell masses by
    radius.
    """

    kind: GeometryKind
    dimension: int = 1

    def __post_init__(self):
        if self.kind is GeometryKind.LINE_1D and self.dimension != 1:
            raise WrongGeometry("Line1D geometry must have dimension 1")
        if self.kind is GeometryKind.RADIAL_SYMMETRIC and self.dimension < 2:
            raise WrongGeometry("radial geometry requires dimension >= 2")


LINE = Geometry(GeometryKind.LINE_1D, 1)


def radial_geometry(dimension):
    return Geometry(GeometryKind.RADIAL_SYMMETRIC, dimension)


@dataclass(frozen=True)
class CostSpec:
    """Riesz pair interaction max(|r|, eta)^(-s).

    ``eta = 0`` means the untruncated cost; the diagonal then evaluates to
    the ``COST_INF`` sentinel.
    """

    s: float
    eta: float = 0.0

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"Riesz exponent s must be positive, got {self.s}")
        if self.eta < 0:
            raise ValueError(f"truncation eta must be >= 0, got {self.eta}")

    def with_eta(self, eta):
        return replace(self, eta=eta)


def riesz_cost(x, y, spec):
    """Truncated Riesz interaction between two points.

    Returns max(|x - y|, eta)^(-s); the COST_INF sentinel stands in for the
    diagonal singularity when eta = 0.
    """
    r = abs(x - y)
    if spec.eta > 0.0 and r < spec.eta:
        r = spec.eta
    if r == 0.0:
        return COST_INF
    c = r ** (-spec.s)
    return c if c < COST_INF else COST_INF


def pairwise_cost_matrix(coords, spec):
    """Symmetric matrix of riesz_cost over an array of coordinates."""
    x = np.asarray(coords, dtype=float)
    r = np.abs(x[:, None] - x[None, :])
    if spec.eta > 0.0:
        np.maximum(r, spec.eta, out=r)
    with np.errstate(divide="ignore", over="ignore"):
        c = r ** (-spec.s)
    return np.minimum(c, COST_INF)


def config_cost(points, spec):
    """Total pair interaction of one configuration (sum over unordered pairs)."""
    pts = np.asarray(points, dtype=float)
    if pts.size < 2:
        raise ValueError("configuration needs at least 2 points")
    total = 0.0
    for i, j in itertools.combinations(range(pts.size), 2):
        total += riesz_cost(pts[i], pts[j], spec)
    return min(total, COST_INF)


def config_cost_many(configs, spec):
    """Vectorized config_cost over an array of configurations (k, N)."""
    pts = np.asarray(configs, dtype=float)
    k, n = pts.shape
    total = np.zeros(k)
    for i, j in itertools.combinations(range(n), 2):
        r = np.abs(pts[:, i] - pts[:, j])
        if spec.eta > 0.0:
            np.maximum(r, spec.eta, out=r)
        with np.errstate(divide="ignore", over="ignore"):
            c = r ** (-spec.s)
        total += np.minimum(c, COST_INF)
    return np.minimum(total, COST_INF)


@dataclass(frozen=True)
class Density:
    """Weighted atoms on a grid with total mass equal to the particle count.

    ``nodes`` must be strictly increasing (radii >= 0 for radial geometry);
    ``weights`` are the atom masses and sum to ``particle_count``.
    """

    geometry: Geometry
    nodes: np.ndarray
    weights: np.ndarray
    particle_count: int

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen_array(self.nodes))
        object.__setattr__(self, "weights", _frozen_array(self.weights))
        n, w = self.nodes, self.weights
        if n.ndim != 1 or w.ndim != 1 or n.size != w.size:
            raise InfeasibleDensity("nodes and weights must be 1-d of equal length")
        if n.size < 2 or not np.all(np.diff(n) > 0):
            raise InfeasibleDensity("nodes must be strictly increasing (>= 2 nodes)")
        if self.geometry.kind is GeometryKind.RADIAL_SYMMETRIC and n[0] < 0:
            raise InfeasibleDensity("radial nodes must be nonnegative radii")
        if np.any(w < 0):
            raise InfeasibleDensity("weights must be nonnegative")
        if int(np.count_nonzero(w > 0)) < 2:
            raise InfeasibleDensity("need at least 2 atoms with positive weight")
        if self.particle_count < 2:
            raise InfeasibleDensity("particle_count must be >= 2")
        total = float(w.sum())
        if abs(total - self.particle_count) > 1e-12 * max(1.0, self.particle_count):
            raise InfeasibleDensity(
                f"weights sum to {total}, expected {self.particle_count}"
            )

    @property
    def size(self):
        return self.nodes.size

    def probabilities(self):
        """Per-slot marginal rho/N (a probability vector)."""
        return self.weights / float(self.particle_count)

    def node_index(self, coords, tol=0.0):
        """Map coordinates back to node indices; coordinates must be nodes."""
        idx = np.searchsorted(self.nodes, coords)
        idx = np.clip(idx, 0, self.size - 1)
        left = np.clip(idx - 1, 0, self.size - 1)
        use_left = np.abs(self.nodes[left] - coords) < np.abs(self.nodes[idx] - coords)
        idx = np.where(use_left, left, idx)
        err = np.max(np.abs(self.nodes[idx] - np.asarray(coords)))
        if err > tol + 1e-12 * max(1.0, float(np.max(np.abs(self.nodes)))):
            raise ValueError(f"coordinate does not match any grid node (err={err})")
        return idx


def build_cost_tensor(density, spec):
    """Pairwise cost matrix over the density's grid nodes.

    For radial geometry the radii are placed on a common axis, so the entry
    is still riesz_cost(node_i, node_j).
    """
    return pairwise_cost_matrix(density.nodes, spec)


@dataclass(frozen=True)
class TransportPlan:
    """Discrete measure on N-point configurations.

    ``configurations`` has shape (k, N) with coordinates equal to grid nodes
    of ``marginal_ref``; ``weights`` are positive and sum to 1.  Every
    per-slot marginal must match marginal_ref/N within
    ``marginal_tolerance`` (the solver's reported feasibility).
    """

    configurations: np.ndarray
    weights: np.ndarray
    marginal_ref: Density
    marginal_tolerance: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "configurations", _frozen_array(self.configurations))
        object.__setattr__(self, "weights", _frozen_array(self.weights))
        c, w = self.configurations, self.weights
        if c.ndim != 2 or c.shape[0] != w.size:
            raise ValueError("configurations must be (k, N) matching weights")
        if c.shape[1] != self.marginal_ref.particle_count:
            raise ValueError("configuration length must equal particle_count")
        if np.any(w <= 0):
            raise ValueError("plan weights must be positive")
        if abs(float(w.sum()) - 1.0) > 1e-10:
            raise ValueError(f"plan weights sum to {w.sum()}, expected 1")
        err = self.marginal_error()
        if err > self.marginal_tolerance:
            raise ValueError(
                f"plan marginal error {err:.3e} exceeds tolerance "
                f"{self.marginal_tolerance:.3e}"
            )

    @property
    def support_size(self):
        return self.weights.size

    @property
    def n_particles(self):
        return self.configurations.shape[1]

    def marginal_error(self):
        """Max over slots and nodes of |plan marginal - rho/N|."""
        target = self.marginal_ref.probabilities()
        worst = 0.0
        for slot in range(self.n_particles):
            idx = self.marginal_ref.node_index(self.configurations[:, slot])
            got = np.bincount(idx, weights=self.weights, minlength=target.size)
            worst = max(worst, float(np.max(np.abs(got - target))))
        return worst

    def cost(self, spec):
        """Expected configuration cost under the plan."""
        return float(np.dot(self.weights, config_cost_many(self.configurations, spec)))

    def min_pair_distances(self):
        """Per-configuration minimum pair distance."""
        c = self.configurations
        n = c.shape[1]
        best = np.full(c.shape[0], np.inf)
        for i, j in itertools.combinations(range(n), 2):
            np.minimum(best, np.abs(c[:, i] - c[:, j]), out=best)
        return best

    def to_rows(self):
        """Support as (r_1, ..., r_N, weight) rows."""
        return np.column_stack([self.configurations, self.weights])


@dataclass(frozen=True)
class TailModel:
    """Inverse-power tail v(r) ~ -C + b * |r|^(-s) used beyond the grid."""

    C: float
    b: float
    s: float

    def __call__(self, r):
        return -self.C + self.b * np.abs(r) ** (-self.s)


@dataclass(frozen=True)
class PotentialField:
    """Grid-sampled external potential with piecewise-linear interpolation.

    Evaluation beyond the grid uses the attached tail model when present and
    clamps to the boundary value otherwise.
    """

    geometry: Geometry
    nodes: np.ndarray
    values: np.ndarray
    interpolation: Interpolation = Interpolation.PIECEWISE_LINEAR
    offset_convention: OffsetConvention = OffsetConvention.RAW
    tail: TailModel | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen_array(self.nodes))
        object.__setattr__(self, "values", _frozen_array(self.values))
        if self.nodes.size != self.values.size:
            raise ValueError("nodes and values must have equal length")
        if not np.all(np.diff(self.nodes) > 0):
            raise ValueError("potential nodes must be strictly increasing")
        if self.interpolation is not Interpolation.PIECEWISE_LINEAR:
            raise ValueError("only piecewise-linear interpolation is supported")

    @property
    def size(self):
        return self.nodes.size

    def __call__(self, r):
        return self.evaluate(r)

    def evaluate(self, r, strict=False):
        """Interpolate at r (scalar or array).

        With ``strict=True`` an evaluation beyond the grid without a tail
        model raises OutOfDomain instead of clamping.
        """
        r = np.asarray(r, dtype=float)
        out = np.interp(r, self.nodes, self.values)
        lo, hi = self.nodes[0], self.nodes[-1]
        outside = (r < lo) | (r > hi)
        if np.any(outside):
            if self.tail is not None:
                out = np.where(outside, self.tail(r), out)
            elif strict:
                raise OutOfDomain(
                    f"point outside grid [{lo}, {hi}] and no tail model attached"
                )
        return out if out.ndim else float(out)

    def shifted(self, delta, convention=None):
        """Add a constant; the tail offset shifts along with the values."""
        tail = self.tail
        if tail is not None:
            tail = TailModel(tail.C - delta, tail.b, tail.s)
        return PotentialField(
            geometry=self.geometry,
            nodes=self.nodes,
            values=self.values + delta,
            interpolation=self.interpolation,
            offset_convention=convention or self.offset_convention,
            tail=tail,
        )

    def with_values(self, values, convention=None):
        return PotentialField(
            geometry=self.geometry,
            nodes=self.nodes,
            values=values,
            interpolation=self.interpolation,
            offset_convention=convention or self.offset_convention,
            tail=self.tail,
        )

    def with_tail(self, tail):
        return PotentialField(
            geometry=self.geometry,
            nodes=self.nodes,
            values=self.values,
            interpolation=self.interpolation,
            offset_convention=self.offset_convention,
            tail=tail,
        )

    def interp_to(self, new_nodes):
        """Resample onto a new grid (linear; clamps or tail beyond ends)."""
        vals = self.evaluate(np.asarray(new_nodes, dtype=float))
        return PotentialField(
            geometry=self.geometry,
            nodes=new_nodes,
            values=vals,
            interpolation=self.interpolation,
            offset_convention=self.offset_convention,
            tail=self.tail,
        )
