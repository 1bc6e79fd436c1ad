"""Kantorovich potentials: canonical normalization and ground-state energies.

The canonical potential is the fixed point of the grid conjugation

    v(r1) = max over (r2..rN) of  -sum_i>=2 v(ri) - sum pair costs,

computed with the truncated pair cost (eta > 0 required).  At the fixed
point the N-particle ground-state energy of v vanishes.  A plain Picard
step provably oscillates on symmetric instances (the map flips the constant
mode with factor N-1), so the update is damped; the step size adapts so the
sup-norm residual never increases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ScaleGuard
from .maxplus import configs_below, conjugate_sweep, min_energy_tuple
from .model import (
    OffsetConvention,
    PotentialField,
    config_cost,
    pairwise_cost_matrix,
)


def total_energy(points, v, spec):
    """Pair interactions of the configuration plus the sampled potential."""
    pts = np.asarray(points, dtype=float)
    return float(config_cost(pts, spec) + np.sum(v.evaluate(pts, strict=True)))


@dataclass(frozen=True)
class EqvNormalizeResult:
    """Outcome of the canonical-potential iteration."""

    field: PotentialField
    converged: bool
    residual: float
    sweeps: int
    residual_history: tuple
    ground_energy: float  # E_N of the returned potential, ~0 at convergence
    eta: float

    def reapply_change(self, other):
        return float(np.max(np.abs(self.field.values - other.field.values)))


def eqv_normalize(v, n_particles, spec, tol=1e-9, max_sweeps=600, damping=None):
    """Drive v to the canonical fixed point on its own grid.

    ``spec.eta`` must be positive (the fixed-point equation is stated with
    the truncated cost).  Returns the normalized field together with the
    residual history; non-convergence is reported through the flag, the
    best iterate is still returned.
    """
    if not spec.eta > 0:
        raise ValueError("eqv_normalize requires a positive truncation eta")
    n_other = n_particles - 1
    C = pairwise_cost_matrix(v.nodes, spec)
    vals = v.values.astype(float)
    kappa0 = damping if damping is not None else 1.0 / n_particles

    sweep = conjugate_sweep(vals, C, n_other)
    residual = float(np.max(np.abs(sweep - vals)))
    history = [residual]
    kappa = kappa0
    sweeps = 0
    converged = residual < tol
    while sweeps < max_sweeps and residual >= tol:
        step = sweep - vals
        accepted = False
        k = kappa
        for _ in range(8):
            cand = vals + k * step
            cand_sweep = conjugate_sweep(cand, C, n_other)
            cand_res = float(np.max(np.abs(cand_sweep - cand)))
            if cand_res <= residual + 1e-12:
                accepted = True
                break
            k *= 0.5
        if not accepted:
            break
        vals, sweep, residual = cand, cand_sweep, cand_res
        kappa = min(kappa0, k * 1.5)
        history.append(residual)
        sweeps += 1
        if residual < tol:
            converged = True
    ground = float(np.min(vals - sweep))
    field = PotentialField(
        geometry=v.geometry,
        nodes=v.nodes,
        values=vals,
        offset_convention=OffsetConvention.EQV_NORMALIZED,
        tail=v.tail,
    )
    return EqvNormalizeResult(
        field=field,
        converged=converged,
        residual=residual,
        sweeps=sweeps,
        residual_history=tuple(history),
        ground_energy=ground,
        eta=spec.eta,
    )


@dataclass(frozen=True)
class EnergyLevel:
    value: float
    argmin: np.ndarray
    attained: bool


def evaluate_EK(v, k, spec, scale_guard=4.0e8, polish=False):
    """Exact minimum over grid^K of the K-particle total energy.

    ``attained`` is the discrete escape heuristic: an argmin within two
    grid cells of either grid end is flagged as not attained.  ``polish``
    runs a short continuous coordinate descent from the grid argmin and
    returns the polished value (the flag stays grid-based).
    """
    if k < 1:
        raise ValueError("K must be >= 1")
    nodes = v.nodes
    vv = v.values.astype(float)
    if k == 1:
        j = int(np.argmin(vv))
        pts = nodes[[j]]
        attained = _interior(np.array([j]), nodes.size)
        return EnergyLevel(float(vv[j]), pts, attained)
    C = pairwise_cost_matrix(nodes, spec)
    value, idx = min_energy_tuple(vv, C, k, scale_guard=scale_guard)
    idx = np.asarray(idx)
    pts = nodes[idx]
    attained = _interior(idx, nodes.size)
    if polish:
        value, pts = _coordinate_polish(pts, v, spec, value)
    return EnergyLevel(float(value), pts, attained)


def _interior(idx, m):
    return bool(np.all((idx >= 2) & (idx <= m - 3)))


def _coordinate_polish(pts, v, spec, value, rounds=3):
    _te = total_energy
    pts = pts.astype(float).copy()
    lo, hi = float(v.nodes[0]), float(v.nodes[-1])
    h = float(np.min(np.diff(v.nodes)))
    for _ in range(rounds):
        for i in range(pts.size):
            a, b = max(lo, pts[i] - h), min(hi, pts[i] + h)
            # golden-section on one coordinate
            gr = (np.sqrt(5.0) - 1.0) / 2.0
            x1, x2 = b - gr * (b - a), a + gr * (b - a)
            for _ in range(40):
                p1, p2 = pts.copy(), pts.copy()
                p1[i], p2[i] = x1, x2
                if _te(p1, v, spec) < _te(p2, v, spec):
                    b, x2 = x2, x1
                    x1 = b - gr * (b - a)
                else:
                    a, x1 = x1, x2
                    x2 = a + gr * (b - a)
            pts[i] = 0.5 * (a + b)
    polished = _te(pts, v, spec)
    if polished < value:
        return polished, pts
    return value, pts


@dataclass(frozen=True)
class EnergyLadder:
    """Ground-state energies E_1 >= E_2 >= ... >= E_N with their argmins."""

    values: tuple
    argmins: tuple
    attained_flags: tuple
    tolerance: float

    def __post_init__(self):
        vals = np.asarray(self.values)
        if np.any(np.diff(vals) > self.tolerance):
            raise ValueError(
                "energy ladder must be non-increasing within tolerance: "
                f"{vals}"
            )

    def to_dict(self):
        return {
            "values": [float(x) for x in self.values],
            "argmins": [[float(x) for x in a] for a in self.argmins],
            "attained": [bool(b) for b in self.attained_flags],
            "tolerance": float(self.tolerance),
        }


@dataclass(frozen=True)
class SigmaSet:
    """Minimizing N-point configurations of the N-particle energy, up to a
    slack band, deduplicated up to permutation."""

    configurations: np.ndarray
    energy: float
    slack: float

    def __post_init__(self):
        arr = np.asarray(self.configurations, dtype=float)
        object.__setattr__(self, "configurations", arr)

    @property
    def size(self):
        return self.configurations.shape[0]

    def contains(self, points, tol=1e-9):
        """Membership up to permutation of the points."""
        target = np.sort(np.asarray(points, dtype=float))
        for row in self.configurations:
            if np.max(np.abs(np.sort(row) - target)) <= tol:
                return True
        return False

    def to_dict(self):
        return {
            "energy": float(self.energy),
            "slack": float(self.slack),
            "configurations": [[float(x) for x in r] for r in self.configurations],
        }


def find_sigma(v, n_particles, spec, slack, scale_guard=4.0e8):
    """All grid configurations within ``slack`` of the N-particle minimum."""
    nodes = v.nodes
    vv = v.values.astype(float)
    C = pairwise_cost_matrix(nodes, spec)
    value, _ = min_energy_tuple(vv, C, n_particles, scale_guard=scale_guard)
    found = configs_below(vv, C, n_particles, value + slack, scale_guard=scale_guard)
    configs = np.array([[nodes[j] for j in tup] for tup in found])
    return SigmaSet(configurations=configs, energy=float(value), slack=float(slack))


def shift_to_vanishing(v, n_particles, spec):
    """Gauge-shift a canonical potential so it vanishes at infinity.

    The shift is the exact (N-1)-particle ground energy of v on the grid
    (the potential tends to minus that value at infinity); the tail-fit
    offset estimates the same constant asymptotically and serves as a
    cross-check, not as the shift.
    """
    level = evaluate_EK(v, n_particles - 1, spec)
    shifted = v.shifted(level.value, OffsetConvention.VANISHING_AT_INFINITY)
    return shifted, level.value
