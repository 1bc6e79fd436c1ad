"""Built-in density families, CSV ingestion, and radial/line conversions.

All families discretize by exact cell integrals (midpoint nodes), so the
atom weights are the true cell masses of the continuum profile rescaled to
total mass N.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .errors import MassMismatch, ParseError, WrongGeometry
from .model import LINE, Density, Geometry, GeometryKind, radial_geometry


def _midpoint_cells(a, b, m):
    edges = np.linspace(a, b, m + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    return edges, mids


def uniform_density(a, b, m, n_particles):
    """Uniform mass on [a, b]: m equal atoms at cell midpoints."""
    if not b > a:
        raise ValueError("need b > a")
    _, mids = _midpoint_cells(a, b, m)
    w = np.full(m, n_particles / m)
    return Density(LINE, mids, w, n_particles)


def two_atom_density(x0=0.0, x1=1.0, n_particles=2):
    """Two unit atoms; the smallest nontrivial instance."""
    w = np.full(2, n_particles / 2.0)
    return Density(LINE, np.array([x0, x1]), w, n_particles)


def exponential_density(rate, r_max, m, n_particles):
    """Density proportional to exp(-rate*r) on [0, r_max], equal-width cells.

    Cell masses are the closed-form integrals of the exponential, so the
    weights sum to N exactly up to rounding.
    """
    edges, mids = _midpoint_cells(0.0, r_max, m)
    cell = np.exp(-rate * edges[:-1]) - np.exp(-rate * edges[1:])
    total = 1.0 - math.exp(-rate * r_max)
    w = n_particles * cell / total
    w = w * (n_particles / w.sum())
    return Density(LINE, mids, w, n_particles)


def exponential_equal_mass_density(rate, r_max, m, n_particles):
    """Exponential profile discretized into m equal-mass quantile cells.

    Each atom carries mass N/m and sits at the mass centroid of its cell.
    Useful when atoms must align with quantile boundaries (the 1D map and
    the LP then agree to rounding).
    """
    z = -math.expm1(-rate * r_max)
    q = np.linspace(0.0, 1.0, m + 1)
    edges = np.empty(m + 1)
    edges[:-1] = -np.log1p(-q[:-1] * z) / rate
    edges[-1] = r_max
    # centroid of exp(-rate*r) over [a, b]: primitive -(r + 1/rate) e^(-rate r)
    a, b = edges[:-1], edges[1:]
    prim = lambda r: -(r + 1.0 / rate) * np.exp(-rate * r)
    num = prim(b) - prim(a)
    den = np.exp(-rate * a) - np.exp(-rate * b)
    nodes = num / den
    w = np.full(m, n_particles / m)
    return Density(LINE, nodes, w, n_particles)


def gaussian_radial_density(sigma, r_max, m, n_particles, dimension=3):
    """Radial Gaussian shell masses ~ r^(d-1) exp(-r^2 / 2 sigma^2) on (0, r_max].

    Only d = 3 has the closed-form cell integral implemented; other
    dimensions fall back to a fine midpoint quadrature per cell.
    """
    edges, mids = _midpoint_cells(0.0, r_max, m)
    if dimension == 3:
        cell = _gauss_r2_integral(edges[1:], sigma) - _gauss_r2_integral(edges[:-1], sigma)
    else:
        cell = np.empty(m)
        for i in range(m):
            rr = np.linspace(edges[i], edges[i + 1], 33)
            f = rr ** (dimension - 1) * np.exp(-0.5 * (rr / sigma) ** 2)
            cell[i] = np.trapz(f, rr)
    w = n_particles * cell / cell.sum()
    return Density(radial_geometry(dimension), mids, w, n_particles)


def _gauss_r2_integral(r, sigma):
    # int_0^r t^2 exp(-t^2/(2 s^2)) dt
    r = np.asarray(r, dtype=float)
    s = float(sigma)
    erf = np.vectorize(math.erf)
    return (
        -s * s * r * np.exp(-0.5 * (r / s) ** 2)
        + s * s * s * math.sqrt(math.pi / 2.0) * erf(r / (s * math.sqrt(2.0)))
    )


def mirror_to_line(density):
    """Unfold a radial density onto the signed axis with half weight per side.

    A radius-zero node (if present) keeps its full weight at the origin.
    Collinear configurations with signed radii are the working approximation
    for the radial pipeline.
    """
    if density.geometry.kind is not GeometryKind.RADIAL_SYMMETRIC:
        raise WrongGeometry("mirror_to_line expects a radial density")
    r, w = density.nodes, density.weights
    if r[0] == 0.0:
        nodes = np.concatenate([-r[:0:-1], r])
        weights = np.concatenate([0.5 * w[:0:-1], [w[0]], 0.5 * w[1:]])
    else:
        nodes = np.concatenate([-r[::-1], r])
        weights = np.concatenate([0.5 * w[::-1], 0.5 * w])
    return Density(LINE, nodes, weights, density.particle_count)


def read_density_csv(path, n_particles, geometry=None, renormalize=False):
    """Read atoms from a CSV with header ``coord,weight``.

    Validates the Density invariants; with ``renormalize`` the weights are
    rescaled to sum to ``n_particles``, otherwise a mismatch raises
    MassMismatch.
    """
    nodes, weights = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["coord", "weight"]:
            raise ParseError(f"{path}: expected header 'coord,weight'", row=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise ParseError(f"{path}:{lineno}: expected 2 columns", row=lineno)
            try:
                x, w = float(row[0]), float(row[1])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric entry", row=lineno)
            if w < 0:
                raise ParseError(f"{path}:{lineno}: negative weight {w}", row=lineno)
            nodes.append(x)
            weights.append(w)
    nodes = np.asarray(nodes)
    weights = np.asarray(weights)
    order = np.argsort(nodes)
    nodes, weights = nodes[order], weights[order]
    total = weights.sum()
    if renormalize:
        if total <= 0:
            raise ParseError(f"{path}: zero total mass", row=None)
        weights = weights * (n_particles / total)
    elif abs(total - n_particles) > 1e-12 * max(1.0, n_particles):
        raise MassMismatch(
            f"{path}: weights sum to {total}, expected {n_particles}; "
            "pass --renormalize to rescale"
        )
    geo = geometry or LINE
    return Density(geo, nodes, weights, n_particles)


def write_density_csv(density, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["coord", "weight"])
        for x, w in zip(density.nodes, density.weights):
            writer.writerow([repr(float(x)), repr(float(w))])
