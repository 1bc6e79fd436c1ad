"""Multimarginal optimal transport with Riesz/Coulomb costs.

Solvers for the optimal plan on discretized densities, the canonical
Kantorovich potential, and numerical certification of its structure: tail
asymptotics, dissociation, cyclical monotonicity, binding inequalities,
and the dual-charge mass in the Coulomb case.
"""

from .analysis import (
    DissociationReport,
    MonotonicityAudit,
    TailFit,
    audit_cyclical_monotonicity,
    binding_ladder,
    check_dissociation,
    corrupt_plan_for_audit,
    fit_tail,
    min_separation,
)
from .densities import (
    exponential_density,
    exponential_equal_mass_density,
    gaussian_radial_density,
    mirror_to_line,
    read_density_csv,
    two_atom_density,
    uniform_density,
    write_density_csv,
)
from .dualcharge import (
    DualCharge,
    cd_constant,
    compute_dual_charge,
    fold_line_potential,
    potential_from_charge,
    radial_laplacian,
    sphere_area,
)
from .model import (
    COST_INF,
    CostSpec,
    Density,
    Geometry,
    GeometryKind,
    Interpolation,
    LINE,
    OffsetConvention,
    PotentialField,
    TailModel,
    TransportPlan,
    build_cost_tensor,
    config_cost,
    pairwise_cost_matrix,
    radial_geometry,
    riesz_cost,
)
from .potential import (
    EnergyLadder,
    EqvNormalizeResult,
    SigmaSet,
    eqv_normalize,
    evaluate_EK,
    find_sigma,
    shift_to_vanishing,
    total_energy,
)
from .solvers import (
    SolveMethod,
    SolveResult,
    median_pairwise_cost,
    seidl_map_1d,
    solve_exact_lp,
    solve_sinkhorn_mm,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
