"""Optimal-plan solvers: exact LP, entropic iterative scaling, 1D map.

The exact LP runs a revised simplex on the flattened tuple problem and is
the reference at small scale.  The entropic solver anneals a single shared
scaling potential in log domain.  The 1D quantile map is the closed-form
construction for line densities and serves as an independent oracle for the
other two.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalUnderflow, ScaleGuard, WrongGeometry
from .maxplus import max_tuple_total
from .model import (
    COST_INF,
    CostSpec,
    Density,
    GeometryKind,
    OffsetConvention,
    PotentialField,
    TransportPlan,
    config_cost_many,
    pairwise_cost_matrix,
)
from .simplex import solve_marginal_lp

LP_SCALE_GUARD = 1_000_000
SINKHORN_CONTRACTION_GUARD = 40_000_000
PLAN_ROUND_THRESHOLD = 1e-12


class SolveMethod(enum.Enum):
    EXACT_LP = "lp"
    SINKHORN = "sinkhorn"
    SEIDL_1D = "seidl1d"


@dataclass(frozen=True)
class SolveResult:
    """Optimal plan, its cost, and the raw dual potential of one solve."""

    plan: TransportPlan
    primal_value: float
    dual_potential: PotentialField
    method: SolveMethod
    tolerances: dict = field(default_factory=dict)
    converged: bool = True

    def to_dict(self):
        return {
            "method": self.method.value,
            "primal_value": self.primal_value,
            "converged": self.converged,
            "tolerances": {k: float(v) for k, v in sorted(self.tolerances.items())},
            "support_size": int(self.plan.support_size),
            "support": [
                [float(x) for x in row] for row in self.plan.to_rows().tolist()
            ],
        }


def median_pairwise_cost(density, spec):
    """Median finite off-diagonal pair cost on the density grid; sets the
    scale for entropic epsilon schedules."""
    C = pairwise_cost_matrix(density.nodes, spec)
    iu = np.triu_indices(density.size, k=1)
    vals = C[iu]
    vals = vals[vals < COST_INF]
    return float(np.median(vals))


def _config_cost_tensor(nodes, n_slots, spec):
    """Flat array of total pair costs over all node tuples (m**N entries)."""
    m = nodes.size
    C = pairwise_cost_matrix(nodes, spec)
    shape = (m,) * n_slots
    total = np.zeros(shape)
    for i, j in itertools.combinations(range(n_slots), 2):
        sh = [1] * n_slots
        sh[i] = m
        sh[j] = m
        total += C.reshape(sh)
    np.minimum(total, COST_INF, out=total)
    return total.reshape(-1), C


def _dual_feasible(pot, c_lp, m, n_slots, scale):
    """Check c - sum_i pot(t_i) >= -tol over every tuple."""
    shape = (m,) * n_slots
    tot = np.zeros(shape)
    for slot in range(n_slots):
        sh = [1] * n_slots
        sh[slot] = m
        tot += pot.reshape(sh)
    slack = float(np.min(c_lp - tot.reshape(-1)))
    return slack >= -1e-7 * scale


def _support_dual(res, c_lp, m, n_slots):
    """Bounded symmetric optimal dual: min-norm potential tight on support.

    The simplex dual is a valid gap certificate but can sit at the sentinel
    scale when a zero-weight infinite-cost column is basic.  The cost is
    permutation symmetric, so an optimal symmetric dual exists and is tight
    on the computed support by complementary slackness: solve the multiset
    equations sum_j count_j(t) u_j = c_t in the min-norm sense and verify
    feasibility; fall back to the averaged simplex dual otherwise.
    """
    support = res["support"]
    idx = np.array(np.unravel_index(support, (m,) * n_slots)).T
    counts = np.zeros((support.size, m))
    for slot in range(n_slots):
        counts[np.arange(support.size), idx[:, slot]] += 1.0
    u, *_ = np.linalg.lstsq(counts, c_lp[support], rcond=None)
    scale = max(1.0, float(np.max(np.abs(c_lp[support]))))
    if _dual_feasible(u, c_lp, m, n_slots, scale):
        return u
    return res["slot_potentials"].mean(axis=0)


def _plan_from_support(density, configs, weights):
    target = density.probabilities()
    worst = 0.0
    for slot in range(configs.shape[1]):
        idx = density.node_index(configs[:, slot])
        got = np.bincount(idx, weights=weights, minlength=target.size)
        worst = max(worst, float(np.max(np.abs(got - target))))
    plan = TransportPlan(
        configurations=configs,
        weights=weights,
        marginal_ref=density,
        marginal_tolerance=max(1e-12, 2.0 * worst),
    )
    return plan, worst


def solve_exact_lp(density, spec, scale_guard=LP_SCALE_GUARD):
    """Exact discrete optimum via the in-repo revised simplex.

    Refuses instances with m**N beyond ``scale_guard``.  The dual potential
    is minus the average of the per-slot marginal multipliers, which stays
    dual feasible because the cost is permutation symmetric.
    """
    m, n = density.size, density.particle_count
    if m ** n > scale_guard:
        raise ScaleGuard(f"m^N = {m ** n} exceeds the LP guard {scale_guard}")
    c_flat, C = _config_cost_tensor(density.nodes, n, spec)
    finite = c_flat[c_flat < COST_INF]
    lp_big = 1e6 * (1.0 + (float(finite.max()) if finite.size else 1.0))
    c_lp = np.minimum(c_flat, lp_big)

    res = solve_marginal_lp(c_lp, m, n, density.probabilities())

    idx = np.array(np.unravel_index(res["support"], (m,) * n)).T
    configs = density.nodes[idx]
    plan, marg_err = _plan_from_support(density, configs, res["weights"])
    sentinel_weight = float(res["weights"][c_flat[res["support"]] >= lp_big].sum())
    if sentinel_weight >= 1e-9:
        import warnings

        warnings.warn(
            f"optimal plan carries weight {sentinel_weight:.3e} on "
            "infinite-cost tuples; the density cannot avoid coincident points"
        )
    primal = float(np.dot(res["weights"], config_cost_many(configs, spec)))
    v_raw = -_support_dual(res, c_lp, m, n)
    dual = PotentialField(
        geometry=density.geometry,
        nodes=density.nodes,
        values=v_raw,
        offset_convention=OffsetConvention.RAW,
    )
    rel = max(1.0, abs(primal))
    return SolveResult(
        plan=plan,
        primal_value=primal,
        dual_potential=dual,
        method=SolveMethod.EXACT_LP,
        tolerances={
            "duality_gap": res["duality_gap"] / rel,
            "marginal_residual": marg_err,
            "sentinel_weight": sentinel_weight,
            "lp_iterations": float(res["iterations"]),
        },
    )


# -- entropic solver ------------------------------------------------------


def _logsumexp(a, axis=None):
    amax = np.max(a, axis=axis, keepdims=True)
    amax_safe = np.where(np.isfinite(amax), amax, 0.0)
    out = np.log(np.sum(np.exp(a - amax_safe), axis=axis)) + np.squeeze(
        amax_safe, axis=axis
    )
    return out


def _log_contraction(phi, C, eps, n_slots):
    """log S[x] = log sum over the other N-1 slots of the Gibbs weights."""
    if n_slots == 2:
        return _logsumexp((phi[None, :] - C) / eps, axis=1)
    if n_slots == 3:
        m = phi.size
        out = np.empty(m)
        base = (phi[None, :] + phi[:, None] - C) / eps  # slots 2,3 pair part
        for x in range(m):
            M = base - (C[x][:, None] + C[x][None, :]) / eps
            out[x] = _logsumexp(M.reshape(-1), axis=0)
        return out
    raise ScaleGuard(
        f"entropic contraction for N = {n_slots} needs m^(N-1) work; "
        "only N <= 3 is implemented"
    )


def solve_sinkhorn_mm(
    density,
    spec,
    epsilon_schedule=None,
    max_iters=5000,
    tol=1e-10,
    damping=None,
):
    """Entropic multimarginal solver with a single shared potential.

    Anneals epsilon down the schedule (default: the canonical multiples of
    the median pairwise cost), keeps all updates in log domain, then rounds
    the final plan to a sparse support and repairs its marginals by
    proportional per-slot rescaling.  The simultaneous symmetric update
    over-corrects by a factor N, so the default damping is 1/N.
    """
    m, n = density.size, density.particle_count
    if n > 2 and m ** (n - 1) > SINKHORN_CONTRACTION_GUARD:
        raise ScaleGuard("contraction size exceeds the entropic guard")
    if damping is None:
        damping = 1.0 / n
    if epsilon_schedule is None:
        med = median_pairwise_cost(density, spec)
        epsilon_schedule = [f * med for f in (1.0, 0.3, 0.1, 0.03, 0.01)]
    epsilon_schedule = list(epsilon_schedule)
    if not epsilon_schedule:
        raise ValueError("epsilon schedule must be nonempty")
    if any(e <= 0 for e in epsilon_schedule):
        raise NumericalUnderflow("epsilon must be positive")

    C = np.minimum(pairwise_cost_matrix(density.nodes, spec), 1e280)
    a = density.probabilities()
    log_a = np.log(np.maximum(a, 1e-300))
    phi = np.zeros(m)
    residual = np.inf
    converged = True
    for stage, eps in enumerate(epsilon_schedule):
        stage_tol = tol if stage == len(epsilon_schedule) - 1 else max(tol, 1e-7)
        kappa = damping
        prev_res = np.inf
        for _ in range(max_iters):
            log_s = _log_contraction(phi, C, eps, n)
            log_marg = phi / eps + log_s
            residual = float(np.max(np.abs(np.exp(log_marg) - a)))
            if residual < stage_tol:
                break
            if residual > prev_res * 1.5 and kappa > 1e-3:
                kappa *= 0.5
            prev_res = residual
            phi = phi + kappa * eps * (log_a - log_marg)
        else:
            converged = False

    eps = epsilon_schedule[-1]
    configs_idx, weights = _round_plan(phi, C, eps, n, a)
    weights, repair_err = _repair_marginals(configs_idx, weights, a)
    configs = density.nodes[configs_idx]
    plan, marg_err = _plan_from_support(density, configs, weights)
    primal = float(np.dot(weights, config_cost_many(configs, spec)))

    # certified duality gap: shift phi until it is dual feasible
    delta = -max_tuple_total(phi, C, n)
    dual_value = float(n * np.dot(a, phi) + delta)
    gap = (primal - dual_value) / max(1.0, abs(primal))

    v_raw = -phi
    dual = PotentialField(
        geometry=density.geometry,
        nodes=density.nodes,
        values=v_raw,
        offset_convention=OffsetConvention.RAW,
    )
    return SolveResult(
        plan=plan,
        primal_value=primal,
        dual_potential=dual,
        method=SolveMethod.SINKHORN,
        converged=converged,
        tolerances={
            "marginal_residual": marg_err,
            "smooth_residual": residual,
            "duality_gap_estimate": gap,
            "final_epsilon": eps,
        },
    )


def _round_plan(phi, C, eps, n_slots, a):
    """Sparse support of the entropic plan: entries above the threshold plus
    the best entry of any slice whose node would otherwise lose all mass."""
    m = phi.size
    log_thr = math.log(PLAN_ROUND_THRESHOLD)
    rows = []
    if n_slots == 2:
        logW = (phi[:, None] + phi[None, :] - C) / eps
        ys, zs = np.nonzero(logW > log_thr)
        w = np.exp(logW[ys, zs])
        idx = np.column_stack([ys, zs])
        best_rows = np.argmax(logW, axis=1)
    elif n_slots == 3:
        base = (phi[None, :] + phi[:, None] - C) / eps
        idx_list, w_list, best_rows = [], [], []
        for x in range(m):
            M = phi[x] / eps + base - (C[x][:, None] + C[x][None, :]) / eps
            ys, zs = np.nonzero(M > log_thr)
            if ys.size:
                idx_list.append(
                    np.column_stack([np.full(ys.size, x), ys, zs])
                )
                w_list.append(np.exp(M[ys, zs]))
            best_rows.append(int(np.argmax(M)))
        idx = (
            np.concatenate(idx_list)
            if idx_list
            else np.empty((0, 3), dtype=int)
        )
        w = np.concatenate(w_list) if w_list else np.empty(0)
    else:
        raise ScaleGuard("plan rounding implemented for N <= 3")

    if w.size == 0:
        raise NumericalUnderflow(
            "all plan entries fell below the rounding threshold; "
            "epsilon too small for the cost scale"
        )
    # coverage repair for slot 0 (the others follow by marginal repair)
    covered = np.zeros(m, dtype=bool)
    covered[idx[:, 0]] = True
    missing = np.flatnonzero((a > 0) & ~covered)
    extra_rows = []
    for x in missing:
        if n_slots == 2:
            j = int(best_rows[x])
            extra_rows.append((x, j))
        else:
            y, z = np.unravel_index(best_rows[x], (m, m))
            extra_rows.append((x, int(y), int(z)))
    if extra_rows:
        idx = np.vstack([idx, np.array(extra_rows, dtype=int)])
        w = np.concatenate([w, np.full(len(extra_rows), PLAN_ROUND_THRESHOLD)])
    return idx, w


def _repair_marginals(configs_idx, weights, a, sweeps=500, target=1e-11):
    """Iterative proportional fitting on the sparse support, ending on a
    slot-0 pass so the weights also sum to one."""
    w = weights.copy()
    m = a.size
    n_slots = configs_idx.shape[1]
    err = np.inf
    for _ in range(sweeps):
        err = 0.0
        for slot in range(n_slots - 1, -1, -1):
            nodes = configs_idx[:, slot]
            got = np.bincount(nodes, weights=w, minlength=m)
            err = max(err, float(np.max(np.abs(got - a))))
            factor = np.ones(m)
            pos = got > 0
            factor[pos] = np.where(a[pos] > 0, a[pos] / got[pos], 0.0)
            w = w * factor[nodes]
        if err < target:
            break
    keep = w > 0
    return w[keep], err


# -- explicit 1D construction ---------------------------------------------


def seidl_map_1d(density, spec):
    """Closed-form optimal plan for line densities via the quantile map.

    Splits [0, 1) into N equal quantile intervals; the k-th particle of the
    configuration at quantile u in the first interval sits at quantile
    u + (k-1)/N.  Atoms straddling an interval boundary are split exactly.
    The symmetrized pushforward is returned together with the force-balance
    potential integrated along the grid.
    """
    if density.geometry.kind is not GeometryKind.LINE_1D:
        raise WrongGeometry("seidl_map_1d requires Line1D geometry")
    n = density.particle_count
    p = density.probabilities()
    cum = np.concatenate([[0.0], np.cumsum(p)])
    cum[-1] = 1.0
    width = 1.0 / n

    folded = {0.0, width}
    for cv in cum[1:-1]:
        if p.size and cv > 0.0 and cv < 1.0:
            f = cv - math.floor(cv * n) / n
            if 1e-15 < f < width - 1e-15:
                folded.add(f)
    folded.add(0.0)
    bps = np.array(sorted(folded))

    raw = {}
    for lo, hi in zip(bps[:-1], bps[1:]):
        if hi - lo <= 1e-15:
            continue
        mid = 0.5 * (lo + hi)
        atoms = []
        for k in range(n):
            q = mid + k * width
            j = int(np.searchsorted(cum, q, side="right")) - 1
            atoms.append(min(max(j, 0), density.size - 1))
        key = tuple(atoms)
        raw[key] = raw.get(key, 0.0) + (hi - lo) * n

    sym = {}
    fact = math.factorial(n)
    for key, w in raw.items():
        share = w / fact
        for perm in itertools.permutations(key):
            sym[perm] = sym.get(perm, 0.0) + share

    keys = sorted(sym.keys())
    configs_idx = np.array(keys, dtype=int)
    weights = np.array([sym[k] for k in keys])
    configs = density.nodes[configs_idx]
    plan, marg_err = _plan_from_support(density, configs, weights)
    primal = float(np.dot(weights, config_cost_many(configs, spec)))

    v = _force_balance_potential(density, raw, spec)
    dual = PotentialField(
        geometry=density.geometry,
        nodes=density.nodes,
        values=v,
        offset_convention=OffsetConvention.RAW,
    )
    return SolveResult(
        plan=plan,
        primal_value=primal,
        dual_potential=dual,
        method=SolveMethod.SEIDL_1D,
        tolerances={"marginal_residual": marg_err},
    )


def _force_balance_potential(density, raw_support, spec):
    """Integrate the first-order force balance v'(x) = sum of signed pair
    forces along the map; Raw gauge with v = 0 at the first node."""
    nodes = density.nodes
    m = nodes.size
    force = np.zeros(m)
    mass = np.zeros(m)
    s = spec.s
    for key, w in raw_support.items():
        pts = nodes[list(key)]
        for i, j_atom in enumerate(key):
            f = 0.0
            for k, p_atom in enumerate(key):
                if k == i or p_atom == j_atom:
                    continue
                r = pts[i] - pts[k]
                f += s * math.copysign(abs(r) ** (-s - 1.0), r)
            force[j_atom] += w * f
            mass[j_atom] += w
    covered = mass > 0
    vprime = np.zeros(m)
    vprime[covered] = force[covered] / mass[covered]
    if not covered.all() and covered.any():
        vprime[~covered] = np.interp(
            nodes[~covered], nodes[covered], vprime[covered]
        )
    v = np.zeros(m)
    v[1:] = np.cumsum(0.5 * (vprime[1:] + vprime[:-1]) * np.diff(nodes))
    return v
