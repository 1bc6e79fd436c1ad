"""Two-phase revised simplex for the flattened multimarginal transport LP.

The LP is  min c.w  over plan weights w >= 0 on all m^N node tuples, with
one marginal equality per (slot, node).  One node row per slot >= 2 is
dropped upfront (those constraints are implied), so the constraint matrix
has full row rank R = N*m - (N-1).  Columns are 0/1 incidence vectors with
at most N ones, which keeps pricing a dense broadcast over the cost tensor
and every basis operation at R x R scale.

Anti-cycling: Dantzig pricing with first-index tie-break (lexicographic on
the flattened tuple order) and the lexicographic ratio test on rows of the
basis inverse.
"""

from __future__ import annotations

import numpy as np

from .errors import InfeasibleDensity, NoConvergence

_REFACTOR_EVERY = 128


class MarginalSimplex:
    """Simplex state for one min-cost multimarginal instance."""

    def __init__(self, cost_flat, m, n_slots, marginal, tol_opt=None, max_iters=None):
        self.m = int(m)
        self.N = int(n_slots)
        self.n = self.m ** self.N
        if cost_flat.size != self.n:
            raise ValueError("cost array size must be m**N")
        self.c = np.asarray(cost_flat, dtype=float)
        a = np.asarray(marginal, dtype=float)
        if a.size != self.m or np.any(a < 0):
            raise InfeasibleDensity("marginal must be nonnegative of length m")
        self.a = a
        self.R = self.N * self.m - (self.N - 1)
        self.b = np.concatenate([a] + [a[:-1]] * (self.N - 1))
        scale = float(np.median(self.c[self.c < np.max(self.c)])) if self.n > 1 else 1.0
        self.tol_opt = tol_opt if tol_opt is not None else 1e-9 * max(1.0, abs(scale))
        self.tol_piv = 1e-11
        self.max_iters = max_iters if max_iters is not None else 200 * self.R + 20000
        self.iterations = 0

        # basis bookkeeping; column ids >= n denote artificials (unit columns)
        self.basis = self.n + np.arange(self.R)
        self.binv = np.eye(self.R)
        self.x_b = self.b.copy()
        self.in_basis = np.zeros(self.n, dtype=bool)
        self._buf = np.empty(self.n)

    # -- constraint-matrix structure ------------------------------------

    def _slot_view(self, vec_r, slot):
        """Per-node entries of an R-vector for one slot (dropped node -> 0)."""
        if slot == 0:
            return vec_r[: self.m]
        start = self.m + (slot - 1) * (self.m - 1)
        out = np.zeros(self.m)
        out[: self.m - 1] = vec_r[start : start + self.m - 1]
        return out

    def _broadcast_sum(self, vec_r, out):
        """out[j] = sum over slots of vec_r[row(slot, j_slot)] for all tuples."""
        shape = (self.m,) * self.N
        t = out.reshape(shape)
        t.fill(0.0)
        for k in range(self.N):
            pot = self._slot_view(vec_r, k)
            sh = [1] * self.N
            sh[k] = self.m
            t += pot.reshape(sh)
        return out

    def _column(self, j):
        """Dense column of the constraint matrix for flat tuple index j."""
        col = np.zeros(self.R)
        idx = np.unravel_index(j, (self.m,) * self.N)
        col[idx[0]] += 1.0
        for k in range(1, self.N):
            node = idx[k]
            if node < self.m - 1:
                col[self.m + (k - 1) * (self.m - 1) + node] += 1.0
        return col

    def _direction(self, j):
        if j >= self.n:
            return self.binv[:, j - self.n].copy()
        idx = np.unravel_index(j, (self.m,) * self.N)
        d = self.binv[:, idx[0]].copy()
        for k in range(1, self.N):
            node = idx[k]
            if node < self.m - 1:
                d += self.binv[:, self.m + (k - 1) * (self.m - 1) + node]
        return d

    # -- simplex machinery ----------------------------------------------

    def _refactorize(self):
        B = np.empty((self.R, self.R))
        for i, j in enumerate(self.basis):
            B[:, i] = self._column(j) if j < self.n else np.eye(self.R)[:, j - self.n]
        self.binv = np.linalg.inv(B)
        self.x_b = self.binv @ self.b
        np.maximum(self.x_b, 0.0, out=self.x_b)

    def _ratio_test(self, d):
        cand = np.flatnonzero(d > self.tol_piv)
        if cand.size == 0:
            raise NoConvergence("LP appears unbounded; transport polytope violated")
        ratios = self.x_b[cand] / d[cand]
        theta = ratios.min()
        ties = cand[ratios <= theta + 1e-12 * (1.0 + abs(theta))]
        if ties.size == 1:
            return int(ties[0]), theta
        rows = self.binv[ties] / d[ties, None]
        order = np.lexsort(rows.T[::-1])
        return int(ties[order[0]]), theta

    def _pivot(self, entering, row, d):
        theta = self.x_b[row] / d[row]
        self.x_b -= theta * d
        np.maximum(self.x_b, 0.0, out=self.x_b)
        self.x_b[row] = theta
        leaving = self.basis[row]
        if leaving < self.n:
            self.in_basis[leaving] = False
        self.basis[row] = entering
        if entering < self.n:
            self.in_basis[entering] = True
        piv = self.binv[row] / d[row]
        self.binv -= np.outer(d, piv)
        self.binv[row] = piv
        self.iterations += 1
        if self.iterations % _REFACTOR_EVERY == 0:
            self._refactorize()

    def _price(self, cost_vector_basic, use_real_cost):
        """Return (entering index, reduced cost) or (None, 0) at optimality."""
        y = cost_vector_basic @ self.binv
        red = self._broadcast_sum(y, self._buf)
        if use_real_cost:
            np.subtract(self.c, red, out=red)
        else:
            np.negative(red, out=red)
        red[self.in_basis] = np.inf
        j = int(np.argmin(red))
        val = red[j]
        if val >= -self.tol_opt:
            return None, 0.0
        return j, val

    def _basic_cost(self, phase):
        cb = np.zeros(self.R)
        for i, j in enumerate(self.basis):
            if j >= self.n:
                cb[i] = 1.0 if phase == 1 else 0.0
            elif phase == 2:
                cb[i] = self.c[j]
        return cb

    def _run_phase(self, phase):
        while self.iterations < self.max_iters:
            cb = self._basic_cost(phase)
            j, _ = self._price(cb, use_real_cost=(phase == 2))
            if j is None:
                return
            d = self._direction(j)
            row, _ = self._ratio_test(d)
            self._pivot(j, row, d)
        raise NoConvergence(f"simplex exceeded {self.max_iters} iterations")

    def _drive_out_artificials(self):
        art_rows = [i for i in range(self.R) if self.basis[i] >= self.n]
        for row in art_rows:
            if self.basis[row] < self.n:
                continue
            tab = self._broadcast_sum(self.binv[row], self._buf)
            usable = (np.abs(tab) > 1e-9) & ~self.in_basis
            if not np.any(usable):
                raise NoConvergence(
                    "degenerate basis: artificial cannot be pivoted out"
                )
            cost_masked = np.where(usable, self.c, np.inf)
            j = int(np.argmin(cost_masked))
            d = self._direction(j)
            self._pivot(j, row, d)

    def solve(self):
        self._run_phase(1)
        art = self.basis >= self.n
        infeas = float(self.x_b[art].sum()) if np.any(art) else 0.0
        if infeas > 1e-9 * max(1.0, float(self.b.sum())):
            raise InfeasibleDensity(f"marginals infeasible (phase-1 gap {infeas:.3e})")
        if np.any(art):
            self._drive_out_artificials()
        self._run_phase(2)
        self._refactorize()

        keep = self.x_b > 1e-15
        flat = self.basis[keep]
        real = flat < self.n
        support = flat[real]
        weights = self.x_b[keep][real]
        cb = self._basic_cost(2)
        y = cb @ self.binv
        objective = float(self.c[support] @ weights)
        dual_objective = float(y @ self.b)
        slot_potentials = np.stack(
            [self._slot_view(y, k) for k in range(self.N)]
        )
        return {
            "support": support,
            "weights": weights,
            "objective": objective,
            "dual_objective": dual_objective,
            "duality_gap": abs(objective - dual_objective),
            "slot_potentials": slot_potentials,
            "iterations": self.iterations,
        }


def solve_marginal_lp(cost_flat, m, n_slots, marginal, **kwargs):
    """Solve the flattened multimarginal transport LP; see MarginalSimplex."""
    return MarginalSimplex(cost_flat, m, n_slots, marginal, **kwargs).solve()
