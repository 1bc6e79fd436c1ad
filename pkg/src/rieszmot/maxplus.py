"""Exact max-plus / min-plus reductions over grid configurations.

These kernels power the fixed-point conjugation sweep, the K-particle
ground-state searches, and the minimizer-set scans.  All of them are exact
on the grid: the branch-and-bound paths prune with valid bounds only
(pair interactions are nonnegative, so dropping them can only overestimate
a max / underestimate a min).
"""

from __future__ import annotations

import numpy as np

from .errors import ScaleGuard

_BLOCK = 8


def best_pair_value(P, C, subset=None):
    """max over unordered pairs (y, z), repeats allowed, of P[y]+P[z]-C[y,z].

    ``subset`` restricts both members to the given index array.
    """
    idx = np.arange(P.size) if subset is None else np.asarray(subset)
    vals = P[idx]
    order = idx[np.argsort(-vals, kind="stable")]
    Ps = P[order]
    best = -np.inf
    for i in range(order.size):
        if Ps[i] + Ps[i] <= best:
            break
        lim = Ps[i] + Ps[i:]
        cnt = int(np.searchsorted(-lim, -best, side="left"))
        if cnt == 0:
            continue
        cand = order[i : i + cnt]
        v = float(np.max(Ps[i] + P[cand] - C[order[i], cand]))
        if v > best:
            best = v
    return best


def _best_tuple_value(P, C, k, subset):
    """max over unordered k-tuples from subset of sum P - sum pair C."""
    if k == 1:
        return float(np.max(P[subset]))
    if k == 2:
        return best_pair_value(P, C, subset)
    vals = P[subset]
    order = subset[np.argsort(-vals, kind="stable")]
    Ps = P[order]
    best = -np.inf
    for i in range(order.size):
        # members below position i all have P <= Ps[i] and pair costs only
        # subtract, so k * Ps[i] bounds every tuple led by order[i:]
        if k * Ps[i] <= best:
            break
        # shifting P by the pair column charges interactions with order[i];
        # the deeper levels charge the pairs among themselves
        inner = _best_tuple_value(P - C[order[i]], C, k - 1, order[i:])
        v = Ps[i] + inner
        if v > best:
            best = v
    return best


def conjugate_sweep(v, C, n_other):
    """For every node x: max over (r_2..r_{n_other+1}) of
    -sum v(r_i) - sum of all pair costs involving x and among the r_i.

    This is the right-hand side of the canonical-potential fixed-point
    equation evaluated on the grid.
    """
    m = v.size
    if n_other == 1:
        return np.max(-v[None, :] - C, axis=1)
    out = np.empty(m)
    subset = np.arange(m)
    for x in range(m):
        P = -v - C[x]
        if n_other == 2:
            out[x] = best_pair_value(P, C)
        else:
            out[x] = _best_tuple_value(P, C, n_other, subset)
    return out


def max_tuple_total(phi, C, n_slots):
    """max over all n-tuples of sum phi(t_i) - total pair cost."""
    sweep = conjugate_sweep(-phi, C, n_slots - 1)
    return float(np.max(phi + sweep))


def min_energy_tuple(v, C, k, scale_guard=4.0e8):
    """Exact min over grid^k of sum v(r_i) + sum pair costs, with argmin.

    Returns (value, index tuple).  k <= 3 scans exhaustively (blocked); the
    argmin is the lexicographically smallest index tuple among exact ties.
    """
    m = v.size
    if k == 1:
        j = int(np.argmin(v))
        return float(v[j]), (j,)
    if k == 2:
        if m * m > scale_guard:
            raise ScaleGuard(f"grid^2 scan of size {m * m} exceeds guard")
        E = v[:, None] + v[None, :] + C
        j = int(np.argmin(E))
        return float(E.flat[j]), tuple(int(t) for t in np.unravel_index(j, (m, m)))
    if k == 3:
        if m ** 3 > scale_guard:
            raise ScaleGuard(f"grid^3 scan of size {m ** 3} exceeds guard")
        base = v[:, None] + v[None, :] + C
        best, arg = np.inf, (0, 0, 0)
        for x in range(m):
            M = base + C[x][:, None] + C[x][None, :]
            j = int(np.argmin(M))
            val = float(v[x] + M.flat[j])
            if val < best:
                y, z = np.unravel_index(j, (m, m))
                best, arg = val, (x, int(y), int(z))
        return best, arg
    return _min_energy_dfs(v, C, k)


def _min_energy_dfs(v, C, k, node_budget=20_000_000):
    """Branch-and-bound over sorted-index tuples (r_1 <= ... <= r_k)."""
    m = v.size
    order = np.argsort(v, kind="stable")
    vmin = float(v[order[0]])
    best = [np.inf, None]
    count = [0]

    def rec(start, depth, partial, partial_idx):
        count[0] += 1
        if count[0] > node_budget:
            raise ScaleGuard("branch-and-bound node budget exhausted")
        if depth == k:
            if partial < best[0]:
                best[0], best[1] = partial, tuple(partial_idx)
            return
        remaining = k - depth
        for pos in range(start, m):
            j = order[pos]
            lb = partial + v[j] + (remaining - 1) * vmin
            if lb >= best[0]:
                if v[j] + (remaining - 1) * vmin >= best[0] - partial:
                    break
                continue
            add = v[j] + float(np.sum(C[j, partial_idx])) if partial_idx else v[j]
            rec(pos, depth + 1, partial + add, partial_idx + [j])

    rec(0, 0, 0.0, [])
    if best[1] is None:
        raise ScaleGuard("no configuration found within budget")
    return float(best[0]), tuple(int(t) for t in sorted(best[1]))


def configs_below(v, C, k, threshold, scale_guard=4.0e8, max_results=200_000):
    """All canonical (sorted) index tuples with energy <= threshold.

    Exhaustive for k <= 3; raises ScaleGuard beyond the scan budget.
    """
    m = v.size
    found = []
    if k == 2:
        if m * m > scale_guard:
            raise ScaleGuard("grid^2 scan exceeds guard")
        E = v[:, None] + v[None, :] + C
        ys, zs = np.nonzero(E <= threshold)
        for y, z in zip(ys, zs):
            if y <= z:
                found.append((int(y), int(z)))
    elif k == 3:
        if m ** 3 > scale_guard:
            raise ScaleGuard("grid^3 scan exceeds guard")
        base = v[:, None] + v[None, :] + C
        for x in range(m):
            M = v[x] + base + C[x][:, None] + C[x][None, :]
            ys, zs = np.nonzero(M <= threshold)
            for y, z in zip(ys, zs):
                if x <= y <= z:
                    found.append((x, int(y), int(z)))
            if len(found) > max_results:
                raise ScaleGuard("too many configurations below threshold")
    elif k == 1:
        for j in np.flatnonzero(v <= threshold):
            found.append((int(j),))
    else:
        raise ScaleGuard(f"minimizer-set scan not supported for k = {k} > 3")
    return found
