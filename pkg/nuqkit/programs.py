"""
Worst-case variance programs over bin occupancies.

For levels l_0=0 < ... < l_{s+1}=1 with gaps tau_j, the variance of the
quantizer on a unit vector whose coordinates occupy bins with counts
d_0, ..., d_s is bounded by

    sum_j min{tau_j^2 d_j/4, tau_j(sqrt(d_j) - l_j d_j)}    (QCQP objective)

or, more coarsely, by sum_j tau_j^2 d_j/4 (LP objective). Feasible
occupancies satisfy d_j >= 0, sum_j d_j <= d and d - d_0 - ... - d_j <=
1/l_{j+1}^2 for j < s (at most 1/l^2 coordinates of a unit vector exceed l).

This module contains the solvers: a small dense two-phase simplex (Bland's
rule), enumeration of basic feasible points, projected supergradient ascent
of the concave QCQP objective, a zooming grid search and an integer
brute-force oracle evaluating the lifted (z, d) form of the program.
"""

import math, logging, itertools
from collections import namedtuple

import numpy as np

from nuqkit.settings import gSettings
from nuqkit.errors import PreconditionError, NumericalError, InfeasibleError, UnboundedError
from nuqkit.random_source import RandomSource

ProgramSolution = namedtuple('ProgramSolution', ('value', 'occupancies'))

#                                                         __________________
# ______________________________________________________/ Dense simplex

def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    f = T[:, col].copy()
    f[row] = 0.
    T -= np.outer(f, T[row])
    basis[row] = col

def _simplex_iterations(T, basis, cost, tolerance, maxIterations):
    """
    Primal simplex on tableau ``T`` (last column is the right hand side)
    maximizing ``cost``; Bland's rule for both entering and leaving
    variables.
    """
    nCols = T.shape[1] - 1
    for _ in range(maxIterations):
        reduced = cost - cost[basis] @ T[:, :nCols]
        entering = np.flatnonzero(reduced > tolerance)
        if not entering.size:
            return
        col = entering[0]
        column = T[:, col]
        pos = column > tolerance
        if not pos.any():
            raise UnboundedError(f'Linear program is unbounded along variable #{col}')
        ratios = np.full(len(column), np.inf)
        ratios[pos] = T[pos, -1]/column[pos]
        minRatio = ratios.min()
        ties = np.flatnonzero(ratios <= minRatio + tolerance*max(1., abs(minRatio)))
        _pivot(T, basis, ties[np.argmin(basis[ties])], col)
    raise NumericalError(f'Simplex did not terminate in {maxIterations} iterations')

def simplex_maximize(c, A, b, tolerance=1e-9, maxIterations=None):
    """
    Maximizes c.x subject to A x <= b, x >= 0 with two-phase dense simplex.
    Rows with negative right hand side get surplus and artificial
    variables. Returns (optimal value, x).

    Raises ``InfeasibleError`` or ``UnboundedError``.
    """
    L = logging.getLogger(__name__)
    c = np.asarray(c, dtype=float).reshape(-1)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    m, n = A.shape
    if c.size != n or b.size != m:
        raise PreconditionError(f'Inconsistent LP shapes: c {c.shape}, A {A.shape}, b {b.shape}')
    flip = b < 0
    artRows = np.flatnonzero(flip)
    nArt = len(artRows)
    nCols = n + m + nArt
    sign = np.where(flip, -1., 1.)
    T = np.zeros((m, nCols + 1))
    T[:, :n] = A*sign[:, None]
    T[np.arange(m), n + np.arange(m)] = sign
    T[artRows, n + m + np.arange(nArt)] = 1.
    T[:, -1] = b*sign
    basis = n + np.arange(m)
    basis[artRows] = n + m + np.arange(nArt)
    if maxIterations is None: maxIterations = 100*(m + nCols)
    scale = max(1., float(np.abs(b).max())) if m else 1.
    if nArt:
        # phase 1: maximize minus the sum of artificial variables
        cost = np.zeros(nCols)
        cost[n + m:] = -1.
        _simplex_iterations(T, basis, cost, tolerance, maxIterations)
        residual = float(np.sum(T[basis >= n + m, -1]))
        if residual > tolerance*scale:
            raise InfeasibleError(f'Linear program is infeasible (phase 1 residual {residual:g})')
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] < n + m: continue
            candidates = np.flatnonzero(np.abs(T[i, :n + m]) > tolerance)
            if candidates.size:
                _pivot(T, basis, i, candidates[0])
            else:
                L.debug(f'Dropping redundant LP constraint #{i}')
                keep[i] = False
        T = np.concatenate([T[:, :n + m], T[:, -1:]], axis=1)[keep]
        basis = basis[keep]
        nCols = n + m
    cost = np.zeros(nCols)
    cost[:n] = c
    _simplex_iterations(T, basis, cost, tolerance, maxIterations)
    x = np.zeros(nCols)
    x[basis] = T[:, -1]
    x = np.maximum(x[:n], 0.)
    return float(c @ x), x

def basic_feasible_points(A, b, tolerance=1e-9):
    """
    Enumerates vertices of {x : A x <= b, x >= 0} by solving every system of
    n active constraints. Exponential in size, meant for cross-checks of
    tiny programs.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    m, n = A.shape
    G = np.vstack([A, -np.eye(n)])
    h = np.concatenate([b, np.zeros(n)])
    scale = max(1., float(np.abs(h).max()))
    points = {}
    for rows in itertools.combinations(range(m + n), n):
        M = G[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, h[list(rows)])
        if np.all(G @ x <= h + tolerance*scale):
            x = np.maximum(x, 0.)
            points.setdefault(tuple(np.round(x, 9)), x)
    return list(points.values())

#                                                   ________________________
# ________________________________________________/ Occupancy programs

def program_constraints(L, d):
    """
    Returns (A, b) of the occupancy polytope A x <= b (x >= 0 implied) with
    rows -(d_0 + ... + d_j) <= 1/l_{j+1}^2 - d for j < s and sum d_j <= d.
    """
    s = L.s
    A = np.zeros((s + 1, s + 1))
    b = np.zeros(s + 1)
    for j in range(s):
        A[j, :j + 1] = -1.
        b[j] = 1./L[j + 1]**2 - d
    A[s, :] = 1.
    b[s] = d
    return A, b

def lp_objective(L, occupancies):
    """sum_j tau_j^2 d_j/4, vectorized over leading axes."""
    x = np.asarray(occupancies, dtype=float)
    return (x*L.gaps**2/4).sum(axis=-1)

def _branches(L, x):
    tau = L.gaps
    lv = L.array[:-1]
    x = np.maximum(x, 0.)
    return tau*tau*x/4, tau*(np.sqrt(x) - lv*x)

def qcqp_objective(L, occupancies):
    """
    sum_j min{tau_j^2 d_j/4, tau_j(sqrt(d_j) - l_j d_j)}, vectorized over
    leading axes (for j=0 the second term is tau_0 sqrt(d_0)).
    """
    lin, sq = _branches(L, np.asarray(occupancies, dtype=float))
    return np.minimum(lin, sq).sum(axis=-1)

def lifted_objective(L, occupancies):
    """
    Same value as ``qcqp_objective()`` computed from the lifted form: each
    z_j is the largest value satisfying z_j <= tau_j^2 d_j/4 and
    z_j^2 + tau_j^2 l_j^2 d_j^2 + 2 tau_j l_j d_j z_j <= tau_j^2 d_j.
    """
    x = np.maximum(np.asarray(occupancies, dtype=float), 0.)
    tau = L.gaps
    lv = L.array[:-1]
    # z^2 + bq z + cq <= 0, bq^2 - 4 cq = 4 tau^2 d_j >= 0
    bq = 2*tau*lv*x
    cq = tau*tau*lv*lv*x*x - tau*tau*x
    root = (-bq + np.sqrt(np.maximum(bq*bq - 4*cq, 0.)))/2
    return np.minimum(tau*tau*x/4, root).sum(axis=-1)

#                       * * *   * * *   * * *

def tail_sum_limits(L, d):
    """Upper limits min(d, 1/l_k^2) of tail sums T_k, k = 1..s."""
    return np.minimum(float(d), 1./L.array[1:L.s + 1]**2)

def occupancies_from_tail_sums(T, d):
    """
    Maps tail sums T_k = d_k + ... + d_s (k = 1..s) to occupancies with
    d_0 = d - T_1 (the total is d at every maximizer since the j=0 term is
    increasing).
    """
    T = np.asarray(T, dtype=float)
    head = float(d) - T[..., :1]
    tail = T - np.concatenate([T[..., 1:], np.zeros(T.shape[:-1] + (1,))], axis=-1)
    return np.maximum(np.concatenate([head, tail], axis=-1), 0.)

def project_tail_sums(Y, hi):
    """
    Projects rows of ``Y`` onto {T : T_1 >= ... >= T_s, 0 <= T_k <= hi_k}:
    nonincreasing isotonic regression (min-max formula over block averages)
    followed by clipping to the nonincreasing limits.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    s = Y.shape[-1]
    C = np.concatenate([np.zeros(Y.shape[:-1] + (1,)), np.cumsum(Y, axis=-1)], axis=-1)
    i = np.arange(s)[:, None]
    j = np.arange(s)[None, :]
    valid = j >= i
    avg = (C[..., None, 1:] - C[..., :s, None])/np.maximum(j - i + 1, 1)
    avg = np.where(valid, avg, -np.inf)
    # max over blocks ending at or after k
    tailMax = np.flip(np.maximum.accumulate(np.flip(avg, axis=-1), axis=-1), axis=-1)
    U = np.where(valid, tailMax, np.inf).min(axis=-2)
    return np.clip(U, 0., hi)

def _supergradient(L, X):
    """Supergradient of QCQP objective with respect to tail sums."""
    lin, sq = _branches(L, X)
    tau = L.gaps
    lv = L.array[:-1]
    with np.errstate(divide='ignore', invalid='ignore'):
        slope = np.where(lin <= sq, tau*tau/4, tau*(.5/np.sqrt(X) - lv))
    return slope[..., 1:] - slope[..., :-1]

def qcqp_ascent(L, d, restarts=None, iterations=None, seed=None, nStages=4):
    """
    Projected supergradient ascent of the QCQP objective over tail sums,
    vectorized over random restarts. Each stage runs normalized steps of
    diminishing size radius/sqrt(k+1) from the best point of the previous
    stage, radius shrinks by 4 between stages.

    Returns (values, occupancies) of the best iterate of every restart.
    """
    if restarts is None: restarts = gSettings['qcqp-restarts']
    if iterations is None: iterations = gSettings['qcqp-iterations']
    if seed is None: seed = gSettings['qcqp-seed']
    s = L.s
    if 0 == s:
        x = np.array([[float(d)]])
        return qcqp_objective(L, x), x
    hi = tail_sum_limits(L, d)
    gen = RandomSource(seed, stream=s).generator()
    T = project_tail_sums(gen.random((restarts, s))*hi, hi)
    best = T.copy()
    bestVal = qcqp_objective(L, occupancies_from_tail_sums(T, d))
    perStage = max(1, iterations//nStages)
    radius = float(hi.max())
    for _ in range(nStages):
        T = best.copy()
        for k in range(perStage):
            g = _supergradient(L, occupancies_from_tail_sums(T, d))
            gn = np.linalg.norm(g, axis=-1, keepdims=True)
            T = project_tail_sums(T + (radius/math.sqrt(k + 1))*g/np.where(gn > 0, gn, 1.), hi)
            val = qcqp_objective(L, occupancies_from_tail_sums(T, d))
            better = val > bestVal
            best[better] = T[better]
            bestVal[better] = val[better]
        radius /= 4.
    return bestVal, occupancies_from_tail_sums(best, d)

def grid_bound(L, d, pitch=None, refinements=8):
    """
    Dense grid search of the QCQP objective over tail sums for s <= 2 with
    given pitch (default d/N, N from "qcqp-grid-pitch" setting), then
    zooming around the best node with ten times finer pitch.
    """
    s = L.s
    if s > 2:
        raise PreconditionError(f'Grid search is provided for s <= 2, got s={s}')
    if 0 == s:
        x = np.array([float(d)])
        return ProgramSolution(float(qcqp_objective(L, x)), x)
    if pitch is None: pitch = d/gSettings['qcqp-grid-pitch']
    hi = tail_sum_limits(L, d)
    lo, up = np.zeros(s), hi.copy()
    bestT, bestVal = None, -np.inf
    for _ in range(refinements + 1):
        axes = [np.unique(np.concatenate([np.arange(lo[k], up[k], pitch), [up[k]]]))
                for k in range(s)]
        T = np.stack([g.reshape(-1) for g in np.meshgrid(*axes, indexing='ij')], axis=-1)
        if 2 == s:
            T = T[T[:, 1] <= T[:, 0]]
        if T.size:
            val = qcqp_objective(L, occupancies_from_tail_sums(T, d))
            n = int(np.argmax(val))
            if val[n] > bestVal:
                bestT, bestVal = T[n].copy(), float(val[n])
        lo = np.maximum(bestT - pitch, 0.)
        up = np.minimum(bestT + pitch, hi)
        pitch /= 10.
    return ProgramSolution(bestVal, occupancies_from_tail_sums(bestT, d))

def brute_force_bound(L, d):
    """
    Maximizes the lifted objective over all integer occupancies of the
    polytope (integer ``d``, at most 10^7 candidate points).
    """
    d = int(d)
    s = L.s
    if (d + 1)**(s + 1) > 10**7:
        raise PreconditionError(f'Integer enumeration of (d+1)^(s+1) = {(d + 1)**(s + 1)}'
                ' points exceeds 10^7')
    X = np.stack([g.reshape(-1) for g in np.meshgrid(*([np.arange(d + 1)]*(s + 1)),
            indexing='ij')], axis=-1).astype(float)
    A, b = program_constraints(L, d)
    feasible = np.all(X @ A.T <= b + 1e-12*max(1., d), axis=-1)
    X = X[feasible]
    val = lifted_objective(L, X)
    n = int(np.argmax(val))
    return ProgramSolution(float(val[n]), X[n])
