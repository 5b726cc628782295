"""
Closed-form variance, code length and convergence bounds of nonuniform
quantization, worst-case variance programs and their sweeps.

All (1+o(1)) factors of asymptotic code length bounds are evaluated as 1 in
"nominal" mode (with C = b - 1), in "slack" mode the logarithmic terms (and
the constant subtracted from b) are multiplied by the "slack-factor"
setting.
"""

import math, logging

import numpy as np

from nuqkit.settings import gSettings
from nuqkit.errors import PreconditionError, NumericalError
from nuqkit.quantizer import levels_exponential, closed_form_variance
import nuqkit.programs as programs
from nuqkit.utils import progress_bar

def _check_sd(s, d):
    if isinstance(s, bool) or int(s) != s or s < 1:
        raise PreconditionError(f'Number of levels s must be an integer >= 1, got {s!r}')
    if isinstance(d, bool) or int(d) != d or d < 1:
        raise PreconditionError(f'Dimension d must be an integer >= 1, got {d!r}')
    return int(s), int(d)

#                                                     ______________________
# __________________________________________________/ Variance bounds

def epsilon_q(s, d):
    """
    Variance bound factor of exponential p=1/2 levels:
    1/8 + 2^{-2s-2} d if d < 2^{2s+1}, else 2^{-s} sqrt(d) - 7/8.
    Note the two branches are discontinuous at d = 2^{2s+1}.
    """
    s, d = _check_sd(s, d)
    if d < 2**(2*s + 1):
        return 1/8 + 2.**(-2*s - 2)*d
    return 2.**-s*math.sqrt(d) - 7/8

def epsilon_q_elementary(s, d):
    """1/8 + min(2^{-s} sqrt(d), 2^{-2s} d/4)"""
    s, d = _check_sd(s, d)
    return 1/8 + min(2.**-s*math.sqrt(d), 2.**(-2*s)*d/4)

def epsilon_q_sine(s, d):
    """1/8 + 2^{-2s} d/pi"""
    s, d = _check_sd(s, d)
    return 1/8 + 2.**(-2*s)*d/math.pi

def holder_constant(p):
    """K_p = (1/p)/(2/p - 1) ((1/p - 1)/(2/p - 1))^{1-p}"""
    if not 0 < p < 1:
        raise PreconditionError(f'Exponent must satisfy 0 < p < 1, got {p}')
    a = 2/p - 1
    return (1/p)/a*((1/p - 1)/a)**(1 - p)

def epsilon_q_holder(s, d, nGrid=2001):
    """
    1/8 + inf_{0<p<1} K_p 2^{(p-2)s} d^{1-p/2}, infimum taken over a
    uniform grid of exponents (any exponent gives a valid bound).
    """
    s, d = _check_sd(s, d)
    p = np.linspace(0., 1., nGrid + 2)[1:-1]
    a = 2/p - 1
    K = (1/p)/a*((1/p - 1)/a)**(1 - p)
    return 1/8 + float(np.min(K*2.**((p - 2)*s)*float(d)**(1 - p/2)))

def _hat_occupancies(s, d):
    if d < 2**(2*s):
        raise PreconditionError(f'd >= 2^(2s) violated: d={d} < {2**(2*s)}')
    return np.array([d - 2**(2*s)] + [3*2**(2*(s - j)) for j in range(1, s)] + [4], dtype=float)

def epsilon_q_hat_exact(s, d, levels=None):
    """
    Explicit variance bound obtained by evaluating the per-bin bound
    sum_j min{tau_j^2 d_j/4, tau_j(sqrt(d_j) - l_j d_j)} at occupancies
    (d - 2^{2s}, 3 2^{2(s-1)}, ..., 3 2^2, 4). Default levels are
    exponential with p=1/2.
    """
    s, d = _check_sd(s, d)
    if levels is None: levels = levels_exponential(.5, s)
    if levels.s != s:
        raise PreconditionError(f'Levels have {levels.s} internal levels, expected s={s}')
    return float(programs.qcqp_objective(levels, _hat_occupancies(s, d)))

def epsilon_q_hat_leading(s, d):
    """min{2^{-2s}(d - 2^{2s})/4, 2^{-s} sqrt(d - 2^{2s})}"""
    s, d = _check_sd(s, d)
    d0 = _hat_occupancies(s, d)[0]
    return min(2.**(-2*s)*d0/4, 2.**-s*math.sqrt(d0))

def lower_bound_construction(d, levels):
    """
    Returns (v, bound): all-ones vector of dimension d and the lower bound
    ||v||^2 l_1 sqrt(d)/2 on the variance of its quantization, valid for
    d >= (2/l_1)^2.
    """
    if isinstance(d, bool) or int(d) != d or d < 1:
        raise PreconditionError(f'Dimension d must be an integer >= 1, got {d!r}')
    d = int(d)
    l1 = levels[1]
    if d < (2/l1)**2 * (1 - 1e-12):
        raise PreconditionError(f'd >= (2/l_1)^2 violated: d={d} < {(2/l1)**2:g}')
    v = np.ones(d)
    return v, float(d)*l1*math.sqrt(d)/2

#                                                   ________________________
# ________________________________________________/ Code length bounds

def _slack(mode=None, slackFactor=None):
    if mode is None: mode = gSettings['bound-mode']
    if slackFactor is None: slackFactor = gSettings['slack-factor']
    if 'nominal' == mode:
        return 1.
    if 'slack' == mode:
        if slackFactor < 1:
            raise PreconditionError(f'Slack factor must be >= 1, got {slackFactor}')
        return float(slackFactor)
    raise PreconditionError(f'Unknown bound mode "{mode}", expected "nominal" or "slack"')

def n_sd(s, d):
    """n_{s,d} = 2^{2s} + 2^s sqrt(d)"""
    s, d = _check_sd(s, d)
    return 4.**s + 2.**s*math.sqrt(d)

def code_length_bound(s, d, b=32, mode=None, slackFactor=None):
    """
    Expected encoded bits of a gradient quantized with exponential p=1/2
    levels:

        C + 3n + n log2(d/n) + n log2 log2(8(2^{2s} + d)/n)

    with n = n_{s,d}, C = b - 1. Requires n <= d/e.
    """
    s, d = _check_sd(s, d)
    f = _slack(mode, slackFactor)
    n = n_sd(s, d)
    if n > d/math.e:
        raise PreconditionError(f'2^(2s) + 2^s sqrt(d) <= d/e violated: {n:g} > {d/math.e:g}'
                f' (s={s}, d={d})')
    return (b - f) + 3*n + f*n*math.log2(d/n) \
            + f*n*math.log2(math.log2(8*(4.**s + d)/n))

def qsgd_bounds(s, d, b=32, mode=None, slackFactor=None):
    """
    Variance factor and code length bound of uniform quantization:
    (min(d/s^2, sqrt(d)/s),
     3(s^2 + s sqrt(d)) + 3/2 (s^2 + s sqrt(d)) log2(2(s^2 + d)/(s^2 + sqrt(d))) + b)
    """
    s, d = _check_sd(s, d)
    f = _slack(mode, slackFactor)
    eps = min(d/s**2, math.sqrt(d)/s)
    m = s*s + s*math.sqrt(d)
    return eps, 3*m + 1.5*f*m*math.log2(2*(s*s + d)/(s*s + math.sqrt(d))) + b

def bits_comparison(s, d, b=32):
    """
    Products N_Q eps_Q and N~_Q eps~_Q controlling the expected number of
    bits to reach given accuracy, and their ratio (below 1 when nonuniform
    levels need fewer bits).
    """
    nq = code_length_bound(s, d, b)
    eq = epsilon_q(s, d)
    qe, qn = qsgd_bounds(s, d, b)
    return { 'nuq_product': nq*eq
           , 'qsgd_product': qn*qe
           , 'ratio': nq*eq/(qn*qe)
           }

#                                                      _____________________
# ___________________________________________________/ Worst-case programs

def lp_bound(levels, d):
    """
    Maximum of sum_j tau_j^2 d_j/4 over the occupancy polytope. Solved by
    dense simplex; for s <= 3 cross-checked against enumeration of basic
    feasible points.
    """
    L = logging.getLogger(__name__)
    A, b = programs.program_constraints(levels, d)
    c = levels.gaps**2/4
    value, x = programs.simplex_maximize(c, A, b)
    if levels.s <= 3:
        vertexValue, vertex = max(((float(c @ p), p) for p in programs.basic_feasible_points(A, b)),
                key=lambda item: item[0])
        if abs(vertexValue - value) > 1e-9*max(1., abs(value)):
            L.warning(f'LP simplex optimum {value!r} differs from vertex enumeration'
                    f' {vertexValue!r} for {levels!r}, d={d}')
            if vertexValue > value:
                value, x = vertexValue, vertex
    return programs.ProgramSolution(value, x)

def qcqp_bound(levels, d, strict=False):
    """
    Maximum of sum_j min{tau_j^2 d_j/4, tau_j(sqrt(d_j) - l_j d_j)} over the
    occupancy polytope (a concave maximization).

    Solved by projected supergradient ascent with random restarts; the
    result is the best of ascent, polytope vertices (s <= 4) and zooming
    grid search (s <= 2). Disagreement of restarts beyond the
    "qcqp-rel-tolerance" setting is logged as non-convergence (raised as
    ``NumericalError`` if ``strict``).
    """
    L = logging.getLogger(__name__)
    values, occupancies = programs.qcqp_ascent(levels, d)
    n = int(np.argmax(values))
    best = programs.ProgramSolution(float(values[n]), occupancies[n])
    if not np.all(np.isfinite(values)):
        raise NumericalError(f'Non-finite QCQP objective for {levels!r}, d={d}')
    candidates = [best]
    if levels.s <= 4:
        A, b = programs.program_constraints(levels, d)
        for p in programs.basic_feasible_points(A, b):
            candidates.append(programs.ProgramSolution(float(programs.qcqp_objective(levels, p)), p))
    if levels.s <= 2:
        candidates.append(programs.grid_bound(levels, d))
    top = max(candidates, key=lambda c: c.value)
    spread = (float(values.max()) - float(values.min()))/max(abs(top.value), 1e-300)
    if spread > gSettings['qcqp-rel-tolerance']:
        msg = (f'QCQP restarts disagree by {100*spread:.3g}% for {levels!r}, d={d};'
               ' subgradient ascent did not converge')
        if strict:
            raise NumericalError(msg)
        L.warning(msg)
    L.debug(f'QCQP bound {top.value:.8g} for {levels!r}, d={d}')
    return top

def optimal_p(s, d):
    """
    Minimizes the QCQP bound over exponential levels (0, p^s, ..., p, 1):
    grid of "optimal-p-grid" points on "optimal-p-range", then golden
    section within the bracket of the best grid node. Returns (p*, bound).
    """
    L = logging.getLogger(__name__)
    s, d = _check_sd(s, d)
    lo, hi = gSettings['optimal-p-range']
    nGrid = gSettings['optimal-p-grid']
    tol = gSettings['optimal-p-tolerance']
    cache = {}
    def f(p):
        if p not in cache:
            cache[p] = qcqp_bound(levels_exponential(p, s), d).value
        return cache[p]
    grid = [float(p) for p in np.round(np.linspace(lo, hi, nGrid), 12)]
    vals = [f(p) for p in grid]
    n = int(np.argmin(vals))
    a, b = grid[max(n - 1, 0)], grid[min(n + 1, nGrid - 1)]
    g = (math.sqrt(5) - 1)/2
    x1, x2 = b - g*(b - a), a + g*(b - a)
    while b - a > tol:
        if f(x1) <= f(x2):
            b, x2 = x2, x1
            x1 = b - g*(b - a)
        else:
            a, x1 = x1, x2
            x2 = a + g*(b - a)
    pStar = min(cache, key=lambda p: (cache[p], p))
    L.debug(f'Optimal p for s={s}, d={d}: {pStar:.6g} (grid minimum at {grid[n]:.3g})')
    return pStar, cache[pStar]

#                                              _____________________________
# ___________________________________________/ Convergence bounds

class MomentumBoundInputs(object):
    """
    Constants of momentum convergence bounds: momentum ``mu`` in [0, 1),
    mode ``l`` (0 heavy-ball, 1 Nesterov), step ``alpha``, iterations ``T``,
    workers ``K``, second-moment bound ``B``, gradient norm bound ``V``,
    smoothness ``beta``, initial gap ``f0Gap`` = f(w_0) - f* and
    ``w0Dist2`` = ||w_0 - w*||^2.
    """
    def __init__(self, mu, l, alpha, T, K, B, V, beta=0., f0Gap=0., w0Dist2=0.):
        if not 0 <= mu < 1:
            raise PreconditionError(f'Momentum must satisfy 0 <= mu < 1, got {mu}')
        if l not in (0, 1):
            raise PreconditionError(f'Momentum mode l must be 0 or 1, got {l}')
        if not alpha > 0:
            raise PreconditionError(f'Learning rate must be > 0, got {alpha}')
        if T < 0 or K < 1:
            raise PreconditionError(f'Expected T >= 0 and K >= 1, got T={T}, K={K}')
        for name, value in (('B', B), ('V', V), ('beta', beta), ('f0Gap', f0Gap), ('w0Dist2', w0Dist2)):
            if not value >= 0:
                raise PreconditionError(f'{name} must be non-negative, got {value}')
        self.mu, self.l, self.alpha = float(mu), int(l), float(alpha)
        self.T, self.K = int(T), int(K)
        self.B, self.V, self.beta = float(B), float(V), float(beta)
        self.f0Gap, self.w0Dist2 = float(f0Gap), float(w0Dist2)

def momentum_convex_gap_bound(inputs, epsQ):
    """
    mu(f0 - f*)/((1-mu)(T+1)) + (1-mu)||w0 - w*||^2/(2 alpha (T+1))
        + alpha(1 + 2 l mu)(V^2 + (1 + eps_Q)B/K)/(2(1-mu))
    """
    i = inputs
    return i.mu*i.f0Gap/((1 - i.mu)*(i.T + 1)) \
         + (1 - i.mu)*i.w0Dist2/(2*i.alpha*(i.T + 1)) \
         + i.alpha*(1 + 2*i.l*i.mu)*(i.V**2 + (1 + epsQ)*i.B/i.K)/(2*(1 - i.mu))

def momentum_nonconvex_bound(inputs, epsQ, C=1.):
    """
    2(f0 - f*)(1-mu)/(alpha(T+1)) + C V~/((1-mu)^3 sqrt(T+1)) with
    V~ = beta(mu^2((1-mu)l - 1)^2 + (1-mu)^2)(V^2 + (1 + eps_Q)B/K).
    """
    i = inputs
    vTilde = i.beta*(i.mu**2*((1 - i.mu)*i.l - 1)**2 + (1 - i.mu)**2) \
            *(i.V**2 + (1 + epsQ)*i.B/i.K)
    return 2*i.f0Gap*(1 - i.mu)/(i.alpha*(i.T + 1)) + C*vTilde/((1 - i.mu)**3*math.sqrt(i.T + 1))

def nonconvex_gradient_bound(beta, f0Gap, T, epsQ, B, K):
    """beta(f0 - f*)/T + 2(1 + eps_Q)B/K (step alpha < 2/beta)"""
    if T < 1 or K < 1:
        raise PreconditionError(f'Expected T >= 1 and K >= 1, got T={T}, K={K}')
    return beta*f0Gap/T + 2*(1 + epsQ)*B/K

def convex_learning_rate(beta, K, R, B, T):
    """1/(beta + sqrt(K)/gamma) with gamma = R/sqrt(B T)"""
    if not (R > 0 and B > 0 and T >= 1 and K >= 1):
        raise PreconditionError('Expected R > 0, B > 0, T >= 1, K >= 1')
    gamma = R/math.sqrt(B*T)
    return 1/(beta + math.sqrt(K)/gamma)

def async_step_condition(rate, beta, J, tau, t):
    """
    Returns (lhs, satisfied) of beta J a_t + 2 beta^2 J^2 tau a_t
    sum_{i=1..tau} a_{t+i} <= 1 for learning rate schedule ``rate``.
    """
    a = rate(t)
    lhs = beta*J*a + 2*beta**2*J**2*tau*a*sum(rate(t + i) for i in range(1, tau + 1))
    return lhs, lhs <= 1

#                                                         __________________
# ______________________________________________________/ Reports, sweeps

class BoundReport(object):
    """
    Bounds evaluated for (s, d, b) and, optionally, a level sequence.
    Entries not defined for the inputs (failed precondition) are ``None``.
    """
    def __init__(self, s, d, b, levels=None, strict=True):
        L = logging.getLogger(__name__)
        self.s, self.d, self.b = s, d, b
        self.levels = levels
        self.epsQ = epsilon_q(s, d)
        self.epsQHat = None
        self.epsQHatLeading = None
        if d >= 2**(2*s):
            self.epsQHat = epsilon_q_hat_exact(s, d)
            self.epsQHatLeading = epsilon_q_hat_leading(s, d)
            if d >= 2**(2*s + 1) and self.epsQHatLeading > self.epsQ:
                L.warning(f'Leading term of explicit bound {self.epsQHatLeading:g} exceeds'
                        f' eps_Q={self.epsQ:g} at s={s}, d={d}')
        self.nQError = None
        try:
            self.nQ = code_length_bound(s, d, b)
        except PreconditionError as e:
            if strict: raise
            L.warning(f'Code length bound undefined: {e}')
            self.nQ, self.nQError = None, str(e)
        self.nSD = n_sd(s, d)
        self.qsgdEps, self.qsgdN = qsgd_bounds(s, d, b)
        self.epsLP = self.epsQP = None
        if levels is not None:
            self.epsLP = lp_bound(levels, d).value
            self.epsQP = qcqp_bound(levels, d).value

    def to_dict(self):
        d = { 's': self.s, 'd': self.d, 'b': self.b
            , 'eps_q': self.epsQ
            , 'eps_q_hat': self.epsQHat
            , 'eps_q_hat_leading': self.epsQHatLeading
            , 'n_q': self.nQ
            , 'n_sd': self.nSD
            , 'qsgd_eps': self.qsgdEps
            , 'qsgd_n': self.qsgdN
            }
        if self.nQError is not None:
            d['n_q_error'] = self.nQError
        if self.levels is not None:
            d['levels'] = list(self.levels.levels)
            d['eps_lp'] = self.epsLP
            d['eps_qp'] = self.epsQP
        return d

def bound_report(s, d, b=32, levels=None, strict=True):
    return BoundReport(s, d, b, levels=levels, strict=strict)

gSweepColumns = ('s', 'd', 'p', 'eps_q', 'eps_lp', 'eps_qp', 'n_q')

def bound_sweep(sValues, dValues, pValues=(.5,), b=32, progress=None):
    """
    Yields dictionaries with ``gSweepColumns`` keys for every (s, d, p)
    combination, in this nesting order. ``n_q`` is ``None`` where its
    precondition does not hold.
    """
    combos = [(s, d, p) for s in sValues for d in dValues for p in pValues]
    for s, d, p in progress_bar(combos, 'bounds', total=len(combos), progress=progress):
        levels = levels_exponential(p, s)
        try:
            nq = code_length_bound(s, d, b)
        except PreconditionError:
            nq = None
        yield { 's': s, 'd': d, 'p': p
              , 'eps_q': epsilon_q(s, d)
              , 'eps_lp': lp_bound(levels, d).value
              , 'eps_qp': qcqp_bound(levels, d).value
              , 'n_q': nq
              }

def sampled_variance_ratio(v, levels):
    """closed_form_variance(v)/||v||^2 of L2-normalized quantization."""
    v = np.asarray(v, dtype=float)
    n2 = float(v @ v)
    if 0 == n2:
        return 0.
    return closed_form_variance(v, levels, 'l2')/n2
