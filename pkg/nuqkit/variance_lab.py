"""
Monte Carlo estimators of quantizer statistics and comparisons of
quantization schemes.

Draws are generated in chunks of "mc-chunk-size" samples; chunk number k
takes its uniforms from ``RandomSource(seed).child(k)``, so estimates do
not depend on how chunks are distributed between workers.
"""

import math, logging
from collections import namedtuple

import numpy as np

from nuqkit.settings import gSettings
from nuqkit.errors import PreconditionError, NumericalError
from nuqkit.random_source import RandomSource
from nuqkit.quantizer import gSchemes, _check_normalization, _normalized \
        , stochastic_level_indices, coordinate_variances, closed_form_variance \
        , levels_exponential, levels_uniform, levels_uniform_gap, scheme_levels
from nuqkit.utils import progress_bar

VarianceEstimate = namedtuple('VarianceEstimate', ('mean', 'stderr', 'samples'))
SeparationResult = namedtuple('SeparationResult', ('vector', 'varNuq', 'varQinf'))

# QSGDinf level conventions: gap 1/s (levels 0, 1/s, ..., 1) and gap 1/(s+1)
# (s internal levels)
gQinfConventions = {
    'gap_1_over_s'        : levels_uniform_gap,
    'gap_1_over_s_plus_1' : levels_uniform,
}

def _normalization(scheme):
    if scheme in gSchemes:
        return gSchemes[scheme]
    return _check_normalization(scheme)

class _ShiftedMoments(object):
    """
    Accumulates mean and variance along first axis using deviations from
    the first sample (exact zero variance for constant data).
    """
    def __init__(self):
        self.n = 0
        self.shift = None
        self.s1 = self.s2 = 0.

    def add(self, X):
        if self.shift is None:
            self.shift = X[0].copy()
        D = X - self.shift
        self.n += len(X)
        self.s1 = self.s1 + D.sum(axis=0)
        self.s2 = self.s2 + (D*D).sum(axis=0)

    def estimate(self):
        m = self.s1/self.n
        var = np.maximum(self.s2 - self.n*m*m, 0.)/(self.n - 1)
        return self.shift + m, np.sqrt(var/self.n)

def _as_source(seed):
    return seed if isinstance(seed, RandomSource) else RandomSource(seed)

def quantized_draws(v, scheme, L, n, seed):
    """
    Yields chunks (arrays of shape (m, d)) of dequantized independent
    quantizations of ``v``, n rows in total. ``seed`` is an integer or a
    ``RandomSource``.
    """
    v, norm, r = _normalized(v, _normalization(scheme))
    chunk = gSettings['mc-chunk-size']
    root = _as_source(seed)
    sign = np.sign(v)
    for k, start in enumerate(range(0, n, chunk)):
        m = min(chunk, n - start)
        if 0 == norm:
            yield np.zeros((m, len(v)))
            continue
        u = root.child(k).uniforms((m, len(v)))
        yield norm*sign*L.array[stochastic_level_indices(r, L.array, u)]

def within_stderr(expected, estimate, k=None):
    """
    Whether Monte Carlo ``estimate`` agrees with ``expected`` value within
    ``k`` standard errors ("stderr-tolerance" setting by default).
    """
    if k is None: k = gSettings['stderr-tolerance']
    return bool(abs(estimate.mean - expected) <= k*estimate.stderr + 1e-12*max(1., abs(expected)))

def _check_n(n):
    if n < 100:
        raise PreconditionError(f'Number of Monte Carlo draws must be >= 100, got {n}')

def mc_mean(v, scheme, L, n, seed):
    """
    Per-coordinate Monte Carlo mean of the dequantized vector; returns list
    of ``VarianceEstimate``.
    """
    _check_n(n)
    acc = _ShiftedMoments()
    for X in quantized_draws(v, scheme, L, n, seed):
        acc.add(X)
    mean, stderr = acc.estimate()
    return [VarianceEstimate(float(m), float(e), n) for m, e in zip(mean, stderr)]

def mc_variance(v, scheme, L, n, seed):
    """Monte Carlo estimate of E||Q(v) - v||^2."""
    _check_n(n)
    v = np.asarray(v, dtype=float)
    acc = _ShiftedMoments()
    for X in quantized_draws(v, scheme, L, n, seed):
        E = X - v
        acc.add((E*E).sum(axis=1)[:, None])
    mean, stderr = acc.estimate()
    return VarianceEstimate(float(mean[0]), float(stderr[0]), n)

def normalized_variance(samples, scheme, L, n=None, seed=None):
    """
    Ratio of mean per-coordinate variance of the (quantized) gradient to
    mean per-coordinate second moment of the gradient. ``samples`` are
    repeated stochastic gradient evaluations at one point (rows). With
    ``scheme`` of None or "full_precision" only sampling randomness counts;
    otherwise quantization variance is taken exactly (``n`` is None) or
    estimated from ``n`` draws per sample.
    """
    G = np.atleast_2d(np.asarray(samples, dtype=float))
    if len(G) < 2:
        raise PreconditionError(f'At least 2 repeated gradient evaluations are needed, got {len(G)}')
    second = float((G*G).mean(axis=0).sum())
    if 0 == second:
        raise PreconditionError('Degenerate (all-zero) gradient samples')
    if scheme in (None, 'full_precision') or n is None:
        D = G - G[0]
        numer = float(np.maximum((D*D).mean(axis=0) - D.mean(axis=0)**2, 0.).sum())
        if scheme not in (None, 'full_precision'):
            numer += float(np.mean([coordinate_variances(g, L, _normalization(scheme)).sum()
                    for g in G]))
        return numer/second
    if seed is None:
        raise PreconditionError('Seed is required for Monte Carlo normalized variance')
    acc = _ShiftedMoments()
    root = RandomSource(seed)
    for i, g in enumerate(G):
        for X in quantized_draws(g, scheme, L, n, root.child(i)):
            acc.add(X)
    D1, D2 = acc.s1/acc.n, acc.s2/acc.n
    return float(np.maximum(D2 - D1*D1, 0.).sum())/second

#                                                         __________________
# ______________________________________________________/ Test corpora

gCorpusKinds = ('gaussian', 'sparse', 'heavy_tailed')

def make_vector(kind, d, gen, k=None):
    """Random vector of given kind drawn from numpy generator ``gen``."""
    if 'gaussian' == kind:
        return gen.standard_normal(d)
    if 'sparse' == kind:
        if k is None: k = max(1, d//16)
        v = np.zeros(d)
        v[gen.choice(d, size=min(k, d), replace=False)] = gen.standard_normal(min(k, d))
        return v
    if 'heavy_tailed' == kind:
        return gen.standard_t(2, size=d)
    raise KeyError(kind)

def make_corpus(d, count, seed, kinds=gCorpusKinds):
    """Returns list of (vector id, kind, vector), ``count`` vectors per kind."""
    out = []
    for nKind, kind in enumerate(kinds):
        gen = RandomSource(seed).child(nKind).generator()
        for i in range(count):
            out.append((f'{kind}-{i}', kind, make_vector(kind, d, gen)))
    return out

gCorpusColumns = ('vector_id', 'scheme', 's', 'closed_form', 'mc_mean', 'mc_stderr', 'agrees')

def variance_corpus(d, count, sValues, schemes, n, seed, p=.5, progress=None):
    """
    Yields rows comparing closed-form variance with its Monte Carlo estimate
    over a random corpus, for every (scheme, s).
    """
    corpus = make_corpus(d, count, seed)
    combos = [(scheme, s) for scheme in schemes for s in sValues]
    for scheme, s in progress_bar(combos, 'variance', total=len(combos), progress=progress):
        normalization, L = scheme_levels(scheme, s, p)
        for nVec, (vid, kind, v) in enumerate(corpus):
            est = mc_variance(v, normalization, L, n, RandomSource(seed).child(s, nVec))
            closedForm = closed_form_variance(v, L, normalization)
            yield { 'vector_id': vid, 'scheme': scheme, 's': s
                  , 'closed_form': closedForm
                  , 'mc_mean': est.mean, 'mc_stderr': est.stderr
                  , 'agrees': within_stderr(closedForm, est)
                  }

#                                                      _____________________
# ___________________________________________________/ Separating vectors

class SeparationInputs(object):
    """
    Parameters (d, s, K1, K2) of a vector with one unit coordinate and d-1
    small ones, for which nonuniform levels have smaller variance than
    max-norm uniform ones. Constructor checks the sufficient conditions:

        K1/((d-1) sqrt(1 + K2^2/(d-1))) < 2^-s
        (1 + K1^2/(d-1)) K1 (K1/(4(d-1)) + 2^-s) < K2 (1/s - K1/(d-1))

    with 0 < K2 < K1 <= sqrt(d).
    """
    def __init__(self, d, s, K1, K2):
        if d < 2 or s < 1:
            raise PreconditionError(f'Expected d >= 2 and s >= 1, got d={d}, s={s}')
        if not 0 < K2 < K1:
            raise PreconditionError(f'0 < K2 < K1 violated: K1={K1}, K2={K2}')
        if K1 > math.sqrt(d):
            raise PreconditionError(f'K1 <= sqrt(d) violated: K1={K1} > {math.sqrt(d):g}')
        c1 = K1/((d - 1)*math.sqrt(1 + K2**2/(d - 1)))
        if not c1 < 2.**-s:
            raise PreconditionError(f'K1/((d-1)sqrt(1+K2^2/(d-1))) < 2^-s violated: {c1:g} >= {2.**-s:g}')
        lhs = (1 + K1**2/(d - 1))*K1*(.25*K1/(d - 1) + 2.**-s)
        rhs = K2*(1/s - K1/(d - 1))
        if not lhs < rhs:
            raise PreconditionError('(1+K1^2/(d-1)) K1 (K1/(4(d-1)) + 2^-s) < K2 (1/s - K1/(d-1))'
                    f' violated: {lhs:g} >= {rhs:g}')
        self.d, self.s, self.K1, self.K2 = int(d), int(s), float(K1), float(K2)

    def to_dict(self):
        return {'d': self.d, 's': self.s, 'K1': self.K1, 'K2': self.K2}

    def __repr__(self):
        return f'SeparationInputs(d={self.d}, s={self.s}, K1={self.K1:g}, K2={self.K2:g})'

def separation_vector(inputs, convention='gap_1_over_s', scale=1.):
    """
    Builds v = scale*(1, K1/(d-1), ..., K1/(d-1)) and returns closed-form
    variances under nonuniform p=1/2 levels (L2 norm) and uniform levels
    of the given convention (max-norm).
    """
    if convention not in gQinfConventions:
        raise PreconditionError(f'Unknown QSGDinf convention "{convention}"')
    d, s = inputs.d, inputs.s
    v = np.full(d, inputs.K1/(d - 1))
    v[0] = 1.
    v *= scale
    varNuq = closed_form_variance(v, levels_exponential(.5, s), 'l2')
    varQinf = closed_form_variance(v, gQinfConventions[convention](s), 'linf')
    return SeparationResult(v, varNuq, varQinf)

def separation_report(inputs):
    """Variances under both QSGDinf conventions, with separation flags."""
    report = {'inputs': inputs.to_dict()}
    for convention in gQinfConventions:
        res = separation_vector(inputs, convention)
        report[convention] = { 'var_nuq': res.varNuq
                             , 'var_qinf': res.varQinf
                             , 'separated': bool(res.varNuq < res.varQinf)
                             }
    return report

def find_separation_inputs(sValues=(1, 2, 3), dValues=tuple(2**k for k in range(6, 15)),
        k2Fractions=(.9, .75, .6), convention='gap_1_over_s'):
    """
    Searches (s, d, K1, K2) grid, in this nesting order, for inputs
    satisfying the separation conditions with strict variance ordering
    under given convention. Returns ``SeparationInputs``.
    """
    L = logging.getLogger(__name__)
    for s in sValues:
        for d in dValues:
            for K1 in sorted(set([1., 2., 4.] + [float(math.sqrt(d))])):
                for f in k2Fractions:
                    try:
                        inputs = SeparationInputs(d, s, K1, f*K1)
                    except PreconditionError as e:
                        L.debug(f'Rejected s={s}, d={d}, K1={K1:g}, K2={f*K1:g}: {e}')
                        continue
                    res = separation_vector(inputs, convention)
                    if res.varNuq < res.varQinf:
                        L.info(f'Separating inputs found: {inputs!r}')
                        return inputs
    raise NumericalError('No separating inputs found on the search grid')
