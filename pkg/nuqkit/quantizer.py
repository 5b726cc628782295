"""
Nonuniform stochastic quantization of real vectors.

A vector v is normalized by its L2 (or L-infinity) norm, each normalized
magnitude r_i = |v_i|/norm is located between two adjacent levels
l_j <= r_i <= l_{j+1} of a ``LevelSequence`` and rounded up with probability
(r_i - l_j)/(l_{j+1} - l_j), down otherwise, so the quantized vector is an
unbiased estimate of v. Result is kept sparse: only coordinates rounded to a
nonzero level are stored, as (index, sign, level index) triplets.
"""

import math
from collections import namedtuple

import numpy as np

from nuqkit.settings import gSettings
from nuqkit.errors import PreconditionError, NumericalError

# Normalization schemes
gNormalizations = ('l2', 'linf')
# Named quantization schemes mapped to their normalization; levels are built
# by `scheme_levels()`
gSchemes = {
    'nuq'      : 'l2',
    'qsgd_l2'  : 'l2',
    'qsgd_inf' : 'linf',
}

LevelLocation = namedtuple('LevelLocation', ('bin', 'upperProb', 'gap'))

#                                                            _______________
# _________________________________________________________/ Levels sequence

class LevelSequence(object):
    """
    Strictly increasing sequence of quantization levels l_0=0 < l_1 < ... <
    l_{s+1}=1 with ``s`` internal levels.

    If built by ``levels_exponential()`` the exponential base is kept in
    ``base`` property.
    """
    def __init__(self, levels, base=None):
        levels = tuple(float(l) for l in levels)
        if len(levels) < 2:
            raise PreconditionError('Level sequence must contain at least 0 and 1,'
                    f' got {levels}')
        if levels[0] != 0. or levels[-1] != 1.:
            raise PreconditionError('Level sequence must start with exactly 0 and'
                    f' end with exactly 1, got {levels}')
        for nLevel, (a, b) in enumerate(zip(levels[:-1], levels[1:])):
            if not a < b:
                raise PreconditionError('Levels are not strictly increasing at'
                        f' #{nLevel + 1}: {a!r} >= {b!r}')
        self._levels = levels
        self._array = np.array(levels)
        self._array.flags.writeable = False
        self._base = base

    @property
    def levels(self):
        return self._levels

    @property
    def s(self):
        """Number of internal levels."""
        return len(self._levels) - 2

    @property
    def array(self):
        """Read-only numpy array of levels."""
        return self._array

    @property
    def gaps(self):
        """Gaps tau_j = l_{j+1} - l_j, j = 0..s"""
        return np.diff(self._array)

    @property
    def base(self):
        return self._base

    def is_power_of_half(self):
        """True if levels are exactly (0, 2^-s, ..., 1/2, 1)."""
        s = self.s
        return all(self._levels[j] == 2.**(j - s - 1) for j in range(1, s + 2))

    def __len__(self):
        return len(self._levels)

    def __getitem__(self, j):
        return self._levels[j]

    def __iter__(self):
        return iter(self._levels)

    def __eq__(self, other):
        if not isinstance(other, LevelSequence): return NotImplemented
        return self._levels == other._levels

    def __hash__(self):
        return hash(self._levels)

    def __repr__(self):
        return 'LevelSequence(' + ', '.join(f'{l:.6g}' for l in self._levels) + ')'

def _check_s(s, minimum=1):
    if isinstance(s, bool) or not isinstance(s, (int, np.integer)) or s < minimum:
        raise PreconditionError(f'Number of levels s must be an integer >= {minimum}, got {s!r}')
    return int(s)

def levels_exponential(p, s):
    """Exponentially spaced levels (0, p^s, ..., p^2, p, 1)."""
    s = _check_s(s)
    p = float(p)
    if not 0. < p < 1.:
        raise PreconditionError(f'Exponential base must satisfy 0 < p < 1, got {p}')
    return LevelSequence([0.] + [p**k for k in range(s, 0, -1)] + [1.], base=p)

def levels_uniform(s):
    """Uniform grid with s internal levels, gap 1/(s+1)."""
    s = _check_s(s)
    return LevelSequence([j/(s + 1) for j in range(s + 2)])

def levels_uniform_gap(s):
    """
    Uniform grid (0, 1/s, ..., 1) with gap 1/s (i.e. s-1 internal levels);
    for s=1 yields the three-level {-1, 0, 1} grid.
    """
    s = _check_s(s)
    return LevelSequence([j/s for j in range(s + 1)])

def scheme_levels(scheme, s, p=0.5):
    """
    Returns (normalization, levels) pair of named scheme: ``nuq`` (exponential
    levels, L2 norm), ``qsgd_l2`` (uniform levels, L2 norm), ``qsgd_inf``
    (uniform levels, max-norm).
    """
    if scheme not in gSchemes:
        raise PreconditionError(f'Unknown quantization scheme "{scheme}", expected'
                ' one of: ' + ', '.join(gSchemes))
    if 'nuq' == scheme:
        return gSchemes[scheme], levels_exponential(p, s)
    return gSchemes[scheme], levels_uniform(s)

#                                                           ________________
# ________________________________________________________/ Quantized vector

class QuantizedVector(object):
    """
    Sparse quantized form of a vector: normalization scalar, dimension and
    entries (index, sign, level index) of coordinates rounded to nonzero
    level. Indices are strictly increasing, level indices are >= 1.
    """
    def __init__(self, norm, dimension, indices=(), signs=(), levelIndices=()):
        norm = float(norm)
        if not math.isfinite(norm) or norm < 0:
            raise PreconditionError(f'Quantized vector norm must be finite and non-negative, got {norm}')
        dimension = int(dimension)
        if dimension < 1:
            raise PreconditionError(f'Dimension must be positive, got {dimension}')
        indices = np.array(indices, dtype=np.int64).reshape(-1)
        signs = np.array(signs, dtype=np.int8).reshape(-1)
        levelIndices = np.array(levelIndices, dtype=np.int64).reshape(-1)
        if not (len(indices) == len(signs) == len(levelIndices)):
            raise PreconditionError('Entries of quantized vector have different lengths:'
                    f' {len(indices)} indices, {len(signs)} signs, {len(levelIndices)} levels')
        if len(indices):
            if 0 == norm:
                raise PreconditionError('Zero norm quantized vector can not have entries')
            if indices[0] < 0 or indices[-1] >= dimension or np.any(np.diff(indices) <= 0):
                raise PreconditionError('Quantized vector indices must be strictly'
                        f' increasing within [0, {dimension})')
            if not np.all(np.abs(signs) == 1):
                raise PreconditionError('Signs of quantized vector must be -1 or +1')
            if np.any(levelIndices < 1):
                raise PreconditionError('Level index 0 can not be stored in quantized vector')
        for a in (indices, signs, levelIndices):
            a.flags.writeable = False
        self._norm = norm
        self._dimension = dimension
        self._indices = indices
        self._signs = signs
        self._levelIndices = levelIndices

    @property
    def norm(self):
        return self._norm

    @property
    def dimension(self):
        return self._dimension

    @property
    def indices(self):
        return self._indices

    @property
    def signs(self):
        return self._signs

    @property
    def levelIndices(self):
        return self._levelIndices

    @property
    def nnz(self):
        return len(self._indices)

    @property
    def entries(self):
        return list(zip(self._indices.tolist(), self._signs.tolist(), self._levelIndices.tolist()))

    def rounded(self, floatBits):
        """
        Returns copy with norm rounded to the wire precision of a codec
        (binary32 or binary64).
        """
        if 64 == floatBits:
            return self
        if 32 != floatBits:
            raise PreconditionError(f'Float width must be 32 or 64 bits, got {floatBits}')
        norm = float(np.float32(self._norm))
        if not math.isfinite(norm) or (0 == norm and self.nnz):
            raise NumericalError(f'Norm {self._norm!r} is not representable as binary32')
        return QuantizedVector(norm, self._dimension, self._indices, self._signs, self._levelIndices)

    def to_dict(self):
        return { 'norm': self._norm
               , 'dimension': self._dimension
               , 'entries': [list(e) for e in self.entries]
               }

    def __eq__(self, other):
        if not isinstance(other, QuantizedVector): return NotImplemented
        return self._norm == other._norm \
           and self._dimension == other._dimension \
           and np.array_equal(self._indices, other._indices) \
           and np.array_equal(self._signs, other._signs) \
           and np.array_equal(self._levelIndices, other._levelIndices)

    def __repr__(self):
        return f'QuantizedVector(norm={self._norm!r}, dimension={self._dimension}, nnz={self.nnz})'

class BucketSpec(object):
    """
    Partitions vector of dimension d into ceil(d/B) consecutive buckets, all
    but the last having exactly B coordinates.
    """
    def __init__(self, bucketSize):
        if isinstance(bucketSize, bool) or not isinstance(bucketSize, (int, np.integer)) \
                or bucketSize < 1:
            raise PreconditionError(f'Bucket size must be a positive integer, got {bucketSize!r}')
        self._bucketSize = int(bucketSize)

    @property
    def bucketSize(self):
        return self._bucketSize

    def n_buckets(self, d):
        return -(-d // self._bucketSize)

    def slices(self, d):
        return [slice(b, min(b + self._bucketSize, d)) for b in range(0, d, self._bucketSize)]

    def __repr__(self):
        return f'BucketSpec({self._bucketSize})'

def as_bucket_spec(bucket, d):
    """
    Converts ``None``, integer or ``BucketSpec`` to ``BucketSpec``; ``None``
    means the whole vector as single bucket.
    """
    if bucket is None:
        return BucketSpec(max(d, 1))
    if isinstance(bucket, BucketSpec):
        return bucket
    return BucketSpec(bucket)

#                                                           ________________
# ________________________________________________________/ Core arithmetic

def _check_normalization(scheme):
    scheme_ = scheme.lower()
    if scheme_ not in gNormalizations:
        raise PreconditionError(f'Unknown normalization "{scheme}", expected "l2" or "linf"')
    return scheme_

def _normalized(v, normalization):
    """
    Returns (v, norm, r) for a finite 1D vector; r is the array of
    normalized magnitudes clamped to [0, 1].
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or 0 == v.size:
        raise PreconditionError(f'Expected non-empty 1D vector, got shape {v.shape}')
    if not np.all(np.isfinite(v)):
        raise NumericalError('Vector to quantize contains non-finite values')
    if 'l2' == normalization:
        norm = float(np.linalg.norm(v))
    else:
        norm = float(np.max(np.abs(v)))
    if not math.isfinite(norm):
        raise NumericalError('Norm of vector to quantize overflows')
    if 0 == norm:
        return v, 0., np.zeros(v.shape)
    r = np.abs(v)/norm
    tol = gSettings['clamp-tolerance']
    if np.any(r > 1. + tol):
        raise NumericalError(f'Normalized magnitude exceeds 1 by {float(np.max(r)) - 1:g}'
                f' (tolerance {tol:g})')
    return v, norm, np.minimum(r, 1.)

def locate_many(r, levels):
    """
    Vectorized level location. For array ``r`` of values in [0, 1] and
    numpy array of levels, returns (bins, upper probabilities, gaps).
    Exact internal level is located as lower edge of the bin (upper
    probability 0).
    """
    bins = np.searchsorted(levels, r, side='right') - 1
    bins = np.minimum(bins, len(levels) - 2)
    lo = levels[bins]
    gap = levels[bins + 1] - lo
    return bins, np.clip((r - lo)/gap, 0., 1.), gap

def locate(r, L):
    """
    Returns ``LevelLocation`` (bin, upper probability, gap) of value r in
    [0, 1] with respect to the level sequence.
    """
    r = float(r)
    tol = gSettings['clamp-tolerance']
    if not (-tol <= r <= 1. + tol):
        raise PreconditionError(f'Value to locate must be within [0, 1], got {r!r}')
    r = min(max(r, 0.), 1.)
    bins, p, gap = locate_many(np.array([r]), L.array)
    return LevelLocation(int(bins[0]), float(p[0]), float(gap[0]))

def stochastic_level_indices(r, levels, u):
    """
    Rounds normalized magnitudes ``r`` to level indices using uniforms ``u``
    (up iff u < upper probability). ``u`` may carry extra leading dimensions
    for batched draws.
    """
    bins, p, _ = locate_many(r, levels)
    return bins + (u < p)

def quantize_with_uniforms(v, L, u, scheme='l2'):
    """
    Quantizes vector with explicitly given per-coordinate uniforms.
    """
    v, norm, r = _normalized(v, _check_normalization(scheme))
    if 0 == norm:
        return QuantizedVector(0., len(v))
    levelIdx = stochastic_level_indices(r, L.array, u)
    nz = np.flatnonzero(levelIdx)
    return QuantizedVector(norm, len(v), nz, np.where(v[nz] < 0, -1, 1), levelIdx[nz])

#                                                        ___________________
# _____________________________________________________/ Public operations

def quantize(v, L, rng):
    """
    L2-normalized stochastic quantization. Coordinate i consumes the i-th
    uniform of ``rng``.
    """
    v = np.asarray(v, dtype=float)
    return quantize_with_uniforms(v, L, rng.uniforms(v.shape), 'l2')

def quantize_linf(v, L, rng):
    """Same as ``quantize()`` but normalized by the max-norm."""
    v = np.asarray(v, dtype=float)
    return quantize_with_uniforms(v, L, rng.uniforms(v.shape), 'linf')

def quantize_bucketed(v, bucketSpec, scheme, L, rng):
    """
    Quantizes consecutive buckets of a vector independently, each with its
    own norm. Coordinates keep their global uniforms, so single-bucket
    result is identical to unbucketed call.
    """
    v = np.asarray(v, dtype=float)
    scheme = _check_normalization(scheme)
    bucketSpec = as_bucket_spec(bucketSpec, v.size)
    u = rng.uniforms(v.shape)
    return [quantize_with_uniforms(v[sl], L, u[sl], scheme) for sl in bucketSpec.slices(v.size)]

def dequantize(q, L):
    """Dense vector norm*sign*l_j at stored indices, zero elsewhere."""
    out = np.zeros(q.dimension)
    if not q.nnz:
        return out
    if int(q.levelIndices.max()) > L.s + 1:
        raise PreconditionError(f'Level index {int(q.levelIndices.max())} is out of range'
                f' for {L.s} internal levels')
    out[q.indices] = q.norm*q.signs*L.array[q.levelIndices]
    return out

def dequantize_bucketed(qs, L):
    return np.concatenate([dequantize(q, L) for q in qs])

def coordinate_variances(v, L, scheme='l2'):
    """
    Exact per-coordinate variances norm^2*(l_{j+1} - r)(r - l_j) of the
    quantizer.
    """
    v, norm, r = _normalized(v, _check_normalization(scheme))
    if 0 == norm:
        return np.zeros(v.shape)
    bins, _, _ = locate_many(r, L.array)
    return norm*norm*(L.array[bins + 1] - r)*(r - L.array[bins])

def closed_form_variance(v, L, scheme='l2'):
    """Exact E||Q(v) - v||^2; zero for zero vector."""
    return float(np.sum(coordinate_variances(v, L, scheme)))

def closed_form_variance_bucketed(v, bucketSpec, scheme, L):
    v = np.asarray(v, dtype=float)
    bucketSpec = as_bucket_spec(bucketSpec, v.size)
    return sum(closed_form_variance(v[sl], L, scheme) for sl in bucketSpec.slices(v.size))

def expected_nnz(v, L, scheme='l2'):
    """
    Expected number of stored entries: coordinates above l_1 are always
    stored, ones below are stored with probability r/l_1.
    """
    v, norm, r = _normalized(v, _check_normalization(scheme))
    if 0 == norm:
        return 0.
    l1 = L[1]
    low = r <= l1
    return float(np.count_nonzero(~low) + np.sum(r[low])/l1)
