"""
Small optimization problems for simulated training runs.

Each problem is an average of n per-row losses over a parameter vector of
dimension d. The stochastic gradient oracle averages J rows drawn uniformly
with replacement (J = 0 means the full, deterministic gradient); the oracle
may be restricted to a shard of rows, as workers of decentralized runs see
only their own data.
"""

import math, logging

import numpy as np

from nuqkit.errors import PreconditionError
from nuqkit.random_source import RandomSource

# max |sigma''(x)| of the logistic sigmoid
gSigmoidCurvature = 1./(6.*math.sqrt(3.))

def _sigmoid(x):
    return .5*(1. + np.tanh(.5*x))

class Problem(object):
    """
    Abstract base of finite-sum problems. Descendants implement
    ``_loss(w)`` (vector of per-row losses) and ``_row_gradients(w, rows)``
    (array of per-row gradients).
    """
    def __init__(self, label, d, n, beta=None, minimum=None, radius=None):
        if d < 1 or n < 1:
            raise PreconditionError(f'Problem dimensions must be positive, got d={d}, n={n}')
        if radius is not None and not radius > 0:
            raise PreconditionError(f'Projection radius must be > 0, got {radius}')
        self._label = label
        self._d, self._n = int(d), int(n)
        self._beta = beta
        self._minimum = minimum
        self._radius = radius

    @property
    def label(self):
        return self._label

    @property
    def d(self):
        return self._d

    @property
    def n(self):
        return self._n

    @property
    def beta(self):
        """Smoothness constant (None if unknown)."""
        return self._beta

    @property
    def minimum(self):
        """Known minimum value of the objective, or None."""
        return self._minimum

    @property
    def radius(self):
        """Radius of the L2-ball domain; None for unconstrained problem."""
        return self._radius

    def _loss(self, w):
        raise NotImplementedError('Abstract problem in use (loss).')

    def _row_gradients(self, w, rows):
        raise NotImplementedError('Abstract problem in use (row gradients).')

    def _check_w(self, w):
        w = np.asarray(w, dtype=float)
        if w.shape != (self._d,):
            raise PreconditionError(f'Expected parameter vector of dimension {self._d},'
                    f' got shape {w.shape}')
        return w

    def f(self, w):
        return float(np.mean(self._loss(self._check_w(w))))

    def grad(self, w, rows=None):
        """Exact gradient of the objective (of the shard ``rows`` if given)."""
        w = self._check_w(w)
        if rows is None: rows = np.arange(self._n)
        return self._row_gradients(w, rows).mean(axis=0)

    def oracle(self, w, gen, J=1, rows=None):
        """
        Unbiased stochastic gradient: mean over ``J`` rows sampled uniformly
        with replacement from ``rows`` (all rows by default) by numpy
        generator ``gen``. ``J`` = 0 gives the exact gradient.
        """
        if J < 0:
            raise PreconditionError(f'Mini-batch size must be >= 0, got {J}')
        if rows is None: rows = np.arange(self._n)
        if 0 == J:
            return self.grad(w, rows)
        picked = rows[gen.integers(0, len(rows), size=J)]
        return self._row_gradients(self._check_w(w), picked).mean(axis=0)

    def second_moment(self, w, rows=None):
        """E||g(w)||^2 of the single-row oracle."""
        w = self._check_w(w)
        if rows is None: rows = np.arange(self._n)
        G = self._row_gradients(w, rows)
        return float(np.mean(np.sum(G*G, axis=1)))

    def project(self, w):
        if self._radius is None:
            return w
        norm = float(np.linalg.norm(w))
        return w if norm <= self._radius else w*(self._radius/norm)

    def shards(self, K):
        """Contiguous row blocks of ``K`` workers."""
        if not 1 <= K <= self._n:
            raise PreconditionError(f'Cannot split {self._n} rows among {K} workers')
        return np.array_split(np.arange(self._n), K)

    def initial_point(self):
        return np.zeros(self._d)

    def to_dict(self):
        return { 'problem': self._label
               , 'd': self._d
               , 'n': self._n
               , 'beta': self._beta
               , 'minimum': self._minimum
               , 'radius': self._radius
               }

    def __repr__(self):
        return f'{type(self).__name__}(d={self._d}, n={self._n})'

#                       * * *   * * *   * * *

class LeastSquares(Problem):
    """
    f(w) = ||A w - b||^2/(2n); beta = lambda_max(A^T A)/n.
    """
    def __init__(self, A, b, radius=None, label='least_squares'):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.ndim != 2 or b.shape != (A.shape[0],):
            raise PreconditionError(f'Incompatible shapes A{A.shape}, b{b.shape}')
        n, d = A.shape
        self.A, self.b = A, b
        beta = float(np.linalg.eigvalsh(A.T @ A)[-1])/n
        minimum = None
        if radius is None:
            wStar = np.linalg.lstsq(A, b, rcond=None)[0]
            minimum = max(float(np.mean(.5*(A @ wStar - b)**2)), 0.)
        super().__init__(label, d, n, beta=beta, minimum=minimum, radius=radius)

    def _loss(self, w):
        return .5*(self.A @ w - self.b)**2

    def _row_gradients(self, w, rows):
        A = self.A[rows]
        return A*(A @ w - self.b[rows])[:, None]

    @property
    def B(self):
        """Bound of E||g||^2 over the ball domain (None if unconstrained)."""
        if self._radius is None:
            return None
        norms = np.linalg.norm(self.A, axis=1)
        return float(np.mean((norms*(norms*self._radius + np.abs(self.b)))**2))

class Logistic(Problem):
    """
    Regularized logistic loss mean log(1 + exp(-y x.w)) + lam ||w||^2/2 with
    labels y in {-1, 1}; beta = lambda_max(X^T X)/(4n) + lam.
    """
    def __init__(self, X, y, lam=1e-3, radius=None, label='logistic'):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise PreconditionError(f'Incompatible shapes X{X.shape}, y{y.shape}')
        if not np.all(np.abs(y) == 1):
            raise PreconditionError('Labels must be -1 or 1')
        n, d = X.shape
        self.X, self.y, self.lam = X, y, float(lam)
        beta = float(np.linalg.eigvalsh(X.T @ X)[-1])/(4*n) + self.lam
        super().__init__(label, d, n, beta=beta, radius=radius)

    def _loss(self, w):
        return np.logaddexp(0., -self.y*(self.X @ w)) + .5*self.lam*float(w @ w)

    def _row_gradients(self, w, rows):
        X, y = self.X[rows], self.y[rows]
        return -(y*_sigmoid(-y*(X @ w)))[:, None]*X + self.lam*w

class SmoothNonconvex(Problem):
    """
    Sigmoid loss mean (1 - sigmoid(y x.w)) + lam ||w||^2/2: bounded, smooth
    and nonconvex; beta = max|sigmoid''| lambda_max(X^T X)/n + lam.
    """
    def __init__(self, X, y, lam=1e-3, radius=None, label='smooth_nonconvex'):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise PreconditionError(f'Incompatible shapes X{X.shape}, y{y.shape}')
        n, d = X.shape
        self.X, self.y, self.lam = X, y, float(lam)
        beta = gSigmoidCurvature*float(np.linalg.eigvalsh(X.T @ X)[-1])/n + self.lam
        super().__init__(label, d, n, beta=beta, radius=radius)

    def _loss(self, w):
        return 1. - _sigmoid(self.y*(self.X @ w)) + .5*self.lam*float(w @ w)

    def _row_gradients(self, w, rows):
        X, y = self.X[rows], self.y[rows]
        sig = _sigmoid(y*(X @ w))
        return -(y*sig*(1. - sig))[:, None]*X + self.lam*w

#                                                         __________________
# ______________________________________________________/ Built-in problems

def least_squares(d=64, n=None, noise=.1, seed=0, radius=None):
    """
    Gaussian design A (n x d) with b = A w* + noise*e; ``noise`` = 0 gives a
    realizable problem (every row is minimized at w*).
    """
    if n is None: n = 4*d
    gen = RandomSource(seed).child(0).generator()
    A = gen.standard_normal((n, d))
    wStar = gen.standard_normal(d)/math.sqrt(d)
    b = A @ wStar + noise*gen.standard_normal(n)
    return LeastSquares(A, b, radius=radius)

def _labelled_data(d, n, seed, flip):
    gen = RandomSource(seed).child(1).generator()
    X = gen.standard_normal((n, d))/math.sqrt(d)
    wTrue = gen.standard_normal(d)
    y = np.where(X @ wTrue >= 0, 1., -1.)
    y[gen.random(n) < flip] *= -1
    return X, y

def logistic(d=64, n=None, lam=1e-3, seed=0, radius=None, flip=.1):
    if n is None: n = 4*d
    X, y = _labelled_data(d, n, seed, flip)
    return Logistic(X, y, lam=lam, radius=radius)

def smooth_nonconvex(d=64, n=None, lam=1e-3, seed=0, radius=None, flip=.1):
    if n is None: n = 4*d
    X, y = _labelled_data(d, n, seed, flip)
    return SmoothNonconvex(X, y, lam=lam, radius=radius)

def instantiate_problem(name, **kwargs):
    """
    Creates built-in problem by (aliased) name; keyword arguments are passed
    to its generator. Raises ``KeyError`` for unknown name.
    """
    L = logging.getLogger(__name__)
    if name.lower() in ('least_squares', 'least-squares', 'ls'):
        problem = least_squares(**kwargs)
    elif name.lower() in ('logistic', 'logreg'):
        problem = logistic(**kwargs)
    elif name.lower() in ('smooth_nonconvex', 'smooth-nonconvex', 'nonconvex', 'sigmoid'):
        problem = smooth_nonconvex(**kwargs)
    else:
        raise KeyError(name)
    L.debug(f'Problem {problem!r} instantiated, beta={problem.beta:.6g}')
    return problem

def built_in_problems(d=64, seed=0):
    """Dictionary of all built-in problems of dimension ``d``."""
    return { name: instantiate_problem(name, d=d, seed=seed)
             for name in ('least_squares', 'logistic', 'smooth_nonconvex') }
