"""
Learning rate schedules of simulated SGD runs.

A schedule object is applied to the (1-based) iteration number and returns
the step size. Schedules are created from a dictionary description (as
given in settings or on command line) with ``instantiate_learning_rate()``.
"""

import math, logging

from nuqkit.errors import PreconditionError

class LearningRate(object):
    """
    Abstract base class for learning rate schedules.
    """
    def __init__(self, label='abstract', **kwargs):
        self._label = label

    @property
    def label(self):
        return self._label

    def __call__(self, t):
        raise NotImplementedError('Abstract learning rate in use (call).')

    def to_dict(self):
        return {'type': self._label}

#                       * * *   * * *   * * *

class ConstantRate(LearningRate):
    """
    Fixed step size alpha.
    """
    def __init__(self, alpha, label='constant', **kwargs):
        super().__init__(label)
        alpha = float(alpha)
        if not (math.isfinite(alpha) and alpha > 0):
            raise PreconditionError(f'Learning rate must be finite and > 0, got {alpha}')
        self._alpha = alpha

    @property
    def alpha(self):
        return self._alpha

    def __call__(self, t):
        return self._alpha

    def to_dict(self):
        return {'type': self._label, 'alpha': self._alpha}

#                       * * *   * * *   * * *

class InverseSqrtRate(ConstantRate):
    """
    Decaying step alpha/sqrt(t), t = 1, 2, ...
    """
    def __init__(self, alpha, label='inverse-sqrt', **kwargs):
        super().__init__(alpha, label=label)

    def __call__(self, t):
        if t < 1:
            raise PreconditionError(f'Iteration number must be >= 1, got {t}')
        return self._alpha/math.sqrt(t)

#                       * * *   * * *   * * *

def instantiate_learning_rate(**kwargs):
    """
    Creates schedule from description like ``{"type": "constant", "alpha":
    0.1}``. Raises ``KeyError`` for unknown type.
    """
    L = logging.getLogger(__name__)
    type_ = kwargs.pop('type', 'constant')
    if type_.lower() in ('constant', 'const', 'fixed'):
        rate = ConstantRate(**kwargs)
    elif type_.lower() in ('inverse-sqrt', 'inverse_sqrt', 'invsqrt', '1/sqrt(t)'):
        rate = InverseSqrtRate(**kwargs)
    # ... other schedules
    else:
        raise KeyError(type_)
    L.debug(f'Learning rate schedule "{rate.label}" with alpha={rate.alpha:g}')
    return rate

def as_learning_rate(alpha):
    """
    Converts number, description dictionary or ``LearningRate`` to
    ``LearningRate``.
    """
    if isinstance(alpha, LearningRate):
        return alpha
    if isinstance(alpha, dict):
        return instantiate_learning_rate(**dict(alpha))
    return ConstantRate(alpha)
