"""
Deterministic simulation of distributed SGD with quantized, encoded
gradients.

Four drivers share one message path (``GradientChannel``: quantize, encode,
decode): synchronous data-parallel SGD, its momentum variant, bounded-delay
asynchronous SGD and decentralized ECD-PSGD over a gossip topology.

Randomness is keyed by purpose, iteration and worker: the stochastic
gradient of worker i at iteration t draws from ``RandomSource(seed).child(0,
t, i)``, its quantization from ``child(1, t, i)`` and asynchronous delays
from ``child(2, t)``. Results therefore do not depend on the order in which
workers are evaluated; aggregation is always in ascending worker id.
"""

import math, logging

import numpy as np

from nuqkit.settings import gSettings
from nuqkit.errors import PreconditionError, NumericalError, DecodeError
from nuqkit.random_source import RandomSource
from nuqkit.quantizer import scheme_levels, as_bucket_spec, quantize_bucketed \
        , dequantize_bucketed, LevelSequence
from nuqkit.codec import gFormatVersion, CodecConfig, encode_buckets, decode_buckets, measured_bits
from nuqkit.huffman import huffman_from_sample
from nuqkit.schedules import as_learning_rate
from nuqkit.topology import MixingTopology, instantiate_topology
from nuqkit.bounds import async_step_condition
from nuqkit.variance_lab import VarianceEstimate
from nuqkit.utils import progress_bar, write_csv, write_json

gSimSchemes = ('full_precision', 'nuq', 'qsgd_l2', 'qsgd_inf')

# stream keys
gOracleKey, gQuantizationKey, gDelayKey = 0, 1, 2

class SimConfig(object):
    """
    Parameters of simulated run.

    ``alpha`` is a number, schedule description dict or ``LearningRate``;
    ``batch`` is the oracle mini-batch size J (0 for full batch);
    ``levelCodeMode`` of "huffman" samples a codebook from messages of the
    first iteration (sent with level index codes); ``topology`` (name or
    ``MixingTopology``) is used by decentralized runs only.
    """
    def __init__(self, K=1, T=100, alpha=.1, scheme='full_precision', s=4, p=.5,
            levels=None, bucketSize=None, floatBits=None, levelCodeMode=None,
            seed=None, batch=1, momentum=0., mode=0, asyncDelay=0, topology=None,
            snapshotEvery=None):
        if seed is None:
            raise PreconditionError('Simulation requires an explicit seed')
        if K < 1 or T < 1:
            raise PreconditionError(f'Expected K >= 1 and T >= 1, got K={K}, T={T}')
        if scheme not in gSimSchemes:
            raise PreconditionError(f'Unknown scheme "{scheme}", expected one of: '
                    + ', '.join(gSimSchemes))
        if not 0 <= momentum < 1:
            raise PreconditionError(f'Momentum must satisfy 0 <= mu < 1, got {momentum}')
        if mode not in (0, 1):
            raise PreconditionError(f'Momentum mode must be 0 or 1, got {mode}')
        if asyncDelay < 0:
            raise PreconditionError(f'Delay bound must be >= 0, got {asyncDelay}')
        if batch < 0:
            raise PreconditionError(f'Mini-batch size must be >= 0, got {batch}')
        self.K, self.T = int(K), int(T)
        self.rate = as_learning_rate(alpha)
        self.scheme = scheme
        self.normalization, self.levels = None, None
        if 'full_precision' != scheme:
            self.normalization, defaultLevels = scheme_levels(scheme, s, p)
            if levels is None:
                levels = defaultLevels
            elif not isinstance(levels, LevelSequence):
                levels = LevelSequence(levels)
            self.levels = levels
        if bucketSize is None: bucketSize = gSettings['bucket-size']
        self.bucketSize = bucketSize
        if levelCodeMode is None: levelCodeMode = gSettings['level-code-mode']
        self.huffman = 'huffman' == levelCodeMode
        self.codec = CodecConfig(floatBits, 'level_index' if self.huffman else levelCodeMode)
        self.seed = int(seed)
        self.batch = int(batch)
        self.momentum, self.mode = float(momentum), int(mode)
        self.asyncDelay = int(asyncDelay)
        self.topology = topology
        if snapshotEvery is None: snapshotEvery = gSettings['snapshot-every']
        self.snapshotEvery = int(snapshotEvery)

    def mixing_topology(self):
        if self.topology is None:
            raise PreconditionError('Decentralized run requires a topology')
        if isinstance(self.topology, MixingTopology):
            topology = self.topology
        elif isinstance(self.topology, str):
            topology = instantiate_topology(self.topology, self.K)
        else:
            topology = MixingTopology(self.topology)
        if topology.K != self.K:
            raise PreconditionError(f'Topology of {topology.K} workers given for K={self.K}')
        return topology

    def to_dict(self):
        d = { 'K': self.K, 'T': self.T
            , 'alpha': self.rate.to_dict()
            , 'scheme': self.scheme
            , 'levels': list(self.levels.levels) if self.levels is not None else None
            , 'normalization': self.normalization
            , 'bucket_size': self.bucketSize
            , 'codec': self.codec.to_dict()
            , 'huffman': self.huffman
            , 'seed': self.seed
            , 'batch': self.batch
            , 'momentum': self.momentum, 'mode': self.mode
            , 'async_delay': self.asyncDelay
            }
        if self.topology is not None:
            d['topology'] = self.topology if isinstance(self.topology, str) \
                    else self.mixing_topology().to_dict()
        return d

#                                                       ____________________
# ____________________________________________________/ Message path

class GradientChannel(object):
    """
    Quantizes, encodes and decodes vectors of dimension ``d`` according to
    simulation config. Returns decoded vector and the number of bits of the
    message. Full-precision channel passes vectors unchanged at zero bits.
    """
    def __init__(self, cfg, d):
        self.cfg = cfg
        self.d = d
        self.codec = cfg.codec
        self.bucketSpec = as_bucket_spec(cfg.bucketSize, d) if cfg.levels is not None else None
        self._pendingCodebook = cfg.huffman and cfg.levels is not None
        self._sample = []

    @property
    def enabled(self):
        return self.cfg.levels is not None

    def transmit(self, v, rng, iteration=None):
        if not self.enabled:
            return np.array(v, dtype=float), 0
        levels = self.cfg.levels
        qs = quantize_bucketed(v, self.bucketSpec, self.cfg.normalization, levels, rng)
        try:
            stream = encode_buckets(qs, levels, self.codec)
            decoded = decode_buckets(stream, self.d, self.bucketSpec, levels, self.codec)
        except DecodeError as e:
            raise NumericalError(f'Codec failure: {e}', iteration=iteration)
        if self._pendingCodebook:
            for q in qs:
                self._sample.extend(q.levelIndices.tolist())
        return dequantize_bucketed(decoded, levels), measured_bits(stream)

    def end_iteration(self):
        """Switches to Huffman level codes once first iteration is sampled."""
        L = logging.getLogger(__name__)
        if not self._pendingCodebook:
            return
        self._pendingCodebook = False
        if not self._sample:
            # nothing sampled (zero gradients); keep level index codes
            L.warning('No level indices sampled for Huffman codebook, level index codes kept')
            return
        codebook = huffman_from_sample(self._sample, self.cfg.levels.s + 1)
        self.codec = self.codec.with_codebook(codebook)
        self._sample = []
        L.debug(f'Huffman codebook sampled: {codebook!r}')

#                                                             ______________
# __________________________________________________________/ Trace

def _spread(X):
    """max_i ||X_i - mean(X)||, exactly zero for identical rows."""
    D = X - X[0]
    return float(np.max(np.linalg.norm(D - D.mean(axis=0), axis=1)))

class SimTrace(object):
    """
    Per-iteration record of a run, T+1 entries (index 0 is the initial
    state): objective, gradient norm, transmitted bits (total and per
    worker), disagreement of workers (decentralized runs), and the final,
    running-average and snapshot parameters.
    """
    columns = ('iteration', 'objective', 'grad_norm', 'bits', 'disagreement', 'local_spread')

    def __init__(self, problem, cfg, kind):
        T, K = cfg.T, cfg.K
        self.kind = kind
        self.problem = problem.to_dict()
        self.config = cfg.to_dict()
        self.objective = np.zeros(T + 1)
        self.gradNorm = np.zeros(T + 1)
        self.bits = np.zeros(T + 1, dtype=np.int64)
        self.bitsPerWorker = np.zeros((T + 1, K), dtype=np.int64)
        self.disagreement = np.zeros(T + 1)
        self.localSpread = np.zeros(T + 1)
        self.snapshots = {}
        self.params = None
        self.averageParams = None
        self.minimum = problem.minimum
        self._sum = None
        self._n = 0

    def __len__(self):
        return len(self.objective)

    def record(self, t, problem, w, snapshotEvery=0):
        fw = problem.f(w)
        if not math.isfinite(fw) or not np.all(np.isfinite(w)):
            raise NumericalError(f'Non-finite objective at iteration {t}', iteration=t)
        self.objective[t] = fw
        self.gradNorm[t] = float(np.linalg.norm(problem.grad(w)))
        self._sum = w.copy() if self._sum is None else self._sum + w
        self._n += 1
        self.params = w.copy()
        self.averageParams = self._sum/self._n
        if snapshotEvery and 0 == t % snapshotEvery:
            self.snapshots[t] = w.copy()

    @property
    def suboptimality(self):
        """Objective minus known minimum (None if minimum is unknown)."""
        if self.minimum is None:
            return None
        return self.objective - self.minimum

    @property
    def totalBits(self):
        return int(self.bits.sum())

    def rows(self):
        for t in range(len(self)):
            yield [t, self.objective[t], self.gradNorm[t], int(self.bits[t])
                  , self.disagreement[t], self.localSpread[t]]

    def metadata(self):
        return { 'format_version': gFormatVersion
               , 'run': self.kind
               , 'config': self.config
               , 'problem': self.problem
               }

    def write_csv(self, f):
        meta = self.metadata()
        write_csv(f, self.columns, self.rows(), metadata={ 'format_version': meta['format_version']
                , 'run': self.kind, 'seed': self.config['seed'], 'scheme': self.config['scheme']
                , 'problem': self.problem['problem'] })

    def write_metadata(self, f):
        meta = self.metadata()
        meta.update({ 'total_bits': self.totalBits
                    , 'final_params': self.params
                    , 'average_params': self.averageParams
                    , 'snapshots': {str(t): w for t, w in sorted(self.snapshots.items())}
                    })
        write_json(f, meta)

#                                                           ________________
# ________________________________________________________/ Drivers

def _aggregate(decoded):
    """Mean of messages summed in ascending worker id."""
    return np.stack(decoded).sum(axis=0)/len(decoded)

def _worker_streams(root, t, i):
    return root.child(gOracleKey, t, i).generator(), root.child(gQuantizationKey, t, i)

def _synchronous(problem, cfg, mu, l, kind):
    L = logging.getLogger(__name__)
    root = RandomSource(cfg.seed)
    channel = GradientChannel(cfg, problem.d)
    trace = SimTrace(problem, cfg, kind)
    w0 = problem.initial_point()
    replicas = np.tile(w0, (cfg.K, 1))
    ylPrev = replicas.copy()
    trace.record(0, problem, w0, cfg.snapshotEvery)
    for t in progress_bar(range(1, cfg.T + 1), kind, total=cfg.T):
        decoded = []
        for i in range(cfg.K):
            gen, qRng = _worker_streams(root, t, i)
            g = problem.oracle(replicas[i], gen, cfg.batch)
            gHat, nBits = channel.transmit(g, qRng, iteration=t)
            decoded.append(gHat)
            trace.bitsPerWorker[t, i] = nBits
        channel.end_iteration()
        step = cfg.rate(t)*_aggregate(decoded)
        # every replica applies the same decoded messages to its own copy
        for i in range(cfg.K):
            y = replicas[i] - step
            yl = replicas[i] - l*step
            replicas[i] = problem.project(y + mu*(yl - ylPrev[i]))
            ylPrev[i] = yl
        if not all(np.array_equal(replicas[0], replicas[i]) for i in range(1, cfg.K)):
            raise NumericalError(f'Worker replicas diverged at iteration {t}', iteration=t)
        trace.bits[t] = int(trace.bitsPerWorker[t].sum())
        trace.record(t, problem, replicas[0], cfg.snapshotEvery)
    L.info(f'{kind}: f = {trace.objective[-1]:.6g} after {cfg.T} iterations,'
           f' {trace.totalBits} bits transmitted')
    return trace

def run_data_parallel(problem, cfg):
    """
    Synchronous data-parallel SGD: every worker quantizes, encodes and
    broadcasts its stochastic gradient, all decode the K messages and apply
    w <- P(w - (alpha/K) sum g_i).
    """
    return _synchronous(problem, cfg, 0., 0, 'data_parallel')

def run_momentum(problem, cfg):
    """
    Data-parallel SGD with momentum update

        y_{t+1} = w_t - alpha g,  y^l_{t+1} = w_t - l alpha g,
        w_{t+1} = y_{t+1} + mu (y^l_{t+1} - y^l_t)

    (l = 0 heavy-ball, l = 1 Nesterov), g the mean of decoded messages.
    """
    return _synchronous(problem, cfg, cfg.momentum, cfg.mode, 'momentum')

def sample_delay(root, t, tau):
    """
    Staleness of the gradient applied at iteration t: uniform on {0, ...,
    tau}, clamped to t - 1 so that early delays point to the initial point.
    """
    if not tau:
        return 0
    return min(int(root.child(gDelayKey, t).generator().integers(0, tau + 1)), t - 1)

def run_async(problem, cfg):
    """
    Bounded-delay asynchronous SGD. At iteration t one worker (t-1 mod K)
    delivers quantized gradient evaluated at w_{t-1-delta}, delta drawn by
    ``sample_delay()``.
    """
    L = logging.getLogger(__name__)
    root = RandomSource(cfg.seed)
    channel = GradientChannel(cfg, problem.d)
    trace = SimTrace(problem, cfg, 'async')
    tau = cfg.asyncDelay
    if problem.beta is not None:
        lhs, ok = async_step_condition(cfg.rate, problem.beta, max(cfg.batch, 1), tau, 1)
        if not ok:
            L.warning(f'Asynchronous step size condition violated at t=1: {lhs:.4g} > 1')
    history = [problem.initial_point()]
    trace.record(0, problem, history[0], cfg.snapshotEvery)
    for t in progress_bar(range(1, cfg.T + 1), 'async', total=cfg.T):
        delta = sample_delay(root, t, tau)
        i = (t - 1) % cfg.K
        gen, qRng = _worker_streams(root, t, i)
        g = problem.oracle(history[-1 - delta], gen, cfg.batch)
        gHat, nBits = channel.transmit(g, qRng, iteration=t)
        channel.end_iteration()
        w = problem.project(history[-1] - cfg.rate(t)*_aggregate([gHat]))
        history.append(w)
        if len(history) > tau + 1:
            history.pop(0)
        trace.bitsPerWorker[t, i] = nBits
        trace.bits[t] = nBits
        trace.record(t, problem, w, cfg.snapshotEvery)
    L.info(f'async (tau={tau}): f = {trace.objective[-1]:.6g} after {cfg.T} iterations')
    return trace

def run_ecd_psgd(problem, cfg):
    """
    Decentralized ECD-PSGD. Worker i holds local model w_i, its data shard
    and estimates w~_j of models of its neighbours; at iteration t:

        w_{t+1/2} = sum_j W_ij w~_j,   w_{t+1} = w_{t+1/2} - alpha g_i(w_t),
        z = (1 - t/2) w_t + (t/2) w_{t+1},  message c = encode(Q(z)),
        w~_j <- (1 - 2/t) w~_j + (2/t) decode(c_j)

    with w~ = w at start. At t = 1 the estimate coefficient is -1; with exact
    messages the extrapolation still yields w~_j = w_{t+1} at every t.
    Objective is evaluated at the averaged model; disagreement is the spread
    of w_{t+1/2} over workers.
    """
    L = logging.getLogger(__name__)
    topology = cfg.mixing_topology()
    W = topology.W
    root = RandomSource(cfg.seed)
    channel = GradientChannel(cfg, problem.d)
    trace = SimTrace(problem, cfg, 'ecd_psgd')
    shards = problem.shards(cfg.K)
    w = np.tile(problem.initial_point(), (cfg.K, 1))
    estimates = w.copy()
    trace.record(0, problem, w.mean(axis=0), cfg.snapshotEvery)
    for t in progress_bar(range(1, cfg.T + 1), 'ecd-psgd', total=cfg.T):
        half = W @ estimates
        wNext = np.empty_like(w)
        decoded = np.empty_like(w)
        alpha = cfg.rate(t)
        for i in range(cfg.K):
            gen, qRng = _worker_streams(root, t, i)
            g = problem.oracle(w[i], gen, cfg.batch, rows=shards[i])
            wNext[i] = problem.project(half[i] - alpha*g)
            z = (1 - t/2)*w[i] + (t/2)*wNext[i]
            decoded[i], trace.bitsPerWorker[t, i] = channel.transmit(z, qRng, iteration=t)
        channel.end_iteration()
        estimates = (1 - 2/t)*estimates + (2/t)*decoded
        w = wNext
        trace.bits[t] = int(trace.bitsPerWorker[t].sum())
        trace.disagreement[t] = _spread(half)
        trace.localSpread[t] = _spread(w)
        trace.record(t, problem, w.mean(axis=0), cfg.snapshotEvery)
    L.info(f'ecd-psgd on {topology!r}: f = {trace.objective[-1]:.6g},'
           f' disagreement {trace.disagreement[-1]:.3g}')
    return trace

gRunners = {
    'data_parallel' : run_data_parallel,
    'momentum'      : run_momentum,
    'async'         : run_async,
    'ecd_psgd'      : run_ecd_psgd,
}

#                                                        ___________________
# _____________________________________________________/ Gradient statistics

def _estimate(x):
    x = np.asarray(x, dtype=float)
    return VarianceEstimate(float(x.mean()), float(x.std(ddof=1)/math.sqrt(len(x))), len(x))

def quantized_gradient_statistics(problem, w, cfg, n, seed=None):
    """
    Monte Carlo statistics of decoded gradients at fixed point ``w`` over
    ``n`` rounds of K workers. Returns dict of ``VarianceEstimate``:
    "quantization_error" E||g^ - g||^2, "second_moment" E||g||^2,
    "single_variance" E||g^ - grad f||^2 and "aggregate_variance"
    E||mean_i g^_i - grad f||^2.
    """
    if n < 2:
        raise PreconditionError(f'At least 2 rounds are needed, got {n}')
    root = RandomSource(cfg.seed if seed is None else seed)
    channel = GradientChannel(cfg, problem.d)
    w = np.asarray(w, dtype=float)
    full = problem.grad(w)
    qErr, second, single, aggregate = [], [], [], []
    for k in progress_bar(range(n), 'gradstats', total=n):
        decoded = []
        for i in range(cfg.K):
            gen, qRng = _worker_streams(root, k, i)
            g = problem.oracle(w, gen, cfg.batch)
            gHat, _ = channel.transmit(g, qRng)
            decoded.append(gHat)
            qErr.append(float(np.sum((gHat - g)**2)))
            second.append(float(g @ g))
            single.append(float(np.sum((gHat - full)**2)))
        aggregate.append(float(np.sum((_aggregate(decoded) - full)**2)))
    return { 'quantization_error': _estimate(qErr)
           , 'second_moment': _estimate(second)
           , 'single_variance': _estimate(single)
           , 'aggregate_variance': _estimate(aggregate)
           }
