import io, json, unittest
import numpy as np

import nuqkit.simulator as sim
import nuqkit.bounds as bounds
from nuqkit.problems import least_squares
from nuqkit.topology import ring_topology
from nuqkit.random_source import RandomSource
from nuqkit.variance_lab import within_stderr, VarianceEstimate
from nuqkit.settings import gSettings
from nuqkit.errors import PreconditionError, NumericalError

def _config(problem, **kwargs):
    params = dict(K=1, T=50, alpha=.1/problem.beta, seed=17)
    params.update(kwargs)
    return sim.SimConfig(**params)

class TestSimConfig(unittest.TestCase):
    def test_seed_required(self):
        with self.assertRaises(PreconditionError):
            sim.SimConfig(K=1, T=10)

    def test_invalid(self):
        for kwargs in (dict(scheme='terngrad'), dict(momentum=1.), dict(mode=2),
                dict(asyncDelay=-1), dict(batch=-1), dict(K=0)):
            with self.assertRaises(PreconditionError):
                sim.SimConfig(seed=0, **kwargs)

    def test_levels(self):
        cfg = sim.SimConfig(seed=0, scheme='nuq', s=2)
        self.assertEqual(cfg.levels.levels, (0., .25, .5, 1.))
        self.assertEqual(cfg.normalization, 'l2')
        self.assertIsNone(sim.SimConfig(seed=0).levels)
        cfg = sim.SimConfig(seed=0, scheme='qsgd_inf', levels=[0., .3, 1.])
        self.assertEqual(cfg.levels.s, 1)

    def test_topology(self):
        with self.assertRaises(PreconditionError):
            sim.SimConfig(seed=0, K=4).mixing_topology()
        with self.assertRaises(PreconditionError):
            sim.SimConfig(seed=0, K=4, topology=ring_topology(3)).mixing_topology()
        self.assertEqual(sim.SimConfig(seed=0, K=4, topology='ring').mixing_topology().K, 4)

    def test_bucket_size_from_settings(self):
        saved = gSettings['bucket-size']
        try:
            gSettings['bucket-size'] = 8
            self.assertEqual(sim.SimConfig(seed=0, scheme='nuq').bucketSize, 8)
            self.assertEqual(sim.SimConfig(seed=0, scheme='nuq', bucketSize=4).bucketSize, 4)
        finally:
            gSettings['bucket-size'] = saved
        self.assertIsNone(sim.SimConfig(seed=0).bucketSize)

class TestDataParallel(unittest.TestCase):
    def setUp(self):
        self.problem = least_squares(d=16, seed=2)

    def test_gradient_descent_is_monotone(self):
        trace = sim.run_data_parallel(self.problem, _config(self.problem, batch=0, alpha=1/self.problem.beta))
        self.assertEqual(len(trace), 51)
        self.assertTrue(np.all(np.diff(trace.objective) <= 1e-12))
        self.assertEqual(trace.totalBits, 0)
        self.assertLess(trace.suboptimality[-1], .1*trace.suboptimality[0])

    def test_quantized_close_to_full_precision(self):
        problem = least_squares(d=64, seed=2)
        kw = dict(K=4, T=2000, alpha=.1/problem.beta, batch=1)
        full = sim.run_data_parallel(problem, _config(problem, **kw))
        nuq = sim.run_data_parallel(problem, _config(problem, scheme='nuq', s=4, **kw))
        self.assertLessEqual(nuq.suboptimality[-1], 10*full.suboptimality[-1])
        self.assertLess(nuq.suboptimality[-1], .1*nuq.suboptimality[0])

    def test_bits_accounting(self):
        trace = sim.run_data_parallel(self.problem, _config(self.problem, K=3, T=10, scheme='nuq', s=2))
        self.assertEqual(trace.bits[0], 0)
        self.assertTrue(np.all(trace.bits[1:] > 0))
        np.testing.assert_array_equal(trace.bits, trace.bitsPerWorker.sum(axis=1))
        # norm field at least
        self.assertTrue(np.all(trace.bitsPerWorker[1:] >= 33))

    def test_deterministic(self):
        cfg = _config(self.problem, K=2, T=20, scheme='qsgd_inf', s=2, alpha=.1/self.problem.beta)
        a = sim.run_data_parallel(self.problem, cfg)
        b = sim.run_data_parallel(self.problem, cfg)
        np.testing.assert_array_equal(a.objective, b.objective)
        np.testing.assert_array_equal(a.bits, b.bits)
        c = sim.run_data_parallel(self.problem, _config(self.problem, K=2, T=20, scheme='qsgd_inf',
                s=2, alpha=.1/self.problem.beta, seed=18))
        self.assertFalse(np.array_equal(a.objective, c.objective))

    def test_huffman_changes_bits_only(self):
        kw = dict(K=2, T=15, scheme='nuq', s=3, alpha=.1/self.problem.beta)
        plain = sim.run_data_parallel(self.problem, _config(self.problem, levelCodeMode='level_index', **kw))
        huff = sim.run_data_parallel(self.problem, _config(self.problem, levelCodeMode='huffman', **kw))
        np.testing.assert_array_equal(plain.objective, huff.objective)
        # first iteration is sent with level index codes
        self.assertEqual(plain.bits[1], huff.bits[1])
        self.assertFalse(np.array_equal(plain.bits[2:], huff.bits[2:]))

    def test_buckets(self):
        trace = sim.run_data_parallel(self.problem, _config(self.problem, K=2, T=10, scheme='nuq',
                bucketSize=4, alpha=.1/self.problem.beta))
        # four norm fields per message
        self.assertTrue(np.all(trace.bitsPerWorker[1:] >= 4*33))

    def test_divergence_reported(self):
        with np.errstate(all='ignore'):
            with self.assertRaises(NumericalError) as cm:
                sim.run_data_parallel(self.problem, _config(self.problem, T=2000, batch=0,
                        alpha=100/self.problem.beta))
        self.assertIsNotNone(cm.exception.iteration)

    def test_snapshots_and_output(self):
        trace = sim.run_data_parallel(self.problem, _config(self.problem, T=20, snapshotEvery=5))
        self.assertEqual(sorted(trace.snapshots), [0, 5, 10, 15, 20])
        f = io.StringIO()
        trace.write_csv(f)
        lines = f.getvalue().splitlines()
        header = [l for l in lines if not l.startswith('#')]
        self.assertEqual(header[0], ','.join(sim.SimTrace.columns))
        self.assertEqual(len(header), 22)
        f = io.StringIO()
        trace.write_metadata(f)
        meta = json.loads(f.getvalue())
        self.assertEqual(meta['run'], 'data_parallel')
        self.assertEqual(meta['config']['seed'], 17)
        self.assertEqual(sorted(meta['snapshots']), ['0', '10', '15', '20', '5'])

class TestMomentum(unittest.TestCase):
    def setUp(self):
        self.problem = least_squares(d=16, seed=4)
        self.kw = dict(K=2, T=30, scheme='nuq', s=2, alpha=.1/self.problem.beta)

    def test_zero_momentum_is_plain_sgd(self):
        plain = sim.run_data_parallel(self.problem, _config(self.problem, **self.kw))
        mom = sim.run_momentum(self.problem, _config(self.problem, momentum=0., mode=1, **self.kw))
        np.testing.assert_array_equal(plain.objective, mom.objective)
        np.testing.assert_array_equal(plain.params, mom.params)

    def test_modes_differ(self):
        heavy = sim.run_momentum(self.problem, _config(self.problem, momentum=.5, mode=0, **self.kw))
        nesterov = sim.run_momentum(self.problem, _config(self.problem, momentum=.5, mode=1, **self.kw))
        self.assertFalse(np.array_equal(heavy.objective, nesterov.objective))
        self.assertLess(heavy.objective[-1], heavy.objective[0])

    def test_heavy_ball_within_gap_bound(self):
        problem = least_squares(d=16, seed=4)
        s, T, mu = 3, 500, .5
        cfg = _config(problem, K=2, T=T, scheme='nuq', s=s, momentum=mu, mode=0
                , alpha=.1/problem.beta, snapshotEvery=10)
        trace = sim.run_momentum(problem, cfg)
        wStar = np.linalg.lstsq(problem.A, problem.b, rcond=None)[0]
        inputs = bounds.MomentumBoundInputs(mu, 0, .1/problem.beta, T, 2
                , B=max(problem.second_moment(w) for w in trace.snapshots.values())
                , V=float(trace.gradNorm.max())
                , f0Gap=float(trace.suboptimality[0])
                , w0Dist2=float(wStar @ wStar))
        bound = bounds.momentum_convex_gap_bound(inputs, bounds.epsilon_q(s, 16))
        self.assertLessEqual(trace.suboptimality[-1], 2*bound)
        self.assertLessEqual(problem.f(trace.averageParams) - problem.minimum, 2*bound)

class TestAsync(unittest.TestCase):
    def setUp(self):
        self.problem = least_squares(d=16, seed=5)

    def test_no_delay_single_worker_is_sgd(self):
        kw = dict(T=30, scheme='nuq', s=3, alpha=.2/self.problem.beta)
        sync = sim.run_data_parallel(self.problem, _config(self.problem, **kw))
        asyn = sim.run_async(self.problem, _config(self.problem, asyncDelay=0, **kw))
        np.testing.assert_array_equal(sync.objective, asyn.objective)
        np.testing.assert_array_equal(sync.bits, asyn.bits)

    def test_delays(self):
        kw = dict(K=3, T=200, scheme='nuq', s=3, alpha=.05/self.problem.beta)
        fresh = sim.run_async(self.problem, _config(self.problem, asyncDelay=0, **kw))
        stale = sim.run_async(self.problem, _config(self.problem, asyncDelay=4, **kw))
        self.assertFalse(np.array_equal(fresh.objective, stale.objective))
        self.assertLess(stale.objective[-1], stale.objective[0])
        # one message per iteration
        self.assertTrue(np.all(np.count_nonzero(stale.bitsPerWorker[1:], axis=1) == 1))

    def test_delay_clamped_to_initial_point(self):
        counts = np.zeros(3, dtype=int)
        for seed in range(200):
            delta = sim.sample_delay(RandomSource(seed), 3, 10)
            self.assertIn(delta, (0, 1, 2))
            counts[delta] += 1
        # draws reaching before t = 0 land on the initial point
        self.assertGreater(counts[2], counts[0])
        self.assertEqual(sim.sample_delay(RandomSource(0), 1, 10), 0)
        self.assertEqual(sim.sample_delay(RandomSource(0), 50, 0), 0)
        delays = [sim.sample_delay(RandomSource(0), 50, 4) for _ in range(3)]
        self.assertEqual(len(set(delays)), 1)
        self.assertLessEqual(delays[0], 4)

class TestEcdPsgd(unittest.TestCase):
    def setUp(self):
        self.problem = least_squares(d=16, noise=0., seed=6)

    def test_complete_topology_agrees(self):
        trace = sim.run_ecd_psgd(self.problem, _config(self.problem, K=4, T=50, batch=0,
                alpha=.25/self.problem.beta, topology='complete'))
        self.assertLess(trace.disagreement.max(), 1e-12)

    def test_ring_reaches_consensus(self):
        T = 2000
        trace = sim.run_ecd_psgd(self.problem, _config(self.problem, K=8, T=T, batch=0,
                alpha=.25/self.problem.beta, topology='ring'))
        early = trace.disagreement[1:T//10 + 1].max()
        self.assertGreater(early, 0.)
        self.assertLessEqual(trace.disagreement[-1], .01*early)
        self.assertLess(trace.suboptimality[-1], .01*trace.suboptimality[0])

    def test_quantized_messages(self):
        trace = sim.run_ecd_psgd(self.problem, _config(self.problem, K=4, T=20, batch=1,
                alpha=.1/self.problem.beta, topology='ring', scheme='nuq', s=4))
        self.assertTrue(np.all(trace.bits[1:] > 0))
        self.assertTrue(np.all(np.isfinite(trace.objective)))

class TestGradientStatistics(unittest.TestCase):
    def setUp(self):
        self.problem = least_squares(d=32, seed=7)
        self.w = np.full(32, .2)

    def test_full_precision(self):
        stats = sim.quantized_gradient_statistics(self.problem, self.w,
                sim.SimConfig(seed=1, K=2), 200)
        self.assertEqual(stats['quantization_error'].mean, 0.)
        second = stats['second_moment']
        self.assertEqual(second.samples, 400)
        self.assertTrue(within_stderr(self.problem.second_moment(self.w), second))

    def test_aggregation_reduces_variance(self):
        K = 4
        stats = sim.quantized_gradient_statistics(self.problem, self.w,
                sim.SimConfig(seed=2, K=K, scheme='nuq', s=2), 400)
        single, agg = stats['single_variance'], stats['aggregate_variance']
        self.assertGreater(stats['quantization_error'].mean, 0.)
        difference = VarianceEstimate(agg.mean - single.mean/K,
                np.sqrt(agg.stderr**2 + (single.stderr/K)**2), agg.samples)
        self.assertTrue(within_stderr(0., difference))

    def test_quantization_inflation_bounded(self):
        problem = least_squares(d=64, seed=8)
        s = 4
        stats = sim.quantized_gradient_statistics(problem, problem.initial_point(),
                sim.SimConfig(seed=3, K=1, scheme='nuq', s=s), 2000)
        eps = bounds.epsilon_q(s, 64)
        err, second = stats['quantization_error'], stats['second_moment']
        k = gSettings['stderr-tolerance']
        self.assertLessEqual(err.mean,
                eps*second.mean + k*np.sqrt(err.stderr**2 + (eps*second.stderr)**2))
