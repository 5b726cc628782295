import unittest
import numpy as np

import nuqkit.variance_lab as lab
from nuqkit.quantizer import levels_exponential, closed_form_variance, coordinate_variances \
        , scheme_levels
from nuqkit.settings import gSettings
from nuqkit.random_source import RandomSource
from nuqkit.errors import PreconditionError

class TestMonteCarlo(unittest.TestCase):
    def setUp(self):
        self.L = levels_exponential(.5, 2)
        self.v = RandomSource(12).generator().standard_normal(16)

    def test_mean_is_unbiased(self):
        est = lab.mc_mean(self.v, 'l2', self.L, 4000, 1)
        for vi, e in zip(self.v, est):
            self.assertTrue(lab.within_stderr(vi, e))
            self.assertEqual(e.samples, 4000)

    def test_deterministic_vector_has_zero_stderr(self):
        v = np.array([0., -2.5, 0.])
        est = lab.mc_mean(v, 'nuq', self.L, 200, 3)
        self.assertEqual([e.mean for e in est], [0., -2.5, 0.])
        self.assertEqual([e.stderr for e in est], [0., 0., 0.])
        self.assertEqual(lab.mc_variance(v, 'l2', self.L, 200, 3).stderr, 0.)

    def test_variance_matches_closed_form(self):
        est = lab.mc_variance(self.v, 'l2', self.L, 20000, 5)
        self.assertTrue(lab.within_stderr(closed_form_variance(self.v, self.L), est))

    def test_chunking_does_not_change_draws(self):
        a = np.concatenate(list(lab.quantized_draws(self.v, 'l2', self.L, 300, 7)))
        b = np.concatenate(list(lab.quantized_draws(self.v, 'l2', self.L, 300, RandomSource(7))))
        np.testing.assert_array_equal(a, b)
        self.assertEqual(a.shape, (300, 16))

    def test_minimum_draws(self):
        with self.assertRaises(PreconditionError):
            lab.mc_variance(self.v, 'l2', self.L, 99, 0)

class TestUnbiasedness(unittest.TestCase):
    def test_every_scheme_and_level_count(self):
        n = 10**5
        gen = RandomSource(31).generator()
        vectors = [gen.standard_normal(8) for _ in range(50)]
        for scheme in ('nuq', 'qsgd_l2', 'qsgd_inf'):
            for s in (1, 2, 3, 4):
                normalization, L = scheme_levels(scheme, s)
                for nVec, v in enumerate(vectors):
                    est = lab.mc_mean(v, scheme, L, n, RandomSource(s).child(nVec))
                    # exact standard error; sampled one vanishes for rare roundings
                    exact = np.sqrt(coordinate_variances(v, L, normalization)/n)
                    for vi, e, se in zip(v, est, exact):
                        self.assertTrue(lab.within_stderr(vi, lab.VarianceEstimate(e.mean, se, n)),
                                (scheme, s, nVec))

class TestStderrTolerance(unittest.TestCase):
    def setUp(self):
        self._saved = gSettings['stderr-tolerance']

    def tearDown(self):
        gSettings['stderr-tolerance'] = self._saved

    def test_factor_from_settings(self):
        est = lab.VarianceEstimate(1.3, .1, 100)
        self.assertFalse(lab.within_stderr(1., est))
        self.assertTrue(lab.within_stderr(1., est, k=3))
        gSettings['stderr-tolerance'] = 3.
        self.assertTrue(lab.within_stderr(1., est))

    def test_zero_stderr(self):
        self.assertTrue(lab.within_stderr(2., lab.VarianceEstimate(2., 0., 100)))
        self.assertFalse(lab.within_stderr(2., lab.VarianceEstimate(2.001, 0., 100)))

class TestNormalizedVariance(unittest.TestCase):
    def setUp(self):
        self.L = levels_exponential(.5, 3)
        self.g = RandomSource(2).generator().standard_normal(32)

    def test_full_precision_constant_samples(self):
        self.assertEqual(lab.normalized_variance([self.g, self.g], None, self.L), 0.)
        self.assertEqual(lab.normalized_variance([self.g, self.g, self.g], 'full_precision', None), 0.)

    def test_exact_quantization_variance(self):
        r = lab.normalized_variance([self.g, self.g], 'nuq', self.L)
        self.assertAlmostEqual(r, closed_form_variance(self.g, self.L)/float(self.g @ self.g))

    def test_monte_carlo_agrees(self):
        exact = lab.normalized_variance([self.g, self.g], 'nuq', self.L)
        mc = lab.normalized_variance([self.g, self.g], 'nuq', self.L, n=5000, seed=11)
        self.assertAlmostEqual(mc, exact, delta=.1*exact)

    def test_sampling_variance(self):
        G = np.array([[1., 0.], [-1., 0.]])
        # variance 1 in first coordinate, second moment 1
        self.assertAlmostEqual(lab.normalized_variance(G, None, None), 1.)

    def test_invalid(self):
        with self.assertRaises(PreconditionError):
            lab.normalized_variance([self.g], None, self.L)
        with self.assertRaises(PreconditionError):
            lab.normalized_variance(np.zeros((3, 4)), None, self.L)
        with self.assertRaises(PreconditionError):
            lab.normalized_variance([self.g, self.g], 'nuq', self.L, n=200)

class TestCorpus(unittest.TestCase):
    def test_corpus_kinds(self):
        corpus = lab.make_corpus(64, 2, 0)
        self.assertEqual([vid for vid, _, _ in corpus],
                ['gaussian-0', 'gaussian-1', 'sparse-0', 'sparse-1', 'heavy_tailed-0', 'heavy_tailed-1'])
        self.assertEqual(int(np.count_nonzero(corpus[2][2])), 4)
        with self.assertRaises(KeyError):
            lab.make_vector('uniform', 4, RandomSource(0).generator())

    def test_corpus_reproducible(self):
        a = lab.make_corpus(16, 1, 9)
        b = lab.make_corpus(16, 1, 9)
        for (_, _, x), (_, _, y) in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_variance_corpus(self):
        rows = list(lab.variance_corpus(32, 1, [1, 2], ['nuq', 'qsgd_inf'], 2000, 4))
        self.assertEqual(len(rows), 2*2*3)
        for row in rows:
            self.assertEqual(tuple(row.keys()), lab.gCorpusColumns)
            self.assertTrue(row['agrees'], row)

class TestSeparation(unittest.TestCase):
    def test_known_inputs(self):
        inputs = lab.SeparationInputs(1024, 1, 2., 1.5)
        res = lab.separation_vector(inputs)
        self.assertAlmostEqual(res.varNuq, 1., delta=.01)
        self.assertAlmostEqual(res.varQinf, 1.996, delta=.01)
        self.assertLess(res.varNuq, res.varQinf)

    def test_conventions(self):
        report = lab.separation_report(lab.SeparationInputs(1024, 1, 2., 1.5))
        self.assertTrue(report['gap_1_over_s']['separated'])
        # uniform levels with s internal levels are finer
        self.assertFalse(report['gap_1_over_s_plus_1']['separated'])
        self.assertEqual(report['inputs'], {'d': 1024, 's': 1, 'K1': 2., 'K2': 1.5})

    def test_scale_invariance(self):
        inputs = lab.SeparationInputs(256, 1, 2., 1.5)
        a = lab.separation_vector(inputs)
        b = lab.separation_vector(inputs, scale=3.)
        self.assertAlmostEqual(b.varNuq, 9*a.varNuq)
        self.assertAlmostEqual(b.varQinf, 9*a.varQinf)

    def test_conditions(self):
        with self.assertRaises(PreconditionError):
            lab.SeparationInputs(1024, 1, 1.5, 2.)
        with self.assertRaises(PreconditionError):
            lab.SeparationInputs(16, 1, 5., 1.)
        with self.assertRaises(PreconditionError):
            # K2 too small for the second inequality
            lab.SeparationInputs(1024, 1, 2., .1)
        with self.assertRaises(PreconditionError):
            lab.separation_vector(lab.SeparationInputs(1024, 1, 2., 1.5), convention='gap_2')

    def test_search(self):
        inputs = lab.find_separation_inputs()
        self.assertEqual((inputs.s, inputs.d, inputs.K1), (1, 64, 1.))
        self.assertAlmostEqual(inputs.K2, .9)
        res = lab.separation_vector(inputs)
        self.assertLess(res.varNuq, res.varQinf)
