import unittest
import numpy as np

import nuqkit.quantizer as q
from nuqkit.random_source import RandomSource
from nuqkit.errors import PreconditionError, NumericalError

class TestLevels(unittest.TestCase):
    def test_exponential_levels(self):
        L = q.levels_exponential(.5, 3)
        self.assertEqual(L.levels, (0., .125, .25, .5, 1.))
        self.assertEqual(L.s, 3)
        self.assertTrue(L.is_power_of_half())
        self.assertEqual(L.base, .5)
        self.assertFalse(q.levels_exponential(.4, 3).is_power_of_half())

    def test_uniform_levels(self):
        self.assertEqual(q.levels_uniform(3).levels, (0., .25, .5, .75, 1.))
        # gap 1/s convention, s=1 is the ternary grid
        self.assertEqual(q.levels_uniform_gap(1).levels, (0., 1.))
        self.assertEqual(q.levels_uniform_gap(1).s, 0)
        self.assertEqual(q.levels_uniform_gap(4).s, 3)

    def test_invalid_levels(self):
        with self.assertRaises(PreconditionError):
            q.LevelSequence([0., .5, .5, 1.])
        with self.assertRaises(PreconditionError):
            q.LevelSequence([.1, .5, 1.])
        with self.assertRaises(PreconditionError):
            q.levels_exponential(1.5, 2)
        with self.assertRaises(PreconditionError):
            q.levels_exponential(.5, 0)

    def test_scheme_levels(self):
        self.assertEqual(q.scheme_levels('nuq', 2, .5), ('l2', q.levels_exponential(.5, 2)))
        self.assertEqual(q.scheme_levels('qsgd_inf', 2), ('linf', q.levels_uniform(2)))
        with self.assertRaises(PreconditionError):
            q.scheme_levels('terngrad', 2)

class TestLocate(unittest.TestCase):
    def setUp(self):
        self.L = q.levels_exponential(.5, 2)  # 0, 1/4, 1/2, 1

    def test_inside_bin(self):
        loc = q.locate(.375, self.L)
        self.assertEqual(loc.bin, 1)
        self.assertAlmostEqual(loc.upperProb, .5)
        self.assertAlmostEqual(loc.gap, .25)

    def test_exact_levels(self):
        # internal level is the lower edge of its bin
        loc = q.locate(.25, self.L)
        self.assertEqual((loc.bin, loc.upperProb), (1, 0.))
        loc = q.locate(1., self.L)
        self.assertEqual((loc.bin, loc.upperProb), (2, 1.))
        loc = q.locate(0., self.L)
        self.assertEqual((loc.bin, loc.upperProb), (0, 0.))

    def test_clamp_and_reject(self):
        self.assertEqual(q.locate(1. + 1e-14, self.L).bin, 2)
        with self.assertRaises(PreconditionError):
            q.locate(1.1, self.L)

class TestQuantize(unittest.TestCase):
    def test_zero_vector(self):
        qv = q.quantize(np.zeros(5), q.levels_exponential(.5, 2), RandomSource(1))
        self.assertEqual(qv.norm, 0.)
        self.assertEqual(qv.nnz, 0)
        np.testing.assert_array_equal(q.dequantize(qv, q.levels_exponential(.5, 2)), np.zeros(5))

    def test_one_hot_is_exact(self):
        L = q.levels_exponential(.5, 3)
        v = np.array([0., -2.5, 0., 0.])
        qv = q.quantize(v, L, RandomSource(3))
        self.assertEqual(qv.entries, [(1, -1, 4)])
        np.testing.assert_array_equal(q.dequantize(qv, L), v)
        self.assertEqual(q.closed_form_variance(v, L), 0.)

    def test_deterministic(self):
        L = q.levels_exponential(.5, 2)
        v = RandomSource(5).generator().standard_normal(100)
        self.assertEqual(q.quantize(v, L, RandomSource(7)), q.quantize(v, L, RandomSource(7)))

    def test_dequantized_values_are_levels(self):
        L = q.levels_exponential(.5, 2)
        v = RandomSource(5).generator().standard_normal(50)
        qv = q.quantize(v, L, RandomSource(7))
        deq = q.dequantize(qv, L)
        r = np.abs(deq)/qv.norm
        for x in r:
            self.assertTrue(any(abs(x - l) < 1e-12 for l in L.levels))
        # signs are kept
        nz = deq != 0
        np.testing.assert_array_equal(np.sign(deq[nz]), np.sign(v[nz]))

    def test_linf(self):
        L = q.levels_uniform(1)
        v = np.array([2., -1., .5])
        qv = q.quantize_linf(v, L, RandomSource(0))
        self.assertEqual(qv.norm, 2.)
        self.assertIn((0, 1, 2), qv.entries)

    def test_non_finite_rejected(self):
        with self.assertRaises(NumericalError):
            q.quantize(np.array([1., np.inf]), q.levels_uniform(1), RandomSource(0))

    def test_bucketed_single_bucket_matches(self):
        L = q.levels_exponential(.5, 2)
        v = RandomSource(11).generator().standard_normal(30)
        qs = q.quantize_bucketed(v, None, 'l2', L, RandomSource(2))
        self.assertEqual(len(qs), 1)
        self.assertEqual(qs[0], q.quantize(v, L, RandomSource(2)))

    def test_bucketed_norms(self):
        L = q.levels_exponential(.5, 2)
        v = RandomSource(11).generator().standard_normal(10)
        qs = q.quantize_bucketed(v, q.BucketSpec(4), 'l2', L, RandomSource(2))
        self.assertEqual([x.dimension for x in qs], [4, 4, 2])
        for qv, sl in zip(qs, q.BucketSpec(4).slices(10)):
            self.assertAlmostEqual(qv.norm, np.linalg.norm(v[sl]))
        self.assertEqual(q.dequantize_bucketed(qs, L).shape, (10,))

class TestVariance(unittest.TestCase):
    def test_single_coordinate_formula(self):
        # r = 3/8 inside [1/4, 1/2]
        L = q.levels_exponential(.5, 2)
        v = np.array([3., 0., 0., 0.])
        v[1] = np.sqrt(64 - 9)  # norm 8
        cv = q.coordinate_variances(v, L)
        self.assertAlmostEqual(cv[0], 64*(.5 - .375)*(.375 - .25))

    def test_all_equal_large_s(self):
        # d=144, s=4: r = 1/12 lies in [1/16, 1/8], variance is ||v||^2/8
        v = np.full(144, 3.)
        var = q.closed_form_variance(v, q.levels_exponential(.5, 4))
        self.assertAlmostEqual(var/(v @ v), 1/8, delta=1e-12)

    def test_bucketed_variance_sum(self):
        L = q.levels_uniform(3)
        v = RandomSource(4).generator().standard_normal(12)
        total = q.closed_form_variance_bucketed(v, 4, 'linf', L)
        self.assertAlmostEqual(total, sum(q.closed_form_variance(v[i:i+4], L, 'linf')
            for i in range(0, 12, 4)))

    def test_expected_nnz(self):
        L = q.levels_exponential(.5, 1)  # 0, 1/2, 1
        v = np.array([1., 1., 1., 1.])  # r = 1/2 each
        self.assertAlmostEqual(q.expected_nnz(v, L), 4.)
        v = np.array([3., 4.])  # r = 0.6, 0.8
        self.assertAlmostEqual(q.expected_nnz(v, L), 2.)
        v = np.array([1., 0., 0., 0.])
        self.assertAlmostEqual(q.expected_nnz(v, L), 1.)

class TestQuantizedVector(unittest.TestCase):
    def test_validation(self):
        with self.assertRaises(PreconditionError):
            q.QuantizedVector(1., 4, [2, 1], [1, 1], [1, 1])
        with self.assertRaises(PreconditionError):
            q.QuantizedVector(1., 4, [4], [1], [1])
        with self.assertRaises(PreconditionError):
            q.QuantizedVector(0., 4, [1], [1], [1])
        with self.assertRaises(PreconditionError):
            q.QuantizedVector(1., 4, [1], [1], [0])

    def test_rounded(self):
        qv = q.QuantizedVector(.1, 3, [0], [1], [1])
        self.assertEqual(qv.rounded(32).norm, float(np.float32(.1)))
        self.assertIs(qv.rounded(64), qv)
