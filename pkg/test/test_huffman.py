import unittest

from nuqkit.huffman import HuffmanCodebook, huffman_from_sample
from nuqkit.bitstream import BitWriter, BitStream
from nuqkit.errors import PreconditionError, DecodeError

class TestHuffmanCodebook(unittest.TestCase):
    def test_canonical_codes(self):
        book = HuffmanCodebook({1: 1, 2: 2, 3: 3, 4: 3})
        self.assertEqual(book.code(1), (0b0, 1))
        self.assertEqual(book.code(2), (0b10, 2))
        self.assertEqual(book.code(3), (0b110, 3))
        self.assertEqual(book.code(4), (0b111, 3))

    def test_from_histogram_lengths(self):
        book = HuffmanCodebook.from_histogram({1: 50, 2: 25, 3: 13, 4: 12})
        self.assertEqual(book.lengths, {1: 1, 2: 2, 3: 3, 4: 3})
        self.assertAlmostEqual(book.mean_length({1: 50, 2: 25, 3: 13, 4: 12}), 1.75)

    def test_single_symbol(self):
        book = HuffmanCodebook.from_histogram({3: 10})
        self.assertEqual(book.code(3), (0, 1))

    def test_write_read(self):
        book = HuffmanCodebook.from_histogram({1: 5, 2: 3, 3: 1, 4: 1, 5: 1})
        symbols = [1, 2, 5, 3, 1, 1, 4, 2]
        w = BitWriter()
        for k in symbols:
            book.write(w, k)
        r = w.stream().reader()
        self.assertEqual([book.read(r) for _ in symbols], symbols)
        self.assertEqual(r.remaining, 0)

    def test_unknown_code(self):
        # incomplete code: "11" is not assigned
        book = HuffmanCodebook({1: 1, 2: 2})
        with self.assertRaises(DecodeError):
            book.read(BitStream.from_bits('11').reader())
        with self.assertRaises(PreconditionError):
            book.code(3)

    def test_kraft(self):
        with self.assertRaises(PreconditionError):
            HuffmanCodebook({1: 1, 2: 1, 3: 1})

    def test_serialization(self):
        book = HuffmanCodebook.from_histogram({1: 7, 2: 2, 3: 1})
        self.assertEqual(HuffmanCodebook.from_dict(book.to_dict()), book)

class TestSampledCodebook(unittest.TestCase):
    def test_smoothing_covers_all_levels(self):
        book = huffman_from_sample([1, 1, 1, 2], nLevels=5)
        self.assertEqual(book.symbols, [1, 2, 3, 4, 5])
        self.assertEqual(book.lengths[1], min(book.lengths.values()))

    def test_deterministic(self):
        sample = [1, 2, 2, 3, 1, 1, 4, 1]
        self.assertEqual(repr(huffman_from_sample(sample, 4)), repr(huffman_from_sample(sample, 4)))

    def test_invalid_samples(self):
        with self.assertRaises(PreconditionError):
            huffman_from_sample([])
        with self.assertRaises(PreconditionError):
            huffman_from_sample([0, 1])
        with self.assertRaises(PreconditionError):
            huffman_from_sample([1, 5], nLevels=3)
