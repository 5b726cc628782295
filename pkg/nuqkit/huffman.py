"""
Huffman codes for level indices sampled from quantized gradients.

Codebooks are canonical: code lengths come from the Huffman tree built over
an add-one smoothed histogram, then codes are assigned in (length, symbol)
order, so the same sample always gives the same bits.
"""

import heapq, logging
from collections import Counter

from nuqkit.errors import PreconditionError, DecodeError

class HuffmanCodebook(object):
    """
    Prefix-free code for positive integer symbols defined by code lengths.
    """
    def __init__(self, lengths):
        if not lengths:
            raise PreconditionError('Empty Huffman codebook')
        lengths = dict((int(k), int(v)) for k, v in lengths.items())
        if any(k < 1 for k in lengths) or any(v < 1 for v in lengths.values()):
            raise PreconditionError('Huffman symbols and code lengths must be positive')
        if sum(2.**-l for l in lengths.values()) > 1.:
            raise PreconditionError('Code lengths violate Kraft inequality')
        self._lengths = lengths
        self._codes = {}
        code, prevLen = 0, 0
        for symbol in sorted(lengths, key=lambda k: (lengths[k], k)):
            code <<= lengths[symbol] - prevLen
            prevLen = lengths[symbol]
            self._codes[symbol] = (code, prevLen)
            code += 1
        self._decode = dict(((nBits, value), symbol)
                for symbol, (value, nBits) in self._codes.items())
        self._maxLength = max(lengths.values())

    @classmethod
    def from_histogram(cls, histogram):
        """
        Builds codebook from symbol counts (all counts must be positive).
        """
        if not histogram:
            raise PreconditionError('Empty histogram')
        if any(c <= 0 for c in histogram.values()):
            raise PreconditionError('Histogram counts must be positive')
        symbols = sorted(histogram)
        if 1 == len(symbols):
            return cls({symbols[0]: 1})
        lengths = dict((k, 0) for k in symbols)
        # heap items: (count, tie-breaking order, symbols in subtree)
        heap = [(histogram[k], n, [k]) for n, k in enumerate(symbols)]
        heapq.heapify(heap)
        order = len(heap)
        while len(heap) > 1:
            c1, _, s1 = heapq.heappop(heap)
            c2, _, s2 = heapq.heappop(heap)
            for k in s1 + s2:
                lengths[k] += 1
            heapq.heappush(heap, (c1 + c2, order, s1 + s2))
            order += 1
        return cls(lengths)

    @property
    def symbols(self):
        return sorted(self._lengths)

    @property
    def lengths(self):
        return dict(self._lengths)

    def code(self, symbol):
        """Returns (code value, code length) pair."""
        if symbol not in self._codes:
            raise PreconditionError(f'Symbol {symbol} is not in Huffman codebook')
        return self._codes[symbol]

    def write(self, writer, symbol):
        writer.write(*self.code(symbol))

    def read(self, reader):
        value = 0
        for nBits in range(1, self._maxLength + 1):
            value = (value << 1) | reader.read_bit()
            symbol = self._decode.get((nBits, value))
            if symbol is not None:
                return symbol
        raise DecodeError(f'No Huffman code matches bits before position {reader.position}')

    def mean_length(self, histogram):
        """Mean code length over given symbol counts."""
        total = sum(histogram.values())
        return sum(self._lengths[k]*c for k, c in histogram.items())/total

    def to_dict(self):
        return {'lengths': dict((str(k), v) for k, v in sorted(self._lengths.items()))}

    @classmethod
    def from_dict(cls, d):
        return cls(d['lengths'])

    def __eq__(self, other):
        if not isinstance(other, HuffmanCodebook): return NotImplemented
        return self._lengths == other._lengths

    def __repr__(self):
        return 'HuffmanCodebook(' + ', '.join(f'{k}:{format(v, f"0{n}b")}'
                for k, (v, n) in sorted(self._codes.items())) + ')'

def huffman_from_sample(samples, nLevels=None):
    """
    Builds codebook for level indices 1..nLevels (``nLevels`` is s+1; by
    default the largest sampled index) from a sample, each symbol count
    incremented by one so that unseen levels stay encodable.
    """
    L = logging.getLogger(__name__)
    samples = [int(x) for x in samples]
    if not samples:
        raise PreconditionError('Empty sample of level indices')
    if min(samples) < 1:
        raise PreconditionError('Level indices in sample must be >= 1')
    if nLevels is None:
        nLevels = max(samples)
    elif max(samples) > nLevels:
        raise PreconditionError(f'Sampled level index {max(samples)} exceeds'
                f' number of levels {nLevels}')
    counts = Counter(samples)
    histogram = dict((k, counts.get(k, 0) + 1) for k in range(1, nLevels + 1))
    codebook = HuffmanCodebook.from_histogram(histogram)
    L.debug(f'Huffman codebook from {len(samples)} samples: {codebook!r}')
    return codebook
