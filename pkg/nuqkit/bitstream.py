"""
MSB-first bit sequences with exact bit length.

``BitWriter`` accumulates unsigned integers of arbitrary width into a byte
buffer, ``BitStream`` is the immutable result (bytes plus bit count, padding
bits of the last byte are zero), ``BitReader`` reads it back and never goes
past the bit length.
"""

from nuqkit.errors import DecodeError, PreconditionError

class BitStream(object):
    """
    Immutable bit sequence. Bits are stored MSB-first within each byte;
    ``bitLength <= 8*len(data) < bitLength + 8``.
    """
    def __init__(self, data, bitLength):
        data = bytes(data)
        if not (bitLength <= 8*len(data) < bitLength + 8):
            raise PreconditionError(f'Bit length {bitLength} does not match'
                    f' {len(data)} bytes of data')
        if bitLength % 8 and data[-1] & ((1 << (8 - bitLength % 8)) - 1):
            raise PreconditionError('Padding bits of bit stream must be zero')
        self._data = data
        self._bitLength = bitLength

    @classmethod
    def from_bits(cls, bits):
        """Builds stream from string of '0' and '1' characters."""
        w = BitWriter()
        for c in bits:
            if c not in '01':
                raise PreconditionError(f'Not a bit character: {c!r}')
            w.write(int(c), 1)
        return w.stream()

    @property
    def data(self):
        return self._data

    @property
    def bitLength(self):
        return self._bitLength

    @property
    def bits(self):
        """String of '0' and '1' characters (without padding)."""
        if not self._bitLength:
            return ''
        return format(int.from_bytes(self._data, 'big'), f'0{8*len(self._data)}b')[:self._bitLength]

    def reader(self, offset=0):
        return BitReader(self, offset)

    def __len__(self):
        return self._bitLength

    def __eq__(self, other):
        if not isinstance(other, BitStream): return NotImplemented
        return self._bitLength == other._bitLength and self._data == other._data

    def __hash__(self):
        return hash((self._bitLength, self._data))

    def __repr__(self):
        if self._bitLength <= 64:
            return f'BitStream("{self.bits}")'
        return f'BitStream({self._bitLength} bits)'

class BitWriter(object):
    """Accumulates unsigned integers MSB-first."""
    def __init__(self):
        self._buf = bytearray()
        self._acc = 0
        self._accBits = 0

    def write(self, value, nBits):
        """Appends ``nBits`` lowest bits of non-negative ``value``."""
        if value < 0 or value >> nBits:
            raise PreconditionError(f'Value {value} does not fit in {nBits} bits')
        self._acc = (self._acc << nBits) | value
        self._accBits += nBits
        while self._accBits >= 8:
            self._accBits -= 8
            self._buf.append((self._acc >> self._accBits) & 0xff)
        self._acc &= (1 << self._accBits) - 1

    def write_bytes(self, data):
        for byte in data:
            self.write(byte, 8)

    def write_stream(self, stream):
        """Appends content of another ``BitStream``."""
        full, rest = divmod(stream.bitLength, 8)
        self.write_bytes(stream.data[:full])
        if rest:
            self.write(stream.data[full] >> (8 - rest), rest)

    @property
    def bitLength(self):
        return 8*len(self._buf) + self._accBits

    def stream(self):
        """Returns ``BitStream`` with content written so far (zero-padded)."""
        data = bytes(self._buf)
        if self._accBits:
            data += bytes([(self._acc << (8 - self._accBits)) & 0xff])
        return BitStream(data, self.bitLength)

class BitReader(object):
    """Sequential reader of ``BitStream``."""
    def __init__(self, stream, offset=0):
        if not 0 <= offset <= stream.bitLength:
            raise PreconditionError(f'Offset {offset} is out of stream of'
                    f' {stream.bitLength} bits')
        self._data = stream.data
        self._bitLength = stream.bitLength
        self._pos = offset

    @property
    def position(self):
        return self._pos

    @property
    def remaining(self):
        return self._bitLength - self._pos

    def read_bit(self):
        if self._pos >= self._bitLength:
            raise DecodeError(f'Unexpected end of stream at bit {self._pos}')
        bit = (self._data[self._pos >> 3] >> (7 - (self._pos & 7))) & 1
        self._pos += 1
        return bit

    def read(self, nBits):
        """Reads ``nBits`` as unsigned integer, MSB first."""
        end = self._pos + nBits
        if end > self._bitLength:
            raise DecodeError(f'Unexpected end of stream: {nBits} bits requested at'
                    f' {self._pos}, stream has {self._bitLength}')
        value = 0
        pos = self._pos
        while pos < end:
            bitOff = pos & 7
            take = min(8 - bitOff, end - pos)
            chunk = (self._data[pos >> 3] >> (8 - bitOff - take)) & ((1 << take) - 1)
            value = (value << take) | chunk
            pos += take
        self._pos = end
        return value
