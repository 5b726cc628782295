"""
Bit-exact wire format of quantized gradients.

Layout of an encoded ``QuantizedVector``:

    norm        b bits, IEEE-754 binary32 (or binary64), big-endian
    header      ERC(nnz + 1)
    entries     for each entry in increasing index order:
                  ERC(gap)     gap to previous index (first gap is index+1)
                  sign         1 bit, 1 for positive
                  level code   depends on ``CodecConfig.levelCodeMode``

Level code modes:

    log_power_of_two  ERC(log2(2^{s+1} l_j)); levels must be exact powers
                      of 1/2, where the code value equals the level index
    level_index       ERC(level index)
    huffman           canonical Huffman code of the level index

Integers are written with Elias recursive coding (ERC): the code of N ends
with 0 and, while N > 1, binary(N) is prepended and the procedure repeats
with N replaced by (number of prepended bits - 1).
"""

import math, struct, logging

from nuqkit.settings import gSettings
from nuqkit.errors import PreconditionError, DecodeError, UsageError
from nuqkit.bitstream import BitStream, BitWriter
from nuqkit.quantizer import QuantizedVector
from nuqkit.huffman import HuffmanCodebook

# Version byte of persisted stream files
gFormatVersion = 1

gLevelCodeModes = ('log_power_of_two', 'level_index', 'huffman')

#                                                 __________________________
# ______________________________________________/ Elias recursive coding

def erc_codeword(N):
    """Returns (code value, code length) of ERC(N)."""
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise PreconditionError(f'Elias recursive code requires integer N >= 1, got {N!r}')
    N = int(N)
    code, nBits = 0, 1
    while N > 1:
        b = N.bit_length()
        code |= N << nBits
        nBits += b
        N = b - 1
    return code, nBits

def erc_length(N):
    return erc_codeword(N)[1]

def write_erc(writer, N):
    writer.write(*erc_codeword(N))

def read_erc(reader):
    N = 1
    while reader.read_bit():
        if N > 64:
            raise DecodeError(f'Elias recursive code for integer wider than 64 bits'
                    f' at position {reader.position}')
        N = (1 << N) | reader.read(N)
    return N

def erc_encode(N):
    w = BitWriter()
    write_erc(w, N)
    return w.stream()

def erc_decode(stream, offset=0):
    """
    Decodes ERC integer starting at ``offset``; returns (N, number of bits
    consumed).
    """
    reader = stream.reader(offset)
    N = read_erc(reader)
    return N, reader.position - offset

#                                                      _____________________
# ___________________________________________________/ Gradient wire format

class CodecConfig(object):
    """
    Parameters of the gradient wire format. Unset fields take defaults from
    ``gSettings`` ("float-bits", "level-code-mode").
    """
    def __init__(self, floatBits=None, levelCodeMode=None, codebook=None):
        if floatBits is None: floatBits = gSettings['float-bits']
        if levelCodeMode is None:
            levelCodeMode = 'huffman' if codebook is not None else gSettings['level-code-mode']
        if floatBits not in (32, 64):
            raise PreconditionError(f'Norm width must be 32 or 64 bits, got {floatBits}')
        if levelCodeMode not in gLevelCodeModes:
            raise PreconditionError(f'Unknown level code mode "{levelCodeMode}", expected'
                    ' one of: ' + ', '.join(gLevelCodeModes))
        if 'huffman' == levelCodeMode and not isinstance(codebook, HuffmanCodebook):
            raise PreconditionError('Huffman level code mode requires a codebook')
        self._floatBits = int(floatBits)
        self._levelCodeMode = levelCodeMode
        self._codebook = codebook if 'huffman' == levelCodeMode else None

    @property
    def floatBits(self):
        return self._floatBits

    @property
    def levelCodeMode(self):
        return self._levelCodeMode

    @property
    def codebook(self):
        return self._codebook

    def with_codebook(self, codebook):
        return CodecConfig(self._floatBits, 'huffman', codebook)

    def to_dict(self):
        d = {'float_bits': self._floatBits, 'level_code_mode': self._levelCodeMode}
        if self._codebook is not None:
            d['codebook'] = self._codebook.to_dict()
        return d

    def __repr__(self):
        return f'CodecConfig(floatBits={self._floatBits}, levelCodeMode={self._levelCodeMode!r})'

def _check_levels(L, cfg):
    if 'log_power_of_two' == cfg.levelCodeMode and not L.is_power_of_half():
        raise PreconditionError('Level code mode "log_power_of_two" requires levels'
                f' (0, 2^-s, ..., 1/2, 1), got {L!r}')
    if 'huffman' == cfg.levelCodeMode:
        missing = set(range(1, L.s + 2)) - set(cfg.codebook.symbols)
        if missing:
            raise PreconditionError('Huffman codebook has no code for level indices '
                    + ', '.join(str(k) for k in sorted(missing)))

def _norm_format(floatBits):
    return '>f' if 32 == floatBits else '>d'

def write_gradient(writer, q, L, cfg):
    """Appends encoded quantized vector to ``BitWriter``."""
    if q.nnz and int(q.levelIndices.max()) > L.s + 1:
        raise PreconditionError(f'Level index {int(q.levelIndices.max())} exceeds'
                f' s+1 = {L.s + 1}')
    q = q.rounded(cfg.floatBits)
    writer.write_bytes(struct.pack(_norm_format(cfg.floatBits), q.norm))
    write_erc(writer, q.nnz + 1)
    prev = -1
    mode = cfg.levelCodeMode
    for index, sign, level in zip(q.indices.tolist(), q.signs.tolist(), q.levelIndices.tolist()):
        write_erc(writer, index - prev)
        writer.write(1 if sign > 0 else 0, 1)
        if 'huffman' == mode:
            cfg.codebook.write(writer, level)
        else:
            # in log mode the code value log2(2^{s+1} l_j) coincides with j
            write_erc(writer, level)
        prev = index

def read_gradient(reader, d, L, cfg):
    """Reads one encoded quantized vector of dimension ``d`` from ``BitReader``."""
    nBytes = cfg.floatBits//8
    norm = struct.unpack(_norm_format(cfg.floatBits),
            reader.read(8*nBytes).to_bytes(nBytes, 'big'))[0]
    if not math.isfinite(norm) or norm < 0 or math.copysign(1., norm) < 0:
        raise DecodeError(f'Decoded norm {norm!r} is not a finite non-negative number')
    nnz = read_erc(reader) - 1
    if nnz > d:
        raise DecodeError(f'Entry count {nnz} exceeds dimension {d}')
    if 0 == norm and nnz:
        raise DecodeError(f'Zero norm gradient declares {nnz} entries')
    indices, signs, levels = [], [], []
    prev = -1
    maxLevel = L.s + 1
    for _ in range(nnz):
        index = prev + read_erc(reader)
        if index >= d:
            raise DecodeError(f'Decoded index {index} overflows dimension {d}')
        signs.append(1 if reader.read_bit() else -1)
        if 'huffman' == cfg.levelCodeMode:
            level = cfg.codebook.read(reader)
        else:
            level = read_erc(reader)
        if level > maxLevel:
            raise DecodeError(f'Level code {level} is out of range 1..{maxLevel}')
        indices.append(index)
        levels.append(level)
        prev = index
    return QuantizedVector(norm, d, indices, signs, levels)

def encode_gradient(q, L, cfg=None):
    """Encodes ``QuantizedVector`` into a ``BitStream``."""
    if cfg is None: cfg = CodecConfig()
    _check_levels(L, cfg)
    w = BitWriter()
    write_gradient(w, q, L, cfg)
    return w.stream()

def decode_gradient(stream, d, L, cfg=None):
    """
    Decodes ``BitStream`` produced by ``encode_gradient()`` with the same
    dimension, levels and config. The whole stream must be consumed.
    """
    if cfg is None: cfg = CodecConfig()
    _check_levels(L, cfg)
    reader = stream.reader()
    q = read_gradient(reader, d, L, cfg)
    if reader.remaining:
        raise DecodeError(f'{reader.remaining} trailing bits after encoded gradient')
    return q

def encode_buckets(qs, L, cfg=None):
    """Concatenated encoding of bucket-wise quantized vectors."""
    if cfg is None: cfg = CodecConfig()
    _check_levels(L, cfg)
    w = BitWriter()
    for q in qs:
        write_gradient(w, q, L, cfg)
    return w.stream()

def decode_buckets(stream, d, bucketSpec, L, cfg=None):
    if cfg is None: cfg = CodecConfig()
    _check_levels(L, cfg)
    reader = stream.reader()
    qs = [read_gradient(reader, sl.stop - sl.start, L, cfg) for sl in bucketSpec.slices(d)]
    if reader.remaining:
        raise DecodeError(f'{reader.remaining} trailing bits after encoded buckets')
    return qs

def huffman_encode(q, L, codebook, floatBits=None):
    return encode_gradient(q, L, CodecConfig(floatBits, 'huffman', codebook))

def huffman_decode(stream, d, L, codebook, floatBits=None):
    return decode_gradient(stream, d, L, CodecConfig(floatBits, 'huffman', codebook))

def measured_bits(stream):
    """Exact number of bits of the stream (padding excluded)."""
    return stream.bitLength

#                                                    _______________________
# _________________________________________________/ Persisted stream files

def pack_stream_file(path, stream):
    """
    Writes stream as: version byte, 4-byte big-endian bit length, payload.
    """
    L = logging.getLogger(__name__)
    if stream.bitLength >= 1 << 32:
        raise PreconditionError(f'Stream of {stream.bitLength} bits is too long to persist')
    with open(path, 'wb') as f:
        f.write(bytes([gFormatVersion]))
        f.write(stream.bitLength.to_bytes(4, 'big'))
        f.write(stream.data)
    L.debug(f'{stream.bitLength} bits written to "{path}"')

def unpack_stream_file(path):
    try:
        with open(path, 'rb') as f:
            content = f.read()
    except OSError as e:
        raise UsageError(f'Can not read stream file "{path}": {e}')
    if len(content) < 5:
        raise DecodeError(f'"{path}" is too short to be a stream file')
    if content[0] != gFormatVersion:
        raise DecodeError(f'"{path}": unsupported stream format version {content[0]}'
                f' (expected {gFormatVersion})')
    bitLength = int.from_bytes(content[1:5], 'big')
    payload = content[5:]
    if len(payload) != -(-bitLength//8):
        raise DecodeError(f'"{path}": payload of {len(payload)} bytes does not match'
                f' declared length of {bitLength} bits')
    try:
        return BitStream(payload, bitLength)
    except PreconditionError as e:
        raise DecodeError(f'"{path}": {e}')
