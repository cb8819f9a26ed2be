"""Adaptive binary range coder.

Probabilities are 12-bit estimates of P(bit == 1) in [1, 4095], starting at 2048.
Coding a bit splits the 32-bit range at ``(range >> 12) * p``; a 1 takes the lower
part.  After each bit the estimate moves 1/32 of the way toward the observed
value.  The encoder renormalizes whenever range drops below 2**24, emitting one
byte per shift with LZMA-style carry propagation.

Byte stream: the always-zero leading byte of the classic scheme is dropped, and
the flush picks the value in the final interval with three trailing zero bytes
(a range >= 2**24 always contains one) and writes only its top byte.  The
decoder supplies exactly those three zero bytes past the end of the stream, so a
valid stream holds ``1 + (number of renormalization shifts)`` bytes and decoding
it touches every byte: truncation and trailing garbage are both detectable.
Streams carry no length.

The primitives below are numba-compiled and shared by the per-bit Python API
(``RangeEncoder`` / ``RangeDecoder``) and by the bulk kernels used by the
octree codec, so there is one implementation of the arithmetic.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .errors import InputExhausted

PROB_BITS = 12
PROB_ONE = 1 << PROB_BITS
PROB_INIT = PROB_ONE // 2
ADAPT_SHIFT = 5
TOP = 1 << 24
MASK32 = 0xFFFFFFFF
IMPLICIT_TAIL = 3

# encoder state slots
E_LOW, E_RANGE, E_CACHE, E_PENDING, E_POS, E_FIRST = range(6)
# decoder state slots
D_CODE, D_RANGE, D_POS, D_OVERRUN = range(4)


@njit(cache=True, nogil=True)
def adapt(p, bit):
    if bit:
        p += (PROB_ONE - p) >> ADAPT_SHIFT
    else:
        p -= p >> ADAPT_SHIFT
    if p < 1:
        p = 1
    elif p > PROB_ONE - 1:
        p = PROB_ONE - 1
    return p


@njit(cache=True, nogil=True)
def enc_init(st):
    st[E_LOW] = 0
    st[E_RANGE] = MASK32
    st[E_CACHE] = 0
    st[E_PENDING] = 0
    st[E_POS] = 0
    st[E_FIRST] = 1


@njit(cache=True, nogil=True)
def _shift_low(st, out):
    low = st[E_LOW]
    if low < 0xFF000000 or low > MASK32:
        carry = low >> 32
        pos = st[E_POS]
        if st[E_FIRST]:
            st[E_FIRST] = 0
        else:
            out[pos] = (st[E_CACHE] + carry) & 0xFF
            pos += 1
        for _ in range(st[E_PENDING]):
            out[pos] = (0xFF + carry) & 0xFF
            pos += 1
        st[E_POS] = pos
        st[E_PENDING] = 0
        st[E_CACHE] = (low >> 24) & 0xFF
    else:
        st[E_PENDING] += 1
    st[E_LOW] = (low & 0x00FFFFFF) << 8


@njit(cache=True, nogil=True)
def enc_bit(st, out, probs, ctx, bit):
    p = probs[ctx]
    rng = st[E_RANGE]
    bound = (rng >> PROB_BITS) * p
    if bit:
        st[E_RANGE] = bound
    else:
        st[E_LOW] += bound
        st[E_RANGE] = rng - bound
    probs[ctx] = adapt(p, bit)
    while st[E_RANGE] < TOP:
        st[E_RANGE] <<= 8
        _shift_low(st, out)


@njit(cache=True, nogil=True)
def enc_finish(st, out):
    # round low up to a multiple of 2**24; still below low + range
    st[E_LOW] = (st[E_LOW] + 0xFFFFFF) & ~np.int64(0xFFFFFF)
    _shift_low(st, out)
    pos = st[E_POS]
    if st[E_FIRST]:
        st[E_FIRST] = 0
    else:
        out[pos] = st[E_CACHE]
        pos += 1
    for _ in range(st[E_PENDING]):
        out[pos] = 0xFF
        pos += 1
    st[E_PENDING] = 0
    st[E_POS] = pos


@njit(cache=True, nogil=True)
def _next_byte(st, data):
    pos = st[D_POS]
    st[D_POS] = pos + 1
    if pos < data.shape[0]:
        return np.int64(data[pos])
    if pos >= data.shape[0] + IMPLICIT_TAIL:
        st[D_OVERRUN] = 1
    return np.int64(0)


@njit(cache=True, nogil=True)
def dec_init(st, data):
    st[D_POS] = 0
    st[D_OVERRUN] = 0
    code = np.int64(0)
    for _ in range(4):
        code = (code << 8) | _next_byte(st, data)
    st[D_CODE] = code
    st[D_RANGE] = MASK32


@njit(cache=True, nogil=True)
def dec_bit(st, data, probs, ctx):
    p = probs[ctx]
    rng = st[D_RANGE]
    bound = (rng >> PROB_BITS) * p
    if st[D_CODE] < bound:
        st[D_RANGE] = bound
        bit = 1
    else:
        st[D_CODE] -= bound
        st[D_RANGE] = rng - bound
        bit = 0
    probs[ctx] = adapt(p, bit)
    while st[D_RANGE] < TOP:
        st[D_RANGE] <<= 8
        st[D_CODE] = (st[D_CODE] << 8) | _next_byte(st, data)
    return bit


@njit(cache=True, nogil=True)
def _encode_bits(bits, ctx_idx, probs, out):
    st = np.empty(6, dtype=np.int64)
    enc_init(st)
    for i in range(bits.shape[0]):
        enc_bit(st, out, probs, ctx_idx[i], bits[i])
    enc_finish(st, out)
    return st[E_POS]


@njit(cache=True, nogil=True)
def _decode_bits(data, ctx_idx, probs, bits):
    st = np.empty(4, dtype=np.int64)
    dec_init(st, data)
    if st[D_OVERRUN]:
        return -1
    for i in range(ctx_idx.shape[0]):
        bits[i] = dec_bit(st, data, probs, ctx_idx[i])
        if st[D_OVERRUN]:
            return i
    return ctx_idx.shape[0]


def worst_case_bytes(n_bits: int) -> int:
    """Output capacity that can never overflow for ``n_bits`` coded bits.

    Adaptation never pushes either symbol's probability below 31/4096, so a bit
    costs under 7.1 bits of output; one byte per bit plus slack for the tail and
    a pending 0xFF run is always enough.
    """
    return n_bits + 16


def encode_bits(bits, ctx_idx, n_contexts: int) -> tuple[bytes, np.ndarray]:
    """Code ``bits[i]`` under context ``ctx_idx[i]``; returns (stream, final probabilities)."""
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    ctx_idx = np.ascontiguousarray(ctx_idx, dtype=np.int64)
    if bits.shape != ctx_idx.shape:
        raise ValueError("bits and ctx_idx must have the same length")
    if len(ctx_idx) and (ctx_idx.min() < 0 or ctx_idx.max() >= n_contexts):
        raise ValueError("context index out of range")
    probs = np.full(n_contexts, PROB_INIT, dtype=np.int64)
    out = np.empty(worst_case_bytes(len(bits)), dtype=np.uint8)
    n = _encode_bits(bits, ctx_idx, probs, out)
    return out[:n].tobytes(), probs


def decode_bits(data: bytes, ctx_idx, n_contexts: int) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`encode_bits` given the same context schedule."""
    ctx_idx = np.ascontiguousarray(ctx_idx, dtype=np.int64)
    if len(ctx_idx) and (ctx_idx.min() < 0 or ctx_idx.max() >= n_contexts):
        raise ValueError("context index out of range")
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    probs = np.full(n_contexts, PROB_INIT, dtype=np.int64)
    bits = np.zeros(len(ctx_idx), dtype=np.uint8)
    done = _decode_bits(buf, ctx_idx, probs, bits)
    if done != len(ctx_idx):
        where = "priming" if done < 0 else f"bit {done}"
        raise InputExhausted(f"stream of {len(buf)} bytes exhausted at {where}")
    return bits, probs


class ContextTable:
    """A bank of adaptive binary contexts; ``table[i]`` is a :class:`BinProb` view."""

    def __init__(self, n: int):
        self.p = np.full(n, PROB_INIT, dtype=np.int64)

    def __len__(self):
        return len(self.p)

    def __getitem__(self, i) -> BinProb:
        return BinProb(self, int(i))


class BinProb:
    """One adaptive probability of a 1 bit, 12-bit fixed point."""

    __slots__ = ("table", "index")

    def __init__(self, table: ContextTable | None = None, index: int = 0):
        self.table = table if table is not None else ContextTable(1)
        self.index = index

    @property
    def p(self) -> int:
        return int(self.table.p[self.index])

    def __repr__(self):
        return f"BinProb(p={self.p})"


class RangeEncoder:
    """Bit-at-a-time encoder.  Call :meth:`flush` once to obtain the stream."""

    def __init__(self):
        self._st = np.empty(6, dtype=np.int64)
        enc_init(self._st)
        self._out = np.empty(64, dtype=np.uint8)
        self._flushed = None

    def _reserve(self):
        need = int(self._st[E_POS] + self._st[E_PENDING]) + 16
        if need > len(self._out):
            grown = np.empty(max(need, 2 * len(self._out)), dtype=np.uint8)
            grown[: len(self._out)] = self._out
            self._out = grown

    def encode_bit(self, ctx: BinProb, bit: int) -> None:
        if self._flushed is not None:
            raise RuntimeError("encoder already flushed")
        self._reserve()
        enc_bit(self._st, self._out, ctx.table.p, ctx.index, 1 if bit else 0)

    def flush(self) -> bytes:
        if self._flushed is None:
            self._reserve()
            enc_finish(self._st, self._out)
            self._flushed = self._out[: self._st[E_POS]].tobytes()
        return self._flushed

    @property
    def bytes_emitted(self) -> int:
        """Bytes committed so far, excluding the cached byte and pending 0xFF run."""
        return int(self._st[E_POS])


class RangeDecoder:
    def __init__(self, data: bytes):
        self._data = np.frombuffer(bytes(data), dtype=np.uint8)
        self._st = np.empty(4, dtype=np.int64)
        dec_init(self._st, self._data)
        if self._st[D_OVERRUN]:
            raise InputExhausted("empty stream")

    def decode_bit(self, ctx: BinProb) -> int:
        bit = dec_bit(self._st, self._data, ctx.table.p, ctx.index)
        if self._st[D_OVERRUN]:
            raise InputExhausted(f"stream of {len(self._data)} bytes exhausted")
        return int(bit)

    @property
    def consumed(self) -> int:
        return min(int(self._st[D_POS]), len(self._data))

    @property
    def at_end(self) -> bool:
        """True once every byte of a complete stream has been used."""
        return int(self._st[D_POS]) == len(self._data) + IMPLICIT_TAIL
