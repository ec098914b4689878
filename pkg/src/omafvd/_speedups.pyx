# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled twin of ``_speedups_py``: the sample-resolution inner loop.

Behavior must match the pure-Python module byte for byte; the test suite
runs both backends against each other.
"""

from .errors import (
    CopyOutOfRange,
    DanglingBytes,
    MissingTileSample,
    NonzeroSampleOffset,
    TruncatedConstructor,
    UnknownConstructorType,
)

BACKEND = "c"

NAL_TYPE_EXTRACTOR = 49

DEF SAMPLE_CONSTRUCTOR = 0
DEF INLINE_CONSTRUCTOR = 2


cdef inline unsigned long long _read_be(const unsigned char[::1] buf, Py_ssize_t pos, int width):
    cdef unsigned long long value = 0
    cdef int i
    for i in range(width):
        value = (value << 8) | buf[pos + i]
    return value


def split_nal_spans(bytes data, int length_size):
    """(payload offset, payload length) of every length-prefixed NAL unit."""
    cdef const unsigned char[::1] buf = data
    cdef Py_ssize_t pos = 0
    cdef Py_ssize_t n = len(data)
    cdef unsigned long long ln
    spans = []
    while pos < n:
        if pos + length_size > n:
            raise DanglingBytes(f"{n - pos} trailing bytes cannot hold a {length_size}-byte length prefix")
        ln = _read_be(buf, pos, length_size)
        pos += length_size
        if ln < 2:
            raise DanglingBytes(f"NAL unit of {ln} bytes at offset {pos} cannot hold a header")
        if pos + <Py_ssize_t>ln > n:
            raise DanglingBytes(f"NAL length {ln} at offset {pos} overruns buffer of {n} bytes")
        spans.append((pos, <Py_ssize_t>ln))
        pos += <Py_ssize_t>ln
    return spans


def resolve_sample_payload(bytes data, list refs, int length_size):
    """Resolve one extractor-track sample into a 4-byte-prefixed NAL stream."""
    cdef const unsigned char[::1] buf = data
    cdef Py_ssize_t pos = 0
    cdef Py_ssize_t n = len(data)
    cdef Py_ssize_t off, end
    cdef unsigned long long ln
    cdef int nal_type
    out = bytearray()
    while pos < n:
        if pos + length_size > n:
            raise DanglingBytes(f"{n - pos} trailing bytes cannot hold a {length_size}-byte length prefix")
        ln = _read_be(buf, pos, length_size)
        pos += length_size
        if ln < 2:
            raise DanglingBytes(f"NAL unit of {ln} bytes at offset {pos} cannot hold a header")
        if pos + <Py_ssize_t>ln > n:
            raise DanglingBytes(f"NAL length {ln} at offset {pos} overruns buffer of {n} bytes")
        off = pos
        end = pos + <Py_ssize_t>ln
        nal_type = (buf[off] >> 1) & 0x3F
        if nal_type == NAL_TYPE_EXTRACTOR:
            piece = _walk_constructors(data, buf, off + 2, end, refs, length_size)
        else:
            piece = data[off:end]
        out += len(piece).to_bytes(4, "big")
        out += piece
        pos = end
    return bytes(out)


cdef bytes _walk_constructors(bytes data, const unsigned char[::1] buf,
                              Py_ssize_t pos, Py_ssize_t end, list refs, int length_size):
    cdef int ctype, track_ref_index, sample_offset, ilen
    cdef Py_ssize_t need, ref_len
    cdef unsigned long long data_offset, data_length
    if pos >= end:
        raise TruncatedConstructor("extractor NAL carries no constructors")
    piece = bytearray()
    while pos < end:
        ctype = buf[pos]
        pos += 1
        if ctype == SAMPLE_CONSTRUCTOR:
            need = 2 + 2 * length_size
            if pos + need > end:
                raise TruncatedConstructor(f"sample constructor needs {need} bytes, {end - pos} left")
            track_ref_index = buf[pos]
            sample_offset = buf[pos + 1]
            if sample_offset >= 0x80:
                sample_offset -= 0x100
            data_offset = _read_be(buf, pos + 2, length_size)
            data_length = _read_be(buf, pos + 2 + length_size, length_size)
            pos += need
            if sample_offset != 0:
                raise NonzeroSampleOffset(
                    f"sample constructor with sample_offset {sample_offset}; "
                    "only time-aligned references are supported")
            if track_ref_index < 1 or track_ref_index > len(refs):
                raise MissingTileSample(
                    f"constructor references scal index {track_ref_index} "
                    f"but only {len(refs)} tracks are referenced")
            ref = refs[track_ref_index - 1]
            if ref is None:
                raise MissingTileSample(f"no sample supplied for scal index {track_ref_index}")
            ref_len = len(<bytes>ref)
            if <Py_ssize_t>data_offset > ref_len:
                raise CopyOutOfRange(
                    f"data_offset {data_offset} beyond referenced sample of {ref_len} bytes")
            if data_length == 0:
                piece += (<bytes>ref)[data_offset:]
            else:
                if <Py_ssize_t>(data_offset + data_length) > ref_len:
                    raise CopyOutOfRange(
                        f"copy [{data_offset}, {data_offset + data_length}) beyond "
                        f"referenced sample of {ref_len} bytes")
                piece += (<bytes>ref)[data_offset:data_offset + data_length]
        elif ctype == INLINE_CONSTRUCTOR:
            if pos >= end:
                raise TruncatedConstructor("inline constructor missing its length byte")
            ilen = buf[pos]
            pos += 1
            if pos + ilen > end:
                raise TruncatedConstructor(f"inline constructor of {ilen} bytes overruns the NAL")
            piece += data[pos:pos + ilen]
            pos += ilen
        else:
            raise UnknownConstructorType(f"constructor type {ctype}")
    return bytes(piece)
