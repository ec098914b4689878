"""Pure-Python implementation of the sample-resolution inner loop.

This is the reference implementation; ``_speedups.pyx`` is a compiled
twin with identical behavior. Both walk length-prefixed NAL streams and
expand extractor NAL units (type 49) by copying constructor-addressed
byte ranges out of time-aligned tile samples.
"""
from __future__ import annotations

from .errors import (
    CopyOutOfRange,
    DanglingBytes,
    MissingTileSample,
    NonzeroSampleOffset,
    TruncatedConstructor,
    UnknownConstructorType,
)

BACKEND = "python"

NAL_TYPE_EXTRACTOR = 49

_SAMPLE_CONSTRUCTOR = 0
_INLINE_CONSTRUCTOR = 2


def split_nal_spans(data: bytes, length_size: int) -> list[tuple[int, int]]:
    """(payload offset, payload length) of every length-prefixed NAL unit."""
    spans: list[tuple[int, int]] = []
    pos = 0
    n = len(data)
    while pos < n:
        if pos + length_size > n:
            raise DanglingBytes(f"{n - pos} trailing bytes cannot hold a {length_size}-byte length prefix")
        ln = int.from_bytes(data[pos:pos + length_size], "big")
        pos += length_size
        if ln < 2:
            raise DanglingBytes(f"NAL unit of {ln} bytes at offset {pos} cannot hold a header")
        if pos + ln > n:
            raise DanglingBytes(f"NAL length {ln} at offset {pos} overruns buffer of {n} bytes")
        spans.append((pos, ln))
        pos += ln
    return spans


def resolve_sample_payload(data: bytes, refs: list[bytes | None], length_size: int) -> bytes:
    """Resolve one extractor-track sample into a 4-byte-prefixed NAL stream.

    ``refs[i]`` holds the raw time-aligned sample bytes of the track at
    scal position ``i+1`` (or None when that track was not supplied);
    non-extractor NAL units pass through verbatim.
    """
    out = bytearray()
    for off, ln in split_nal_spans(data, length_size):
        nal_type = (data[off] >> 1) & 0x3F
        if nal_type == NAL_TYPE_EXTRACTOR:
            piece = _walk_constructors(data, off + 2, off + ln, refs, length_size)
        else:
            piece = data[off:off + ln]
        out += len(piece).to_bytes(4, "big")
        out += piece
    return bytes(out)


def _walk_constructors(data: bytes, pos: int, end: int,
                       refs: list[bytes | None], length_size: int) -> bytes:
    if pos >= end:
        raise TruncatedConstructor("extractor NAL carries no constructors")
    piece = bytearray()
    while pos < end:
        ctype = data[pos]
        pos += 1
        if ctype == _SAMPLE_CONSTRUCTOR:
            need = 2 + 2 * length_size
            if pos + need > end:
                raise TruncatedConstructor(f"sample constructor needs {need} bytes, {end - pos} left")
            track_ref_index = data[pos]
            sample_offset = data[pos + 1]
            if sample_offset >= 0x80:
                sample_offset -= 0x100
            data_offset = int.from_bytes(data[pos + 2:pos + 2 + length_size], "big")
            data_length = int.from_bytes(data[pos + 2 + length_size:pos + need], "big")
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
            if data_offset > len(ref):
                raise CopyOutOfRange(
                    f"data_offset {data_offset} beyond referenced sample of {len(ref)} bytes")
            if data_length == 0:
                piece += ref[data_offset:]
            else:
                if data_offset + data_length > len(ref):
                    raise CopyOutOfRange(
                        f"copy [{data_offset}, {data_offset + data_length}) beyond "
                        f"referenced sample of {len(ref)} bytes")
                piece += ref[data_offset:data_offset + data_length]
        elif ctype == _INLINE_CONSTRUCTOR:
            if pos >= end:
                raise TruncatedConstructor("inline constructor missing its length byte")
            ilen = data[pos]
            pos += 1
            if pos + ilen > end:
                raise TruncatedConstructor(f"inline constructor of {ilen} bytes overruns the NAL")
            piece += data[pos:pos + ilen]
            pos += ilen
        else:
            raise UnknownConstructorType(f"constructor type {ctype}")
    return bytes(piece)
