"""HEVC NAL unit framing and the extractor in-stream pointer structure.

Wire layout of an extractor NAL (type 49): a 2-byte NAL header followed
by constructors until the payload ends. Constructor type 0 (sample):
track_ref_index u8, sample_offset s8, then data_offset and data_length,
each as wide as the track's NAL length prefix. Constructor type 2
(inline): length u8, then that many bytes.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import NotAnExtractor, TruncatedConstructor, UnknownConstructorType
from .speedups import NAL_TYPE_EXTRACTOR, split_nal_spans


@dataclass(frozen=True)
class NalUnit:
    nal_type: int
    payload: bytes  # full NAL bytes including the 2-byte header

    def __post_init__(self):
        if len(self.payload) < 2:
            raise ValueError("NAL unit needs at least its 2-byte header")


@dataclass(frozen=True)
class SampleConstructor:
    track_ref_index: int  # 1-based index into scal_refs
    sample_offset: int
    data_offset: int
    data_length: int  # 0 means copy to the end of the referenced sample


@dataclass(frozen=True)
class InlineConstructor:
    data: bytes


Constructor = SampleConstructor | InlineConstructor


@dataclass(frozen=True)
class ExtractorNal:
    constructors: tuple[Constructor, ...]


def nal_header(nal_type: int, layer_id: int = 0, temporal_id_plus1: int = 1) -> bytes:
    b0 = ((nal_type & 0x3F) << 1) | ((layer_id >> 5) & 0x01)
    b1 = ((layer_id & 0x1F) << 3) | (temporal_id_plus1 & 0x07)
    return bytes([b0, b1])


def nal_type_of(payload: bytes) -> int:
    return (payload[0] >> 1) & 0x3F


def split_nal_units(sample: bytes, nal_length_size: int) -> list[NalUnit]:
    """Split a length-prefixed sample into NAL units (framing preserved)."""
    return [NalUnit(nal_type=nal_type_of(sample[off:off + 1]), payload=sample[off:off + ln])
            for off, ln in split_nal_spans(sample, nal_length_size)]


def frame_nals(payloads: list[bytes], nal_length_size: int = 4) -> bytes:
    """Concatenate NAL payloads with big-endian length prefixes."""
    out = bytearray()
    for p in payloads:
        out += len(p).to_bytes(nal_length_size, "big")
        out += p
    return bytes(out)


def to_annex_b(framed: bytes, nal_length_size: int = 4) -> bytes:
    """Re-frame a length-prefixed stream with Annex-B start codes."""
    out = bytearray()
    for off, ln in split_nal_spans(framed, nal_length_size):
        out += b"\x00\x00\x00\x01"
        out += framed[off:off + ln]
    return bytes(out)


def parse_extractor(nal: NalUnit, nal_length_size: int = 4) -> ExtractorNal:
    """Decode the constructor list of an extractor NAL unit."""
    if nal.nal_type != NAL_TYPE_EXTRACTOR:
        raise NotAnExtractor(f"NAL type {nal.nal_type} is not an extractor (type {NAL_TYPE_EXTRACTOR})")
    data = nal.payload
    pos, end = 2, len(data)
    if pos >= end:
        raise TruncatedConstructor("extractor NAL carries no constructors")
    constructors: list[Constructor] = []
    while pos < end:
        ctype = data[pos]
        pos += 1
        if ctype == 0:
            need = 2 + 2 * nal_length_size
            if pos + need > end:
                raise TruncatedConstructor(f"sample constructor needs {need} bytes, {end - pos} left")
            track_ref_index = data[pos]
            sample_offset = data[pos + 1]
            if sample_offset >= 0x80:
                sample_offset -= 0x100
            data_offset = int.from_bytes(data[pos + 2:pos + 2 + nal_length_size], "big")
            data_length = int.from_bytes(data[pos + 2 + nal_length_size:pos + need], "big")
            pos += need
            constructors.append(SampleConstructor(track_ref_index, sample_offset,
                                                  data_offset, data_length))
        elif ctype == 2:
            if pos >= end:
                raise TruncatedConstructor("inline constructor missing its length byte")
            ilen = data[pos]
            pos += 1
            if pos + ilen > end:
                raise TruncatedConstructor(f"inline constructor of {ilen} bytes overruns the NAL")
            constructors.append(InlineConstructor(data[pos:pos + ilen]))
            pos += ilen
        else:
            raise UnknownConstructorType(f"constructor type {ctype}")
    return ExtractorNal(constructors=tuple(constructors))


def build_extractor(constructors: list[Constructor] | tuple[Constructor, ...],
                    nal_length_size: int = 4) -> bytes:
    """Extractor NAL payload (header + constructors), not length-prefixed."""
    out = bytearray(nal_header(NAL_TYPE_EXTRACTOR))
    for c in constructors:
        if isinstance(c, SampleConstructor):
            out += bytes([0, c.track_ref_index, c.sample_offset & 0xFF])
            out += c.data_offset.to_bytes(nal_length_size, "big")
            out += c.data_length.to_bytes(nal_length_size, "big")
        elif isinstance(c, InlineConstructor):
            if len(c.data) > 255:
                raise ValueError("inline constructor data limited to 255 bytes")
            out += bytes([2, len(c.data)])
            out += c.data
        else:
            raise TypeError(f"unknown constructor {c!r}")
    return bytes(out)
