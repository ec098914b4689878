"""Shared fixtures and independent test oracles.

The oracles here deliberately re-derive results from first principles
(byte walking, ray casting, exhaustive search) without calling into the
code paths they check.
"""
from __future__ import annotations

import pytest

from omafvd.generator import make_asset


# --------------------------------------------------------------------------
# brute-force constructor-walking oracle


def oracle_resolve(extractor_sample: bytes, refs_by_scal_index: list, length_size: int) -> bytes:
    """Independent resolution of one extractor sample, byte for byte."""
    out = b""
    pos = 0
    while pos < len(extractor_sample):
        ln = int.from_bytes(extractor_sample[pos:pos + length_size], "big")
        pos += length_size
        nal = extractor_sample[pos:pos + ln]
        pos += ln
        if (nal[0] >> 1) & 0x3F == 49:
            piece = b""
            i = 2
            while i < len(nal):
                ctype = nal[i]
                if ctype == 0:
                    track_ref_index = nal[i + 1]
                    data_offset = int.from_bytes(nal[i + 3:i + 3 + length_size], "big")
                    data_length = int.from_bytes(
                        nal[i + 3 + length_size:i + 3 + 2 * length_size], "big")
                    i += 3 + 2 * length_size
                    ref = refs_by_scal_index[track_ref_index - 1]
                    if data_length == 0:
                        piece += ref[data_offset:]
                    else:
                        piece += ref[data_offset:data_offset + data_length]
                elif ctype == 2:
                    ilen = nal[i + 1]
                    piece += nal[i + 2:i + 2 + ilen]
                    i += 2 + ilen
                else:
                    raise AssertionError(f"oracle hit constructor type {ctype}")
        else:
            piece = nal
        out += len(piece).to_bytes(4, "big") + piece
    return out


# --------------------------------------------------------------------------
# 3D ray-cube intersection oracle for CMP face classification

_FACE_PLANES = (
    ("front", 0, 1.0), ("back", 0, -1.0),
    ("left", 1, 1.0), ("right", 1, -1.0),
    ("top", 2, 1.0), ("bottom", 2, -1.0),
)


def ray_cube_face(direction) -> str:
    """Face of the unit cube a ray from the origin exits through."""
    hits = []
    for name, axis, sign in _FACE_PLANES:
        comp = direction[axis] * sign
        if comp <= 0.0:
            continue
        t = 1.0 / comp
        point = [direction[i] * t for i in range(3)]
        others = [abs(point[i]) for i in range(3) if i != axis]
        if all(o <= 1.0 + 1e-12 for o in others):
            hits.append(name)
    assert hits, f"ray {direction} exits no face"
    return hits[0]


# --------------------------------------------------------------------------
# generated asset (shared; building it is the expensive part)


@pytest.fixture(scope="session")
def asset24(tmp_path_factory):
    return make_asset(tmp_path_factory.mktemp("asset24"), tracks=24, segments=6,
                      samples_per_segment=5, segment_duration_ms=1000, seed=7)


@pytest.fixture(scope="session")
def asset6(tmp_path_factory):
    return make_asset(tmp_path_factory.mktemp("asset6"), tracks=6, segments=4,
                      samples_per_segment=4, segment_duration_ms=1000, seed=3)
