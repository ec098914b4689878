"""Synthetic OMAF test content.

Produces desk-scale cube-map tiled assets (init segments, media segments,
manifest) with deterministic patterned payloads instead of real video, so
that every byte of a resolved bitstream is attributable to a specific
(track, segment, sample). Also provides the randomized segment cases the
oracle tests run against.
"""
from __future__ import annotations

import math
import random
import struct
from dataclasses import dataclass
from pathlib import Path

from .geometry import CMP_LAYOUT, Viewport, angular_distance, cmp_face_direction
from .hevc import InlineConstructor, SampleConstructor, build_extractor, frame_nals, nal_header
from .omafmeta import (
    COVERAGE_BOX,
    PROJECTION_BOX,
    RWPK_BOX,
    SRQR_BOX,
    PackedRegion,
    ProjectionFormat,
    QualityEntry,
    QualityRanking,
    RegionWisePacking,
    SphereRegion,
    build_coverage,
    build_projection,
    build_rwpk,
    build_srqr,
)
from .segments import RunSpec, TrackSpec, build_init_segment, build_media_segment

TIMESCALE = 30000
FACE_ORDER = ("left", "front", "right", "bottom", "back", "top")

_PARAMETER_SETS = (
    nal_header(32) + bytes.fromhex("0c01ffff016000000300"),  # VPS-like
    nal_header(33) + bytes.fromhex("0101600000030090000003"),  # SPS-like
    nal_header(34) + bytes.fromhex("c172b46240"),  # PPS-like
)


@dataclass(frozen=True)
class TileGeom:
    index: int
    face: str
    cell_x: int
    cell_y: int
    proj_x: int
    proj_y: int
    size_px: int
    center_azimuth: float
    center_elevation: float


def tiles_per_edge(track_count: int) -> int:
    """Tiling granularity n for 6*n^2 tracks; rejects other counts."""
    n = round(math.sqrt(track_count / 6))
    if 6 * n * n != track_count or n < 1:
        raise ValueError(f"track count must be 6*n^2 (6, 24, 54, ...), got {track_count}")
    return n


def tile_grid(n: int, tile_px: int) -> list[TileGeom]:
    face_px = n * tile_px
    tiles = []
    for face_idx, face in enumerate(FACE_ORDER):
        col, row = CMP_LAYOUT[face]
        for cell in range(n * n):
            cx, cy = cell % n, cell // n
            direction = cmp_face_direction(face, (cx + 0.5) / n, (cy + 0.5) / n)
            az = math.degrees(math.atan2(direction[1], direction[0]))
            el = math.degrees(math.asin(direction[2]))
            tiles.append(TileGeom(
                index=face_idx * n * n + cell,
                face=face, cell_x=cx, cell_y=cy,
                proj_x=col * face_px + cx * tile_px,
                proj_y=row * face_px + cy * tile_px,
                size_px=tile_px,
                center_azimuth=az, center_elevation=el,
            ))
    return tiles


def coverage_region(index: int, n: int) -> SphereRegion:
    """Exact azimuth/elevation partition: 3n x 2n boxes tile the sphere."""
    az_bands, el_bands = 3 * n, 2 * n
    az_w = 360.0 / az_bands
    el_h = 180.0 / el_bands
    az_idx = index % az_bands
    el_idx = index // az_bands
    return SphereRegion(center_azimuth=-180.0 + (az_idx + 0.5) * az_w,
                        center_elevation=-90.0 + (el_idx + 0.5) * el_h,
                        azimuth_range=az_w, elevation_range=el_h)


def packing_for_viewpoint(e: int, tiles: list[TileGeom], n: int, tile_px: int) -> RegionWisePacking:
    """Region-wise packing emphasizing the tiles nearest viewpoint tile e.

    The packed picture is a single band of height tile_px: full-size rects
    for the emphasized half of the tiles, half-size rects (stacked in
    pairs) for the rest. Regions are ordered by tile index.
    """
    t = len(tiles)
    low_count = t // 2 if (t // 2) % 2 == 0 else t // 2 - 1
    high_count = t - low_count
    center = Viewport(tiles[e].center_azimuth, tiles[e].center_elevation)
    by_distance = sorted(
        tiles, key=lambda g: (angular_distance(center, Viewport(g.center_azimuth,
                                                                g.center_elevation)), g.index))
    high = sorted(g.index for g in by_distance[:high_count])
    low = sorted(g.index for g in by_distance[high_count:])

    s, h = tile_px, tile_px // 2
    packed_rect = {}
    for i, idx in enumerate(high):
        packed_rect[idx] = (i * s, 0, s, s)
    x0 = high_count * s
    for j, idx in enumerate(low):
        packed_rect[idx] = (x0 + (j // 2) * h, (j % 2) * h, h, h)

    regions = []
    for g in tiles:
        px, py, pw, ph = packed_rect[g.index]
        regions.append(PackedRegion(
            proj_x=g.proj_x, proj_y=g.proj_y, proj_w=g.size_px, proj_h=g.size_px,
            packed_x=px, packed_y=py, packed_w=pw, packed_h=ph,
            transform=(g.index + e) % 8,
        ))
    face_px = n * tile_px
    return RegionWisePacking(
        proj_width=3 * face_px, proj_height=2 * face_px,
        packed_width=high_count * s + (low_count // 2) * h, packed_height=s,
        regions=tuple(regions),
    )


def srqr_for_viewpoint(e: int, tiles: list[TileGeom], n: int) -> QualityRanking:
    g = tiles[e]
    emphasized = SphereRegion(center_azimuth=g.center_azimuth,
                              center_elevation=g.center_elevation,
                              azimuth_range=90.0 / n, elevation_range=90.0 / n)
    rest = SphereRegion(center_azimuth=0.0, center_elevation=0.0,
                        azimuth_range=360.0, elevation_range=180.0)
    return QualityRanking(entries=(QualityEntry(region=emphasized, ranking=1),
                                   QualityEntry(region=rest, ranking=2)))


def _case_rng(seed: int, *parts) -> random.Random:
    return random.Random(":".join(str(p) for p in (seed, *parts)))


def tile_sample_payload(seed: int, track_id: int, seq: int, sample_idx: int) -> bytes:
    """One patterned, length-prefixed NAL encoding its own provenance."""
    rng = _case_rng(seed, "tile", track_id, seq, sample_idx)
    body = nal_header(1) + b"TILE" + struct.pack(">HIH", track_id, seq, sample_idx)
    body += rng.randbytes(rng.randint(16, 96))
    return frame_nals([body], 4)


def _sample_durations(total_units: int, count: int) -> list[int]:
    base, rem = divmod(total_units, count)
    return [base + (1 if i < rem else 0) for i in range(count)]


def extractor_sample_payload(seed: int, extractor_id: int, seq: int, sample_idx: int,
                             tile_count: int) -> bytes:
    """Extractor sample: a marker NAL plus one extractor NAL per tile."""
    rng = _case_rng(seed, "extractor", extractor_id, seq, sample_idx)
    nals = [nal_header(35) + b"MARK" + struct.pack(">IH", seq, sample_idx)]
    for i in range(tile_count):
        inline = InlineConstructor(data=bytes([0x26, i & 0xFF]) + rng.randbytes(1))
        copy_all = SampleConstructor(track_ref_index=i + 1, sample_offset=0,
                                     data_offset=0, data_length=0)
        nals.append(build_extractor([inline, copy_all], 4))
    return frame_nals(nals, 4)


@dataclass(frozen=True)
class GeneratedAsset:
    root: Path
    manifest_path: Path
    trace_path: Path
    track_count: int
    tiles_per_edge: int
    segment_count: int
    samples_per_segment: int
    segment_duration_ms: int
    tile_set_ids: tuple[str, ...]
    extractor_set_ids: tuple[str, ...]
    tile_track_ids: tuple[int, ...]
    extractor_track_ids: tuple[int, ...]


def make_asset(out_dir: str | Path, tracks: int = 24, segments: int = 10,
               samples_per_segment: int = 10, segment_duration_ms: int = 1000,
               tile_px: int = 128, seed: int = 0) -> GeneratedAsset:
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    n = tiles_per_edge(tracks)
    tiles = tile_grid(n, tile_px)
    t = len(tiles)
    tile_ids = tuple(range(1, t + 1))
    extractor_ids = tuple(range(101, 101 + t))
    tile_sets = tuple(f"t{i + 1}" for i in range(t))
    extractor_sets = tuple(f"vp{i + 1}" for i in range(t))
    seg_units = segment_duration_ms * TIMESCALE // 1000

    rep_bytes: dict[str, int] = {}

    def write_rep(set_id: str, init: bytes, media: list[bytes]) -> None:
        rep_dir = root / set_id
        rep_dir.mkdir(exist_ok=True)
        (rep_dir / "init.mp4").write_bytes(init)
        total = len(init)
        for i, blob in enumerate(media, start=1):
            (rep_dir / f"seg_{i}.m4s").write_bytes(blob)
            total += len(blob)
        rep_bytes[set_id] = total

    # tile tracks
    for k, g in enumerate(tiles):
        track_id = tile_ids[k]
        omaf = (
            (PROJECTION_BOX, build_projection(ProjectionFormat.CMP)),
            (COVERAGE_BOX, build_coverage([coverage_region(k, n)])),
        )
        spec = TrackSpec(track_id=track_id, sample_entry_code="hvc1",
                         width=tile_px, height=tile_px, nal_length_size=4,
                         parameter_sets=_PARAMETER_SETS, omaf_boxes=omaf,
                         timescale=TIMESCALE)
        init = build_init_segment([spec])
        media = []
        for seq in range(1, segments + 1):
            durations = _sample_durations(seg_units, samples_per_segment)
            samples = tuple(
                (durations[i], tile_sample_payload(seed, track_id, seq, i))
                for i in range(samples_per_segment))
            run = RunSpec(track_id=track_id, base_decode_time=(seq - 1) * seg_units,
                          samples=samples)
            media.append(build_media_segment([run], seq, include_styp=True))
        write_rep(tile_sets[k], init, media)

    # extractor tracks
    packings = []
    rankings = []
    for e in range(t):
        rwpk = packing_for_viewpoint(e, tiles, n, tile_px)
        srqr = srqr_for_viewpoint(e, tiles, n)
        packings.append(rwpk)
        rankings.append(srqr)
        omaf = (
            (PROJECTION_BOX, build_projection(ProjectionFormat.CMP)),
            (RWPK_BOX, build_rwpk(rwpk)),
            (SRQR_BOX, build_srqr(srqr)),
        )
        spec = TrackSpec(track_id=extractor_ids[e], sample_entry_code="hvc2",
                         width=rwpk.packed_width, height=rwpk.packed_height,
                         nal_length_size=4, parameter_sets=_PARAMETER_SETS,
                         scal_refs=tile_ids, omaf_boxes=omaf, timescale=TIMESCALE)
        init = build_init_segment([spec])
        media = []
        for seq in range(1, segments + 1):
            durations = _sample_durations(seg_units, samples_per_segment)
            samples = tuple(
                (durations[i],
                 extractor_sample_payload(seed, extractor_ids[e], seq, i, t))
                for i in range(samples_per_segment))
            run = RunSpec(track_id=extractor_ids[e], base_decode_time=(seq - 1) * seg_units,
                          samples=samples)
            media.append(build_media_segment([run], seq, include_styp=True))
        write_rep(extractor_sets[e], init, media)

    manifest_path = root / "manifest.mpd"
    manifest_path.write_text(_render_mpd(
        tile_sets, extractor_sets, tiles, rankings, n,
        segments, segment_duration_ms, rep_bytes), encoding="utf-8")

    trace_path = root / "trace_static.csv"
    trace_path.write_text("t_ms,azimuth_deg,elevation_deg\n0,0,0\n", encoding="utf-8")

    return GeneratedAsset(
        root=root, manifest_path=manifest_path, trace_path=trace_path,
        track_count=t, tiles_per_edge=n, segment_count=segments,
        samples_per_segment=samples_per_segment, segment_duration_ms=segment_duration_ms,
        tile_set_ids=tile_sets, extractor_set_ids=extractor_sets,
        tile_track_ids=tile_ids, extractor_track_ids=extractor_ids,
    )


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _sphere_value(r: SphereRegion) -> str:
    return ",".join(_fmt(v) for v in (r.center_azimuth, r.center_elevation,
                                      r.azimuth_range, r.elevation_range))


def _render_mpd(tile_sets, extractor_sets, tiles, rankings, n,
                segments, segment_duration_ms, rep_bytes) -> str:
    duration_s = segments * segment_duration_ms / 1000.0
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<MPD xmlns="urn:mpeg:dash:schema:mpd:2011" type="static"'
        f' mediaPresentationDuration="PT{duration_s:g}S" profiles="urn:mpeg:dash:profile:isoff-main:2011">',
        '  <Period>',
    ]
    duration_s_per_seg = segment_duration_ms / 1000.0

    def bandwidth(set_id: str) -> int:
        return max(1, round(rep_bytes[set_id] * 8 / (segments * duration_s_per_seg)))

    for k, set_id in enumerate(tile_sets):
        lines += [
            f'    <AdaptationSet id="{set_id}">',
            f'      <EssentialProperty schemeIdUri="urn:mpeg:mpegI:omaf:2017:pf" value="1"/>',
            f'      <SupplementalProperty schemeIdUri="urn:mpeg:mpegI:omaf:2017:cc"'
            f' value="{_sphere_value(coverage_region(k, n))}"/>',
            f'      <SegmentTemplate media="$RepresentationID$/seg_$Number$.m4s"'
            f' initialization="$RepresentationID$/init.mp4" timescale="{TIMESCALE}"'
            f' duration="{segment_duration_ms * TIMESCALE // 1000}" startNumber="1"/>',
            f'      <Representation id="{set_id}" bandwidth="{bandwidth(set_id)}"/>',
            '    </AdaptationSet>',
        ]
    components = " ".join(tile_sets)
    for e, set_id in enumerate(extractor_sets):
        srqr_value = ";".join(f"{entry.ranking}:{_sphere_value(entry.region)}"
                              for entry in rankings[e].entries)
        lines += [
            f'    <AdaptationSet id="{set_id}">',
            f'      <EssentialProperty schemeIdUri="urn:mpeg:mpegI:omaf:2017:pf" value="1"/>',
            f'      <SupplementalProperty schemeIdUri="urn:mpeg:mpegI:omaf:2017:srqr"'
            f' value="{srqr_value}"/>',
            f'      <SupplementalProperty schemeIdUri="urn:mpeg:dash:preselection:2016"'
            f' value="{set_id},{components}"/>',
            f'      <SegmentTemplate media="$RepresentationID$/seg_$Number$.m4s"'
            f' initialization="$RepresentationID$/init.mp4" timescale="{TIMESCALE}"'
            f' duration="{segment_duration_ms * TIMESCALE // 1000}" startNumber="1"/>',
            f'      <Representation id="{set_id}" bandwidth="{bandwidth(set_id)}"/>',
            '    </AdaptationSet>',
        ]
    lines += ['  </Period>', '</MPD>', '']
    return "\n".join(lines)


# --------------------------------------------------------------------------
# randomized cases for the oracle tests


@dataclass(frozen=True)
class ResolutionCase:
    init_bytes: bytes
    extractor_segment: bytes
    tile_segments: dict[int, bytes]
    extractor_track_id: int
    scal_refs: tuple[int, ...]
    nal_length_size: int
    sequence_number: int


def random_resolution_case(rng: random.Random) -> ResolutionCase:
    """Random extractor segment with 1-8 tile tracks and 1-30 samples."""
    tile_count = rng.randint(1, 8)
    tile_ids = tuple(rng.sample(range(1, 60), tile_count))
    extractor_id = rng.randint(60, 90)
    length_size = rng.choice((1, 2, 4))
    n_samples = rng.randint(1, 30)
    seq = rng.randint(1, 500)

    tile_samples = {tid: [bytes(rng.randbytes(rng.randint(2, 120))) for _ in range(n_samples)]
                    for tid in tile_ids}

    def random_extractor_nal(sample_idx: int) -> bytes:
        constructors = []
        for _ in range(rng.randint(1, 4)):
            if rng.random() < 0.45:
                constructors.append(InlineConstructor(data=rng.randbytes(rng.randint(1, 20))))
            else:
                ref_idx = rng.randint(1, tile_count)
                ref = tile_samples[tile_ids[ref_idx - 1]][sample_idx]
                mode = rng.random()
                if mode < 0.4:
                    off, ln = 0, 0  # whole sample
                elif mode < 0.7:
                    off = rng.randint(0, len(ref))
                    ln = 0  # to end
                else:
                    off = rng.randint(0, len(ref) - 1)
                    ln = rng.randint(1, len(ref) - off)
                constructors.append(SampleConstructor(track_ref_index=ref_idx, sample_offset=0,
                                                      data_offset=off, data_length=ln))
        # resolved piece must hold at least a NAL header's worth of bytes
        size = sum(len(c.data) if isinstance(c, InlineConstructor) else
                   (len(tile_samples[tile_ids[c.track_ref_index - 1]][sample_idx]) - c.data_offset
                    if c.data_length == 0 else c.data_length)
                   for c in constructors)
        if size < 2:
            constructors.append(InlineConstructor(data=rng.randbytes(2)))
        return build_extractor(constructors, length_size)

    extractor_samples = []
    for i in range(n_samples):
        nals = []
        for _ in range(rng.randint(1, 4)):
            if rng.random() < 0.7:
                nals.append(random_extractor_nal(i))
            else:
                nal_type = rng.choice([0, 1, 19, 32, 33, 34, 35, 39])
                nals.append(nal_header(nal_type) + rng.randbytes(rng.randint(0, 50)))
        extractor_samples.append(frame_nals(nals, length_size))

    specs = [TrackSpec(track_id=tid, sample_entry_code="hvc1", width=64, height=64,
                       nal_length_size=rng.choice((1, 2, 4)), parameter_sets=_PARAMETER_SETS,
                       timescale=TIMESCALE) for tid in tile_ids]
    specs.append(TrackSpec(track_id=extractor_id, sample_entry_code="hvc2", width=640, height=64,
                           nal_length_size=length_size, parameter_sets=_PARAMETER_SETS,
                           scal_refs=tile_ids, timescale=TIMESCALE))
    init_bytes = build_init_segment(specs)

    base = rng.randint(0, 10**6)
    durations = [rng.randint(500, 2000) for _ in range(n_samples)]
    extractor_segment = build_media_segment(
        [RunSpec(track_id=extractor_id, base_decode_time=base,
                 samples=tuple(zip(durations, extractor_samples)))],
        seq, include_styp=rng.random() < 0.5)
    tile_segment_bytes = {}
    for tid in tile_ids:
        run = RunSpec(track_id=tid, base_decode_time=base,
                      samples=tuple(zip(durations, tile_samples[tid])))
        tile_segment_bytes[tid] = build_media_segment([run], seq, include_styp=rng.random() < 0.5)

    return ResolutionCase(
        init_bytes=init_bytes, extractor_segment=extractor_segment,
        tile_segments=tile_segment_bytes, extractor_track_id=extractor_id,
        scal_refs=tile_ids, nal_length_size=length_size, sequence_number=seq,
    )
