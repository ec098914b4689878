"""Extractor-track resolution: merge tile-track samples into one bitstream.

This is the repackaging core of the media engine: every extractor NAL in
the hvc2 track is replaced by the bytes its constructors address inside
the time-aligned hvc1 tile samples, and the merged samples are emitted as
a single-track media segment carrying a session-constant track id.
"""
from __future__ import annotations

from typing import Mapping

from .errors import BadTrackRef, SampleCountMismatch
from .segments import (
    InitSegment,
    MediaSegment,
    OutputTrackConfig,
    TrackInfo,
    TrackRun,
    build_output_media,
)
from .speedups import resolve_sample_payload


def resolve_sample(extractor_sample: bytes, tile_samples: Mapping[int, bytes],
                   scal_refs: tuple[int, ...] | list[int], nal_length_size: int) -> bytes:
    """Resolve one extractor sample against its referenced tile samples.

    Returns the merged payload re-framed with 4-byte length prefixes.
    """
    refs = [tile_samples.get(track_id) for track_id in scal_refs]
    return resolve_sample_payload(extractor_sample, refs, nal_length_size)


def extractor_track_of(init: InitSegment, segment: MediaSegment) -> TrackInfo:
    """The hvc2 track a segment's fragment run belongs to."""
    for run in segment.runs:
        track = init.track(run.track_id)
        if track.sample_entry_code == "hvc2":
            return track
    raise BadTrackRef("segment carries no run of an hvc2 extractor track")


def repackage_segment(extractor_segment: MediaSegment,
                      tile_segments: Mapping[int, MediaSegment],
                      init: InitSegment,
                      config: OutputTrackConfig) -> bytes:
    """Merge an extractor segment with its tile segments into output bytes.

    Sample i of the output is the resolution of extractor sample i against
    every tile track's sample i; durations, sequence number and base decode
    time are carried over from the extractor track, and the output track id
    is taken from ``config`` regardless of the input extractor track id.
    """
    track = extractor_track_of(init, extractor_segment)
    run = extractor_segment.run_for(track.track_id)
    n = len(run.samples)

    tile_runs: dict[int, tuple[MediaSegment, TrackRun]] = {}
    for track_id, seg in tile_segments.items():
        if seg.sequence_number != extractor_segment.sequence_number:
            raise SampleCountMismatch(
                f"tile track {track_id} segment sequence {seg.sequence_number} "
                f"is not aligned with extractor sequence {extractor_segment.sequence_number}")
        tile_run = seg.run_for(track_id)
        if len(tile_run.samples) != n:
            raise SampleCountMismatch(
                f"tile track {track_id} has {len(tile_run.samples)} samples, "
                f"extractor track has {n}")
        tile_runs[track_id] = (seg, tile_run)

    out_samples: list[tuple[int, bytes]] = []
    for i in range(n):
        tile_bytes = {tid: seg.sample_bytes(tr, i) for tid, (seg, tr) in tile_runs.items()}
        try:
            payload = resolve_sample(extractor_segment.sample_bytes(run, i), tile_bytes,
                                     track.scal_refs, track.nal_length_size)
        except Exception as exc:
            raise type(exc)(f"sample {i}: {exc}") from exc
        out_samples.append((run.samples[i].duration, payload))

    return build_output_media(out_samples, extractor_segment.sequence_number,
                              run.base_decode_time, config)
