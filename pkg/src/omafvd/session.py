"""Deterministic viewport-driven streaming session engine.

The engine reproduces the player loop: pick the extractor track for the
current viewport, schedule segment-group fetches against a buffer limit,
repackage each group into the single output track, append into one of two
alternating sink buffers, and advance playback, switching sinks exactly at
run boundaries so packing metadata and media change together.

Simulated time is integer milliseconds. With a bandwidth model the whole
session is a deterministic discrete-event simulation; without one, fetches
run against the wall clock and the same loop applies.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urljoin

import requests

from .errors import (
    EndOfStream,
    FetchFailed,
    InconsistentQualityRanking,
    NonMonotoneSequence,
    SessionError,
)
from .geometry import Viewport, select_extractor_track
from .mpd import Manifest, PreselectionSet, build_segment_url, resolve_preselections, total_segments
from .omafmeta import parse_track_metadata
from .resolver import repackage_segment
from .segments import (
    DEFAULT_OUTPUT_TRACK_ID,
    InitSegment,
    OutputTrackConfig,
    build_output_init,
    parse_init_segment,
    parse_media_segment,
)

# --------------------------------------------------------------------------
# external file formats


@dataclass(frozen=True)
class ViewportTrace:
    samples: tuple[tuple[int, float, float], ...]  # (t_ms, azimuth, elevation)

    def __post_init__(self):
        if not self.samples:
            raise SessionError("viewport trace is empty")
        if self.samples[0][0] != 0:
            raise SessionError("viewport trace must start at t=0")
        for (t0, _, _), (t1, _, _) in zip(self.samples, self.samples[1:]):
            if t1 <= t0:
                raise SessionError(f"viewport trace times not strictly increasing at {t1}")

    def viewport_at(self, t_ms: int) -> Viewport:
        current = self.samples[0]
        for s in self.samples:
            if s[0] > t_ms:
                break
            current = s
        return Viewport(azimuth=current[1], elevation=current[2])


def parse_viewport_trace(text: str) -> ViewportTrace:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "t_ms,azimuth_deg,elevation_deg":
        raise SessionError("viewport trace needs header 't_ms,azimuth_deg,elevation_deg'")
    samples = []
    for ln in lines[1:]:
        t, az, el = ln.split(",")
        samples.append((int(t), float(az), float(el)))
    return ViewportTrace(samples=tuple(samples))


def format_viewport_trace(samples) -> str:
    out = ["t_ms,azimuth_deg,elevation_deg"]
    out += [f"{t},{az:g},{el:g}" for t, az, el in samples]
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class BandwidthModel:
    """Piecewise-constant downlink capacity in bytes per second."""

    points: tuple[tuple[int, float], ...]  # (t_ms, bytes_per_second)

    def __post_init__(self):
        if not self.points or self.points[0][0] != 0:
            raise SessionError("bandwidth model needs a point at t=0")
        for (t0, _), (t1, _) in zip(self.points, self.points[1:]):
            if t1 <= t0:
                raise SessionError("bandwidth trace times not strictly increasing")
        for _, rate in self.points:
            if rate <= 0:
                raise SessionError("bandwidth must be positive")

    @classmethod
    def constant(cls, bytes_per_second: float) -> BandwidthModel:
        return cls(points=((0, float(bytes_per_second)),))

    def rate_at(self, t_ms: float) -> float:
        rate = self.points[0][1]
        for t0, r in self.points:
            if t0 > t_ms:
                break
            rate = r
        return rate

    def _next_breakpoint(self, t_ms: float) -> float | None:
        for t0, _ in self.points:
            if t0 > t_ms:
                return float(t0)
        return None

    def batch_completion_times(self, sizes: list[int], start_ms: int) -> list[int]:
        """Per-request completion times with fair capacity sharing.

        All requests start together; at any instant each in-flight request
        receives an equal share of the capacity.
        """
        remaining = [float(s) for s in sizes]
        done_ms = [float(start_ms)] * len(sizes)
        active = [i for i, s in enumerate(sizes) if s > 0]
        t = float(start_ms)
        while active:
            per_req = self.rate_at(t) / 1000.0 / len(active)  # bytes per ms
            breakpoint_t = self._next_breakpoint(t)
            dt_finish = min(remaining[i] for i in active) / per_req
            if breakpoint_t is not None and t + dt_finish > breakpoint_t:
                dt = breakpoint_t - t
                for i in active:
                    remaining[i] -= per_req * dt
                t = breakpoint_t
                continue
            t += dt_finish
            still = []
            for i in active:
                remaining[i] -= per_req * dt_finish
                if remaining[i] <= 1e-6:
                    done_ms[i] = t
                else:
                    still.append(i)
            active = still
        return [math.ceil(d - 1e-9) for d in done_ms]


def parse_bandwidth_trace(text: str) -> BandwidthModel:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "t_ms,bytes_per_second":
        raise SessionError("bandwidth trace needs header 't_ms,bytes_per_second'")
    points = []
    for ln in lines[1:]:
        t, rate = ln.split(",")
        points.append((int(t), float(rate)))
    return BandwidthModel(points=tuple(points))


# --------------------------------------------------------------------------
# fetch sources


class LocalSource:
    """Reads segment paths below a content directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def fetch_batch(self, paths: list[str]) -> list[bytes]:
        out = []
        for p in paths:
            try:
                out.append((self.root / p).read_bytes())
            except OSError as exc:
                raise FetchFailed(p, exc) from exc
        return out


class HttpSource:
    """Plain GETs against a base URL; requests run concurrently but the
    results come back in request order."""

    def __init__(self, base_url: str, max_workers: int = 8):
        self.base_url = base_url if base_url.endswith("/") else base_url + "/"
        self._session = requests.Session()
        self._pool = ThreadPoolExecutor(max_workers=max_workers)

    def _get(self, url: str) -> bytes:
        resp = self._session.get(url, timeout=30)
        if resp.status_code != 200:
            raise FetchFailed(url, f"HTTP {resp.status_code}")
        return resp.content

    def fetch_batch(self, paths: list[str]) -> list[bytes]:
        urls = [urljoin(self.base_url, p) for p in paths]
        futures = [self._pool.submit(self._get, u) for u in urls]
        out = []
        for u, f in zip(urls, futures):
            try:
                out.append(f.result())
            except FetchFailed:
                raise
            except Exception as exc:
                raise FetchFailed(u, exc) from exc
        return out


def fetch_batch(source, urls: list[str]) -> list[bytes]:
    """Ordered batch download; a failure aborts the whole group."""
    return source.fetch_batch(urls)


# --------------------------------------------------------------------------
# dual-sink buffer


@dataclass(frozen=True)
class BufferEntry:
    seq: int
    selection_id: str
    start_ms: int
    dur_ms: int
    rwpk_index: int
    size_bytes: int = 0


class DualBufferState:
    """Two alternating sink buffers and the playback clock.

    Consecutive segments of one selection form a run; every new run goes
    to the sink opposite the previous run, so each metadata change lines
    up with exactly one sink switch at playback time.
    """

    def __init__(self, segment_duration_ms: int):
        self.segment_duration_ms = segment_duration_ms
        self.sinks: tuple[list[BufferEntry], list[BufferEntry]] = ([], [])
        self.active = 0
        self.playhead_ms = 0
        self.playback_started = False
        self._last_seq = 0
        self._last_run_sink: int | None = None

    def append_segment(self, seq: int, selection_id: str, data: bytes,
                       rwpk_index: int) -> int:
        """Append one repackaged segment; returns the sink index used."""
        if seq != self._last_seq + 1:
            raise NonMonotoneSequence(
                f"segment {seq} appended after {self._last_seq}; sequence must be contiguous")
        start = (seq - 1) * self.segment_duration_ms
        entry = BufferEntry(seq=seq, selection_id=selection_id, start_ms=start,
                            dur_ms=self.segment_duration_ms, rwpk_index=rwpk_index,
                            size_bytes=len(data))
        if self._last_run_sink is None:
            sink = self.active
        else:
            tail = self.sinks[self._last_run_sink][-1]
            same_run = tail.selection_id == selection_id and tail.start_ms + tail.dur_ms == start
            sink = self._last_run_sink if same_run else 1 - self._last_run_sink
        self.sinks[sink].append(entry)
        self._last_seq = seq
        self._last_run_sink = sink
        return sink

    def buffered_ahead_ms(self) -> int:
        total = 0
        for sink in self.sinks:
            for e in sink:
                end = e.start_ms + e.dur_ms
                if end > self.playhead_ms:
                    total += end - max(e.start_ms, self.playhead_ms)
        return total

    def buffered_end_ms(self) -> int:
        return self._last_seq * self.segment_duration_ms

    def _entry_at(self, sink: int, t: int) -> BufferEntry | None:
        for e in self.sinks[sink]:
            if e.start_ms <= t < e.start_ms + e.dur_ms:
                return e
        return None

    def _entry_starting(self, sink: int, t: int) -> BufferEntry | None:
        for e in self.sinks[sink]:
            if e.start_ms == t:
                return e
        return None

    def _run_length_from(self, sink: int, t: int) -> int:
        total = 0
        cursor = t
        entry = self._entry_starting(sink, cursor)
        while entry is not None:
            total += entry.dur_ms
            cursor = entry.start_ms + entry.dur_ms
            entry = self._entry_starting(sink, cursor)
        return total


def advance_playback(state: DualBufferState, dt_ms: int, *,
                     min_start_buffer_ms: int = 0,
                     end_of_stream: bool = False) -> tuple[int, list[tuple[int, str, dict]]]:
    """Advance the playhead by up to dt_ms through the active sink.

    Returns (consumed_ms, events); consumed_ms < dt_ms means the playhead
    stalled. Events are (offset_ms, kind, details) with offsets relative
    to the call. A dt of 0 still performs any due sink switch or playback
    start so that stalls can resolve the moment data arrives.
    """
    if dt_ms < 0:
        raise SessionError("cannot advance playback by negative time")
    events: list[tuple[int, str, dict]] = []
    consumed = 0
    while True:
        if not state.playback_started:
            gate = state._run_length_from(state.active, state.playhead_ms)
            if gate == 0 or (gate < min_start_buffer_ms and not end_of_stream):
                break
            state.playback_started = True
            events.append((consumed, "playback_start", {"t_playhead_ms": state.playhead_ms}))
        entry = state._entry_at(state.active, state.playhead_ms)
        if entry is None:
            other = 1 - state.active
            nxt = state._entry_starting(other, state.playhead_ms)
            if nxt is not None:
                run = state._run_length_from(other, state.playhead_ms)
                if run >= min_start_buffer_ms or end_of_stream:
                    state.active = other
                    events.append((consumed, "sink_switch", {
                        "rwpk_index": nxt.rwpk_index, "seq": nxt.seq,
                        "selection": nxt.selection_id, "sink": other,
                    }))
                    continue
            break  # stalled
        if consumed >= dt_ms:
            break
        step = min(dt_ms - consumed, entry.start_ms + entry.dur_ms - state.playhead_ms)
        state.playhead_ms += step
        consumed += step
        if state.playhead_ms == entry.start_ms + entry.dur_ms:
            events.append((consumed, "segment_boundary",
                           {"seq": entry.seq, "selection": entry.selection_id}))
    return consumed, events


# --------------------------------------------------------------------------
# scheduler


@dataclass(frozen=True)
class Fetch:
    seq: int
    selection_id: str


@dataclass(frozen=True)
class Wait:
    until_ms: int


@dataclass(frozen=True)
class SessionConfig:
    buffer_limit_ms: int = 3000
    segment_duration_ms: int | None = None  # None: taken from the manifest
    min_start_buffer_ms: int = 0
    output_track_id: int = DEFAULT_OUTPUT_TRACK_ID
    bandwidth: BandwidthModel | None = None  # None: wall-clock fetches


def scheduler_decide(state: DualBufferState, next_seq: int, total: int,
                     buffer_limit_ms: int, now_ms: int, desired_selection: str) -> Fetch | Wait:
    """Fetch when a whole segment still fits under the buffer limit."""
    if next_seq > total:
        raise EndOfStream(f"all {total} segments fetched")
    buffered = state.buffered_ahead_ms()
    if buffered + state.segment_duration_ms <= buffer_limit_ms:
        return Fetch(seq=next_seq, selection_id=desired_selection)
    return Wait(until_ms=now_ms + buffered + state.segment_duration_ms - buffer_limit_ms)


# --------------------------------------------------------------------------
# metrics


@dataclass
class SessionMetrics:
    bytes_downloaded: int = 0
    request_count: int = 0
    switch_count: int = 0
    selection_changes: int = 0
    switch_latencies_ms: list[int] = field(default_factory=list)
    rebuffer_events: list[dict] = field(default_factory=list)
    buffer_timeline: list[tuple[int, int]] = field(default_factory=list)
    playback_end_ms: int = 0
    segments_played: int = 0

    def to_dict(self) -> dict:
        return {
            "bytes_downloaded": self.bytes_downloaded,
            "request_count": self.request_count,
            "switch_count": self.switch_count,
            "selection_changes": self.selection_changes,
            "switch_latencies_ms": self.switch_latencies_ms,
            "rebuffer_events": self.rebuffer_events,
            "buffer_timeline": [[t, b] for t, b in self.buffer_timeline],
            "playback_end_ms": self.playback_end_ms,
            "segments_played": self.segments_played,
        }


# --------------------------------------------------------------------------
# the session


@dataclass(frozen=True)
class SelectionInfo:
    preselection: PreselectionSet
    rwpk_index: int
    extractor_init: InitSegment
    component_inits: dict[int, InitSegment]  # keyed by tile track id
    tile_set_by_track: dict[int, str]  # tile track id -> adaptation set id


class Session:
    def __init__(self, manifest: Manifest, trace: ViewportTrace, config: SessionConfig,
                 source):
        self.manifest = manifest
        self.trace = trace
        self.source = source
        self.preselections = resolve_preselections(manifest)

        main_rep = manifest.set_by_id(self.preselections[0].main_set).representations[0]
        seg_dur = config.segment_duration_ms or main_rep.segment_template.duration_ms
        if seg_dur <= 0:
            raise SessionError("cannot determine the segment duration")
        if config.buffer_limit_ms < seg_dur:
            raise SessionError(
                f"buffer limit {config.buffer_limit_ms} ms below segment duration {seg_dur} ms")
        self.segment_duration_ms = seg_dur
        self.config = config
        self.total_segments = total_segments(manifest, main_rep)

        self.candidates = []
        for p in self.preselections:
            srqr = manifest.set_by_id(p.main_set).srqr
            if srqr is None:
                raise SessionError(f"extractor set {p.main_set!r} carries no quality ranking")
            self.candidates.append((p.main_set, srqr))

        self.selections = self._load_inits()
        first = self.selections[self.preselections[0].main_set]
        track = _extractor_track(first.extractor_init)
        self.output_config = OutputTrackConfig(
            timescale=track.timescale,
            parameter_sets=track.parameter_sets,
            width=track.width,
            height=track.height,
            output_track_id=config.output_track_id,
        )
        # the pseudo-init a media sink would be primed with
        self.output_init = build_output_init(self.output_config)

        # mutable session state
        self.buffer = DualBufferState(seg_dur)
        self.metrics = SessionMetrics()
        self.events: list[dict] = []
        self.t = 0
        self.desired = select_extractor_track(self.candidates, trace.viewport_at(0))
        self.last_viewport_change_t = 0
        self.trace_idx = 0
        self.next_seq = 1
        self.in_flight = None  # (done_t, seq, selection_id, payload bytes)
        self.wake_t: int | None = None
        self.stalled_since: int | None = None
        self.last_fetch_selection: str | None = None
        self.pending_switch_anchors: list[tuple[int, int]] = []  # (first_seq, anchor_t)

    # -- init loading ------------------------------------------------------

    def _init_path(self, set_id: str) -> str:
        rep = self.manifest.set_by_id(set_id).representations[0]
        return build_segment_url(rep, "init")

    def _media_path(self, set_id: str, seq: int) -> str:
        rep = self.manifest.set_by_id(set_id).representations[0]
        return build_segment_url(rep, "media", seq)

    def _load_inits(self) -> dict[str, SelectionInfo]:
        """Download and parse every init segment up front."""
        set_ids: list[str] = []
        for p in self.preselections:
            set_ids.append(p.main_set)
            set_ids.extend(cid for cid in p.component_sets if cid not in set_ids)
        paths = [self._init_path(sid) for sid in set_ids]
        blobs = fetch_batch(self.source, paths)
        inits = {sid: parse_init_segment(blob) for sid, blob in zip(set_ids, blobs)}

        selections = {}
        for index, p in enumerate(self.preselections):
            extractor_init = inits[p.main_set]
            track = _extractor_track(extractor_init)
            self._check_srqr_consistency(p.main_set, track)
            if len(track.scal_refs) != len(p.component_sets):
                raise SessionError(
                    f"preselection {p.tag!r}: {len(p.component_sets)} component sets "
                    f"but {len(track.scal_refs)} scal references")
            component_inits = {}
            tile_set_by_track = {}
            for track_id, set_id in zip(track.scal_refs, p.component_sets):
                component_inits[track_id] = inits[set_id]
                tile_set_by_track[track_id] = set_id
            selections[p.main_set] = SelectionInfo(
                preselection=p, rwpk_index=index, extractor_init=extractor_init,
                component_inits=component_inits, tile_set_by_track=tile_set_by_track)
        return selections

    def _check_srqr_consistency(self, set_id: str, track) -> None:
        meta = parse_track_metadata(track.omaf_boxes)
        mpd_srqr = self.manifest.set_by_id(set_id).srqr
        if meta.srqr is None or mpd_srqr is None:
            return
        if len(meta.srqr.entries) != len(mpd_srqr.entries):
            raise InconsistentQualityRanking(
                f"set {set_id!r}: init segment and manifest disagree on entry count")
        for a, b in zip(meta.srqr.entries, mpd_srqr.entries):
            if a.ranking != b.ranking or \
                    abs(a.region.center_azimuth - b.region.center_azimuth) > 1e-3 or \
                    abs(a.region.center_elevation - b.region.center_elevation) > 1e-3:
                raise InconsistentQualityRanking(
                    f"set {set_id!r}: init segment and manifest disagree on ranking regions")

    # -- event log ---------------------------------------------------------

    def _log(self, t: int, kind: str, details: dict) -> None:
        self.events.append({"t_ms": t, "kind": kind, "details": details})
        self.metrics.buffer_timeline.append((t, self.buffer.buffered_ahead_ms()))

    # -- viewport ----------------------------------------------------------

    def on_viewport_sample(self, t: int, v: Viewport) -> str:
        """Update the desired selection; only future fetches are affected."""
        new = select_extractor_track(self.candidates, v)
        if new != self.desired:
            self.desired = new
            self.last_viewport_change_t = t
        return self.desired

    # -- fetching ----------------------------------------------------------

    def _group_paths(self, selection_id: str, seq: int) -> list[str]:
        info = self.selections[selection_id]
        paths = [self._media_path(selection_id, seq)]
        paths += [self._media_path(sid, seq) for sid in info.preselection.component_sets]
        return paths

    def _try_schedule(self) -> None:
        if self.in_flight is not None or self.next_seq > self.total_segments:
            return
        decision = scheduler_decide(self.buffer, self.next_seq, self.total_segments,
                                    self.config.buffer_limit_ms, self.t, self.desired)
        if isinstance(decision, Wait):
            self.wake_t = decision.until_ms
            return
        self.wake_t = None
        selection = decision.selection_id
        paths = self._group_paths(selection, decision.seq)
        blobs = fetch_batch(self.source, paths) if self.config.bandwidth else None
        if self.config.bandwidth is not None:
            sizes = [len(b) for b in blobs]
            done = max(self.config.bandwidth.batch_completion_times(sizes, self.t))
        else:
            wall0 = time.monotonic()
            blobs = fetch_batch(self.source, paths)
            done = self.t + max(1, round((time.monotonic() - wall0) * 1000))
            sizes = [len(b) for b in blobs]
        self._log(self.t, "fetch_start", {
            "seq": decision.seq, "selection": selection, "requests": len(paths)})
        if self.last_fetch_selection is not None and selection != self.last_fetch_selection:
            self.metrics.selection_changes += 1
            anchor = self.last_viewport_change_t
            self.pending_switch_anchors.append((decision.seq, anchor))
            self._log(self.t, "selection_change", {
                "from": self.last_fetch_selection, "to": selection, "seq": decision.seq})
        self.last_fetch_selection = selection
        self.in_flight = (done, decision.seq, selection, blobs, sizes)

    def _complete_fetch(self) -> None:
        done, seq, selection, blobs, sizes = self.in_flight
        self.in_flight = None
        info = self.selections[selection]
        extractor_init = info.extractor_init
        extractor_seg = parse_media_segment(blobs[0], extractor_init)
        track = _extractor_track(extractor_init)
        tile_segments = {}
        for track_id, blob in zip(track.scal_refs, blobs[1:]):
            tile_segments[track_id] = parse_media_segment(blob, info.component_inits[track_id])
        payload = repackage_segment(extractor_seg, tile_segments, extractor_init,
                                    self.output_config)
        self.metrics.bytes_downloaded += sum(sizes)
        self.metrics.request_count += len(sizes)
        self._log(self.t, "fetch_complete", {
            "seq": seq, "selection": selection, "bytes": sum(sizes)})
        sink = self.buffer.append_segment(seq, selection, payload, info.rwpk_index)
        self.next_seq = seq + 1
        self._log(self.t, "append", {
            "seq": seq, "selection": selection, "sink": sink, "rwpk_index": info.rwpk_index})
        self._resolve_stall_if_possible()

    # -- playback ----------------------------------------------------------

    def _end_of_stream(self) -> bool:
        return self.next_seq > self.total_segments and self.in_flight is None

    def _advance_to(self, t_target: int) -> None:
        dt = t_target - self.t
        consumed, events = advance_playback(
            self.buffer, dt, min_start_buffer_ms=self.config.min_start_buffer_ms,
            end_of_stream=self._end_of_stream())
        for off, kind, details in events:
            self._handle_playback_event(self.t + off, kind, details)
        if consumed < dt and self.buffer.playback_started and self.stalled_since is None \
                and self.buffer.playhead_ms < self.content_end_ms():
            self.stalled_since = self.t + consumed
        self.t = t_target

    def _handle_playback_event(self, t: int, kind: str, details: dict) -> None:
        self._log(t, kind, details)
        if kind == "sink_switch":
            self.metrics.switch_count += 1
            seq = details["seq"]
            for i, (first_seq, anchor) in enumerate(self.pending_switch_anchors):
                if first_seq == seq:
                    self.metrics.switch_latencies_ms.append(t - anchor)
                    del self.pending_switch_anchors[:i + 1]
                    break
        elif kind == "segment_boundary":
            self.metrics.segments_played += 1

    def _resolve_stall_if_possible(self) -> None:
        """A zero-length advance performs any switch or start that is now due."""
        was_started = self.buffer.playback_started
        _, events = advance_playback(
            self.buffer, 0, min_start_buffer_ms=self.config.min_start_buffer_ms,
            end_of_stream=self._end_of_stream())
        progressed = bool(events) or (not was_started and self.buffer.playback_started)
        for off, kind, details in events:
            self._handle_playback_event(self.t + off, kind, details)
        if self.stalled_since is not None:
            playable = self.buffer._entry_at(self.buffer.active, self.buffer.playhead_ms)
            if playable is not None or progressed:
                self.metrics.rebuffer_events.append(
                    {"start_ms": self.stalled_since, "dur_ms": self.t - self.stalled_since})
                self._log(self.t, "rebuffer", {
                    "start_ms": self.stalled_since, "dur_ms": self.t - self.stalled_since})
                self.stalled_since = None

    def content_end_ms(self) -> int:
        return self.total_segments * self.segment_duration_ms

    def _playing(self) -> bool:
        if self.stalled_since is not None or not self.buffer.playback_started:
            return self.buffer.playback_started is True and self.stalled_since is None
        return True

    def _next_playback_boundary(self) -> int | None:
        """Next wall time at which the playhead hits an entry boundary."""
        if not self.buffer.playback_started or self.stalled_since is not None:
            return None
        entry = self.buffer._entry_at(self.buffer.active, self.buffer.playhead_ms)
        if entry is None:
            return None
        return self.t + entry.start_ms + entry.dur_ms - self.buffer.playhead_ms

    # -- main loop ---------------------------------------------------------

    def run(self) -> tuple[SessionMetrics, list[dict]]:
        self._log(0, "session_start", {
            "selection": self.desired, "segments": self.total_segments,
            "buffer_limit_ms": self.config.buffer_limit_ms,
            "segment_duration_ms": self.segment_duration_ms,
            "min_start_buffer_ms": self.config.min_start_buffer_ms,
        })
        self._resolve_stall_if_possible()
        self._try_schedule()
        guard = 0
        while True:
            guard += 1
            if guard > 10_000_000:
                raise SessionError("session event loop did not terminate")
            if self.buffer.playback_started and \
                    self.buffer.playhead_ms >= self.content_end_ms() and \
                    self._end_of_stream():
                self._finish("completed")
                return self.metrics, self.events

            candidates = []
            if self.in_flight is not None:
                candidates.append(self.in_flight[0])
            if self.trace_idx < len(self.trace.samples):
                t_sample = self.trace.samples[self.trace_idx][0]
                if t_sample > self.t:
                    candidates.append(t_sample)
                else:
                    candidates.append(self.t)
            if self.wake_t is not None and self.in_flight is None:
                if self.stalled_since is not None or not self.buffer.playback_started:
                    # buffer full while the playhead is frozen: nothing can
                    # ever drain it (the problematic-sink deadlock)
                    self._finish("stalled")
                    return self.metrics, self.events
                candidates.append(self.wake_t)
            boundary = self._next_playback_boundary()
            if boundary is not None:
                candidates.append(boundary)

            if not candidates:
                self._finish("stalled" if self.stalled_since is not None or
                             not self.buffer.playback_started else "completed")
                return self.metrics, self.events

            t_next = max(self.t, min(candidates))
            self._advance_to(t_next)

            # tie order at equal timestamps: fetch completion, then viewport
            # samples, then (already applied) playback advance
            if self.in_flight is not None and self.in_flight[0] <= self.t:
                self._complete_fetch()
            while self.trace_idx < len(self.trace.samples) and \
                    self.trace.samples[self.trace_idx][0] <= self.t:
                t_s, az, el = self.trace.samples[self.trace_idx]
                self.on_viewport_sample(t_s, Viewport(azimuth=az, elevation=el))
                self.trace_idx += 1
            if self.wake_t is not None and self.wake_t <= self.t:
                self.wake_t = None
            self._try_schedule()

    def _finish(self, reason: str) -> None:
        if self.stalled_since is not None:
            self.metrics.rebuffer_events.append(
                {"start_ms": self.stalled_since, "dur_ms": self.t - self.stalled_since})
            self.stalled_since = None
        self.metrics.playback_end_ms = self.t
        self._log(self.t, "session_end", {
            "reason": reason, "playhead_ms": self.buffer.playhead_ms})


def _extractor_track(init: InitSegment):
    for track in init.tracks:
        if track.sample_entry_code == "hvc2":
            return track
    raise SessionError("init segment carries no hvc2 extractor track")


def run_session(manifest: Manifest, trace: ViewportTrace, config: SessionConfig,
                source) -> tuple[SessionMetrics, list[dict]]:
    """Drive a whole session; deterministic given identical inputs."""
    return Session(manifest, trace, config, source).run()


def events_to_jsonl(events: list[dict]) -> str:
    return "".join(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n" for e in events)


def metrics_to_json(metrics: SessionMetrics) -> str:
    return json.dumps(metrics.to_dict(), sort_keys=True, indent=2) + "\n"
