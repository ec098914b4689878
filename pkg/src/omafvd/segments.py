"""Init- and media-segment parsing plus single-track output segment builders.

The parse side understands exactly the fragmented-MP4 subset used by
tiled OMAF content: one ``moof`` per media segment, ``hvc1``/``hvc2``
sample entries, ``scal`` track references and the decoder configuration
record (read only for the NAL length size and the parameter sets).

The build side produces the pseudo-initialization segment and the
repackaged single-track media segments handed to a media sink.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

from .boxes import Box, BoxTree, full_box, parse_box_tree, serialize_box, serialize_box_tree
from .errors import (
    BadTrackRef,
    BoxFormatError,
    EmptyParameterSets,
    EmptySampleList,
    MultipleMoofBoxes,
    NoMoov,
    SampleOutOfBounds,
    TruncatedBox,
    UnknownTrackId,
    UnsupportedSampleEntry,
)

DEFAULT_OUTPUT_TRACK_ID = 1000
DEFAULT_TIMESCALE = 30000

# tfhd flag bits
_TFHD_BASE_DATA_OFFSET = 0x000001
_TFHD_SAMPLE_DESC_INDEX = 0x000002
_TFHD_DEFAULT_DURATION = 0x000008
_TFHD_DEFAULT_SIZE = 0x000010
_TFHD_DEFAULT_FLAGS = 0x000020
_TFHD_BASE_IS_MOOF = 0x020000

# trun flag bits
_TRUN_DATA_OFFSET = 0x000001
_TRUN_FIRST_FLAGS = 0x000004
_TRUN_DURATION = 0x000100
_TRUN_SIZE = 0x000200
_TRUN_FLAGS = 0x000400
_TRUN_CTO = 0x000800


@dataclass(frozen=True)
class TrackInfo:
    track_id: int
    handler: str
    sample_entry_code: str
    nal_length_size: int
    parameter_sets: tuple[bytes, ...]
    scal_refs: tuple[int, ...]
    omaf_boxes: tuple[tuple[str, bytes], ...]
    timescale: int
    width: int
    height: int
    default_sample_duration: int = 0
    default_sample_size: int = 0
    default_sample_flags: int = 0


@dataclass(frozen=True)
class InitSegment:
    tracks: tuple[TrackInfo, ...]

    def track(self, track_id: int) -> TrackInfo:
        for t in self.tracks:
            if t.track_id == track_id:
                return t
        raise UnknownTrackId(f"track {track_id} not in init segment")

    def has_track(self, track_id: int) -> bool:
        return any(t.track_id == track_id for t in self.tracks)


@dataclass(frozen=True)
class SampleInfo:
    duration: int
    size: int
    offset: int  # absolute offset into MediaSegment.data
    flags: int


@dataclass(frozen=True)
class TrackRun:
    track_id: int
    base_decode_time: int
    samples: tuple[SampleInfo, ...]


@dataclass(frozen=True)
class MediaSegment:
    sequence_number: int
    runs: tuple[TrackRun, ...]
    data: bytes

    def run_for(self, track_id: int) -> TrackRun:
        for run in self.runs:
            if run.track_id == track_id:
                return run
        raise UnknownTrackId(f"no fragment run for track {track_id}")

    def sample_bytes(self, run: TrackRun, index: int) -> bytes:
        s = run.samples[index]
        return self.data[s.offset:s.offset + s.size]


@dataclass(frozen=True)
class OutputTrackConfig:
    """Description of the merged output track; constant for a whole session."""

    timescale: int
    parameter_sets: tuple[bytes, ...]
    width: int
    height: int
    output_track_id: int = DEFAULT_OUTPUT_TRACK_ID
    nal_length_size: int = 4


# --------------------------------------------------------------------------
# init segment parsing


def parse_init_segment(data: bytes) -> InitSegment:
    tree = parse_box_tree(data)
    moov = tree.find("moov")
    if moov is None:
        raise NoMoov("no moov box in init segment")
    tracks = []
    for trak in moov.find_all("trak"):
        tracks.append(_parse_trak(trak, moov))
    if not tracks:
        raise NoMoov("moov contains no video track")
    seen: set[int] = set()
    for t in tracks:
        if t.track_id in seen:
            raise BadTrackRef(f"duplicate track id {t.track_id}")
        seen.add(t.track_id)
    for t in tracks:
        if t.sample_entry_code == "hvc2" and not t.scal_refs:
            raise BadTrackRef(f"hvc2 track {t.track_id} has no scal track references")
        if t.sample_entry_code == "hvc1" and t.scal_refs:
            raise BadTrackRef(f"hvc1 track {t.track_id} carries scal track references")
    # scal references must resolve inside the file whenever the file holds
    # more than one track (combined inits); single-track DASH inits refer
    # to tracks delivered in other adaptation sets.
    if len(tracks) > 1:
        for t in tracks:
            for ref in t.scal_refs:
                if ref not in seen:
                    raise BadTrackRef(f"track {t.track_id} references missing track {ref}")
    return InitSegment(tracks=tuple(tracks))


def _parse_trak(trak: Box, moov: Box) -> TrackInfo:
    tkhd = trak.find("tkhd")
    if tkhd is None:
        raise NoMoov("trak without tkhd")
    track_id, width, height = _parse_tkhd(tkhd)

    hdlr = trak.find("mdia/hdlr")
    handler = hdlr.body()[4:8].decode("latin-1") if hdlr else "????"
    if handler != "vide":
        raise UnsupportedSampleEntry(f"track {track_id}: handler '{handler}' is not a video track")

    mdhd = trak.find("mdia/mdhd")
    timescale = _parse_mdhd_timescale(mdhd) if mdhd else DEFAULT_TIMESCALE

    stsd = trak.find("mdia/minf/stbl/stsd")
    if stsd is None or not stsd.children:
        raise UnsupportedSampleEntry(f"track {track_id} has no sample description")
    entry = stsd.children[0]
    if entry.fourcc not in ("hvc1", "hvc2"):
        raise UnsupportedSampleEntry(f"track {track_id}: sample entry '{entry.fourcc}'")

    hvcc = entry.find("hvcC")
    if hvcc is None:
        raise UnsupportedSampleEntry(f"track {track_id}: {entry.fourcc} entry without hvcC")
    nal_length_size, parameter_sets = parse_hvcc(hvcc.payload or b"")

    omaf_boxes: list[tuple[str, bytes]] = []
    povd = entry.find("povd")
    if povd is not None:
        for child in povd.children or []:
            omaf_boxes.append((child.fourcc, child.payload or b""))

    scal_refs: tuple[int, ...] = ()
    scal = trak.find("tref/scal")
    if scal is not None:
        payload = scal.payload or b""
        if len(payload) % 4:
            raise BadTrackRef(f"track {track_id}: scal payload not a multiple of 4 bytes")
        scal_refs = tuple(struct.unpack(f">{len(payload) // 4}I", payload))

    dd = ds = df = 0
    for trex in moov.find_all("mvex/trex"):
        body = trex.body()
        tid, _, d, s, f = struct.unpack(">5I", body[:20])
        if tid == track_id:
            dd, ds, df = d, s, f
            break

    return TrackInfo(
        track_id=track_id,
        handler=handler,
        sample_entry_code=entry.fourcc,
        nal_length_size=nal_length_size,
        parameter_sets=tuple(parameter_sets),
        scal_refs=scal_refs,
        omaf_boxes=tuple(omaf_boxes),
        timescale=timescale,
        width=width,
        height=height,
        default_sample_duration=dd,
        default_sample_size=ds,
        default_sample_flags=df,
    )


def _parse_tkhd(tkhd: Box) -> tuple[int, int, int]:
    body = tkhd.body()
    if tkhd.version == 1:
        track_id = struct.unpack_from(">I", body, 16)[0]
    else:
        track_id = struct.unpack_from(">I", body, 8)[0]
    width, height = struct.unpack_from(">II", body, len(body) - 8)
    return track_id, width >> 16, height >> 16


def _parse_mdhd_timescale(mdhd: Box) -> int:
    body = mdhd.body()
    offset = 16 if mdhd.version == 1 else 8
    return struct.unpack_from(">I", body, offset)[0]


def parse_hvcc(payload: bytes) -> tuple[int, list[bytes]]:
    """Extract (nal_length_size, parameter set NAL payloads) from hvcC."""
    if len(payload) < 23:
        raise TruncatedBox("hvcC record shorter than 23 bytes")
    nal_length_size = (payload[21] & 0x03) + 1
    num_arrays = payload[22]
    pos = 23
    sets: list[bytes] = []
    for _ in range(num_arrays):
        if pos + 3 > len(payload):
            raise TruncatedBox("hvcC NAL array header truncated")
        num_nalus = struct.unpack_from(">H", payload, pos + 1)[0]
        pos += 3
        for _ in range(num_nalus):
            if pos + 2 > len(payload):
                raise TruncatedBox("hvcC NAL length truncated")
            ln = struct.unpack_from(">H", payload, pos)[0]
            pos += 2
            if pos + ln > len(payload):
                raise TruncatedBox("hvcC NAL unit truncated")
            sets.append(payload[pos:pos + ln])
            pos += ln
    return nal_length_size, sets


# --------------------------------------------------------------------------
# media segment parsing


def parse_media_segment(data: bytes, init: InitSegment) -> MediaSegment:
    tree = parse_box_tree(data)
    moofs = tree.find_all("moof")
    if not moofs:
        raise BoxFormatError("no moof box in media segment")
    if len(moofs) > 1:
        raise MultipleMoofBoxes(f"{len(moofs)} moof boxes; this toolkit handles one per segment")
    if tree.find("mdat") is None:
        raise BoxFormatError("no mdat box in media segment")
    moof = moofs[0]

    mfhd = moof.find("mfhd")
    if mfhd is None:
        raise BoxFormatError("moof without mfhd")
    sequence_number = struct.unpack(">I", mfhd.body()[:4])[0]

    runs = []
    for traf in moof.find_all("traf"):
        runs.append(_parse_traf(traf, moof.offset, data, init))
    return MediaSegment(sequence_number=sequence_number, runs=tuple(runs), data=data)


def _parse_traf(traf: Box, moof_offset: int, data: bytes, init: InitSegment) -> TrackRun:
    tfhd = traf.find("tfhd")
    if tfhd is None:
        raise BoxFormatError("traf without tfhd")
    tf_flags = tfhd.flags
    body = tfhd.body()
    pos = 0
    track_id = struct.unpack_from(">I", body, pos)[0]
    pos += 4
    if not init.has_track(track_id):
        raise UnknownTrackId(f"fragment references track {track_id} missing from init segment")
    track = init.track(track_id)

    base = moof_offset
    if tf_flags & _TFHD_BASE_DATA_OFFSET:
        base = struct.unpack_from(">Q", body, pos)[0]
        pos += 8
    if tf_flags & _TFHD_SAMPLE_DESC_INDEX:
        pos += 4
    default_duration = track.default_sample_duration
    default_size = track.default_sample_size
    default_flags = track.default_sample_flags
    if tf_flags & _TFHD_DEFAULT_DURATION:
        default_duration = struct.unpack_from(">I", body, pos)[0]
        pos += 4
    if tf_flags & _TFHD_DEFAULT_SIZE:
        default_size = struct.unpack_from(">I", body, pos)[0]
        pos += 4
    if tf_flags & _TFHD_DEFAULT_FLAGS:
        default_flags = struct.unpack_from(">I", body, pos)[0]
        pos += 4

    tfdt = traf.find("tfdt")
    base_decode_time = 0
    if tfdt is not None:
        if tfdt.version == 1:
            base_decode_time = struct.unpack(">Q", tfdt.body()[:8])[0]
        else:
            base_decode_time = struct.unpack(">I", tfdt.body()[:4])[0]

    truns = traf.find_all("trun")
    if len(truns) != 1:
        raise BoxFormatError(f"track {track_id}: expected exactly one trun, found {len(truns)}")
    trun = truns[0]
    tr_flags = trun.flags
    tbody = trun.body()
    tpos = 0
    sample_count = struct.unpack_from(">I", tbody, tpos)[0]
    tpos += 4
    data_offset = 0
    if tr_flags & _TRUN_DATA_OFFSET:
        data_offset = struct.unpack_from(">i", tbody, tpos)[0]
        tpos += 4
    first_flags = None
    if tr_flags & _TRUN_FIRST_FLAGS:
        first_flags = struct.unpack_from(">I", tbody, tpos)[0]
        tpos += 4

    samples = []
    offset = base + data_offset
    for i in range(sample_count):
        duration = default_duration
        size = default_size
        flags = default_flags
        if tr_flags & _TRUN_DURATION:
            duration = struct.unpack_from(">I", tbody, tpos)[0]
            tpos += 4
        if tr_flags & _TRUN_SIZE:
            size = struct.unpack_from(">I", tbody, tpos)[0]
            tpos += 4
        if tr_flags & _TRUN_FLAGS:
            flags = struct.unpack_from(">I", tbody, tpos)[0]
            tpos += 4
        elif i == 0 and first_flags is not None:
            flags = first_flags
        if tr_flags & _TRUN_CTO:
            tpos += 4
        if offset + size > len(data):
            raise SampleOutOfBounds(
                f"track {track_id} sample {i}: bytes [{offset}, {offset + size}) "
                f"exceed segment of {len(data)} bytes"
            )
        samples.append(SampleInfo(duration=duration, size=size, offset=offset, flags=flags))
        offset += size
    return TrackRun(track_id=track_id, base_decode_time=base_decode_time, samples=tuple(samples))


# --------------------------------------------------------------------------
# builders


def build_hvcc(parameter_sets: list[bytes] | tuple[bytes, ...], nal_length_size: int) -> bytes:
    """Minimal HEVC decoder configuration record payload."""
    if nal_length_size not in (1, 2, 4):
        raise ValueError(f"nal_length_size must be 1, 2 or 4, got {nal_length_size}")
    cfg = bytearray()
    cfg += bytes([1, 0x01])                 # version, profile_space/tier/profile_idc
    cfg += (0x60000000).to_bytes(4, "big")  # profile compatibility
    cfg += (0x900000000000).to_bytes(6, "big")  # constraint flags
    cfg += bytes([93])                      # level 3.1
    cfg += bytes([0xF0, 0x00])              # min_spatial_segmentation_idc
    cfg += bytes([0xFC, 0xFD, 0xF8, 0xF8])  # parallelism, chroma, bit depths
    cfg += bytes([0x00, 0x00])              # avgFrameRate
    cfg += bytes([0x0C | (nal_length_size - 1)])
    cfg += bytes([len(parameter_sets)])
    for ps in parameter_sets:
        nal_type = (ps[0] >> 1) & 0x3F if ps else 0
        cfg += bytes([0x80 | nal_type])
        cfg += struct.pack(">H", 1)
        cfg += struct.pack(">H", len(ps))
        cfg += ps
    return bytes(cfg)


@dataclass(frozen=True)
class TrackSpec:
    """Everything needed to emit one trak in a synthetic init segment."""

    track_id: int
    sample_entry_code: str = "hvc1"
    width: int = 640
    height: int = 384
    nal_length_size: int = 4
    parameter_sets: tuple[bytes, ...] = ()
    scal_refs: tuple[int, ...] = ()
    omaf_boxes: tuple[tuple[str, bytes], ...] = ()
    timescale: int = DEFAULT_TIMESCALE
    default_sample_duration: int = 0


def build_init_segment(specs: list[TrackSpec] | tuple[TrackSpec, ...]) -> bytes:
    ftyp = Box.leaf("ftyp", b"iso6" + struct.pack(">I", 0) + b"iso6dash")
    traks = [_build_trak(spec) for spec in specs]
    trexes = [_build_trex(spec) for spec in specs]
    next_id = max(s.track_id for s in specs) + 1
    moov = Box.container("moov", [_build_mvhd(specs[0].timescale, next_id), *traks,
                                  Box.container("mvex", trexes)])
    return serialize_box_tree(BoxTree([ftyp, moov]))


def _build_mvhd(timescale: int, next_track_id: int) -> Box:
    body = struct.pack(">II", 0, 0)           # creation, modification
    body += struct.pack(">II", timescale, 0)  # timescale, duration
    body += struct.pack(">I", 0x00010000)     # rate 1.0
    body += struct.pack(">H", 0x0100)         # volume 1.0
    body += b"\x00" * 10
    body += _unity_matrix()
    body += b"\x00" * 24
    body += struct.pack(">I", next_track_id)
    return full_box("mvhd", 0, 0, body)


def _unity_matrix() -> bytes:
    return struct.pack(">9i", 0x10000, 0, 0, 0, 0x10000, 0, 0, 0, 0x40000000)


def _build_trak(spec: TrackSpec) -> Box:
    tkhd_body = struct.pack(">II", 0, 0)
    tkhd_body += struct.pack(">I", spec.track_id)
    tkhd_body += struct.pack(">I", 0)  # reserved
    tkhd_body += struct.pack(">I", 0)  # duration
    tkhd_body += b"\x00" * 8
    tkhd_body += struct.pack(">hhhh", 0, 0, 0, 0)
    tkhd_body += _unity_matrix()
    tkhd_body += struct.pack(">II", spec.width << 16, spec.height << 16)
    tkhd = full_box("tkhd", 0, 3, tkhd_body)

    mdhd = full_box("mdhd", 0, 0,
                    struct.pack(">IIII", 0, 0, spec.timescale, 0) + struct.pack(">HH", 0x55C4, 0))
    hdlr = full_box("hdlr", 0, 0,
                    struct.pack(">I", 0) + b"vide" + b"\x00" * 12 + b"OmafVideoHandler\x00")
    vmhd = full_box("vmhd", 0, 1, struct.pack(">HHHH", 0, 0, 0, 0))
    dref = full_box("dref", 0, 0, struct.pack(">I", 1) + serialize_box(full_box("url ", 0, 1, b"")))
    dinf = Box.container("dinf", [dref])

    entry_children = [Box.leaf("hvcC", build_hvcc(spec.parameter_sets, spec.nal_length_size))]
    if spec.omaf_boxes:
        entry_children.append(Box.container(
            "povd", [full_box_from_payload(fourcc, payload) for fourcc, payload in spec.omaf_boxes]))
    entry = Box.container(spec.sample_entry_code, entry_children,
                          head=_visual_sample_entry_head(spec.width, spec.height))
    stsd = Box.container("stsd", [entry], head=struct.pack(">II", 0, 1))

    stbl = Box.container("stbl", [
        stsd,
        full_box("stts", 0, 0, struct.pack(">I", 0)),
        full_box("stsc", 0, 0, struct.pack(">I", 0)),
        full_box("stsz", 0, 0, struct.pack(">II", 0, 0)),
        full_box("stco", 0, 0, struct.pack(">I", 0)),
    ])
    minf = Box.container("minf", [vmhd, dinf, stbl])
    mdia = Box.container("mdia", [mdhd, hdlr, minf])

    children = [tkhd, mdia]
    if spec.scal_refs:
        scal = Box.leaf("scal", struct.pack(f">{len(spec.scal_refs)}I", *spec.scal_refs))
        children.insert(1, Box.container("tref", [scal]))
    return Box.container("trak", children)


def full_box_from_payload(fourcc: str, payload: bytes) -> Box:
    """Leaf box from a payload that already includes its version/flags word."""
    return Box.leaf(fourcc, payload)


def _visual_sample_entry_head(width: int, height: int) -> bytes:
    head = b"\x00" * 6
    head += struct.pack(">H", 1)       # data_reference_index
    head += b"\x00" * 16               # pre_defined / reserved
    head += struct.pack(">HH", width, height)
    head += struct.pack(">II", 0x00480000, 0x00480000)
    head += struct.pack(">I", 0)
    head += struct.pack(">H", 1)       # frame_count
    head += b"\x00" * 32               # compressorname
    head += struct.pack(">Hh", 0x0018, -1)
    return head


def _build_trex(spec: TrackSpec) -> Box:
    return full_box("trex", 0, 0,
                    struct.pack(">5I", spec.track_id, 1, spec.default_sample_duration, 0, 0))


@dataclass(frozen=True)
class RunSpec:
    track_id: int
    base_decode_time: int
    samples: tuple[tuple[int, bytes], ...]  # (duration, payload)


def build_media_segment(runs: list[RunSpec] | tuple[RunSpec, ...], sequence_number: int,
                        include_styp: bool = False) -> bytes:
    """Fragmented media segment with one moof and per-sample duration/size runs."""
    mdat_payload = b"".join(payload for run in runs for _, payload in run.samples)

    def make_moof(offsets: list[int]) -> Box:
        trafs = []
        for run, off in zip(runs, offsets):
            tfhd = full_box("tfhd", 0, _TFHD_BASE_IS_MOOF, struct.pack(">I", run.track_id))
            tfdt = full_box("tfdt", 1, 0, struct.pack(">Q", run.base_decode_time))
            tbody = struct.pack(">I", len(run.samples))
            tbody += struct.pack(">i", off)
            for duration, payload in run.samples:
                tbody += struct.pack(">II", duration, len(payload))
            trun = full_box("trun", 0, _TRUN_DATA_OFFSET | _TRUN_DURATION | _TRUN_SIZE, tbody)
            trafs.append(Box.container("traf", [tfhd, tfdt, trun]))
        mfhd = full_box("mfhd", 0, 0, struct.pack(">I", sequence_number))
        return Box.container("moof", [mfhd, *trafs])

    moof_size = make_moof([0] * len(runs)).size
    offsets = []
    cursor = moof_size + 8  # mdat header
    for run in runs:
        offsets.append(cursor)
        cursor += sum(len(payload) for _, payload in run.samples)
    moof = make_moof(offsets)
    mdat = Box.leaf("mdat", mdat_payload)
    boxes = [moof, mdat]
    if include_styp:
        boxes.insert(0, Box.leaf("styp", b"msdh" + struct.pack(">I", 0) + b"msdhmsix"))
    return serialize_box_tree(BoxTree(boxes))


def build_output_init(config: OutputTrackConfig) -> bytes:
    """Pseudo-initialization segment describing the merged single track."""
    if not config.parameter_sets:
        raise EmptyParameterSets("output track needs at least one parameter set")
    spec = TrackSpec(
        track_id=config.output_track_id,
        sample_entry_code="hvc1",
        width=config.width,
        height=config.height,
        nal_length_size=config.nal_length_size,
        parameter_sets=tuple(config.parameter_sets),
        timescale=config.timescale,
    )
    return build_init_segment([spec])


def build_output_media(samples: list[tuple[int, bytes]], sequence_number: int,
                       base_decode_time: int, config: OutputTrackConfig) -> bytes:
    """Single-track media segment for the merged output track."""
    if not samples:
        raise EmptySampleList("output segment needs at least one sample")
    from .speedups import split_nal_spans  # validates the framing precondition
    for i, (_, payload) in enumerate(samples):
        try:
            split_nal_spans(payload, config.nal_length_size)
        except Exception as exc:
            raise type(exc)(f"output sample {i}: {exc}") from exc
    run = RunSpec(track_id=config.output_track_id, base_decode_time=base_decode_time,
                  samples=tuple(samples))
    return build_media_segment([run], sequence_number)
