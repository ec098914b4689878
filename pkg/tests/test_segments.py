import random
import struct

import pytest

from omafvd.boxes import parse_box_tree, serialize_box_tree
from omafvd.errors import (
    BadTrackRef,
    EmptyParameterSets,
    EmptySampleList,
    MultipleMoofBoxes,
    NoMoov,
    SampleOutOfBounds,
    UnknownTrackId,
    UnsupportedSampleEntry,
)
from omafvd.hevc import frame_nals, nal_header
from omafvd.segments import (
    OutputTrackConfig,
    RunSpec,
    TrackSpec,
    build_init_segment,
    build_media_segment,
    build_output_init,
    build_output_media,
    parse_init_segment,
    parse_media_segment,
)

PS = (nal_header(32) + b"vps", nal_header(33) + b"sps", nal_header(34) + b"pps")


def tile_spec(track_id, **kw):
    return TrackSpec(track_id=track_id, sample_entry_code="hvc1",
                     parameter_sets=PS, **kw)


def test_init_with_tiles_and_extractor():
    specs = [tile_spec(i) for i in (1, 2, 3, 4)]
    specs.append(TrackSpec(track_id=9, sample_entry_code="hvc2", parameter_sets=PS,
                           scal_refs=(1, 2, 3, 4), nal_length_size=2))
    init = parse_init_segment(build_init_segment(specs))
    assert len(init.tracks) == 5
    extractor = init.track(9)
    assert extractor.sample_entry_code == "hvc2"
    assert extractor.scal_refs == (1, 2, 3, 4)
    assert extractor.nal_length_size == 2
    assert extractor.parameter_sets == PS
    for i in (1, 2, 3, 4):
        assert init.track(i).scal_refs == ()
        assert init.track(i).nal_length_size == 4


def test_init_round_trip_byte_identical():
    data = build_init_segment([tile_spec(1), tile_spec(2)])
    assert serialize_box_tree(parse_box_tree(data)) == data


def test_init_without_moov():
    with pytest.raises(NoMoov):
        parse_init_segment(struct.pack(">I", 8) + b"ftyp")


def test_hvc2_without_scal_rejected():
    bad = TrackSpec(track_id=5, sample_entry_code="hvc2", parameter_sets=PS)
    with pytest.raises(BadTrackRef):
        parse_init_segment(build_init_segment([bad]))


def test_hvc1_with_scal_rejected():
    bad = TrackSpec(track_id=5, sample_entry_code="hvc1", parameter_sets=PS,
                    scal_refs=(1,))
    with pytest.raises(BadTrackRef):
        parse_init_segment(build_init_segment([tile_spec(1), bad]))


def test_multitrack_scal_to_missing_track_rejected():
    specs = [tile_spec(1),
             TrackSpec(track_id=9, sample_entry_code="hvc2", parameter_sets=PS,
                       scal_refs=(1, 77))]
    with pytest.raises(BadTrackRef):
        parse_init_segment(build_init_segment(specs))


def test_single_track_init_may_reference_external_tracks():
    spec = TrackSpec(track_id=9, sample_entry_code="hvc2", parameter_sets=PS,
                     scal_refs=(1, 2, 3))
    init = parse_init_segment(build_init_segment([spec]))
    assert init.track(9).scal_refs == (1, 2, 3)


def test_duplicate_track_ids_rejected():
    with pytest.raises(BadTrackRef):
        parse_init_segment(build_init_segment([tile_spec(3), tile_spec(3)]))


def test_unsupported_sample_entry():
    data = build_init_segment([tile_spec(1)])
    with pytest.raises(UnsupportedSampleEntry):
        parse_init_segment(data.replace(b"hvc1", b"avc1"))


def test_media_segment_expands_runs():
    init = parse_init_segment(build_init_segment([tile_spec(1, timescale=30000)]))
    samples = tuple((1000, bytes([i]) * (i + 1)) for i in range(30))
    seg = build_media_segment([RunSpec(track_id=1, base_decode_time=60000, samples=samples)],
                              sequence_number=4, include_styp=True)
    parsed = parse_media_segment(seg, init)
    assert parsed.sequence_number == 4
    run = parsed.run_for(1)
    assert run.base_decode_time == 60000
    assert [s.duration for s in run.samples] == [1000] * 30
    assert [s.size for s in run.samples] == [i + 1 for i in range(30)]
    for i in range(30):
        assert parsed.sample_bytes(run, i) == bytes([i]) * (i + 1)


def test_media_segment_round_trip_byte_identical():
    samples = tuple((500, b"payload-%d" % i) for i in range(4))
    seg = build_media_segment([RunSpec(track_id=1, base_decode_time=0, samples=samples)], 1)
    assert serialize_box_tree(parse_box_tree(seg)) == seg


def test_media_segment_unknown_track():
    init = parse_init_segment(build_init_segment([tile_spec(1)]))
    seg = build_media_segment([RunSpec(track_id=2, base_decode_time=0,
                                       samples=((100, b"aa"),))], 1)
    with pytest.raises(UnknownTrackId):
        parse_media_segment(seg, init)


def test_sample_run_overrunning_mdat():
    init = parse_init_segment(build_init_segment([tile_spec(1)]))
    seg = bytearray(build_media_segment(
        [RunSpec(track_id=1, base_decode_time=0, samples=((100, b"abcd"),))], 1))
    # inflate the declared sample size in the trun past the mdat payload
    idx = seg.rfind(struct.pack(">II", 100, 4))
    seg[idx:idx + 8] = struct.pack(">II", 100, 400)
    with pytest.raises(SampleOutOfBounds):
        parse_media_segment(bytes(seg), init)


def test_multiple_moof_rejected():
    init = parse_init_segment(build_init_segment([tile_spec(1)]))
    seg = build_media_segment([RunSpec(track_id=1, base_decode_time=0,
                                       samples=((100, b"ab"),))], 1)
    with pytest.raises(MultipleMoofBoxes):
        parse_media_segment(seg + seg, init)


def out_config(**kw):
    return OutputTrackConfig(timescale=30000, parameter_sets=PS, width=1920, height=128, **kw)


def test_output_init_parses_to_one_track():
    config = out_config()
    init = parse_init_segment(build_output_init(config))
    assert len(init.tracks) == 1
    track = init.tracks[0]
    assert track.track_id == 1000
    assert track.sample_entry_code == "hvc1"
    assert track.parameter_sets == PS
    assert track.nal_length_size == 4
    assert track.scal_refs == ()


def test_output_init_deterministic():
    assert build_output_init(out_config()) == build_output_init(out_config())


def test_output_init_without_parameter_sets():
    with pytest.raises(EmptyParameterSets):
        build_output_init(OutputTrackConfig(timescale=30000, parameter_sets=(),
                                            width=64, height=64))


def test_output_media_round_trip_triple():
    config = out_config()
    payload = frame_nals([nal_header(1) + b"data"], 4)
    out = build_output_media([(1000, payload), (1000, payload)], 7, 60000, config)
    parsed = parse_media_segment(out, parse_init_segment(build_output_init(config)))
    assert parsed.sequence_number == 7
    run = parsed.run_for(1000)
    assert run.base_decode_time == 60000
    assert [s.duration for s in run.samples] == [1000, 1000]
    assert [parsed.sample_bytes(run, i) for i in range(2)] == [payload, payload]


def test_output_media_single_one_byte_nal():
    # smallest legal NAL is its 2-byte header; mdat payload = prefix + header
    config = out_config()
    payload = frame_nals([nal_header(1)], 4)
    out = build_output_media([(1000, payload)], 1, 0, config)
    tree = parse_box_tree(out)
    mdat = tree.find("mdat")
    assert len(mdat.payload) == 4 + 2


def test_output_media_empty_list():
    with pytest.raises(EmptySampleList):
        build_output_media([], 1, 0, out_config())


def test_build_parse_duality_randomized():
    rng = random.Random(20240811)
    config = out_config()
    for _ in range(200):
        count = rng.randint(1, 20)
        samples = []
        for _ in range(count):
            nals = [nal_header(rng.randrange(40)) + rng.randbytes(rng.randint(0, 30))
                    for _ in range(rng.randint(1, 3))]
            samples.append((rng.randint(1, 5000), frame_nals(nals, 4)))
        seq = rng.randint(1, 10**6)
        bdt = rng.randint(0, 10**9)
        out = build_output_media(samples, seq, bdt, config)
        parsed = parse_media_segment(out, parse_init_segment(build_output_init(config)))
        run = parsed.run_for(1000)
        assert parsed.sequence_number == seq
        assert run.base_decode_time == bdt
        assert [(s.duration, parsed.sample_bytes(run, i))
                for i, s in enumerate(run.samples)] == samples
        assert serialize_box_tree(parse_box_tree(out)) == out
