import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from telesim.protocol import (
    COMMAND_TOPICS,
    DecodeError,
    Envelope,
    SessionLog,
    StreamDecoder,
    decode_envelope,
    encode_envelope,
    topic_hashes,
)

SAMPLE_PAYLOADS = {
    "cmd_vel": {"vx": 0.2, "vy": 0.0, "w": 0.1},
    "cmd_head": {"w": 1.0, "x": 0.0, "y": 0.0, "z": 0.0},
    "cmd_gripper": {"width_m": 0.04},
    "pose2d": {"x": 1.25, "y": -0.5, "heading": 0.7853981633974483},
    "scan": {"angle_min": 0.0, "angle_increment": 0.1, "ranges": [1.0, 2.0, 12.0]},
    "map_delta": {"cells": [[3, 4, -0.4], [5, 6, 0.85]]},
}


class TestEncodeDecode:
    def test_round_trip_all_samples(self):
        for i, (topic, payload) in enumerate(SAMPLE_PAYLOADS.items()):
            env = Envelope(topic, 0.25 * i, i, payload)
            once = decode_envelope(encode_envelope(env))
            # lossless at wire precision: a second pass changes nothing
            assert decode_envelope(encode_envelope(once)) == once
            assert once.topic == env.topic and once.seq == env.seq

    def test_missing_topic_is_error(self):
        with pytest.raises(DecodeError, match="topic"):
            decode_envelope(b'{"stamp":0,"seq":0,"payload":{}}')

    def test_malformed_json_reports_offset(self):
        with pytest.raises(DecodeError, match="byte 17"):
            decode_envelope(b"{not json", byte_offset=17)

    def test_canonical_bytes_are_stable(self):
        env = Envelope("pose2d", 0.03, 7, {"x": 1.0, "y": 2.0, "heading": 0.0})
        assert encode_envelope(env) == encode_envelope(env)
        assert encode_envelope(env).endswith(b"\n")
        record = json.loads(encode_envelope(env))
        assert list(record) == sorted(record)

    def test_float_quantization_nine_digits(self):
        env = Envelope("pose2d", 0.0, 0, {"x": 2.0 / 3.0})
        raw = encode_envelope(env)
        assert b"0.666666667" in raw
        back = decode_envelope(raw)
        assert back.payload["x"] == 0.666666667

    def test_negative_zero_normalized(self):
        raw = encode_envelope(Envelope("pose2d", 0.0, 0, {"x": -0.0}))
        assert b"-0" not in raw

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            encode_envelope(Envelope("pose2d", 0.0, 0, {"x": math.inf}))

    @given(
        st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
        st.integers(min_value=0, max_value=10**9),
        st.lists(st.floats(min_value=-100, max_value=100, allow_nan=False), max_size=8),
    )
    @settings(max_examples=300, deadline=None)
    def test_round_trip_is_lossless_at_wire_precision(self, stamp, seq, values):
        env = Envelope("scan", stamp, seq, {"ranges": values})
        once = decode_envelope(encode_envelope(env))
        twice = decode_envelope(encode_envelope(once))
        assert once == twice  # quantization is idempotent


class TestStreamDecoder:
    def test_splits_lines_across_feeds(self):
        dec = StreamDecoder()
        raw = encode_envelope(Envelope("cmd_vel", 0.0, 0, {"vx": 1.0}))
        envs = dec.feed(raw[:10])
        assert envs == []
        envs = dec.feed(raw[10:])
        assert len(envs) == 1 and envs[0].topic == "cmd_vel"

    def test_unknown_topic_counted_and_skipped(self):
        dec = StreamDecoder(known_topics=COMMAND_TOPICS)
        raw = encode_envelope(Envelope("foo", 0.0, 0, {}))
        raw += encode_envelope(Envelope("cmd_vel", 0.0, 0, {"vx": 1.0}))
        envs = dec.feed(raw)
        assert [e.topic for e in envs] == ["cmd_vel"]
        assert dec.unknown_topic_count == 1

    def test_error_carries_stream_offset(self):
        dec = StreamDecoder()
        dec.feed(encode_envelope(Envelope("cmd_vel", 0.0, 0, {"vx": 1.0})))
        with pytest.raises(DecodeError) as err:
            dec.feed(b"garbage\n")
        assert err.value.byte_offset > 0


class TestSessionLog:
    def test_save_load_round_trip(self, tmp_path):
        log = SessionLog("cfg", "scn", 7, duration_ticks=100, latency_delay_s=0.1)
        log.append("in", Envelope("cmd_vel", 0.0, 0, {"vx": 0.1, "vy": 0.0, "w": 0.0}))
        log.append("out", Envelope("pose2d", 0.01, 0, {"x": 0.0, "y": 0.0, "heading": 0.0}))
        path = tmp_path / "session.ndjson"
        log.save(path)
        back = SessionLog.load(path)
        assert back.config_hash == "cfg"
        assert back.seed == 7
        assert back.duration_ticks == 100
        assert back.latency_delay_s == 0.1
        assert back.records == log.records

    def test_direction_split(self):
        log = SessionLog("c", "s", 0)
        log.append("in", Envelope("cmd_vel", 0.0, 0, {}))
        log.append("out", Envelope("pose2d", 0.0, 0, {}))
        assert len(log.inbound()) == 1
        assert len(log.outbound()) == 1

    def test_bad_direction(self):
        with pytest.raises(ValueError):
            SessionLog("c", "s", 0).append("sideways", Envelope("x", 0, 0, {}))


class TestTopicHashes:
    def test_equal_streams_equal_hashes(self):
        envs = [
            Envelope("pose2d", 0.01 * i, i, {"x": i * 0.1, "y": 0.0, "heading": 0.0})
            for i in range(10)
        ]
        assert topic_hashes(envs) == topic_hashes(list(envs))

    def test_any_change_changes_hash(self):
        envs = [Envelope("pose2d", 0.0, 0, {"x": 1.0})]
        changed = [Envelope("pose2d", 0.0, 0, {"x": 1.0000000010001})]
        assert topic_hashes(envs) != topic_hashes(changed)

    def test_below_wire_precision_is_identical(self):
        envs = [Envelope("pose2d", 0.0, 0, {"x": 1.0})]
        dusted = [Envelope("pose2d", 0.0, 0, {"x": 1.0 + 1e-13})]
        assert topic_hashes(envs) == topic_hashes(dusted)
