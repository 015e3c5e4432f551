import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import det, make_timeline, ocr, record
from vidclaims.errors import ConfigError, IngestError
from vidclaims.timeline import (
    Detection,
    OcrSpan,
    StreamRecord,
    Timeline,
    Window,
    build_timeline,
    load_timeline,
    partition_windows,
    read_detection_stream,
    read_ocr_stream,
    save_timeline,
    serialize_window,
)


def stream(entries):
    return [
        StreamRecord(
            frame_index=idx,
            t=float(idx),
            detections=tuple(d for d in items if isinstance(d, Detection)),
            ocr=tuple(o for o in items if isinstance(o, OcrSpan)),
        )
        for idx, items in entries
    ]


def build(dets, ocrs, asr="", frame_count=90, fps=1.0):
    return build_timeline(
        dets,
        ocrs,
        asr,
        video_id="vid",
        fps=fps,
        frame_count=frame_count,
        duration_s=frame_count / fps,
    )


class TestBuildTimeline:
    def test_union_join(self):
        tl = build(
            stream([(0, [det("person")]), (30, [det("tv")])]),
            stream([(30, [ocr("BREAKING")]), (60, [ocr("LIVE")])]),
        )
        assert [r.frame_index for r in tl.records] == [0, 30, 60]
        merged = tl.records[1]
        assert [d.label for d in merged.detections] == ["tv"]
        assert [o.text for o in merged.ocr] == ["BREAKING"]

    def test_empty_streams(self):
        tl = build([], [], asr="")
        assert tl.records == ()
        assert tl.asr == ""

    def test_cooccurrence_preserved_verbatim(self):
        dets = [
            StreamRecord(
                45, 45.0, detections=(det("person"), det("microphone"))
            )
        ]
        ocrs = [StreamRecord(45, 45.0, ocr=(ocr("ELECTION RESULTS"),))]
        tl = build(dets, ocrs)
        (rec,) = tl.records
        assert rec.t == 45.0
        assert [d.label for d in rec.detections] == ["person", "microphone"]
        assert [o.text for o in rec.ocr] == ["ELECTION RESULTS"]

    def test_duplicate_frame_index_in_detections(self):
        with pytest.raises(IngestError, match="duplicate frame_index 3"):
            build(stream([(3, []), (3, [])]), [])

    def test_duplicate_frame_index_in_ocr(self):
        with pytest.raises(IngestError, match="duplicate frame_index 7"):
            build([], stream([(7, []), (7, [])]))

    def test_index_beyond_frame_count(self):
        with pytest.raises(IngestError, match="95"):
            build(stream([(95, [])]), [], frame_count=90)

    def test_order_insensitive(self):
        dets = stream([(0, [det("person")]), (30, [det("tv")]), (12, [])])
        ocrs = stream([(30, [ocr("A")]), (5, [ocr("B")])])
        forward = build(dets, ocrs)
        backward = build(list(reversed(dets)), list(reversed(ocrs)))
        assert forward == backward


class TestPartitionWindows:
    def test_uneven_tail(self):
        tl = make_timeline([record(i) for i in range(10)])
        sizes = [len(w.records) for w in partition_windows(tl, 4)]
        assert sizes == [4, 4, 2]

    def test_single_window(self):
        tl = make_timeline([record(i) for i in range(10)])
        assert [len(w.records) for w in partition_windows(tl, 10)] == [10]

    def test_empty_timeline(self):
        tl = make_timeline([])
        assert partition_windows(tl, 4) == []

    def test_nonpositive_size_rejected(self):
        tl = make_timeline([record(0)])
        with pytest.raises(ConfigError):
            partition_windows(tl, 0)

    @given(
        n=st.integers(min_value=0, max_value=200),
        size=st.integers(min_value=1, max_value=50),
    )
    def test_partition_property(self, n, size):
        tl = make_timeline([record(i) for i in range(n)])
        windows = partition_windows(tl, size)
        # exact coverage in order
        flattened = [r for w in windows for r in w.records]
        assert flattened == list(tl.records)
        # all but the last are full
        for w in windows[:-1]:
            assert len(w.records) == size
        if windows:
            assert 1 <= len(windows[-1].records) <= size
        assert [w.window_index for w in windows] == list(range(len(windows)))


class TestSerializeWindow:
    def test_reference_line(self):
        rec = record(
            45,
            45.0,
            detections=[det("person", 0.9), det("person", 0.8), det("tv", 0.7)],
            texts=["BREAKING", "Results 52%"],
        )
        line = serialize_window(Window(0, (rec,)))
        assert line == 't=45.0s | objects: person×2, tv×1 | text: "BREAKING ⏐ Results 52%"'

    def test_empty_fields(self):
        assert (
            serialize_window(Window(0, (record(12, 12.0),)))
            == "t=12.0s | objects: - | text: -"
        )

    def test_deterministic(self):
        rec = record(3, 3.0, detections=[det("car")], texts=["EXIT 12"])
        w = Window(0, (rec, record(4, 4.0)))
        assert serialize_window(w) == serialize_window(w)

    def test_emit_threshold_hides_low_confidence(self):
        rec = record(0, 0.0, detections=[det("person", 0.29), det("tv", 0.30)])
        line = serialize_window(Window(0, (rec,)))
        assert "person" not in line
        assert "tv×1" in line

    def test_emit_threshold_configurable(self):
        rec = record(0, 0.0, detections=[det("person", 0.29)])
        line = serialize_window(Window(0, (rec,)), emit_threshold=0.2)
        assert "person×1" in line

    def test_count_then_alpha_ordering(self):
        rec = record(
            0,
            0.0,
            detections=[det("tv"), det("car"), det("tv"), det("bench"), det("car")],
        )
        line = serialize_window(Window(0, (rec,)))
        assert "objects: car×2, tv×2, bench×1" in line


# -- randomized properties ---------------------------------------------------

_labels = st.sampled_from(["person", "car", "tv", "dog", "bench"])
_ocr_text = st.text(
    alphabet=st.characters(
        codec="ascii", categories=["L", "N"], include_characters=" %"
    ),
    min_size=1,
    max_size=18,
).map(str.strip).filter(bool)


@st.composite
def visible_records(draw, max_records=6):
    n = draw(st.integers(min_value=1, max_value=max_records))
    records = []
    for i in range(n):
        dets = tuple(
            det(draw(_labels), draw(st.floats(min_value=0.3, max_value=1.0)))
            for _ in range(draw(st.integers(min_value=0, max_value=3)))
        )
        texts = tuple(ocr(draw(_ocr_text)) for _ in range(draw(st.integers(0, 2))))
        records.append(record(i * 3, float(i * 3), dets, texts))
    return tuple(records)


def _visible_signature(records):
    return tuple(
        (
            round(r.t, 1),
            tuple(sorted(d.label for d in r.detections)),
            tuple(o.text for o in r.ocr),
        )
        for r in records
    )


@settings(max_examples=60)
@given(a=visible_records(), b=visible_records())
def test_serialization_separates_distinct_windows(a, b):
    # all generated confidences sit at/above the emit threshold and OCR text
    # cannot contain the joiner glyph, so distinct visible content must
    # serialize differently
    if _visible_signature(a) != _visible_signature(b):
        assert serialize_window(Window(0, a)) != serialize_window(Window(0, b))
    else:
        assert serialize_window(Window(0, a)) == serialize_window(Window(0, b))


@settings(max_examples=40)
@given(records=visible_records())
def test_persistence_round_trip(records, tmp_path_factory):
    tl = make_timeline(list(records), frame_count=1000)
    path = tmp_path_factory.mktemp("tl") / "timeline.json"
    save_timeline(tl, path)
    assert load_timeline(path) == tl


class TestFileReaders:
    def test_detections_jsonl(self, tmp_path):
        path = tmp_path / "det.jsonl"
        path.write_text(
            json.dumps(
                {
                    "frame_index": 2,
                    "t": 2.0,
                    "detections": [
                        {"label": "person", "confidence": 0.8, "bbox": [1, 2, 3, 4]}
                    ],
                }
            )
            + "\n"
        )
        (rec,) = read_detection_stream(path)
        assert rec.frame_index == 2
        assert rec.detections[0].label == "person"
        assert rec.detections[0].bbox == (1.0, 2.0, 3.0, 4.0)

    def test_malformed_line_names_line_number(self, tmp_path):
        path = tmp_path / "det.jsonl"
        good = json.dumps({"frame_index": 0, "t": 0.0, "detections": []})
        bad = json.dumps({"frame_index": 1, "t": 1.0, "detections": [{"label": "x"}]})
        path.write_text(good + "\n" + bad + "\n")
        with pytest.raises(IngestError, match="line 2"):
            read_detection_stream(path)

    def test_ocr_text_trimmed_and_nonempty(self, tmp_path):
        path = tmp_path / "ocr.jsonl"
        path.write_text(
            json.dumps(
                {
                    "frame_index": 0,
                    "t": 0.0,
                    "texts": [{"text": "  LIVE  ", "confidence": 0.9, "bbox": None}],
                }
            )
            + "\n"
        )
        (rec,) = read_ocr_stream(path)
        assert rec.ocr[0].text == "LIVE"

        path.write_text(
            json.dumps(
                {"frame_index": 0, "t": 0.0, "texts": [{"text": "  ", "confidence": 0.9}]}
            )
            + "\n"
        )
        with pytest.raises(IngestError, match="line 1"):
            read_ocr_stream(path)

    def test_confidence_out_of_range_is_malformed(self, tmp_path):
        path = tmp_path / "det.jsonl"
        path.write_text(
            json.dumps(
                {
                    "frame_index": 0,
                    "t": 0.0,
                    "detections": [
                        {"label": "person", "confidence": 1.4, "bbox": [0, 0, 1, 1]}
                    ],
                }
            )
            + "\n"
        )
        with pytest.raises(IngestError, match="line 1"):
            read_detection_stream(path)


class TestInvariants:
    def test_records_must_increase(self):
        with pytest.raises(IngestError):
            Timeline(
                video_id="v",
                fps=1.0,
                frame_count=10,
                duration_s=10.0,
                records=(record(5), record(5)),
            )

    def test_detection_validation(self):
        with pytest.raises(ValueError):
            Detection("", 0.5, (0, 0, 1, 1))
        with pytest.raises(ValueError):
            Detection("person", 1.5, (0, 0, 1, 1))
        with pytest.raises(ValueError):
            Detection("person", 0.5, (2, 0, 1, 1))
