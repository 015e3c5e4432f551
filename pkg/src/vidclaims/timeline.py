"""Grounding timeline: per-video merge of detection, OCR, and ASR artifacts.

A timeline is the text-searchable record of what was visible in a video:
for each sampled frame, the detected objects and the on-screen text, plus
the full speech transcript. Timelines are immutable after construction and
safe to share across threads. The sampling cadence is producer-defined;
the engine consumes whatever frame indices the artifact streams provide.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigError, IngestError

# Detections below this confidence are hidden from serialized windows
# (noise suppression only; the stored timeline keeps them verbatim).
DEFAULT_EMIT_THRESHOLD = 0.30

# Joiner for OCR strings inside a serialized line.  U+23D0 never occurs in
# OCR output, so the field stays unambiguous even when texts contain '|'.
OCR_JOINER = " ⏐ "


@dataclass(frozen=True)
class Detection:
    """One detected object: COCO-style label, confidence, pixel bbox."""

    label: str
    confidence: float
    bbox: tuple[float, float, float, float]

    def __post_init__(self):
        if not self.label:
            raise ValueError("detection label must be non-empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"detection confidence {self.confidence} outside [0, 1]")
        x1, y1, x2, y2 = self.bbox
        if x1 > x2 or y1 > y2:
            raise ValueError(f"degenerate bbox {self.bbox}")


@dataclass(frozen=True)
class OcrSpan:
    """One recognized text string; bbox is optional."""

    text: str
    confidence: float
    bbox: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        if not self.text or self.text != self.text.strip():
            raise ValueError(f"OCR text must be non-empty and trimmed: {self.text!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"OCR confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class FrameRecord:
    """All grounding signals observed at one sampled frame."""

    frame_index: int
    t: float
    detections: tuple[Detection, ...] = ()
    ocr: tuple[OcrSpan, ...] = ()

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"frame_index {self.frame_index} negative")
        if self.t < 0:
            raise ValueError(f"timestamp {self.t} negative")


@dataclass(frozen=True)
class Timeline:
    """Chronological grounding record for one video."""

    video_id: str
    fps: float
    frame_count: int
    duration_s: float
    records: tuple[FrameRecord, ...] = ()
    asr: str = ""

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if self.frame_count <= 0:
            raise ValueError(f"frame_count must be positive, got {self.frame_count}")
        prev: FrameRecord | None = None
        for rec in self.records:
            if rec.frame_index >= self.frame_count:
                raise IngestError(
                    f"{self.video_id}: frame_index {rec.frame_index} "
                    f">= frame_count {self.frame_count}"
                )
            if prev is not None and (
                rec.frame_index <= prev.frame_index or rec.t <= prev.t
            ):
                raise IngestError(
                    f"{self.video_id}: records not strictly increasing at "
                    f"frame_index {rec.frame_index}"
                )
            prev = rec

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "fps": self.fps,
            "frame_count": self.frame_count,
            "duration_s": self.duration_s,
            "asr": self.asr,
            "records": [
                {
                    "frame_index": r.frame_index,
                    "t": r.t,
                    "detections": [
                        {
                            "label": d.label,
                            "confidence": d.confidence,
                            "bbox": list(d.bbox),
                        }
                        for d in r.detections
                    ],
                    "ocr": [
                        {
                            "text": o.text,
                            "confidence": o.confidence,
                            "bbox": None if o.bbox is None else list(o.bbox),
                        }
                        for o in r.ocr
                    ],
                }
                for r in self.records
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Timeline":
        records = tuple(
            FrameRecord(
                frame_index=r["frame_index"],
                t=r["t"],
                detections=tuple(
                    Detection(d["label"], d["confidence"], tuple(d["bbox"]))
                    for d in r["detections"]
                ),
                ocr=tuple(
                    OcrSpan(
                        o["text"],
                        o["confidence"],
                        None if o["bbox"] is None else tuple(o["bbox"]),
                    )
                    for o in r["ocr"]
                ),
            )
            for r in data["records"]
        )
        return cls(
            video_id=data["video_id"],
            fps=data["fps"],
            frame_count=data["frame_count"],
            duration_s=data["duration_s"],
            records=records,
            asr=data["asr"],
        )


@dataclass(frozen=True)
class Window:
    """A contiguous slice of timeline records."""

    window_index: int
    records: tuple[FrameRecord, ...]


@dataclass(frozen=True)
class StreamRecord:
    """One parsed line of a detections or OCR artifact file."""

    frame_index: int
    t: float | None
    detections: tuple[Detection, ...] = ()
    ocr: tuple[OcrSpan, ...] = ()


def build_timeline(
    detection_stream: Iterable[StreamRecord],
    ocr_stream: Iterable[StreamRecord],
    asr_text: str,
    *,
    video_id: str,
    fps: float,
    frame_count: int,
    duration_s: float,
) -> Timeline:
    """Merge the two artifact streams into one chronological timeline.

    The merge is a pure join keyed by frame_index: no confidence filtering
    happens here, frames present in either stream appear once, and frames
    absent from both are omitted. Input order is irrelevant.
    """
    det_by_index: dict[int, StreamRecord] = {}
    for rec in detection_stream:
        if rec.frame_index in det_by_index:
            raise IngestError(
                f"{video_id}: duplicate frame_index {rec.frame_index} "
                "in detections stream"
            )
        det_by_index[rec.frame_index] = rec
    ocr_by_index: dict[int, StreamRecord] = {}
    for rec in ocr_stream:
        if rec.frame_index in ocr_by_index:
            raise IngestError(
                f"{video_id}: duplicate frame_index {rec.frame_index} in OCR stream"
            )
        ocr_by_index[rec.frame_index] = rec

    records = []
    for idx in sorted(set(det_by_index) | set(ocr_by_index)):
        if idx >= frame_count:
            raise IngestError(
                f"{video_id}: frame_index {idx} >= frame_count {frame_count}"
            )
        det = det_by_index.get(idx)
        ocr = ocr_by_index.get(idx)
        # Stream-provided timestamps win (detections first for determinism);
        # otherwise derive from the frame rate.
        if det is not None and det.t is not None:
            t = det.t
        elif ocr is not None and ocr.t is not None:
            t = ocr.t
        else:
            t = idx / fps
        records.append(
            FrameRecord(
                frame_index=idx,
                t=t,
                detections=det.detections if det else (),
                ocr=ocr.ocr if ocr else (),
            )
        )
    return Timeline(
        video_id=video_id,
        fps=fps,
        frame_count=frame_count,
        duration_s=duration_s,
        records=tuple(records),
        asr=asr_text,
    )


def partition_windows(tl: Timeline, window_size: int) -> list[Window]:
    """Split the timeline's records into consecutive windows of
    ``window_size`` records; only the last window may be shorter."""
    if window_size <= 0:
        raise ConfigError(f"window size must be >= 1, got {window_size}")
    n = len(tl.records)
    return [
        Window(j, tl.records[j * window_size : (j + 1) * window_size])
        for j in range(math.ceil(n / window_size))
    ]


def serialize_record(
    rec: FrameRecord, emit_threshold: float = DEFAULT_EMIT_THRESHOLD
) -> str:
    """One deterministic text line for a frame record.

    Format: ``t=<s, 1 decimal>s | objects: <label×count ...> | text: "<ocr>"``
    with counts over detections at or above the emit threshold, sorted by
    count descending then label, and OCR strings joined in reading order.
    Empty fields render as ``-``.
    """
    counts = Counter(
        d.label for d in rec.detections if d.confidence >= emit_threshold
    )
    if counts:
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        objects = ", ".join(f"{label}×{n}" for label, n in ranked)
    else:
        objects = "-"
    if rec.ocr:
        text = '"' + OCR_JOINER.join(o.text for o in rec.ocr) + '"'
    else:
        text = "-"
    return f"t={rec.t:.1f}s | objects: {objects} | text: {text}"


def serialize_window(
    w: Window, emit_threshold: float = DEFAULT_EMIT_THRESHOLD
) -> str:
    """Compact textual rendering of a window, one line per frame.

    Byte-identical across runs for equal input.
    """
    return "\n".join(serialize_record(r, emit_threshold) for r in w.records)


# ---------------------------------------------------------------------------
# Artifact file readers (line-delimited JSON per frame, plain text for ASR)
# ---------------------------------------------------------------------------


def _parse_bbox(raw, *, optional: bool, where: str):
    if raw is None:
        if optional:
            return None
        raise ValueError(f"{where}: bbox missing")
    if not (isinstance(raw, (list, tuple)) and len(raw) == 4):
        raise ValueError(f"{where}: bbox must have 4 numbers")
    return tuple(float(v) for v in raw)


def read_detection_stream(path: str | Path) -> list[StreamRecord]:
    """Parse a detections JSONL file; errors name the offending line."""
    out = []
    for line_no, line in enumerate(_read_lines(path), start=1):
        try:
            obj = json.loads(line)
            dets = tuple(
                Detection(
                    label=str(d["label"]),
                    confidence=float(d["confidence"]),
                    bbox=_parse_bbox(d.get("bbox"), optional=False, where="detection"),
                )
                for d in obj["detections"]
            )
            out.append(
                StreamRecord(
                    frame_index=int(obj["frame_index"]),
                    t=None if obj.get("t") is None else float(obj["t"]),
                    detections=dets,
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise IngestError(f"{path}: line {line_no}: malformed record: {exc}")
    return out


def read_ocr_stream(path: str | Path) -> list[StreamRecord]:
    """Parse an OCR JSONL file; errors name the offending line.

    Text is whitespace-trimmed on ingest; empty text is malformed.
    """
    out = []
    for line_no, line in enumerate(_read_lines(path), start=1):
        try:
            obj = json.loads(line)
            spans = tuple(
                OcrSpan(
                    text=str(s["text"]).strip(),
                    confidence=float(s["confidence"]),
                    bbox=_parse_bbox(s.get("bbox"), optional=True, where="ocr"),
                )
                for s in obj["texts"]
            )
            out.append(
                StreamRecord(
                    frame_index=int(obj["frame_index"]),
                    t=None if obj.get("t") is None else float(obj["t"]),
                    ocr=spans,
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise IngestError(f"{path}: line {line_no}: malformed record: {exc}")
    return out


def read_asr(path: str | Path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _read_lines(path: str | Path) -> Iterable[str]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield line


def save_timeline(tl: Timeline, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(tl.to_dict(), ensure_ascii=False, sort_keys=True, indent=2),
        encoding="utf-8",
    )


def load_timeline(path: str | Path) -> Timeline:
    return Timeline.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
