"""Synthetic demo corpus generator.

Builds a small news-event topic with pre-extracted grounding artifacts:
per-frame detections and OCR as JSONL, a plain-text transcript, minimal
JPEG placeholders for the decoded frames, a manifest, and a gold claim
file. Evidence OCR is planted in a chosen subset of the videos, so the
corpus exercises the whole pipeline offline: the planted videos localize,
generate, and consolidate into claims citing exactly those videos.

Reference cadence: one record per second (fps 1.0, one frame per record).
"""

from __future__ import annotations

import json
import random
from pathlib import Path

# Smallest well-formed JPEG payload we need: start-of-image + end-of-image.
# The engine never decodes frames; files only need to exist.
MINIMAL_JPEG = b"\xff\xd8\xff\xd9"

DEFAULT_QUERY = "What agreement was signed at the summit?"
DEFAULT_PERSONA = "A wire-service editor tracking the negotiation outcome."
PLANTED_OCR = "CEASEFIRE AGREEMENT SIGNED"
PLANTED_CLAIM = f'On-screen text read "{PLANTED_OCR}".'

_BENIGN_OCR = ["LIVE", "SPORTS TONIGHT", "WEATHER UPDATE", "TRAFFIC REPORT"]
_LABELS = ["person", "car", "tv", "chair", "bottle"]


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def build_demo_topic(
    root: str | Path,
    topic_id: str = "demo-summit",
    video_ids: tuple[str, ...] = ("newsclip-a", "newsclip-b", "newsclip-c"),
    planted_videos: tuple[str, ...] = ("newsclip-a", "newsclip-b"),
    frame_count: int = 90,
    planted_seconds: tuple[int, ...] = (45, 46),
    seed: int = 7,
    empty_streams: bool = False,
) -> Path:
    """Write the corpus under ``root`` and return the manifest path."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    fps = 1.0

    manifest_videos = []
    for vid in video_ids:
        vdir = root / vid
        frames_dir = vdir / "frames"
        frames_dir.mkdir(parents=True, exist_ok=True)
        for idx in range(frame_count):
            (frames_dir / f"{idx:06d}.jpg").write_bytes(MINIMAL_JPEG)

        det_rows = []
        ocr_rows = []
        if not empty_streams:
            for sec in range(frame_count):
                labels = rng.sample(_LABELS, k=rng.randint(1, 3))
                det_rows.append(
                    {
                        "frame_index": sec,
                        "t": float(sec),
                        "detections": [
                            {
                                "label": label,
                                "confidence": round(rng.uniform(0.35, 0.95), 2),
                                "bbox": [0.0, 0.0, 100.0, 100.0],
                            }
                            for label in labels
                        ],
                    }
                )
                texts = []
                if sec % 15 == 0:
                    texts.append(
                        {
                            "text": rng.choice(_BENIGN_OCR),
                            "confidence": 0.9,
                            "bbox": None,
                        }
                    )
                if vid in planted_videos and sec in planted_seconds:
                    texts.append(
                        {"text": PLANTED_OCR, "confidence": 0.97, "bbox": None}
                    )
                if texts:
                    ocr_rows.append(
                        {"frame_index": sec, "t": float(sec), "texts": texts}
                    )
        _write_jsonl(vdir / "detections.jsonl", det_rows)
        _write_jsonl(vdir / "ocr.jsonl", ocr_rows)
        (vdir / "asr.txt").write_text(
            f"This is {vid} reporting from the summit venue.\n", encoding="utf-8"
        )
        manifest_videos.append(
            {
                "video_id": vid,
                "fps": fps,
                "frame_count": frame_count,
                "duration_s": float(frame_count),
                "detections_path": f"{vid}/detections.jsonl",
                "ocr_path": f"{vid}/ocr.jsonl",
                "asr_path": f"{vid}/asr.txt",
                "frames_dir": f"{vid}/frames",
            }
        )

    gold = [{"claim": PLANTED_CLAIM, "citations": sorted(planted_videos)}]
    gold_path = root / "gold.json"
    gold_path.write_text(
        json.dumps(gold, ensure_ascii=False, indent=2), encoding="utf-8"
    )

    manifest = {
        "topic_id": topic_id,
        "query": DEFAULT_QUERY,
        "persona": DEFAULT_PERSONA,
        "gold_path": "gold.json",
        "videos": manifest_videos,
    }
    manifest_path = root / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, ensure_ascii=False, indent=2), encoding="utf-8"
    )
    return manifest_path
