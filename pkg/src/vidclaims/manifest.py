"""Corpus manifest: one topic, its query/persona, and its video artifacts.

Schema (JSON):
    {
      "topic_id": str,
      "query": str,
      "persona": str,
      "gold_path": str (optional),
      "videos": [
        {"video_id": str, "fps": float, "frame_count": int,
         "duration_s": float, "detections_path": str, "ocr_path": str,
         "asr_path": str, "frames_dir": str},
        ...
      ]
    }

Relative paths resolve against the manifest's directory. Validation
reports every violation, not just the first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ManifestError
from .frameplan import VideoMeta


@dataclass(frozen=True)
class VideoSource:
    meta: VideoMeta
    detections_path: Path
    ocr_path: Path
    asr_path: Path

    @property
    def video_id(self) -> str:
        return self.meta.video_id


@dataclass(frozen=True)
class TopicManifest:
    topic_id: str
    query: str
    persona: str
    videos: tuple[VideoSource, ...]
    gold_path: Path | None = None


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


_VIDEO_KEYS = (
    "video_id",
    "fps",
    "frame_count",
    "duration_s",
    "detections_path",
    "ocr_path",
    "asr_path",
    "frames_dir",
)


def _resolve(base: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else base / path


def load_manifest(path: str | Path) -> TopicManifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}")
    base = path.parent
    videos = []
    for entry in data.get("videos", []):
        videos.append(
            VideoSource(
                meta=VideoMeta(
                    video_id=entry["video_id"],
                    fps=float(entry["fps"]),
                    frame_count=int(entry["frame_count"]),
                    duration_s=float(entry["duration_s"]),
                    frames_dir=_resolve(base, entry["frames_dir"]),
                ),
                detections_path=_resolve(base, entry["detections_path"]),
                ocr_path=_resolve(base, entry["ocr_path"]),
                asr_path=_resolve(base, entry["asr_path"]),
            )
        )
    gold = data.get("gold_path")
    return TopicManifest(
        topic_id=data["topic_id"],
        query=data["query"],
        persona=data.get("persona", ""),
        videos=tuple(videos),
        gold_path=_resolve(base, gold) if gold else None,
    )


def validate_manifest(path: str | Path) -> ValidationReport:
    """Schema, path-existence, and consistency checks; lists every problem."""
    path = Path(path)
    report = ValidationReport()
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}")
    except json.JSONDecodeError as exc:
        report.violations.append(f"manifest is not valid JSON: {exc}")
        return report

    for key in ("topic_id", "query", "videos"):
        if key not in data:
            report.violations.append(f"missing required key '{key}'")
    if not isinstance(data.get("videos"), list):
        if "videos" in data:
            report.violations.append("'videos' must be a list")
        return report

    base = path.parent
    seen_ids: set[str] = set()
    for pos, entry in enumerate(data["videos"]):
        where = f"videos[{pos}]"
        if not isinstance(entry, dict):
            report.violations.append(f"{where}: not an object")
            continue
        missing = [k for k in _VIDEO_KEYS if k not in entry]
        if missing:
            report.violations.append(f"{where}: missing keys {missing}")
            continue
        vid = entry["video_id"]
        if vid in seen_ids:
            report.violations.append(f"{where}: duplicate video_id '{vid}'")
        seen_ids.add(vid)
        fps = entry["fps"]
        frame_count = entry["frame_count"]
        duration = entry["duration_s"]
        if not (isinstance(fps, (int, float)) and fps > 0):
            report.violations.append(f"{where} ({vid}): fps must be > 0, got {fps!r}")
        if not (isinstance(frame_count, int) and frame_count > 0):
            report.violations.append(
                f"{where} ({vid}): frame_count must be a positive integer, got {frame_count!r}"
            )
        if (
            isinstance(fps, (int, float))
            and fps > 0
            and isinstance(frame_count, int)
            and isinstance(duration, (int, float))
            and abs(duration * fps - frame_count) > fps
        ):
            report.violations.append(
                f"{where} ({vid}): duration_s*fps = {duration * fps:.1f} "
                f"inconsistent with frame_count = {frame_count}"
            )
        for key in ("detections_path", "ocr_path", "asr_path", "frames_dir"):
            target = _resolve(base, entry[key])
            if not target.exists():
                report.violations.append(f"{where} ({vid}): {key} does not exist: {target}")
    if data.get("gold_path"):
        target = _resolve(base, data["gold_path"])
        if not target.exists():
            report.violations.append(f"gold_path does not exist: {target}")
    return report
