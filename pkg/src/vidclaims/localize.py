"""Query-conditioned, vision-free evidence localization.

Serialized timeline windows are shown to a text-only chat backend together
with the query and persona; the backend nominates timestamps plus the
objects/OCR that support them. Nothing the backend asserts is trusted:
every nominated frame is validated against the window it came from, and
fabricated evidence is dropped. The per-video result is the union of the
per-window selections plus a short grounding summary that bridges the raw
detector signals to the query.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .backends import Backend, ChatRequest, TASK_LOCALIZE, TASK_SUMMARIZE, TextPart
from .errors import PipelineError, StructuredOutputError
from .textnorm import first_sentence
from .timeline import (
    DEFAULT_EMIT_THRESHOLD,
    OCR_JOINER,
    FrameRecord,
    Timeline,
    Window,
    partition_windows,
    serialize_window,
)

log = logging.getLogger(__name__)

NO_EVIDENCE_SUMMARY = "No grounding evidence was localized for this query."

LOCALIZE_SYSTEM = f"""{TASK_LOCALIZE}
You are shown one window of a video grounding timeline. Each line gives a
timestamp, the detected objects with their counts, and the on-screen text
recognized in that frame. Select only the timestamps whose objects or text
bear on the query, given the persona. Reply with JSON only:
{{"selected": [{{"t": <seconds>, "objects": [<label>, ...], "ocr": [<string>, ...], "reason": <one sentence>}}]}}
Reply {{"selected": []}} when nothing in the window is relevant."""

LOCALIZE_SCHEMA = (
    '{"selected": [{"t": float, "objects": [str], "ocr": [str], "reason": str}]}'
)

SUMMARIZE_SYSTEM = f"""{TASK_SUMMARIZE}
You are shown the frames selected as evidence for a query over one video,
with their detected objects and on-screen text. Write a single paragraph of
at most 200 words describing how these observations relate to the query and
persona. Mention concrete names, numbers, and on-screen text verbatim."""


@dataclass(frozen=True)
class QueryContext:
    query: str
    persona: str = ""

    def __post_init__(self):
        if not self.query:
            raise ValueError("query must be non-empty")


@dataclass
class SelectedFrame:
    """One localized frame with its validated supporting signals."""

    t_s: float
    supporting_objects: list[str] = field(default_factory=list)
    supporting_ocr: list[str] = field(default_factory=list)
    rationale: str = ""

    def evidence_score(self) -> int:
        return len(self.supporting_ocr) + len(self.supporting_objects)

    def to_dict(self) -> dict:
        return {
            "t_s": self.t_s,
            "supporting_objects": self.supporting_objects,
            "supporting_ocr": self.supporting_ocr,
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectedFrame":
        return cls(d["t_s"], d["supporting_objects"], d["supporting_ocr"], d["rationale"])


@dataclass
class EvidenceSet:
    """All query-relevant frames of one video plus the grounding summary."""

    video_id: str
    frames: list[SelectedFrame] = field(default_factory=list)
    summary: str = ""

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "frames": [f.to_dict() for f in self.frames],
            "summary": self.summary,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvidenceSet":
        return cls(
            d["video_id"],
            [SelectedFrame.from_dict(f) for f in d["frames"]],
            d["summary"],
        )


@dataclass
class LocalizeStats:
    windows: int = 0
    skipped_windows: int = 0
    dropped_frames: int = 0
    raw_responses: list[str] = field(default_factory=list)


def _query_parts(ctx: QueryContext) -> str:
    persona = ctx.persona if ctx.persona else "(none)"
    return f"Query: {ctx.query}\nPersona: {persona}"


def _record_key(t: float) -> float:
    # Timestamps are serialized at one decimal; selections echo that.
    return round(t, 1)


def localize_window(
    window: Window,
    ctx: QueryContext,
    backend: Backend,
    emit_threshold: float = DEFAULT_EMIT_THRESHOLD,
    stats: LocalizeStats | None = None,
) -> list[SelectedFrame]:
    """Ask the backend for relevant frames in one window and validate them.

    A nominated timestamp must match a record in this window (after
    one-decimal rounding) or the entry is dropped; supporting strings that
    are not verbatim present in that record are removed. A structured-output
    failure skips the window (empty selection) and the pipeline continues.
    """
    w_text = serialize_window(window, emit_threshold)
    req = ChatRequest(
        system_prompt=LOCALIZE_SYSTEM,
        parts=(TextPart(f"{_query_parts(ctx)}\n\nWindow:\n{w_text}"),),
    )
    try:
        result = backend.chat_structured(req, LOCALIZE_SCHEMA)
    except StructuredOutputError as exc:
        log.warning("window %d skipped: %s", window.window_index, exc)
        if stats is not None:
            stats.skipped_windows += 1
            stats.raw_responses.extend(exc.raw_responses)
        return []
    if stats is not None:
        stats.raw_responses.extend(result.raw_responses)

    by_key: dict[float, FrameRecord] = {}
    for rec in window.records:
        by_key.setdefault(_record_key(rec.t), rec)

    selected: list[SelectedFrame] = []
    entries = result.value.get("selected", []) if isinstance(result.value, dict) else []
    for entry in entries:
        try:
            t_s = _record_key(float(entry["t"]))
        except (KeyError, TypeError, ValueError):
            log.warning("window %d: unparseable selection %r dropped", window.window_index, entry)
            if stats is not None:
                stats.dropped_frames += 1
            continue
        rec = by_key.get(t_s)
        if rec is None:
            log.warning("window %d: t=%.1fs not in window, dropped", window.window_index, t_s)
            if stats is not None:
                stats.dropped_frames += 1
            continue
        claimed_objects = {str(o) for o in entry.get("objects", []) or []}
        claimed_ocr = {str(s) for s in entry.get("ocr", []) or []}
        record_labels = [d.label for d in rec.detections]
        record_texts = [o.text for o in rec.ocr]
        kept_objects = _subset_in_record_order(claimed_objects, record_labels)
        kept_ocr = _subset_in_record_order(claimed_ocr, record_texts)
        dropped = (claimed_objects - set(kept_objects)) | (claimed_ocr - set(kept_ocr))
        if dropped:
            log.warning(
                "window %d: dropped fabricated evidence %s at t=%.1fs",
                window.window_index,
                sorted(dropped),
                t_s,
            )
        selected.append(
            SelectedFrame(
                t_s=t_s,
                supporting_objects=kept_objects,
                supporting_ocr=kept_ocr,
                rationale=first_sentence(str(entry.get("reason", ""))),
            )
        )
    return selected


def _subset_in_record_order(claimed: set[str], record_values: list[str]) -> list[str]:
    """Claimed strings that truly occur in the record, in record order,
    deduplicated. Keeps results deterministic regardless of backend order."""
    out = []
    for value in record_values:
        if value in claimed and value not in out:
            out.append(value)
    return out


def localize_video(
    tl: Timeline,
    ctx: QueryContext,
    window_size: int,
    backend: Backend,
    emit_threshold: float = DEFAULT_EMIT_THRESHOLD,
    summarize: bool = True,
) -> tuple[EvidenceSet, LocalizeStats]:
    """Union of per-window selections, deduplicated by timestamp and sorted.

    Windows are independent, so the result does not depend on the order in
    which they are processed.
    """
    stats = LocalizeStats()
    windows = partition_windows(tl, window_size)
    stats.windows = len(windows)
    merged: dict[float, SelectedFrame] = {}
    for window in windows:
        for frame in localize_window(window, ctx, backend, emit_threshold, stats):
            merged[frame.t_s] = _merge_frames(merged.get(frame.t_s), frame)
    frames = [merged[t] for t in sorted(merged)]
    ev = EvidenceSet(video_id=tl.video_id, frames=frames)
    if summarize:
        ev.summary = summarize_grounding(ev, ctx, backend)
    return ev, stats


def _merge_frames(existing: SelectedFrame | None, new: SelectedFrame) -> SelectedFrame:
    if existing is None:
        return new
    objects = existing.supporting_objects + [
        o for o in new.supporting_objects if o not in existing.supporting_objects
    ]
    ocr = existing.supporting_ocr + [
        s for s in new.supporting_ocr if s not in existing.supporting_ocr
    ]
    return SelectedFrame(
        t_s=existing.t_s,
        supporting_objects=objects,
        supporting_ocr=ocr,
        rationale=existing.rationale or new.rationale,
    )


def summarize_grounding(ev: EvidenceSet, ctx: QueryContext, backend: Backend) -> str:
    """One paragraph (at most 200 words) bridging the evidence to the query.

    Empty evidence returns a fixed sentence; a backend failure falls back to
    the mechanical concatenation of the supporting OCR strings so the
    pipeline never halts here.
    """
    if not ev.frames:
        return NO_EVIDENCE_SUMMARY
    lines = []
    for f in ev.frames:
        objects = ", ".join(f.supporting_objects) if f.supporting_objects else "-"
        texts = (
            '"' + OCR_JOINER.join(f.supporting_ocr) + '"' if f.supporting_ocr else "-"
        )
        lines.append(f"t={f.t_s:.1f}s | objects: {objects} | text: {texts}")
    req = ChatRequest(
        system_prompt=SUMMARIZE_SYSTEM,
        parts=(TextPart(f"{_query_parts(ctx)}\n\nSelected evidence:\n" + "\n".join(lines)),),
    )
    try:
        summary = backend.chat(req)
    except PipelineError as exc:
        log.warning("grounding summary failed (%s); using mechanical fallback", exc)
        return "; ".join(s for f in ev.frames for s in f.supporting_ocr)
    words = summary.split()
    if len(words) > 200:
        summary = " ".join(words[:200])
    return " ".join(summary.split())
