"""Evidence-fusion prompt assembly and per-video claim generation.

Five streams go into one vision-chat request in a fixed order: task
instructions, query+persona, the grounding summary, structured frame
annotations (flagged as hints the model must cross-validate against the
actual frames), the ASR transcript, and finally the planned frames, each
tagged with its true frame index and timestamp so the textual and visual
temporal axes line up.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .backends import (
    Backend,
    ChatRequest,
    FramePart,
    TASK_GENERATE,
    TextPart,
    estimate_tokens,
)
from .errors import BudgetExceededError, StructuredOutputError
from .frameplan import (
    BudgetPolicy,
    FramePlan,
    ORIGIN_UNIFORM,
    VideoMeta,
    map_timestamp,
)
from .localize import EvidenceSet, QueryContext
from .textnorm import first_sentence
from .timeline import OCR_JOINER

log = logging.getLogger(__name__)

GENERATE_SYSTEM = f"""{TASK_GENERATE}
You are shown frames from one video, each tagged with its true frame index
and timestamp, together with the query, the persona, a grounding summary,
structured grounding hints, and the speech transcript. Generate factual
claims that answer the query for this persona. Each claim must be a single
sentence grounded in directly observed evidence, preferring specific facts
(names, numbers, dates) over vague paraphrases. The grounding hints are
automatic detector output: cross-validate them against the frames before
relying on them. Reply with JSON only:
[{{"claim": <one sentence>, "frames": [<frame index>, ...]}}]
Reply [] when no grounded claim can be made."""

GENERATE_SCHEMA = '[{"claim": str, "frames": [int]}]'

NO_TRANSCRIPT = "(no transcript)"
NO_HINTS = "(no grounding hints)"

SENTENCE_END = (".", "!", "?")


@dataclass(frozen=True)
class FrameAnnotation:
    """Structured hint line for one retained keyframe."""

    frame_index: int
    t: float
    objects: tuple[str, ...] = ()
    ocr: tuple[str, ...] = ()

    def render(self) -> str:
        objects = ", ".join(self.objects) if self.objects else "-"
        texts = (
            OCR_JOINER.join(f'"{s}"' for s in self.ocr) if self.ocr else "-"
        )
        return f"frame {self.frame_index} (t={self.t:.1f}s): objects={objects}; text={texts}"


@dataclass
class Claim:
    """One attributed single-sentence statement from one video."""

    claim_id: str
    video_id: str
    text: str
    evidence_frames: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.text or "\n" in self.text or not self.text.endswith(SENTENCE_END):
            raise ValueError(f"claim text must be one terminated sentence: {self.text!r}")

    def to_dict(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "video_id": self.video_id,
            "text": self.text,
            "evidence_frames": self.evidence_frames,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Claim":
        return cls(d["claim_id"], d["video_id"], d["text"], list(d["evidence_frames"]))


def build_annotations(
    ev: EvidenceSet, meta: VideoMeta, plan: FramePlan
) -> list[FrameAnnotation]:
    """One annotation per keyframe retained in the plan, sorted by index.

    Evidence frames that map to the same index merge into one annotation
    (ordered union of their strings); evidence whose frame was capped or
    evicted out of the plan gets no annotation, keeping every annotation
    aligned with an actual frame part.
    """
    keyframe_indices = {
        e.frame_index for e in plan.entries if e.origin != ORIGIN_UNIFORM
    }
    by_index: dict[int, tuple[list[str], list[str]]] = {}
    for frame in ev.frames:
        idx = map_timestamp(frame.t_s, meta.fps, meta.frame_count)
        if idx not in keyframe_indices:
            continue
        objects, ocr = by_index.setdefault(idx, ([], []))
        for label in frame.supporting_objects:
            if label not in objects:
                objects.append(label)
        for text in frame.supporting_ocr:
            if text not in ocr:
                ocr.append(text)
    return [
        FrameAnnotation(idx, idx / meta.fps, tuple(objs), tuple(ocr))
        for idx, (objs, ocr) in sorted(by_index.items())
    ]


def _truncate_tail_first(asr: str, max_chars: int) -> str:
    """Keep the beginning of the transcript; broadcast leads carry the
    event framing."""
    if len(asr) <= max_chars:
        return asr
    if max_chars <= 1:
        return "…"
    return asr[: max_chars - 1].rstrip() + "…"


def assemble_fusion_prompt(
    plan: FramePlan,
    ctx: QueryContext,
    annotations: list[FrameAnnotation],
    grounding_summary: str,
    asr: str,
    policy: BudgetPolicy = BudgetPolicy(),
) -> ChatRequest:
    """Deterministic five-stream prompt for one video.

    The ASR transcript is truncated tail-first so the text portion stays
    inside the policy's text reserve; if the assembled request still busts
    the context limit, that is a planner bug and raises.
    """
    persona = ctx.persona if ctx.persona else "(none)"
    header = f"Query: {ctx.query}\nPersona: {persona}"
    summary_block = f"Grounding summary:\n{grounding_summary}"
    if annotations:
        hint_lines = "\n".join(a.render() for a in annotations)
    else:
        hint_lines = NO_HINTS
    hints_block = (
        "Supplementary grounding hints (cross-validate against the frames "
        "before relying on them):\n" + hint_lines
    )

    fixed_chars = sum(
        len(s) for s in (GENERATE_SYSTEM, header, summary_block, hints_block)
    )
    asr_budget_chars = max(
        0, policy.text_reserve_tokens * 4 - fixed_chars - len("ASR transcript:\n")
    )
    asr_text = asr.strip()
    if not asr_text:
        asr_block = f"ASR transcript:\n{NO_TRANSCRIPT}"
    else:
        asr_block = "ASR transcript:\n" + _truncate_tail_first(asr_text, asr_budget_chars)

    parts: list[TextPart | FramePart] = [
        TextPart(header),
        TextPart(summary_block),
        TextPart(hints_block),
        TextPart(asr_block),
    ]
    for entry in plan.entries:
        parts.append(FramePart(entry.image_ref, entry.frame_index, entry.t))
    req = ChatRequest(
        system_prompt=GENERATE_SYSTEM,
        parts=tuple(parts),
        max_output_tokens=policy.reserved_output_tokens or 1024,
    )
    estimate = estimate_tokens(req)
    if estimate > policy.context_limit:
        raise BudgetExceededError(estimate, policy.context_limit)
    return req


def normalize_claim_text(raw: str) -> str | None:
    """Collapse to one terminated sentence; None when nothing remains."""
    flat = " ".join(str(raw).split())
    if not flat:
        return None
    sentence = first_sentence(flat)
    if sentence != flat:
        log.warning("multi-sentence claim truncated to its first sentence: %r", flat)
    if not sentence.endswith(SENTENCE_END):
        sentence += "."
    return sentence


def generate_claims(
    prompt: ChatRequest, backend: Backend, video_id: str
) -> tuple[list[Claim], list[str]]:
    """Run the fusion prompt and parse the reply into claims.

    Returns (claims, raw responses). A double parse failure means this
    video contributes zero claims; the pipeline continues.
    """
    try:
        result = backend.chat_structured(prompt, GENERATE_SCHEMA)
    except StructuredOutputError as exc:
        log.warning("claim generation failed for %s: %s", video_id, exc)
        return [], exc.raw_responses
    items = result.value if isinstance(result.value, list) else []
    claims: list[Claim] = []
    for item in items:
        if not isinstance(item, dict):
            continue
        text = normalize_claim_text(item.get("claim", ""))
        if text is None:
            continue
        frames = [int(f) for f in item.get("frames", []) or [] if isinstance(f, (int, float))]
        claims.append(
            Claim(
                claim_id=f"{video_id}:{len(claims):03d}",
                video_id=video_id,
                text=text,
                evidence_frames=sorted(set(frames)),
            )
        )
    return claims, result.raw_responses
