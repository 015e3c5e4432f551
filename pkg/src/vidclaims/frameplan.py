"""Hybrid frame planning: uniform coverage plus guidance-targeted keyframes.

The visual input to the vision backend is the union of linearly spaced
frames (broad narrative coverage, and a guard against grounding errors)
and the localized evidence timestamps mapped to their nearest frame index.
Plans are deduplicated, temporally sorted, and budgeted: at roughly 256
visual tokens per frame a full 100+30 plan does not fit a 32,768-token
window together with the text, so uniform frames are evicted at an even
stride until the budget holds. Keyframes are never evicted before uniform
frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, FramePlanError
from .localize import EvidenceSet

ORIGIN_UNIFORM = "uniform"
ORIGIN_KEYFRAME = "keyframe"
ORIGIN_BOTH = "both"


@dataclass(frozen=True)
class VideoMeta:
    """Decoding facts about one video, as declared by the corpus manifest."""

    video_id: str
    fps: float
    frame_count: int
    duration_s: float
    frames_dir: Path | None = None

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        if self.frame_count <= 0:
            raise ValueError("frame_count must be positive")


@dataclass(frozen=True)
class BudgetPolicy:
    """Frame-count and token-budget knobs for one generation call."""

    n_uniform: int = 100
    k_max_keyframes: int = 30
    per_frame_tokens: int = 256
    context_limit: int = 32768
    reserved_output_tokens: int = 512
    text_reserve_tokens: int = 3600

    def __post_init__(self):
        if min(self.n_uniform, self.k_max_keyframes, self.per_frame_tokens, self.context_limit) < 1:
            raise ConfigError("budget policy fields must be positive")
        if min(self.reserved_output_tokens, self.text_reserve_tokens) < 0:
            raise ConfigError("token reserves must be non-negative")
        if self.per_frame_tokens + self.reserve_tokens > self.context_limit:
            raise ConfigError(
                "context limit cannot fit even one frame next to the reserves"
            )

    @property
    def reserve_tokens(self) -> int:
        return self.text_reserve_tokens + self.reserved_output_tokens

    @property
    def max_plan_entries(self) -> int:
        return (self.context_limit - self.reserve_tokens) // self.per_frame_tokens

    def to_dict(self) -> dict:
        return {
            "n_uniform": self.n_uniform,
            "k_max_keyframes": self.k_max_keyframes,
            "per_frame_tokens": self.per_frame_tokens,
            "context_limit": self.context_limit,
            "reserved_output_tokens": self.reserved_output_tokens,
            "text_reserve_tokens": self.text_reserve_tokens,
        }


@dataclass(frozen=True)
class PlanEntry:
    frame_index: int
    t: float
    origin: str
    image_ref: str = ""


@dataclass
class FramePlan:
    video_id: str
    entries: list[PlanEntry] = field(default_factory=list)
    token_estimate: int = 0

    def indices(self) -> list[int]:
        return [e.frame_index for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "token_estimate": self.token_estimate,
            "entries": [
                {
                    "frame_index": e.frame_index,
                    "t": e.t,
                    "origin": e.origin,
                    "image_ref": e.image_ref,
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FramePlan":
        return cls(
            video_id=d["video_id"],
            token_estimate=d["token_estimate"],
            entries=[
                PlanEntry(e["frame_index"], e["t"], e["origin"], e["image_ref"])
                for e in d["entries"]
            ],
        )


def round_half_away(x: float) -> int:
    """Nearest integer, ties away from zero."""
    if x >= 0:
        return int(math.floor(x + 0.5))
    return -int(math.floor(-x + 0.5))


def uniform_indices(n: int, frame_count: int) -> list[int]:
    """``n`` linearly spaced frame indices over [0, frame_count - 1],
    inclusive of both endpoints; duplicates collapse when the video is
    shorter than the requested count."""
    if n < 1 or frame_count < 1:
        raise ConfigError("uniform_indices needs n >= 1 and frame_count >= 1")
    if n == 1:
        return [0]
    span = frame_count - 1
    out: list[int] = []
    for k in range(n):
        idx = round_half_away(k * span / (n - 1))
        if not out or idx != out[-1]:
            out.append(idx)
    return out


def map_timestamp(t_s: float, fps: float, frame_count: int) -> int:
    """Nearest frame index for a timestamp: round(t*fps) clamped into range,
    ties rounding away from zero."""
    if t_s < 0 or fps <= 0 or frame_count < 1:
        raise ConfigError("map_timestamp needs t_s >= 0, fps > 0, frame_count >= 1")
    return min(round_half_away(t_s * fps), frame_count - 1)


def frame_image_path(frames_dir: Path, frame_index: int) -> Path:
    return frames_dir / f"{frame_index:06d}.jpg"


def _capped_keyframe_indices(ev: EvidenceSet, meta: VideoMeta, k_max: int) -> list[int]:
    """Evidence frames ranked by supporting-signal count (descending, ties to
    the earlier timestamp), capped, then mapped to frame indices."""
    ranked = sorted(ev.frames, key=lambda f: (-f.evidence_score(), f.t_s))
    capped = ranked[:k_max]
    indices = {map_timestamp(f.t_s, meta.fps, meta.frame_count) for f in capped}
    return sorted(indices)


def _evict_evenly(values: list[int], keep: int) -> set[int]:
    """Subset of ``values`` (sorted) of size ``keep``, evenly strided with
    both endpoints preserved; returns the kept set."""
    if keep <= 0:
        return set()
    if keep >= len(values):
        return set(values)
    if keep == 1:
        return {values[0]}
    span = len(values) - 1
    kept = set()
    for j in range(keep):
        kept.add(values[round_half_away(j * span / (keep - 1))])
    return kept


def build_frame_plan(
    ev: EvidenceSet,
    meta: VideoMeta,
    policy: BudgetPolicy = BudgetPolicy(),
    check_files: bool = True,
) -> FramePlan:
    """Uniform ∪ keyframe indices, deduplicated, sorted, budget-enforced.

    Collisions between the two sources are marked origin="both" and count
    as keyframes for eviction purposes. When the visual estimate plus the
    text reserve exceeds the context limit, pure-uniform entries are evicted
    at an even stride first; keyframes go only if no uniform entries remain.
    """
    uniform = set(uniform_indices(policy.n_uniform, meta.frame_count))
    keyframes = set(_capped_keyframe_indices(ev, meta, policy.k_max_keyframes))

    allowed = policy.max_plan_entries
    all_indices = uniform | keyframes
    if len(all_indices) > allowed:
        pure_uniform = sorted(uniform - keyframes)
        keep_uniform = max(0, allowed - len(keyframes))
        kept_uniform = _evict_evenly(pure_uniform, keep_uniform)
        kept_key = keyframes
        if len(kept_key) > allowed:
            # Degenerate budget: every pure-uniform entry is already gone,
            # so shed keyframes from the tail of the video.
            kept_key = set(sorted(kept_key)[:allowed])
        all_indices = kept_uniform | kept_key
        keyframes = kept_key
        uniform = kept_uniform | (uniform & kept_key)

    entries = []
    missing = []
    for idx in sorted(all_indices):
        if idx in keyframes and idx in uniform:
            origin = ORIGIN_BOTH
        elif idx in keyframes:
            origin = ORIGIN_KEYFRAME
        else:
            origin = ORIGIN_UNIFORM
        image_ref = ""
        if meta.frames_dir is not None:
            path = frame_image_path(meta.frames_dir, idx)
            image_ref = str(path)
            if check_files and not path.exists():
                missing.append(idx)
        entries.append(PlanEntry(idx, idx / meta.fps, origin, image_ref))
    if missing:
        raise FramePlanError(missing)
    return FramePlan(
        video_id=ev.video_id,
        entries=entries,
        token_estimate=policy.per_frame_tokens * len(entries),
    )
