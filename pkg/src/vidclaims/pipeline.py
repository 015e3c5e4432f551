"""Stage-oriented topic runner with content-hash caching and resume.

Stages run in dependency order (ingest -> localize -> plan -> generate ->
consolidate -> evaluate); per-video stages fan out over a thread pool.
Every artifact is plain JSON under the run directory, written atomically
(write-then-rename), and keyed in ``state.json`` by a content hash of its
stage inputs plus the config subset relevant to that stage. A stage unit
is reused iff its recorded hash matches, so unchanged reruns cost zero
backend calls and an interrupted run resumes exactly where it stopped.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .backends import (
    Backend,
    BackendProfile,
    MockRuleSet,
    TranscriptLogger,
    make_backend,
    request_fingerprint,
)
from .claimgen import Claim, assemble_fusion_prompt, build_annotations, generate_claims
from .consolidate import (
    ConsolidatedClaim,
    ConsolidationBackends,
    MODE_EMBED_SIM,
    consolidate,
)
from .errors import DependencyError, PipelineError
from .evaluate import EvalReport, load_gold, score
from .frameplan import BudgetPolicy, FramePlan, build_frame_plan
from .localize import EvidenceSet, QueryContext, localize_video
from .manifest import TopicManifest, VideoSource, load_manifest
from .timeline import (
    DEFAULT_EMIT_THRESHOLD,
    Timeline,
    build_timeline,
    load_timeline,
    read_asr,
    read_detection_stream,
    read_ocr_stream,
    save_timeline,
)

log = logging.getLogger(__name__)

STAGES = ("ingest", "localize", "plan", "generate", "consolidate", "evaluate")


@dataclass
class RunConfig:
    manifest_path: Path
    run_dir: Path
    window_size: int = 30
    policy: BudgetPolicy = field(default_factory=BudgetPolicy)
    tau: float = 0.85
    aggregation: str = MODE_EMBED_SIM
    emit_threshold: float = DEFAULT_EMIT_THRESHOLD
    jobs: int = 4
    seed: int = 0
    gold_path: Path | None = None
    profiles: dict[str, BackendProfile] = field(default_factory=dict)
    mock_rules_path: Path | None = None
    force: bool = False

    def profile_for(self, role: str) -> BackendProfile:
        return self.profiles.get(role, BackendProfile(role=role))


@dataclass
class StageArtifact:
    stage: str
    unit: str
    input_hash: str
    output_path: str
    status: str  # "computed" | "cached"
    seconds: float


@dataclass
class RunSummary:
    topic_id: str
    artifacts: list[StageArtifact] = field(default_factory=list)
    report: EvalReport | None = None

    def by_status(self, stage: str) -> dict[str, int]:
        counts: dict[str, int] = {}
        for a in self.artifacts:
            if a.stage == stage:
                counts[a.status] = counts.get(a.status, 0) + 1
        return counts


def _hash_chunks(*chunks: bytes | str) -> str:
    h = hashlib.sha256()
    for chunk in chunks:
        if isinstance(chunk, str):
            chunk = chunk.encode("utf-8")
        h.update(chunk)
        h.update(b"\x1f")
    return h.hexdigest()


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def atomic_write_json(path: Path, obj) -> None:
    atomic_write_text(
        path, json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n"
    )


class TopicRunner:
    """Executes pipeline stages for one topic manifest."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.manifest: TopicManifest = load_manifest(config.manifest_path)
        self.run_dir = Path(config.run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.ctx = QueryContext(self.manifest.query, self.manifest.persona)
        rules = (
            MockRuleSet.from_file(config.mock_rules_path)
            if config.mock_rules_path
            else None
        )
        transcript = TranscriptLogger(self.run_dir / "transcripts.jsonl")
        self.backends: dict[str, Backend] = {}
        for role in ("text_chat", "vision_chat", "embed", "entail"):
            backend = make_backend(
                config.profile_for(role), rules=rules, transcript=transcript
            )
            backend.seed_override = config.seed
            self.backends[role] = backend
        self._rules_fingerprint = self._hash_rules(config.mock_rules_path)
        self._state_lock = threading.Lock()
        self._state: dict[str, dict] = self._load_state()

    # -- state -----------------------------------------------------------
    def _state_path(self) -> Path:
        return self.run_dir / "state.json"

    def _load_state(self) -> dict:
        path = self._state_path()
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))
        return {}

    def _record(self, artifact: StageArtifact) -> None:
        key = f"{artifact.stage}:{artifact.unit}"
        with self._state_lock:
            self._state[key] = {
                "input_hash": artifact.input_hash,
                "output": artifact.output_path,
                "status": artifact.status,
                "seconds": round(artifact.seconds, 4),
            }
            atomic_write_json(self._state_path(), self._state)

    def _reusable(self, stage: str, unit: str, input_hash: str, output: Path) -> bool:
        if self.config.force:
            return False
        entry = self._state.get(f"{stage}:{unit}")
        return (
            entry is not None
            and entry.get("input_hash") == input_hash
            and output.exists()
        )

    # -- fingerprints ------------------------------------------------------
    @staticmethod
    def _hash_rules(path: Path | None) -> str:
        if path is None:
            return "no-rules"
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()

    def _backend_fingerprint(self, role: str) -> str:
        p = self.config.profile_for(role)
        return _hash_chunks(
            p.role,
            p.endpoint,
            p.model_name,
            str(p.context_limit_tokens),
            self._rules_fingerprint,
            str(self.config.seed),
        )

    def _meta_fingerprint(self, source: VideoSource) -> str:
        m = source.meta
        return _hash_chunks(
            m.video_id, str(m.fps), str(m.frame_count), str(m.duration_s)
        )

    # -- paths ---------------------------------------------------------------
    def _timeline_path(self, vid: str) -> Path:
        return self.run_dir / "timelines" / f"{vid}.json"

    def _evidence_path(self, vid: str) -> Path:
        return self.run_dir / "evidence" / f"{vid}.json"

    def _plan_path(self, vid: str) -> Path:
        return self.run_dir / "plans" / f"{vid}.json"

    def _claims_path(self, vid: str) -> Path:
        return self.run_dir / "claims" / f"{vid}.json"

    @property
    def consolidated_path(self) -> Path:
        return self.run_dir / "consolidated.json"

    @property
    def report_path(self) -> Path:
        return self.run_dir / "eval_report.json"

    def _gold_path(self) -> Path | None:
        return self.config.gold_path or self.manifest.gold_path

    # -- per-video stage bodies ----------------------------------------------
    def _stage_ingest_video(self, source: VideoSource) -> StageArtifact:
        started = time.monotonic()
        out = self._timeline_path(source.video_id)
        input_hash = _hash_chunks(
            source.detections_path.read_bytes(),
            source.ocr_path.read_bytes(),
            source.asr_path.read_bytes(),
            self._meta_fingerprint(source),
        )
        if self._reusable("ingest", source.video_id, input_hash, out):
            return StageArtifact(
                "ingest", source.video_id, input_hash, str(out), "cached", 0.0
            )
        tl = build_timeline(
            read_detection_stream(source.detections_path),
            read_ocr_stream(source.ocr_path),
            read_asr(source.asr_path),
            video_id=source.video_id,
            fps=source.meta.fps,
            frame_count=source.meta.frame_count,
            duration_s=source.meta.duration_s,
        )
        out.parent.mkdir(parents=True, exist_ok=True)
        save_timeline_atomic(tl, out)
        artifact = StageArtifact(
            "ingest",
            source.video_id,
            input_hash,
            str(out),
            "computed",
            time.monotonic() - started,
        )
        self._record(artifact)
        return artifact

    def _stage_localize_video(self, source: VideoSource) -> StageArtifact:
        started = time.monotonic()
        vid = source.video_id
        tl_path = self._timeline_path(vid)
        if not tl_path.exists():
            raise DependencyError("localize", f"missing {tl_path} (run ingest first)")
        out = self._evidence_path(vid)
        input_hash = _hash_chunks(
            tl_path.read_bytes(),
            self.ctx.query,
            self.ctx.persona,
            str(self.config.window_size),
            str(self.config.emit_threshold),
            self._backend_fingerprint("text_chat"),
        )
        if self._reusable("localize", vid, input_hash, out):
            return StageArtifact("localize", vid, input_hash, str(out), "cached", 0.0)
        tl = load_timeline(tl_path)
        ev, stats = localize_video(
            tl,
            self.ctx,
            self.config.window_size,
            self.backends["text_chat"],
            self.config.emit_threshold,
        )
        atomic_write_json(
            out,
            {
                "evidence": ev.to_dict(),
                "stats": {
                    "windows": stats.windows,
                    "skipped_windows": stats.skipped_windows,
                    "dropped_frames": stats.dropped_frames,
                },
                "raw_responses": stats.raw_responses,
            },
        )
        artifact = StageArtifact(
            "localize", vid, input_hash, str(out), "computed", time.monotonic() - started
        )
        self._record(artifact)
        return artifact

    def _stage_plan_video(self, source: VideoSource) -> StageArtifact:
        started = time.monotonic()
        vid = source.video_id
        ev_path = self._evidence_path(vid)
        if not ev_path.exists():
            raise DependencyError("plan", f"missing {ev_path} (run localize first)")
        out = self._plan_path(vid)
        input_hash = _hash_chunks(
            ev_path.read_bytes(),
            json.dumps(self.config.policy.to_dict(), sort_keys=True),
            self._meta_fingerprint(source),
        )
        if self._reusable("plan", vid, input_hash, out):
            return StageArtifact("plan", vid, input_hash, str(out), "cached", 0.0)
        ev = EvidenceSet.from_dict(
            json.loads(ev_path.read_text(encoding="utf-8"))["evidence"]
        )
        plan = build_frame_plan(ev, source.meta, self.config.policy)
        atomic_write_json(out, plan.to_dict())
        artifact = StageArtifact(
            "plan", vid, input_hash, str(out), "computed", time.monotonic() - started
        )
        self._record(artifact)
        return artifact

    def _stage_generate_video(self, source: VideoSource) -> StageArtifact:
        started = time.monotonic()
        vid = source.video_id
        plan_path = self._plan_path(vid)
        ev_path = self._evidence_path(vid)
        for dep in (plan_path, ev_path):
            if not dep.exists():
                raise DependencyError("generate", f"missing {dep}")
        out = self._claims_path(vid)
        input_hash = _hash_chunks(
            plan_path.read_bytes(),
            ev_path.read_bytes(),
            source.asr_path.read_bytes(),
            self.ctx.query,
            self.ctx.persona,
            json.dumps(self.config.policy.to_dict(), sort_keys=True),
            self._backend_fingerprint("vision_chat"),
        )
        if self._reusable("generate", vid, input_hash, out):
            return StageArtifact("generate", vid, input_hash, str(out), "cached", 0.0)
        plan = FramePlan.from_dict(json.loads(plan_path.read_text(encoding="utf-8")))
        ev = EvidenceSet.from_dict(
            json.loads(ev_path.read_text(encoding="utf-8"))["evidence"]
        )
        annotations = build_annotations(ev, source.meta, plan)
        prompt = assemble_fusion_prompt(
            plan,
            self.ctx,
            annotations,
            ev.summary,
            read_asr(source.asr_path),
            self.config.policy,
        )
        claims, raw_responses = generate_claims(
            prompt, self.backends["vision_chat"], vid
        )
        atomic_write_json(
            out,
            {
                "video_id": vid,
                "claims": [c.to_dict() for c in claims],
                "raw_responses": raw_responses,
                "prompt_hash": request_fingerprint(prompt),
            },
        )
        artifact = StageArtifact(
            "generate", vid, input_hash, str(out), "computed", time.monotonic() - started
        )
        self._record(artifact)
        return artifact

    # -- whole-topic stage bodies ---------------------------------------------
    def _stage_consolidate(self) -> StageArtifact:
        started = time.monotonic()
        claim_files = []
        for source in self.manifest.videos:
            path = self._claims_path(source.video_id)
            if not path.exists():
                raise DependencyError("consolidate", f"missing {path}")
            claim_files.append(path)
        input_hash = _hash_chunks(
            *[p.read_bytes() for p in claim_files],
            str(self.config.tau),
            self.config.aggregation,
            self._backend_fingerprint("text_chat"),
            self._backend_fingerprint("embed"),
        )
        out = self.consolidated_path
        if self._reusable("consolidate", "-", input_hash, out):
            return StageArtifact("consolidate", "-", input_hash, str(out), "cached", 0.0)
        claims: list[Claim] = []
        for path in claim_files:
            data = json.loads(path.read_text(encoding="utf-8"))
            claims.extend(Claim.from_dict(d) for d in data["claims"])
        merged = consolidate(
            claims,
            self.config.aggregation,
            ConsolidationBackends(
                text_chat=self.backends["text_chat"], embed=self.backends["embed"]
            ),
            self.config.tau,
        )
        atomic_write_json(out, [c.to_dict() for c in merged])
        artifact = StageArtifact(
            "consolidate", "-", input_hash, str(out), "computed", time.monotonic() - started
        )
        self._record(artifact)
        return artifact

    def _stage_evaluate(self) -> tuple[StageArtifact, EvalReport]:
        started = time.monotonic()
        gold_path = self._gold_path()
        if gold_path is None:
            raise DependencyError("evaluate", "no gold file configured")
        if not gold_path.exists():
            raise DependencyError("evaluate", f"gold file not found: {gold_path}")
        if not self.consolidated_path.exists():
            raise DependencyError("evaluate", f"missing {self.consolidated_path}")
        input_hash = _hash_chunks(
            self.consolidated_path.read_bytes(),
            gold_path.read_bytes(),
            self._backend_fingerprint("entail"),
        )
        out = self.report_path
        if self._reusable("evaluate", "-", input_hash, out):
            report = _report_from_file(out)
            return (
                StageArtifact("evaluate", "-", input_hash, str(out), "cached", 0.0),
                report,
            )
        pred = [
            ConsolidatedClaim.from_dict(d)
            for d in json.loads(self.consolidated_path.read_text(encoding="utf-8"))
        ]
        gold = load_gold(gold_path)
        report = score(pred, gold, self.backends["entail"])
        atomic_write_json(out, report.to_dict())
        artifact = StageArtifact(
            "evaluate", "-", input_hash, str(out), "computed", time.monotonic() - started
        )
        self._record(artifact)
        return artifact, report

    # -- driver ------------------------------------------------------------
    def _fan_out(self, fn) -> list[StageArtifact]:
        if self.config.jobs <= 1 or len(self.manifest.videos) <= 1:
            return [fn(source) for source in self.manifest.videos]
        with ThreadPoolExecutor(max_workers=self.config.jobs) as pool:
            return list(pool.map(fn, self.manifest.videos))

    def run(self, stages: list[str] | None = None) -> RunSummary:
        requested = list(stages) if stages else list(STAGES)
        for stage in requested:
            if stage not in STAGES:
                raise ValueError(f"unknown stage {stage!r}")
        ordered = [s for s in STAGES if s in requested]
        summary = RunSummary(topic_id=self.manifest.topic_id)
        for stage in ordered:
            if stage == "ingest":
                summary.artifacts.extend(self._fan_out(self._stage_ingest_video))
            elif stage == "localize":
                summary.artifacts.extend(self._fan_out(self._stage_localize_video))
            elif stage == "plan":
                summary.artifacts.extend(self._fan_out(self._stage_plan_video))
            elif stage == "generate":
                summary.artifacts.extend(self._fan_out(self._stage_generate_video))
            elif stage == "consolidate":
                summary.artifacts.append(self._stage_consolidate())
            elif stage == "evaluate":
                if self._gold_path() is None and stages is None:
                    # full run over a gold-less topic: scoring is impossible,
                    # everything upstream still completes
                    log.warning("evaluate skipped: no gold file configured")
                    continue
                artifact, report = self._stage_evaluate()
                summary.artifacts.append(artifact)
                summary.report = report
        return summary


def save_timeline_atomic(tl: Timeline, path: Path) -> None:
    atomic_write_json(path, tl.to_dict())


def _report_from_file(path: Path) -> EvalReport:
    data = json.loads(path.read_text(encoding="utf-8"))
    return EvalReport(
        info_p=data["info_p"],
        info_r=data["info_r"],
        info_f1=data["info_f1"],
        cite_p=data["cite_p"],
        cite_r=data["cite_r"],
        cite_f1=data["cite_f1"],
        avg_f1=data["avg_f1"],
        pred_entailed_by_gold=data["judgments"]["pred_entailed_by_gold"],
        gold_entailed_by_pred=data["judgments"]["gold_entailed_by_pred"],
        matched_pairs=data["matched_pairs"],
    )
