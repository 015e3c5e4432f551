"""Uniform clients for the four model roles the pipeline consumes.

Roles: ``text_chat`` (evidence localization, verification, aggregation),
``vision_chat`` (claim generation), ``embed`` (claim clustering), and
``entail`` (scoring judge). Two implementations share one surface:

* :class:`RemoteBackend` speaks the de-facto chat-completions / embeddings
  HTTP interface with bounded retries and a pre-flight token budget check.
* :class:`MockBackend` is a pure function of the request bytes. Canned
  substring rules take precedence; otherwise a set of reference behaviors
  keyed off the ``[task: ...]`` tag in the system prompt emulate each
  pipeline stage deterministically, so the full pipeline runs offline.

Every call can be appended to a JSONL transcript for auditing.
"""

from __future__ import annotations

import base64
import hashlib
import itertools
import json
import logging
import re
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .errors import (
    BackendError,
    BudgetExceededError,
    RemoteBackendError,
    StructuredOutputError,
    TransportError,
    TransportExhaustedError,
)
from .textnorm import content_tokens, token_set
from .timeline import OCR_JOINER

log = logging.getLogger(__name__)

ROLES = ("text_chat", "vision_chat", "embed", "entail")

# Task tags: first line of each stage's system prompt. The mock dispatches
# its reference behavior on these.
TASK_LOCALIZE = "[task: localize_evidence]"
TASK_SUMMARIZE = "[task: summarize_grounding]"
TASK_GENERATE = "[task: generate_claims]"
TASK_VERIFY = "[task: verify_same_proposition]"
TASK_CONSOLIDATE = "[task: consolidate_claims]"

# Flat-rate token accounting: 4 characters per text token, 256 visual
# tokens per 448x448 frame. Good enough for pre-flight budgeting without
# a tokenizer dependency.
CHARS_PER_TOKEN = 4
TOKENS_PER_FRAME = 256

MOCK_EMBED_DIM = 64


# ---------------------------------------------------------------------------
# Requests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class FramePart:
    """Reference to one decoded frame, tagged with its true position."""

    image_path: str
    frame_index: int
    timestamp: float


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    parts: tuple[TextPart | FramePart, ...]
    max_output_tokens: int = 1024
    temperature: float = 0.0
    seed: int | None = 0

    def __post_init__(self):
        if not self.parts:
            raise ValueError("a chat request needs at least one part")

    def text_view(self) -> str:
        """All text the model would see, frame parts as their position tags."""
        chunks = [self.system_prompt]
        for part in self.parts:
            if isinstance(part, TextPart):
                chunks.append(part.text)
            else:
                chunks.append(f"frame {part.frame_index} (t={part.timestamp:.1f}s)")
        return "\n".join(chunks)


def estimate_tokens(req: ChatRequest) -> int:
    total = -(-len(req.system_prompt) // CHARS_PER_TOKEN)
    for part in req.parts:
        if isinstance(part, TextPart):
            total += -(-len(part.text) // CHARS_PER_TOKEN)
        else:
            total += TOKENS_PER_FRAME
    return total


def request_fingerprint(req: ChatRequest) -> str:
    payload = {
        "system": req.system_prompt,
        "parts": [
            {"text": p.text}
            if isinstance(p, TextPart)
            else {
                "image": p.image_path,
                "frame_index": p.frame_index,
                "timestamp": p.timestamp,
            }
            for p in req.parts
        ],
        "max_output_tokens": req.max_output_tokens,
        "temperature": req.temperature,
        "seed": req.seed,
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class BackendProfile:
    """Where one model role lives and how hard we may lean on it."""

    role: str
    endpoint: str = "mock"
    model_name: str = "mock"
    context_limit_tokens: int = 32768
    request_timeout_s: float = 60.0
    max_retries: int = 3
    api_key: str | None = None
    max_in_flight: int = 4

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.context_limit_tokens <= 0:
            raise ValueError("context_limit_tokens must be positive")

    @property
    def is_mock(self) -> bool:
        return self.endpoint == "mock"


# ---------------------------------------------------------------------------
# Structured output helpers
# ---------------------------------------------------------------------------

_FENCE = re.compile(r"```(?:[a-zA-Z0-9_+-]*)\n(.*?)```", re.DOTALL)


def extract_first_json(text: str) -> Any:
    """First JSON value in ``text``: fenced blocks are tried first, then
    every ``{``/``[`` start position in order. Raises ValueError if none
    parses."""
    candidates = [m.group(1) for m in _FENCE.finditer(text)]
    candidates.append(text)
    decoder = json.JSONDecoder()
    for chunk in candidates:
        for match in re.finditer(r"[\[{]", chunk):
            try:
                value, _ = decoder.raw_decode(chunk, match.start())
                return value
            except json.JSONDecodeError:
                continue
    raise ValueError("no JSON value found in response")


@dataclass
class StructuredResult:
    value: Any
    repairs: int
    raw_responses: list[str]


@dataclass
class EntailmentVerdict:
    entailed: bool
    score: float


# ---------------------------------------------------------------------------
# Transcript log
# ---------------------------------------------------------------------------


class TranscriptLogger:
    """Append-only JSONL log of every backend call (thread-safe)."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def record(self, entry: dict) -> None:
        line = json.dumps(entry, sort_keys=True, ensure_ascii=False)
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")


# ---------------------------------------------------------------------------
# Shared backend skeleton
# ---------------------------------------------------------------------------


class Backend:
    """Common plumbing: budget pre-flight, in-flight cap, transcripts."""

    def __init__(self, profile: BackendProfile, transcript: TranscriptLogger | None = None):
        self.profile = profile
        self.transcript = transcript
        # Run-level decoding seed; overrides per-request seeds when set.
        self.seed_override: int | None = None
        self._sem = threading.BoundedSemaphore(profile.max_in_flight)
        self._req_ids = itertools.count(1)
        self._id_lock = threading.Lock()

    # -- implemented by subclasses -----------------------------------------
    def _chat_impl(self, req: ChatRequest) -> str:
        raise NotImplementedError

    def _embed_impl(self, texts: Sequence[str]) -> list[list[float]]:
        raise NotImplementedError

    def _entail_impl(self, premises: Sequence[str], hypothesis: str) -> EntailmentVerdict:
        raise NotImplementedError

    # -- public surface -----------------------------------------------------
    def chat(self, req: ChatRequest) -> str:
        if self.profile.role not in ("text_chat", "vision_chat"):
            raise ValueError(f"chat not supported for role {self.profile.role}")
        if self.profile.role != "vision_chat" and any(
            isinstance(p, FramePart) for p in req.parts
        ):
            raise ValueError("frame parts are only valid for the vision role")
        estimate = estimate_tokens(req)
        if estimate > self.profile.context_limit_tokens:
            raise BudgetExceededError(estimate, self.profile.context_limit_tokens)
        with self._sem:
            started = time.monotonic()
            status = "ok"
            try:
                return self._chat_impl(req)
            except Exception:
                status = "error"
                raise
            finally:
                self._log(
                    kind="chat",
                    request_hash=request_fingerprint(req),
                    token_estimate=estimate,
                    started=started,
                    status=status,
                )

    def chat_structured(self, req: ChatRequest, schema_description: str) -> StructuredResult:
        """Chat, then parse the first JSON value from the reply; on parse
        failure issue exactly one repair round-trip before giving up."""
        raw = self.chat(req)
        try:
            return StructuredResult(extract_first_json(raw), 0, [raw])
        except ValueError as exc:
            repair_req = replace(
                req,
                parts=req.parts
                + (
                    TextPart(
                        "Your previous reply could not be parsed "
                        f"({exc}). Reply with JSON only, matching this schema: "
                        f"{schema_description}"
                    ),
                ),
            )
            raw2 = self.chat(repair_req)
            try:
                return StructuredResult(extract_first_json(raw2), 1, [raw, raw2])
            except ValueError:
                raise StructuredOutputError([raw, raw2])

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """One L2-normalized vector per text, regardless of backend output."""
        if self.profile.role != "embed":
            raise ValueError(f"embed not supported for role {self.profile.role}")
        if not texts:
            raise ValueError("embed requires at least one text")
        with self._sem:
            started = time.monotonic()
            vectors = self._embed_impl(texts)
            self._log(
                kind="embed",
                request_hash=hashlib.sha256(
                    json.dumps(list(texts), ensure_ascii=False).encode()
                ).hexdigest(),
                token_estimate=sum(-(-len(t) // CHARS_PER_TOKEN) for t in texts),
                started=started,
                status="ok",
            )
        dims = {len(v) for v in vectors}
        if len(vectors) != len(texts) or len(dims) != 1:
            raise BackendError(
                f"embedding batch mismatch: {len(vectors)} vectors, dims {sorted(dims)}"
            )
        arr = np.asarray(vectors, dtype=np.float64)
        norms = np.linalg.norm(arr, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return arr / norms

    def entail(self, premises: Sequence[str], hypothesis: str) -> EntailmentVerdict:
        if self.profile.role != "entail":
            raise ValueError(f"entail not supported for role {self.profile.role}")
        if not hypothesis:
            raise ValueError("hypothesis must be non-empty")
        with self._sem:
            started = time.monotonic()
            verdict = self._entail_impl(premises, hypothesis)
            self._log(
                kind="entail",
                request_hash=hashlib.sha256(
                    json.dumps([list(premises), hypothesis], ensure_ascii=False).encode()
                ).hexdigest(),
                token_estimate=sum(
                    -(-len(t) // CHARS_PER_TOKEN) for t in (*premises, hypothesis)
                ),
                started=started,
                status="ok",
            )
        return verdict

    def _log(self, *, kind: str, request_hash: str, token_estimate: int, started: float, status: str) -> None:
        if self.transcript is None:
            return
        with self._id_lock:
            request_id = next(self._req_ids)
        self.transcript.record(
            {
                "request_id": request_id,
                "role": self.profile.role,
                "kind": kind,
                "request_hash": request_hash,
                "token_estimate": token_estimate,
                "latency_ms": round((time.monotonic() - started) * 1000, 3),
                "status": status,
            }
        )


# ---------------------------------------------------------------------------
# Deterministic mock
# ---------------------------------------------------------------------------


@dataclass
class MockRule:
    match_substring: str
    response: str


@dataclass
class MockRuleSet:
    """First-match canned responses plus a default; see MockBackend."""

    rules: list[MockRule] = field(default_factory=list)
    default_response: str = "OK"

    @classmethod
    def from_file(cls, path: str | Path) -> "MockRuleSet":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        rules = [
            MockRule(d["match_substring"], d["response"])
            for d in data
            if "match_substring" in d
        ]
        defaults = [d["default"] for d in data if "default" in d]
        return cls(rules=rules, default_response=defaults[0] if defaults else "OK")


_WINDOW_LINE = re.compile(r"^t=([0-9.]+)s \| objects: (.*) \| text: (.*)$")
_ANNOTATION_LINE = re.compile(r"^frame (\d+) \(t=([0-9.]+)s\): objects=(.*); text=(.*)$")
_VERIFY_LINE = re.compile(r'^([AB]): "(.*)"$')
_CLAIM_LINE = re.compile(r'^- id=(\S+) video=(\S+) claim="(.*)"$')
_LABEL_COUNT = re.compile(r"^(.*)×(\d+)$")


def _split_quoted_ocr(fieldtext: str) -> list[str]:
    if fieldtext == "-":
        return []
    stripped = fieldtext.strip()
    if stripped.startswith('"') and stripped.endswith('"'):
        stripped = stripped[1:-1]
    return [s.strip().strip('"') for s in stripped.split(OCR_JOINER.strip())]


class MockBackend(Backend):
    """Offline stand-in for every role; a pure function of request bytes.

    Response resolution order for chat roles:

    1. first canned rule whose ``match_substring`` occurs in the request text,
    2. the reference behavior for the ``[task: ...]`` tag in the system prompt,
    3. the rule set's default response.

    Reference behaviors (all derived only from the request text):

    * localize: select timeline lines whose object labels or OCR strings
      share a content token with the query/persona.
    * summarize: stitch the evidence lines into one short paragraph.
    * generate: one claim per distinct OCR string in the grounding hints.
    * verify: "yes" iff the two statements have equal content-token sets.
    * consolidate: group claims by equal content-token sets.

    Embeddings hash each content token into one of 64 buckets via the first
    four bytes of its SHA-256 digest; a text's raw vector is its bucket
    histogram (bucket 0 set to 1 when no tokens survive normalization).
    Entailment holds iff one side's content-token set contains the other's;
    the score is ``|p ∩ h| / max(|p|, |h|)`` maximized over premises.
    """

    def __init__(
        self,
        profile: BackendProfile,
        rules: MockRuleSet | None = None,
        transcript: TranscriptLogger | None = None,
    ):
        super().__init__(profile, transcript)
        self.rules = rules or MockRuleSet()
        self.calls = 0
        self.calls_by_kind: dict[str, int] = {"chat": 0, "embed": 0, "entail": 0}

    # -- chat ----------------------------------------------------------------
    def _chat_impl(self, req: ChatRequest) -> str:
        self.calls += 1
        self.calls_by_kind["chat"] += 1
        text = req.text_view()
        for rule in self.rules.rules:
            if rule.match_substring in text:
                return rule.response
        reference = self._reference_response(req, text)
        if reference is not None:
            return reference
        return self.rules.default_response

    def _reference_response(self, req: ChatRequest, text: str) -> str | None:
        tag = req.system_prompt.splitlines()[0] if req.system_prompt else ""
        if tag == TASK_LOCALIZE:
            return self._localize_response(text)
        if tag == TASK_SUMMARIZE:
            return self._summarize_response(text)
        if tag == TASK_GENERATE:
            return self._generate_response(text)
        if tag == TASK_VERIFY:
            return self._verify_response(text)
        if tag == TASK_CONSOLIDATE:
            return self._consolidate_response(text)
        return None

    def _query_tokens(self, text: str) -> set[str]:
        tokens: set[str] = set()
        for line in text.splitlines():
            if line.startswith("Query:") or line.startswith("Persona:"):
                tokens.update(content_tokens(line.split(":", 1)[1]))
        return tokens

    def _localize_response(self, text: str) -> str:
        wanted = self._query_tokens(text)
        selected = []
        for line in text.splitlines():
            m = _WINDOW_LINE.match(line.strip())
            if not m:
                continue
            t_s = float(m.group(1))
            labels: list[str] = []
            if m.group(2) != "-":
                for chunk in m.group(2).split(", "):
                    lc = _LABEL_COUNT.match(chunk)
                    if lc:
                        labels.append(lc.group(1))
            ocr = _split_quoted_ocr(m.group(3))
            hit_labels = [l for l in labels if set(content_tokens(l)) & wanted]
            hit_ocr = [s for s in ocr if set(content_tokens(s)) & wanted]
            if hit_labels or hit_ocr:
                selected.append(
                    {
                        "t": t_s,
                        "objects": hit_labels,
                        "ocr": hit_ocr,
                        "reason": "shares keywords with the query.",
                    }
                )
        return json.dumps({"selected": selected}, ensure_ascii=False)

    def _summarize_response(self, text: str) -> str:
        fragments = []
        for line in text.splitlines():
            m = _WINDOW_LINE.match(line.strip())
            if not m:
                continue
            ocr = _split_quoted_ocr(m.group(3))
            fragments.extend(ocr)
        if not fragments:
            return "The localized evidence is empty."
        body = "; ".join(fragments)
        return f"The localized evidence centers on on-screen text: {body}."

    def _generate_response(self, text: str) -> str:
        claims: list[dict] = []
        seen: dict[str, dict] = {}
        for line in text.splitlines():
            m = _ANNOTATION_LINE.match(line.strip())
            if not m:
                continue
            idx = int(m.group(1))
            for ocr in _split_quoted_ocr(m.group(4)):
                if ocr in seen:
                    if idx not in seen[ocr]["frames"]:
                        seen[ocr]["frames"].append(idx)
                    continue
                claim = {"claim": f'On-screen text read "{ocr}".', "frames": [idx]}
                seen[ocr] = claim
                claims.append(claim)
        return json.dumps(claims, ensure_ascii=False)

    def _verify_response(self, text: str) -> str:
        sides: dict[str, str] = {}
        for line in text.splitlines():
            m = _VERIFY_LINE.match(line.strip())
            if m:
                sides[m.group(1)] = m.group(2)
        if "A" in sides and "B" in sides and token_set(sides["A"]) == token_set(sides["B"]):
            return "yes"
        return "no"

    def _consolidate_response(self, text: str) -> str:
        groups: dict[frozenset, dict] = {}
        order: list[frozenset] = []
        for line in text.splitlines():
            m = _CLAIM_LINE.match(line.strip())
            if not m:
                continue
            claim_id, video_id, claim_text = m.groups()
            key = token_set(claim_text)
            if key not in groups:
                groups[key] = {"claim": claim_text, "citations": [], "members": []}
                order.append(key)
            entry = groups[key]
            if video_id not in entry["citations"]:
                entry["citations"].append(video_id)
            entry["members"].append(claim_id)
        merged = []
        for key in order:
            entry = groups[key]
            entry["citations"] = sorted(entry["citations"])
            entry["members"] = sorted(entry["members"])
            merged.append(entry)
        return json.dumps(merged, ensure_ascii=False)

    # -- embed ----------------------------------------------------------------
    @staticmethod
    def bucket_of(token: str) -> int:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:4], "big") % MOCK_EMBED_DIM

    def _embed_impl(self, texts: Sequence[str]) -> list[list[float]]:
        self.calls += 1
        self.calls_by_kind["embed"] += 1
        out = []
        for text in texts:
            vec = [0.0] * MOCK_EMBED_DIM
            tokens = content_tokens(text)
            if not tokens:
                vec[0] = 1.0
            for tok in tokens:
                vec[self.bucket_of(tok)] += 1.0
            out.append(vec)
        return out

    # -- entail ----------------------------------------------------------------
    def _entail_impl(self, premises: Sequence[str], hypothesis: str) -> EntailmentVerdict:
        self.calls += 1
        self.calls_by_kind["entail"] += 1
        hyp = token_set(hypothesis)
        best = 0.0
        entailed = False
        for premise in premises:
            prem = token_set(premise)
            if not hyp or not prem:
                if premise.strip() == hypothesis.strip():
                    return EntailmentVerdict(True, 1.0)
                continue
            overlap = len(prem & hyp) / max(len(prem), len(hyp))
            best = max(best, overlap)
            if hyp <= prem or prem <= hyp:
                entailed = True
        return EntailmentVerdict(entailed, best if premises else 0.0)


# ---------------------------------------------------------------------------
# Remote backend (chat-completions / embeddings wire protocol)
# ---------------------------------------------------------------------------

RETRYABLE_STATUSES = {429, 500, 502, 503, 504}


@dataclass
class TransportResult:
    status: int
    data: Any


def _requests_transport(url: str, payload: dict, headers: dict, timeout: float) -> TransportResult:
    import requests

    try:
        resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
    except requests.RequestException as exc:
        raise TransportError(str(exc))
    try:
        data = resp.json()
    except ValueError:
        data = resp.text
    return TransportResult(resp.status_code, data)


class RemoteBackend(Backend):
    """HTTP client for a chat-completions style endpoint.

    Transient failures (connection errors, timeouts, 429/5xx) are retried
    up to ``max_retries`` times with exponential backoff; a well-formed
    model response is never retried. Other HTTP errors surface immediately
    with their status payload.
    """

    def __init__(
        self,
        profile: BackendProfile,
        transcript: TranscriptLogger | None = None,
        transport: Callable[..., TransportResult] | None = None,
        sleep: Callable[[float], None] = time.sleep,
        backoff_base_s: float = 0.5,
    ):
        super().__init__(profile, transcript)
        self.transport = transport or _requests_transport
        self.sleep = sleep
        self.backoff_base_s = backoff_base_s

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.profile.api_key:
            headers["Authorization"] = f"Bearer {self.profile.api_key}"
        return headers

    def _post(self, path: str, payload: dict) -> Any:
        url = self.profile.endpoint.rstrip("/") + path
        last_error: Exception | None = None
        for attempt in range(self.profile.max_retries + 1):
            if attempt:
                self.sleep(self.backoff_base_s * (2 ** (attempt - 1)))
            try:
                result = self.transport(
                    url, payload, self._headers(), self.profile.request_timeout_s
                )
            except TransportError as exc:
                last_error = exc
                log.warning("transport failure (attempt %d): %s", attempt + 1, exc)
                continue
            if result.status in RETRYABLE_STATUSES:
                last_error = TransportError(f"status {result.status}")
                log.warning("retryable status %d (attempt %d)", result.status, attempt + 1)
                continue
            if result.status != 200:
                raise RemoteBackendError(result.status, json.dumps(result.data)[:500])
            return result.data
        raise TransportExhaustedError(
            f"gave up after {self.profile.max_retries + 1} attempts: {last_error}"
        )

    @staticmethod
    def _image_data_url(path: str) -> str:
        blob = Path(path).read_bytes()
        return "data:image/jpeg;base64," + base64.b64encode(blob).decode("ascii")

    def _chat_impl(self, req: ChatRequest) -> str:
        content: list[dict] = []
        for part in req.parts:
            if isinstance(part, TextPart):
                content.append({"type": "text", "text": part.text})
            else:
                content.append(
                    {
                        "type": "text",
                        "text": f"frame {part.frame_index} (t={part.timestamp:.1f}s):",
                    }
                )
                content.append(
                    {
                        "type": "image_url",
                        "image_url": {"url": self._image_data_url(part.image_path)},
                    }
                )
        payload = {
            "model": self.profile.model_name,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": content},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }
        seed = self.seed_override if self.seed_override is not None else req.seed
        if seed is not None:
            payload["seed"] = seed
        data = self._post("/chat/completions", payload)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise RemoteBackendError(200, f"malformed completion payload: {data}")

    def _embed_impl(self, texts: Sequence[str]) -> list[list[float]]:
        payload = {"model": self.profile.model_name, "input": list(texts)}
        data = self._post("/embeddings", payload)
        try:
            rows = sorted(data["data"], key=lambda d: d["index"])
            return [row["embedding"] for row in rows]
        except (KeyError, TypeError):
            raise RemoteBackendError(200, f"malformed embeddings payload: {data}")

    def _entail_impl(self, premises: Sequence[str], hypothesis: str) -> EntailmentVerdict:
        numbered = "\n".join(f"- {p}" for p in premises) or "(none)"
        req = ChatRequest(
            system_prompt=(
                "You are an entailment judge. Answer with JSON only: "
                '{"entailed": true|false, "score": <0..1>}'
            ),
            parts=(
                TextPart(f"Premises:\n{numbered}\n\nHypothesis: {hypothesis}"),
            ),
        )
        raw = self._chat_for_entail(req)
        try:
            value = extract_first_json(raw)
            return EntailmentVerdict(bool(value["entailed"]), float(value["score"]))
        except (ValueError, KeyError, TypeError):
            lowered = raw.strip().lower()
            return EntailmentVerdict(lowered.startswith("yes"), 1.0 if lowered.startswith("yes") else 0.0)

    def _chat_for_entail(self, req: ChatRequest) -> str:
        # entail profiles reuse the chat wire protocol under their own role
        return RemoteBackend._chat_impl(self, req)


def make_backend(
    profile: BackendProfile,
    rules: MockRuleSet | None = None,
    transcript: TranscriptLogger | None = None,
) -> Backend:
    if profile.is_mock:
        return MockBackend(profile, rules=rules, transcript=transcript)
    return RemoteBackend(profile, transcript=transcript)
