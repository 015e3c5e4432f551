"""Cross-video claim consolidation with citation-union propagation.

Two aggregation modes share one output contract:

* ``embed_sim``: embed claim texts, single-link cluster at cosine >= tau,
  verify each multi-member cluster pairwise against its most
  information-complete member under a strict same-proposition criterion,
  keep that member verbatim, and propagate the union of video citations.
* ``llm``: one structured chat merges all claims at once, followed by a
  mechanical repair pass that restores citation conservation (no invented
  citations, no silently dropped members).

Clustering is conservative on purpose: single-link components are simple
and order-independent, and the verification stage can undo false merges.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

import numpy as np

from .backends import Backend, ChatRequest, TASK_CONSOLIDATE, TASK_VERIFY, TextPart
from .claimgen import Claim
from .errors import PipelineError, StructuredOutputError

log = logging.getLogger(__name__)

DEFAULT_TAU = 0.85

MODE_EMBED_SIM = "embed_sim"
MODE_LLM = "llm"

VERIFY_SYSTEM = f"""{TASK_VERIFY}
Decide whether the two statements assert the identical proposition: the
same fact with the same quantities, entities, and outcome. Related facts,
differing numbers, or one statement carrying strictly more information
than the other all count as different propositions. Answer with exactly
one word: yes or no."""

CONSOLIDATE_SYSTEM = f"""{TASK_CONSOLIDATE}
You are shown single-sentence claims generated from different videos about
one event. Merge claims that assert the identical proposition, keeping the
most information-complete wording, and give each merged claim the union of
the video citations of everything merged into it. Do not merge claims that
merely relate to the same topic. Reply with JSON only:
[{{"claim": <text>, "citations": [<video_id>, ...], "members": [<claim_id>, ...]}}]"""

CONSOLIDATE_SCHEMA = '[{"claim": str, "citations": [str], "members": [str]}]'


@dataclass
class ClaimCluster:
    members: list[Claim]
    canonical: str
    citations: set[str] = field(default_factory=set)

    def __post_init__(self):
        if not self.members:
            raise ValueError("a cluster needs at least one member")
        self.members = sorted(self.members, key=lambda c: c.claim_id)
        self.citations = {c.video_id for c in self.members}
        if self.canonical not in {c.claim_id for c in self.members}:
            raise ValueError("canonical must be one of the members")

    def canonical_claim(self) -> Claim:
        return next(c for c in self.members if c.claim_id == self.canonical)


@dataclass
class ConsolidatedClaim:
    text: str
    citations: list[str]
    member_ids: list[str]

    def __post_init__(self):
        if not self.citations:
            raise ValueError("a consolidated claim needs at least one citation")
        self.citations = sorted(set(self.citations))
        self.member_ids = sorted(self.member_ids)

    def to_dict(self) -> dict:
        return {
            "claim": self.text,
            "citations": self.citations,
            "members": self.member_ids,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConsolidatedClaim":
        return cls(d["claim"], list(d["citations"]), list(d["members"]))


# ---------------------------------------------------------------------------
# Information score and canonical selection
# ---------------------------------------------------------------------------

_EDGE_PUNCT = re.compile(r"^\W+|\W+$")


def information_score(text: str) -> int:
    """Numeric tokens plus capitalized spans.

    A capitalized span is a maximal run of capitalized tokens; a run that is
    only the sentence-initial token does not count (orthography, not a
    proper noun signal).
    """
    tokens = [_EDGE_PUNCT.sub("", tok) for tok in text.split()]
    tokens = [t for t in tokens if t]
    numeric = sum(1 for t in tokens if any(ch.isdigit() for ch in t))
    spans = 0
    i = 0
    while i < len(tokens):
        if tokens[i][0].isupper():
            start = i
            while i < len(tokens) and tokens[i][0].isupper():
                i += 1
            if not (start == 0 and i - start == 1):
                spans += 1
        else:
            i += 1
    return numeric + spans


def select_canonical(members: list[Claim]) -> str:
    """Most information-complete member: highest score, then longest text,
    then smallest claim_id."""
    if not members:
        raise ValueError("select_canonical needs at least one member")
    best = min(
        members,
        key=lambda c: (-information_score(c.text), -len(c.text), c.claim_id),
    )
    return best.claim_id


# ---------------------------------------------------------------------------
# Clustering
# ---------------------------------------------------------------------------


def cluster_claims(
    claims: list[Claim], embeddings: np.ndarray, tau: float
) -> list[ClaimCluster]:
    """Connected components of the cosine >= tau graph over unit vectors.

    Deterministic: membership is order-independent and members sort by
    claim_id; clusters sort by their first member's claim_id.
    """
    if not 0 < tau <= 1:
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    if len(claims) != len(embeddings):
        raise ValueError("one embedding per claim required")
    n = len(claims)
    if n == 0:
        return []
    sims = np.asarray(embeddings) @ np.asarray(embeddings).T
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            # tiny slack so exact-duplicate vectors survive float round-off
            if sims[i, j] >= tau - 1e-12:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
    groups: dict[int, list[Claim]] = {}
    for i, claim in enumerate(claims):
        groups.setdefault(find(i), []).append(claim)
    clusters = [
        ClaimCluster(members=members, canonical=select_canonical(members))
        for members in groups.values()
    ]
    clusters.sort(key=lambda c: c.members[0].claim_id)
    return clusters


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def _same_proposition(backend: Backend, a: str, b: str) -> bool:
    req = ChatRequest(
        system_prompt=VERIFY_SYSTEM,
        parts=(TextPart(f'A: "{a}"\nB: "{b}"'),),
    )
    try:
        answer = backend.chat(req)
    except PipelineError as exc:
        log.warning("verification call failed (%s); conservative split", exc)
        return False
    return answer.strip().lower().startswith("yes")


def verify_cluster(cluster: ClaimCluster, backend: Backend) -> list[ClaimCluster]:
    """Judge every non-canonical member against the canonical candidate;
    members that do not state the same proposition split out as singletons.
    Size-1 clusters pass through without any backend call."""
    if len(cluster.members) == 1:
        return [cluster]
    canonical = cluster.canonical_claim()
    kept = [canonical]
    split: list[Claim] = []
    for member in cluster.members:
        if member.claim_id == canonical.claim_id:
            continue
        if _same_proposition(backend, canonical.text, member.text):
            kept.append(member)
        else:
            split.append(member)
    out = [ClaimCluster(members=kept, canonical=canonical.claim_id)]
    out.extend(ClaimCluster(members=[m], canonical=m.claim_id) for m in split)
    return out


# ---------------------------------------------------------------------------
# Consolidation drivers
# ---------------------------------------------------------------------------


@dataclass
class ConsolidationBackends:
    text_chat: Backend
    embed: Backend


def _clusters_to_output(clusters: list[ClaimCluster]) -> list[ConsolidatedClaim]:
    out = [
        ConsolidatedClaim(
            text=c.canonical_claim().text,
            citations=sorted(c.citations),
            member_ids=[m.claim_id for m in c.members],
        )
        for c in clusters
    ]
    out.sort(key=lambda c: c.member_ids[0])
    return out


def consolidate_embed_sim(
    claims: list[Claim], backends: ConsolidationBackends, tau: float = DEFAULT_TAU
) -> list[ConsolidatedClaim]:
    if not claims:
        return []
    embeddings = backends.embed.embed([c.text for c in claims])
    clusters = cluster_claims(claims, embeddings, tau)
    verified: list[ClaimCluster] = []
    for cluster in clusters:
        verified.extend(verify_cluster(cluster, backends.text_chat))
    return _clusters_to_output(verified)


def consolidate_llm(
    claims: list[Claim], backends: ConsolidationBackends, tau: float = DEFAULT_TAU
) -> list[ConsolidatedClaim]:
    """Single-shot generative merging, then a mechanical repair pass.

    The repair enforces citation conservation: output citations must be a
    subset of the input video ids, every merged member's video id must
    survive in its claim's citations, every input claim belongs to exactly
    one output (first mention wins, unmentioned claims become singletons).
    A double parse failure falls back to embed_sim mode.
    """
    if not claims:
        return []
    lines = "\n".join(
        f'- id={c.claim_id} video={c.video_id} claim="{c.text}"' for c in claims
    )
    req = ChatRequest(
        system_prompt=CONSOLIDATE_SYSTEM,
        parts=(TextPart(f"Claims:\n{lines}"),),
    )
    try:
        result = backends.text_chat.chat_structured(req, CONSOLIDATE_SCHEMA)
    except StructuredOutputError:
        log.warning("llm aggregation unparseable twice; falling back to embed_sim")
        return consolidate_embed_sim(claims, backends, tau)

    by_id = {c.claim_id: c for c in claims}
    valid_videos = {c.video_id for c in claims}
    assigned: set[str] = set()
    repaired: list[ConsolidatedClaim] = []
    items = result.value if isinstance(result.value, list) else []
    for item in items:
        if not isinstance(item, dict):
            continue
        member_ids = [
            m for m in item.get("members", []) or [] if m in by_id and m not in assigned
        ]
        if not member_ids:
            continue
        assigned.update(member_ids)
        member_videos = {by_id[m].video_id for m in member_ids}
        citations = {
            c for c in item.get("citations", []) or [] if c in valid_videos
        } | member_videos
        text = str(item.get("claim", "")) or by_id[member_ids[0]].text
        repaired.append(
            ConsolidatedClaim(
                text=text, citations=sorted(citations), member_ids=member_ids
            )
        )
    for claim in claims:
        if claim.claim_id not in assigned:
            repaired.append(
                ConsolidatedClaim(
                    text=claim.text,
                    citations=[claim.video_id],
                    member_ids=[claim.claim_id],
                )
            )
    repaired.sort(key=lambda c: c.member_ids[0])
    return repaired


def consolidate(
    claims: list[Claim],
    mode: str,
    backends: ConsolidationBackends,
    tau: float = DEFAULT_TAU,
) -> list[ConsolidatedClaim]:
    if mode == MODE_EMBED_SIM:
        return consolidate_embed_sim(claims, backends, tau)
    if mode == MODE_LLM:
        return consolidate_llm(claims, backends, tau)
    raise ValueError(f"unknown aggregation mode {mode!r}")
