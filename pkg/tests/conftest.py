import pytest

from vidclaims.backends import BackendProfile, MockBackend, MockRuleSet
from vidclaims.timeline import Detection, FrameRecord, OcrSpan, Timeline


@pytest.fixture
def text_backend():
    return MockBackend(BackendProfile(role="text_chat"))


@pytest.fixture
def vision_backend():
    return MockBackend(BackendProfile(role="vision_chat"))


@pytest.fixture
def embed_backend():
    return MockBackend(BackendProfile(role="embed"))


@pytest.fixture
def entail_backend():
    return MockBackend(BackendProfile(role="entail"))


def make_backend(role: str, rules: MockRuleSet | None = None) -> MockBackend:
    return MockBackend(BackendProfile(role=role), rules=rules)


def det(label: str, confidence: float = 0.9) -> Detection:
    return Detection(label, confidence, (0.0, 0.0, 10.0, 10.0))


def ocr(text: str, confidence: float = 0.9) -> OcrSpan:
    return OcrSpan(text, confidence)


def record(
    idx: int, t: float | None = None, detections=(), texts=()
) -> FrameRecord:
    return FrameRecord(
        frame_index=idx,
        t=float(idx) if t is None else t,
        detections=tuple(detections),
        ocr=tuple(ocr(s) if isinstance(s, str) else s for s in texts),
    )


def make_timeline(records, video_id="vid", fps=1.0, frame_count=None, asr=""):
    if frame_count is None:
        frame_count = (max((r.frame_index for r in records), default=0)) + 1
    return Timeline(
        video_id=video_id,
        fps=fps,
        frame_count=frame_count,
        duration_s=frame_count / fps,
        records=tuple(records),
        asr=asr,
    )
