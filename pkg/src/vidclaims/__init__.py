"""Grounding-guided multi-video claim generation pipeline.

Stages: build a text-searchable grounding timeline per video, localize
query-relevant evidence with a text-only chat backend, select a hybrid
uniform+keyframe frame set under a token budget, generate cited claims
through a vision backend, consolidate claims across videos, and score the
result with an Info/Cite precision-recall harness.
"""

__version__ = "0.1.0"
