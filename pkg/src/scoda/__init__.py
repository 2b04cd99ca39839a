"""Dual-speed teacher-student feature adaptation.

A small, fully deterministic implementation of source-free domain
adaptation: a slow EMA teacher distills into a fast SGD student through
a composite cosine + space-similarity loss, starting from a
self-supervised initialization, with an evaluation suite for adaptation
gain and source forgetting.
"""

__version__ = "0.1.0"
