"""repass: prompt-biased second-pass enhancement for domain-specific ASR."""

from .lexicon import Lexicon
from .pipeline import EnhanceContext, Segment, SegmentResult, run_corpus
from .promptbuild import ContextPrompt, TokenBudget
from .textnorm import NormalizedText, normalize
from .wer import WerRecord, wer

__version__ = "0.1.0"

__all__ = [
    "ContextPrompt",
    "EnhanceContext",
    "Lexicon",
    "NormalizedText",
    "Segment",
    "SegmentResult",
    "TokenBudget",
    "WerRecord",
    "normalize",
    "run_corpus",
    "wer",
    "__version__",
]
