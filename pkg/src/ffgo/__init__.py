"""ffgo: first-frame composite curation, adapter prep, generation, evaluation."""

from .manifest import TRANSITION_PHRASE, has_transition_prefix, prefix_transition

__version__ = "0.1.0"

__all__ = [
    "TRANSITION_PHRASE",
    "has_transition_prefix",
    "prefix_transition",
    "__version__",
]
