"""Coverage-aware dense retrieval toolkit.

Bi-encoder scoring, coverage contrastive / self-distillation objectives for a
small trainable encoder, coverage-signal dataset building, diversification and
fusion baselines, and nugget-level evaluation.
"""

__version__ = "0.1.0"
