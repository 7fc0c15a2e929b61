"""Rule-based contrastive causal discovery from two regimes with unknown soft interventions."""

__version__ = "0.1.0"
