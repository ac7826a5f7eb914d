"""Decision-bounded reinforcement learning.

Environments whose episodes carry a budget of decisions (state reads),
agents that spend that budget at two timescales, and a harness for
running, measuring, and comparing them.
"""

from .core import (
    ActionSpec,
    DecisionBudget,
    EpisodeTrace,
    RngStream,
    Transition,
    budget_for,
    charge_decision,
    discounted_return,
    run_episode,
)

__version__ = "0.1.0"

__all__ = [
    "ActionSpec",
    "DecisionBudget",
    "EpisodeTrace",
    "RngStream",
    "Transition",
    "budget_for",
    "charge_decision",
    "discounted_return",
    "run_episode",
    "__version__",
]
