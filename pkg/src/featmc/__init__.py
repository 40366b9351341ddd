"""Feature-aware probabilistic model checking for guarded-command models."""

__version__ = "0.1.0"
