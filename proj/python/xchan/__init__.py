"""Relevance and informativeness scores for text explanations."""

from ._xchan import *  # noqa: F401,F403
from ._xchan import Error, MissingArtifact, NumericError, TransportError  # noqa: F401

__version__ = "0.1.0"
