"""Query modeling for query focused summarization via masked proxy queries."""

__version__ = "0.1.0"
