"""Hierarchical GraphRAG/LLM routing engine with a cost-aware trainer."""

from graphroute._core import *  # noqa: F401,F403
from graphroute._core import __doc__  # noqa: F401

__version__ = "0.1.0"
