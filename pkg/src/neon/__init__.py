"""Timestamped entity-interaction graphs for temporal question answering.

The pipeline runs ingest (chunk and deduplicate news articles), extract
(LLM-built interaction graph), index (dense timestamped datastore), query
(reformulate, retrieve, answer) and eval (LLM-as-judge ratings). Each stage
is importable on its own; :mod:`neon.cli` wires them together.
"""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
