"""Deterministic pretraining-data pipeline for code LLMs.

Stages: corpus ingestion, rule-based quality filtering, n-gram
decontamination, fill-in-the-middle sample construction (file and
repository level), domain mixture interleaving, instruction-data gating,
and long-context needle probe generation.
"""

__version__ = "0.1.0"
