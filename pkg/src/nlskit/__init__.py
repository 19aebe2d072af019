"""Toolkit for utterance-level analysis of parent-child session recordings.

Provides a data model for annotated sessions, synthetic corpus generation,
per-session statistics with one-way ANOVA, an embedding-based classifier
trained with exact gradients, session-level cross-validation, and exact
t-SNE projection of pooled representations.
"""

__version__ = "0.1.0"
