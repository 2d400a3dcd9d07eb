"""Biomedical entity-mention pipeline for CORD-19-style corpora."""

__version__ = "0.1.0"
