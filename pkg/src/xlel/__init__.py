"""Multilingual event linking: corpus compilation and retrieval evaluation."""

__version__ = "0.1.0"
