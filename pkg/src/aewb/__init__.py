"""Autoencoder workbench: a small reverse-mode core, autoencoder variants and case-study pipelines."""

__version__ = "0.1.0"
