"""Landscape probes and policy-gradient labs for studying entropy regularization."""

__version__ = "0.1.0"
