"""Hardening and catching test classification, JiTTest policy and evaluation."""

__version__ = "0.1.0"
