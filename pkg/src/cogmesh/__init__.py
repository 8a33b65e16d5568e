"""Conjecture-based multi-agent Q-learning for cognitive mesh power allocation."""
__version__ = "0.1.0"
