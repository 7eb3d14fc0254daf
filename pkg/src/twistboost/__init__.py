"""Twist-proper alpha-loss boosting with pseudo-inverse links."""

__version__ = "0.1.0"
