"""Fault-tolerant k-median / facility location solver toolkit."""

__version__ = "0.1.0"
