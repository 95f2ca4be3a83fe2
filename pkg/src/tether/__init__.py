"""Tether: a local-first focus assistant daemon for developers."""

__version__ = "0.1.0"
