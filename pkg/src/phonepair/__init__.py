"""Pairwise phone decoding from multichannel MEG-style recordings."""

__version__ = "0.1.0"
