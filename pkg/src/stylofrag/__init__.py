"""Stylometric authorship attribution for small git-blame source fragments."""

__version__ = "0.1.0"
