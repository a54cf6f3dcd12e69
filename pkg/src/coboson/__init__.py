"""Composite-boson normalization factors, bounds and sampling."""
