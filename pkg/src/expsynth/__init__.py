"""Numerical toolkit for exponential systems built from a generating function with
lacunary spectral gaps: model evaluation, the complementary-system construction,
kernel certificates and defect measurements."""

__version__ = "0.1.0"
