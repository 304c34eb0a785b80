"""Processors package: stability analysis, alpha_1 search, certificates and exponent fits."""
