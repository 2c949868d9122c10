"""Numerical laboratory for the stability of steady MHD shear layers."""
