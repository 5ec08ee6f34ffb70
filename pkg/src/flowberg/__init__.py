"""Harmonic Bergman theory on trees with a root at infinity."""
