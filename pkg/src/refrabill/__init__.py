"""Refraction billiards: Kepler inside, harmonic oscillator outside, Snell at the interface."""
