"""Cooling a mechanical oscillator with band-limited noise: predictions and simulation."""
