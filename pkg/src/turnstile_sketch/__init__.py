"""
Turnstile Sketch - linear sketches for lp heavy hitters and lp row sampling
over turnstile matrix streams.
"""

__version__ = "0.1.0"
