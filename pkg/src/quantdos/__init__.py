"""Quantized networked control under denial-of-service packet loss.

Simulates the full sampled-data loop (plant, finite-rate encoder/decoder
with resilient zooming, DoS-afflicted channel) and computes the constants
needed to certify closed-loop stability and convergence regions.
"""

__version__ = "0.1.0"
