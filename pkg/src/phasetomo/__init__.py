"""Phase-space tomography of trapped atomic clouds.

Classical and quantum simulation of a one-dimensional oscillator with a
corrugated potential, projection imaging, and tomographic reconstruction of
the phase-space (or Wigner) distribution.
"""

__version__ = "0.1.0"
