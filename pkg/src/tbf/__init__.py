"""Time-bin microwave photon generation and quadrature tomography."""

__version__ = "0.1.0"
