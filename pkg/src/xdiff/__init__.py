"""
XDiff - learned cross-diffusion filters for image denoising
Grids and steppers, stability checks, training and image tooling
"""

__version__ = "1.0.0"
