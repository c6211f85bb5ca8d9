"""
XDiff imaging: grayscale IO, synthetic corpus and quality metrics
"""

from .imageio import GrayImage, load, save, synth_corpus
from .metrics import EvalRow, blur, psnr

__all__ = ['GrayImage', 'load', 'save', 'synth_corpus', 'EvalRow', 'blur', 'psnr']
