from .fft import dft_1d, fft, fft_2d
from .response import ResponseKernel, ResponseParams, build_response
from .convolve import SupportError, convolve
from .noise import NoiseModel, add_noise
from .digitize import digitize

__all__ = [
    "NoiseModel", "ResponseKernel", "ResponseParams", "SupportError",
    "add_noise", "build_response", "convolve", "dft_1d", "digitize", "fft", "fft_2d",
]
