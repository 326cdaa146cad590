from .fourier import fft2_centered, ifft2_centered
from .conv import conv2d, conv2d_transpose
from .tape import Var, backward

__all__ = ["fft2_centered", "ifft2_centered", "conv2d", "conv2d_transpose", "Var", "backward"]
