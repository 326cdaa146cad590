"""rimrecon: recurrent inference machines for accelerated MRI reconstruction.

Learned iterative reconstruction from undersampled multi-coil k-space, with a
compressed-sensing baseline, image-quality metrics, synthetic phantoms, and an
experiment harness (timing benchmarks, generalization grids, lesion studies).
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ContractError,
    InfeasibleMaskError,
    NumericalFailure,
    ParseError,
    RimError,
    ShapeError,
)
from .mri import CoilSet, NoiseSpec, adjoint_op, forward_op, synth_sensitivities
from .rim import RimConfig, RimModel, load_checkpoint, param_count, reconstruct, save_checkpoint
from .sampling import SamplingMask, gaussian_mask, load_mask, save_mask

__all__ = [
    "__version__",
    "RimError", "ShapeError", "ContractError", "InfeasibleMaskError",
    "ParseError", "ConfigError", "NumericalFailure",
    "CoilSet", "NoiseSpec", "forward_op", "adjoint_op", "synth_sensitivities",
    "RimConfig", "RimModel", "param_count", "reconstruct",
    "save_checkpoint", "load_checkpoint",
    "SamplingMask", "gaussian_mask", "save_mask", "load_mask",
]
