"""Location dependent Dirichlet process mixtures of Gaussians.

Variational inference with Gaussian-process usage fields over observation
locations, applied to image segmentation.
"""
from ._kernels import BACKEND
from .kernel import (DenseKernel, KernelParams, NumericalFailure, NystromFactor,
                     build_nystrom, grid_landmarks, kernel_apply, quad_form_inv, rbf)
from .vi import (ElboTrace, GammaPosterior, LddpConfig, LddpState, fit,
                 initial_state)
from .pipeline import Dataset, RunReport, kmeans, load_image, load_table, run_lddp
from .evaluation import rand_index, synth_spatial_gmm, usage_histogram

__version__ = "0.1.0"
