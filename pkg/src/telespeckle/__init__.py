"""Telegraph-diffusion despeckling toolkit.

A fourth-order telegraph diffusion model for multiplicative (gamma)
speckle noise, two second-order baselines to benchmark it against, gamma
speckle synthesis, image-quality metrics, and a CLI benchmark harness.
"""

from .image import (INTENSITY_FLOOR, INTENSITY_MAX, ImageFormatError,
                    clamp_intensity, load_image, merge_channels, pad_mirror,
                    save_image, split_channels)
from .metrics import (MetricsReport, SsimConfig, mse, mssim, psnr,
                      relative_error, rgb_mssim, rgb_psnr, speckle_index,
                      ssim_map)
from .models import (DivergenceError, MODEL_NAMES, ModelParams, SolverState,
                     StoppingRule, cfl_bound, coeff_proposed, coeff_shan,
                     coeff_tdm, conservative_divergence, denoise, denoise_rgb,
                     fidelity_term, step_proposed, step_shan, step_tdm)
from .noise import NoiseSpec, apply_multiplicative, apply_speckle, speckle_field
from .stencils import (VectorField, axial_second_differences, gaussian_kernel,
                       gaussian_smooth, gradient_central, gradient_magnitude,
                       laplacian, laplacian_magnitude, max_abs)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
