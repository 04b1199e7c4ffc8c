"""Geometry of random Gaussian ReLU layers: kernels, Monte Carlo checks, analytics."""
from .kernels import (AnglePair, angle_between, angle_map, arccos_moment, dist_kernel,
                      expected_cosine, expected_sq_distance, hamming_expectation,
                      higher_moments, predict_distortion)
from .models import (ModelSet, covering_bound, estimate_mean_width, greedy_epsilon_net,
                     mean_width_bound, project, sample_points)
from .netsim import Activation, Layer, RandomNetwork, binary_hash, forward, make_layer
from .recover import back_project, recovery_error_curve, refine_projected_gradient
from .report import (DistortionHistogram, angle_bin_propagation, boundary_pair_stats,
                     load_cloud, save_cloud)
from .verify import TheoremReport, VerificationConfig

__version__ = "0.1.0"
