"""Homogeneous neural networks and dilation-symmetry identification.

Core pieces: linear dilations with their canonical homogeneous norms
(``homsym.dilation``), shallow and homogeneous random-feature networks
(``homsym.networks``), and estimators for the homogeneity degree and the
dilation generator of a learned model (``homsym.symmetry``).
"""

from .dilation import (Dilation, DomainError, NormBounds, canonical_norm, check_monotonicity, dilate,
                       is_anti_hurwitz, norm_bounds, norm_gradient, project)
from .networks import (Activation, HomNet, LabeledDataset, RankDeficiencyWarning, ShallowNet, eval_hom,
                       eval_shallow, homogenize, random_features, sup_error, train_hom, train_output_layer)
from .symmetry import (DegreeEstimate, GeneratorEstimate, KDeltaSampler, SamplerExhausted, SymmetryReport,
                       corner_residual, delta_term, estimate_degree, euler_derivative_residual,
                       homogeneity_residual, identify_generator, integral_residual)

__version__ = "0.1.0"
