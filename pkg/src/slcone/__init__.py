"""Numerical toolkit for the special Lagrangian T^2-cone in C^3, its smoothings and bubbles.

Modules
-------
calib_core    flat Calabi-Yau linear algebra and special Lagrangian defects
varifold      discrete varifolds, energy and the monotonicity identity
hl_cone       the cone, its link, normal fields and graphs over it
spectral      link spectrum, indicial roots and harmonic expansion
local_models  L1, L2, L3, the moment-map fibration and its fibers
asymptotics   graphs over the cone, decay rates and recentering
bubble        bubble scale, extraction and classification
cli           command-line interface
"""

from .calib_core import CYStructure, CalibrationError, TangentPlane, calibration_defect, flat_structure, oriented_unit, psi_factor
from .varifold import DiscreteVarifold, energy, mass_in_ball, monotonicity_residual, rescale, translate
from .hl_cone import ConeGrid, NormalField, cone_point, graph_cyl, link_area, sample_cone
from .spectral import harmonic_expand, indicial_roots, link_spectrum, stability_check
from .local_models import ModelId, classify_fiber, fibration_F, sample_fiber, sample_model, solve_phi
from .asymptotics import decay_report, graph_over_cone, recenter
from .bubble import ClassificationError, ModelFit, bubble_center, bubble_scale, classify_bubble, extract_bubble

__version__ = "0.1.0"
