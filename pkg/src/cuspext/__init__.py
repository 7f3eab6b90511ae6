"""Planar homeomorphisms onto cusp domains and the integrability of their distortion.

The map E squares the model domain M_s, sends the complementary cusp cells by
explicit dyadic cell maps (simple or squeezed), and is extended to the plane by
an explicit collar and far field. The analysis layer integrates distortion
quantities over the dyadic cells and reads off critical exponents.
"""
from ._kernels import USE_NUMBA
from .analysis import (CellQuadrature, DistortionSample, DyadicSeriesReport, ThresholdSet,
                       cell_integral, combined_M, critical_exponent_scan, dyadic_series, fit_slope,
                       jacobian_fd, predicted_slope, q_combined, r_transfer, thresholds)
from .cusp import CellMap, CellScale, DyadicCells, E1_eval, F_t, F_t_inv, cell, eta, eta_inverse, eta_prime
from .extension import (CardioidMap, Extension, E2_eval, E_eval, RegionLabel, cardioid_f0,
                        grid_injectivity, squeezed_E)
from .geometry import (BoundaryCurve, CuspDegree, Where, boundary_curve, cardioid_constants, cardioid_d,
                       cardioid_defining, closing_arc, ell1_point, ellm_point, in_Delta_s, in_Ms)
from .linalg2 import JacobianMatrix, distortion
from .profiles import CardioidProfile, PowerProfile
from .scenario import Scenario
from .squeeze import SqueezeParams, decompose, delta, squeezed_E1, squeezed_F_t, squeezed_f4_inv
from .testfns import (annulus_energy, annulus_testfn_v, oscillation_check, strip_energy,
                      strip_testfn_v)

__all__ = [n for n in dir() if not n.startswith("_")]
