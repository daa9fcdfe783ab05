"""Tempered stable random measures, quasi-norms, fields and samplers."""

__version__ = "0.1.0"

from .operators import OperatorSpec, is_in_Q, mat_exp, real_power, spectral_bounds
from .polar import (GenPolar, HomogeneousFn, admissibility_probe, e_norm,
                    phi_eval, polar_decompose, tau_or_zero)
from .tstable import (EnvelopeConstants, RosinskiMeasure, SpectralMeasure,
                      StableParams, envelope_constants, g_fun, lcf,
                      lower_gamma, radial_lcf, rosinski_of, upper_gamma_neg)
from .integrability import (Box, IntegrandFn, QuadratureConfig, big_H, h_fun,
                            j2, membership, pushforward_levy_mass, quasi_norm,
                            stable_integrand)
from .fields import (FddQuery, FieldSpec, check_lambda_limit, check_scaling,
                     check_stationary_increments, check_tangent, field_lcf,
                     field_integrand, harm_kernel_lift, kt_kernel, ma_kernel,
                     make_orbit_uniform)
from .simulate import (SampleBatch, SimConfig, empirical_cf, sample_field_path,
                       sample_integral, sample_tas)
