"""Vacuum photon modes and energy-momentum spectra in Bianchi-I backgrounds."""

from .emt import (EmtGrid, ModeCache, SpectralStressTensor, StressTensorSample,
                  build_mode_cache, conservation_residual, integrate_emt,
                  polarization_overlap, spectral_emt, xy_terms)
from .errors import (ConfigError, DomainError, ModelError, NumericalFailure,
                     UsageError)
from .geometry import (GeometryCoefficients, IdentityReport, ModeDirection,
                       check_identities, geometry_coefficients, geometry_rates,
                       mirror_direction, reconstruct_cartesian)
from .metric import (IsotropicPowerLaw, Kasner, MetricState, ScaleFactorModel,
                     Tabulated, constant_anisotropic, evaluate_metric,
                     kasner_constraint_check, load_tabulated_csv)
from .modes import (BogoliubovPair, BogoliubovSolution, ModeSolution,
                    PolarizationState, evolve_bogoliubov, evolve_second_order,
                    evolve_suv, reality_convention_check, suv_derivative,
                    suv_from_bogoliubov, vacuum_initial_data)
from .oracles import (OracleReport, conformal_time, cross_check_evolutions,
                      finite_difference_check, isotropic_solution,
                      reference_integrate)

__version__ = "0.1.0"
