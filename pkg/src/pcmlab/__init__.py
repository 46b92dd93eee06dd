"""Desk-scale numerical laboratory for the large-N limit of the lattice O(N)
principal chiral model: Haar/Weingarten moments, concentration of the
log-determinant functional, the lattice gap equation, a contour-rotation
check, and a direct Metropolis cross-check of the free-massive prediction.
"""

from .errors import NumericalError, PcmlabError, ValidationError
from .lattice import (CONTINUUM, FINITE_DIFFERENCE, Dispersion, LatticeSpec,
                      MomentumGrid, build_lattice, momentum_grid, propagator,
                      propagator_matrix, radial_sum_check)
from .orthogonal import (MomentEstimate, SpectrumEnsemble,
                         enumerate_pair_partitions, haar_frame, leading_moment,
                         mc_moment, sample_haar, spectrum_ensemble,
                         two_point_spectrum)
from .spectral import (KOperator, LipschitzCheck, MultiplierField, assemble_K,
                       averaged_j_prediction, j_functional, lipschitz_ratio,
                       random_source, sample_multiplier_field,
                       single_site_source, t0_closed_form, t_of_O,
                       variance_prediction)
from .concentration import (EmpiricalMoments, GaussianityReport, MeanCheck,
                            ScalingFit, gaussianity_report, mean_vs_t0,
                            sample_t_distribution, t_samples,
                            variance_scaling_fit)
from .gap import (GapSolution, StationarityState, consistent_state,
                  dropped_term_ratio, free_partition_prediction, solve_gap,
                  stationarity_residuals, t0_prime)
from .chiral_mc import (CorrelatorEstimate, EffectiveMassResult, FieldConfig,
                        McParams, SimulationRun, action, effective_mass,
                        measure_correlator, metropolis_sweep, run_simulation)
from .contour import CATALOG, ContourTestCase, RotationCheck, case_by_name, verify_rotation

__version__ = "0.1.0"
