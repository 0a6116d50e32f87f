"""Randomized-benchmarking sequence fidelity under correlated Gaussian noise."""
from .errors import (CapacityError, DomainError, FittingError, NumericalError,
                     RBIsingError, ValidationError)
from .noise import (NoiseDiagnostics, NoiseFamily, NoiseModel, PsdSpec, covariance_from_psd,
                    covariance_lags, diagnostics, make_custom, make_quasistatic,
                    make_uncorrelated, read_covariance_csv, write_covariance_csv)
from .partition import (Method, Order, PartitionResult, expansion_intermediates, p0_curve,
                        quadrature_oracle, z_bruteforce, z_determinant, z_montecarlo,
                        z_quasistatic_exact, z_uncorrelated_exact)
from .qudit import (QuditNoiseModel, WeightSystem, build_weights, p0_qudit_bruteforce,
                    p0_qudit_montecarlo)
from .twirl import TwirledMap, adjoint_scalar_d, haar_verify, r_matrix_qubit
from .fitting import (FitReport, FitScenario, fit_exponential, fit_linear_short,
                      generate_quasistatic_data, scan_nmax)

__version__ = '0.1.0'
