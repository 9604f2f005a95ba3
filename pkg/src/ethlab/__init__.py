"""Numerical laboratory for chaotic eigenstate codes.

Builds or synthesizes chaotic spectra, extracts the statistics of operator
matrix elements in the energy eigenbasis, evaluates Knill-Laflamme residuals
of eigenstate codes, and checks the inequalities tying the code error to
scrambling rates, fluctuations and the fluctuation-dissipation relation.
"""

from .aqec import (BoundReport, CodeSpec, KlResidualReport, check_bounds,
                   code_error_bound, kl_residuals, lyapunov_lower_bound,
                   resolve_lambda, select_code_states)
from .dynamics import (CorrelatorSeries, FdtDeviation, FluctuationReport,
                       LyapunovFit, PureStateCoefficients, SpectralDensity,
                       ThermalState, dissipation_time, dynamical_fluctuation,
                       fdt_check, fit_lyapunov, fluctuation_bounds,
                       gaussian_wavepacket, otoc, spectral_densities,
                       spectral_peaks, static_fluct_integral,
                       static_fluctuation, symmetric_and_response,
                       thermal_state, two_point)
from .errors import (CostGuardError, DivergentIntegralError, EmptyWindowError,
                     EthLabError, FitRejectedError, NumericError, SizeError,
                     ValidationError)
from .extract import (BinningSpec, DiagonalProfile, EnvelopeModel,
                      GaussianityStats, diagonal_profile, envelope_estimate,
                      gaussianity_stats)
from .models import (LocalObservableSpec, SpinChainParams,
                     build_local_observable, build_mixed_field_ising,
                     reflection_parities, restrict_to_reflection_sector,
                     to_eigenbasis)
from .spectral import (EnergySpectrum, EntropyModel, MicrocanonicalWindow,
                       OperatorEigenbasis, eigendecompose, entropy_model,
                       mean_level_spacing, microcanonical_window,
                       spacing_ratio_mean)
from .synth import (EnvelopeSpec, SynthEthOperator, SynthSpectrumParams,
                    gue_matrix, synth_eth_operator, synth_spectrum)

__version__ = "0.1.0"
