"""Born-approximation open-quantum-system toolkit.

Bath correlators of a bosonic environment, second-order memory kernels in
time and frequency, their quasi-particle (Markov) reduction to a Lindblad
generator, and solvers for the resulting master equations.
"""
__version__ = "0.1.0"

from .bath import (VACUUM, BathCorrelation, BathSpec, DiscreteModes, OhmicExponential,
                   bath_correlation_freq, bath_correlation_time, planck_occupation,
                   spectral_density)
from .core import (DensityReport, SimulationConfig, SystemSpec, TimeGrid, check_density,
                   devectorize, hermiticity_defect, trace_defect, vectorize)
from .dynamics import (ResonanceSet, Trajectory, evolve_markov, evolve_memory, free_transmission,
                       resonance_roots, steady_state, transmission_freq)
from .kernel import (FrequencyKernel, MemoryKernel, QPGenerator, born_kernel_freq,
                     born_kernel_time, dissipator_at, gksl_builder, kernel_continued,
                     qp_generator, sample_memory_kernel, shift_at, standard_lindblad_dissipator)
from .qubit import (QubitParams, qubit_analytic, qubit_lindblad_generator, qubit_params,
                    qubit_rates, qubit_system)
from .wick import (FockOracle, OperatorString, thermal_expectation_bruteforce, verify_wick,
                   wick_contraction_sum)
