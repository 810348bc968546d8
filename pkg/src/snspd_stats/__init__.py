"""Click-number statistics of single-photon detectors with dead time,
smooth efficiency recovery and inter-window memory, validated against a
Monte-Carlo pulse-train simulator."""

from .continuous import (CwConfig, MemoryKernels, carryover_matrix,
                         click_distribution_cw,
                         coherent_click_probability_after_gap,
                         last_click_density, last_click_density_fock,
                         memory_kernels, memory_probability_q, resolve_delta)
from .detector import DetectorConfig, EfficiencyProfile, ModeProfile
from .errors import (ConsistencyError, DomainError, EstimationError,
                     IntegrationError)
from .independent import (click_distribution_independent,
                          coherent_click_probability, cond_prob_matrix,
                          deadtime_closed_form, regular_irregular_split,
                          same_count_probability, squeezed_distribution_direct)
from .montecarlo import (SimResult, SimSpec, empirical_distribution,
                         sample_window, simulate_interpulse_gaps)
from .quadrature import OrderedTimes, QuadratureSpec, integrate_ordered
from .reconstruct import (ReconstructionSpec, read_gaps,
                          reconstruct_details, reconstruct_efficiency,
                          write_gaps_binary)
from .results import ClickDistribution, ConditionalMatrix
from .states import (PhotonNumberDist, StateSpec, photon_number_dist,
                     squeezed_click_density)
from .weights import (PulseWeights, no_count_exposure, pulse_weights,
                      pulse_weights_after_gap)

__version__ = "0.1.0"

__all__ = [
    "CwConfig", "MemoryKernels", "carryover_matrix", "click_distribution_cw",
    "coherent_click_probability_after_gap", "last_click_density",
    "last_click_density_fock", "memory_kernels", "memory_probability_q",
    "resolve_delta", "DetectorConfig", "EfficiencyProfile", "ModeProfile",
    "ConsistencyError", "DomainError", "EstimationError", "IntegrationError",
    "click_distribution_independent", "coherent_click_probability",
    "cond_prob_matrix", "deadtime_closed_form", "regular_irregular_split",
    "same_count_probability", "squeezed_distribution_direct", "SimResult",
    "SimSpec", "empirical_distribution", "sample_window",
    "simulate_interpulse_gaps", "OrderedTimes", "QuadratureSpec",
    "integrate_ordered", "ReconstructionSpec", "read_gaps",
    "reconstruct_details", "reconstruct_efficiency", "write_gaps_binary",
    "ClickDistribution", "ConditionalMatrix", "PhotonNumberDist", "StateSpec",
    "photon_number_dist", "squeezed_click_density", "PulseWeights",
    "no_count_exposure", "pulse_weights", "pulse_weights_after_gap",
    "__version__",
]
