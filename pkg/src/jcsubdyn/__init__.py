"""Sub-dynamics of a two-level atom exchanging quanta with a single boson mode.

The composite system evolves unitarily; each subsystem does not.  This
package provides the closed-form propagator, Kraus channels, and dressed
(quasi-particle-like) Heisenberg operators of the exchange model, plus a
brute-force bipartite engine that independently verifies every closed form,
analysis diagnostics (collapse/revival detection, conservation audits), and
a scenario CLI.
"""

__version__ = "0.1.0"

from ._kernels import active_lane
from .analysis import (
    CollapseRevivalFeatures,
    ConservationAudit,
    QplMetrics,
    Scenario,
    SigmaZSpectrum,
    TimeSeries,
    collapse_revival_features,
    conservation_audit,
    observable_series,
    qpl_dominance,
    sigma_z_spectrum,
)
from .hilbert import (
    CoherentState,
    FockSpace,
    auto_n_max,
    coherent_state,
    ladder_ops,
    partial_trace,
    pauli_ops,
    poisson_weights,
    quadrature_ops,
    tensor_product,
)
from .jcm import (
    CorrelationFactors,
    JcmParams,
    PhotonDressing,
    SpinDressing,
    closed_kraus,
    closed_marginal,
    closed_propagator,
    constant_of_motion,
    correlation_factors,
    hamiltonian,
    photon_dressing,
    quasi_annihilation,
    quasi_number,
    quasi_sigma_minus,
    quasi_sigma_plus,
    quasi_sigma_z,
)
from .subdyn import (
    BipartiteHamiltonian,
    CrossCheckError,
    EffectiveOperator,
    KrausSet,
    SpectralPropagator,
    algebra_deviation,
    assemble_hamiltonian,
    effective_operator,
    evolve_and_reduce,
    kraus_extract,
)

__all__ = [name for name in dir() if not name.startswith("_")]
