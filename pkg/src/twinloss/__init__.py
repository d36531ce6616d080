"""Transmission estimation with twin photon beams.

Exact joint photon-number statistics of a two-mode squeezed vacuum under
loss and dark counts, classical and quantum Fisher information benchmarks,
maximum-likelihood fitting, and seeded simulation.
"""

from .fisher import (
    CrossoverCurve,
    FisherMatrix,
    LowLossValidityWarning,
    NumericError,
    classical_fim,
    crossover_curve,
    observed_fim,
    qfim_coherent,
    qfim_fock,
    qfim_lowloss_tmsv,
    qfim_tmsv,
    reparametrize_fim,
    sensitivity,
    total_variance,
)
from .gaussian import (
    CovarianceMatrix,
    QfimInverse,
    apply_loss,
    beamsplitter_symplectic,
    qfim_inverse_analytic,
    symplectic_form,
    three_param_qfim,
    tmsv_covariance,
)
from .mle import (
    Histogram,
    MleResult,
    covariance_estimate,
    fit,
    kl_objective,
    moment_init,
)
from .pnd import (
    PARAM_NAMES,
    JointPND,
    ParamSet,
    apply_dark_counts,
    default_cutoff,
    lossy_tmsv_pnd,
    lowloss_three_outcome,
    model_pnd,
)
from .sim import (
    BOOTSTRAP_MODES,
    TrialSet,
    bootstrap,
    group_trials,
    relative_error_map,
    rms_error,
    rng_stream,
    sample_shots,
    simulate_trials,
)

__version__ = "0.1.0"

__all__ = [
    "PARAM_NAMES",
    "BOOTSTRAP_MODES",
    "ParamSet",
    "JointPND",
    "lossy_tmsv_pnd",
    "apply_dark_counts",
    "model_pnd",
    "default_cutoff",
    "lowloss_three_outcome",
    "CovarianceMatrix",
    "QfimInverse",
    "symplectic_form",
    "tmsv_covariance",
    "beamsplitter_symplectic",
    "apply_loss",
    "qfim_inverse_analytic",
    "three_param_qfim",
    "FisherMatrix",
    "NumericError",
    "LowLossValidityWarning",
    "classical_fim",
    "observed_fim",
    "reparametrize_fim",
    "qfim_coherent",
    "qfim_fock",
    "qfim_lowloss_tmsv",
    "qfim_tmsv",
    "total_variance",
    "sensitivity",
    "CrossoverCurve",
    "crossover_curve",
    "Histogram",
    "MleResult",
    "kl_objective",
    "moment_init",
    "fit",
    "covariance_estimate",
    "rng_stream",
    "sample_shots",
    "TrialSet",
    "simulate_trials",
    "group_trials",
    "bootstrap",
    "relative_error_map",
    "rms_error",
    "__version__",
]
