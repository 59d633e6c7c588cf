"""Learning and sampling regularized optimal transport couplings.

Dual potentials parameterized by small networks are trained by stochastic
dual ascent; conditional samples from the learned coupling are drawn with
(annealed) Langevin dynamics whose score combines a target score oracle with
the compatibility gradient of the potentials.  Exact discrete and Gaussian
oracles validate every piece.
"""

from ._backend import NUMBA_ENABLED
from .fdiv import (KINDS, Compatibility, DomainError, FDivKind, RegParams,
                   compatibility, conjugate_triple, dual_penalty,
                   h_regularizer, make_compat)
from .dual import (DualPair, TrainConfig, TrainReport, dual_objective_batch,
                   new_dual_pair, train_dual, violation)
from .discrete import (DualVectors, EmpiricalMeasure, dual_ascent_generic,
                       logconcavity_check, plan_from_duals, primal_objective,
                       sinkhorn_kl, softmin_potential, stability_check)
from .gaussian import (GaussianMeasure, JointGaussianPlan, ProblemInstance,
                       bw2_squared, bw_uvp, conditional_of_joint,
                       entropic_plan, gaussian_score, random_instance,
                       score_oracle)
from .linalg import (empirical_covariance, haar_orthogonal, sample_gaussian,
                     sqrtm_psd, substream, sym_eig)
from .sampler import (NoiseSchedule, SamplerConfig, conditional_score,
                      denoise_final, geometric_schedule, langevin_batch,
                      langevin_chain, sample_scones, sample_scones_batch)
from .score_est import DsmConfig, ScoreNet, dsm_loss_grad, swiss_roll_data, train_score
from .baselines import BaryConfig, BaryMap, bary_map_eval, train_barycentric

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED", "KINDS", "Compatibility", "DomainError", "FDivKind",
    "RegParams", "compatibility", "conjugate_triple", "dual_penalty",
    "h_regularizer", "make_compat", "DualPair", "TrainConfig", "TrainReport",
    "dual_objective_batch", "new_dual_pair", "train_dual", "violation",
    "DualVectors", "EmpiricalMeasure", "dual_ascent_generic",
    "logconcavity_check", "plan_from_duals", "primal_objective", "sinkhorn_kl",
    "softmin_potential", "stability_check", "GaussianMeasure",
    "JointGaussianPlan", "ProblemInstance", "bw2_squared", "bw_uvp",
    "conditional_of_joint", "entropic_plan", "gaussian_score",
    "random_instance", "score_oracle", "empirical_covariance",
    "haar_orthogonal", "sample_gaussian", "sqrtm_psd", "substream", "sym_eig",
    "NoiseSchedule", "SamplerConfig", "conditional_score", "denoise_final",
    "geometric_schedule", "langevin_batch", "langevin_chain", "sample_scones",
    "sample_scones_batch", "DsmConfig", "ScoreNet", "dsm_loss_grad",
    "swiss_roll_data", "train_score", "BaryConfig", "BaryMap",
    "bary_map_eval", "train_barycentric",
]
