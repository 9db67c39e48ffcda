"""High-probability bounds on attack success against differentially private mechanisms."""
from .attacks import AttackConfig, NumericFailure, mai_gradient_attack, prior_only_attack, rr_bayes_attack
from .bounds import (BoundResult, PrivacyParams, advantage, baseline_narcissus, baseline_rero, beta,
                     bits_leaked, bound_approx_mc, bound_approx_onerun, bound_pure, eps_protect, lp_alpha)
from .dist import (InvalidInputError, binomial_ci, dominance_report, pb_pmf, pb_quantile, pb_survival,
                   pb_tail)
from .game import (AttackTranscript, GameConfig, GameError, MarginalSpec, RRSpec, estimate_vub, rescore_transcript,
                   replay_experiment, run_game)
from .kernels import BACKEND
from .mechanisms import (CalibrationError, MarginalWorkload, calibrate_sigma, composition_count, gdp_delta,
                         marginal_query, marginal_vector, noisy_marginals, rr_mechanism)
from .metrics import LossMetric, eval_loss, metric_total
from .priors import (Categorical, ConditionalPriorTable, ProductPrior, bayes_optimal_prior_guess, condition,
                     prior_success, uniform_prior, zipf_prior)

__version__ = "0.1.0"
