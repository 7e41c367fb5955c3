"""Off-policy evaluation estimators and a seeded robustness benchmark.

The library estimates the value of counterfactual policies from logged
bandit feedback and, more importantly, measures how robust each estimator is
to hyperparameter and evaluation-policy changes: it sweeps seeded
configurations, collects each estimator's squared errors, and summarizes
their distribution (CDF, AU-CDF, CVaR, mean, std).
"""

from .errors import ConfigError, DataError, EstimatorError
from .estimators import (
    EstimatorHyperparams,
    cross_fit_estimate,
    estimate,
    estimate_dm,
    estimate_dr,
    estimate_dr_os,
    estimate_dr_ps,
    estimate_ipw,
    estimate_ipw_ps,
    estimate_sndr,
    estimate_snipw,
    estimate_switch_dr,
    shrunk_weights,
)
from .feedback import (
    ActionDistribution,
    ImportanceWeights,
    LoggedBanditFeedback,
    compute_importance_weights,
    validate_feedback,
)
from .metrics import au_cdf, cvar, empirical_cdf, mean_score, std_score
from .models import (
    DEFAULT_MODEL_SPACES,
    HyperparamRange,
    ModelSpec,
    cross_fit_reward_matrices,
    fit_behavior_policy,
    fit_reward_model,
    predict_reward_matrix,
    random_search,
)
from .protocol import (
    BehaviorModelConfig,
    EstimatorSpace,
    EvaluationPolicy,
    GroundTruthSource,
    LoggerDataset,
    ResultSet,
    RunConfig,
    SeRecord,
    run_with_ground_truth,
    run_with_multiple_loggers,
)
from .tuning import (
    DEFAULT_CANDIDATE_GRID,
    TuningConfig,
    direct_bias_ub,
    sample_variance,
    select_hyperparameter,
)

__version__ = "0.1.0"
