"""Hidden Markov model learning from sequences with deleted observations."""

from .analytic import (
    composed_mismatch,
    estimate_keep_prob,
    invert_omit_transform,
    naive_limit_markov_omission,
    omit_transform,
    omit_transform_truncated,
    semi_analytic_reconstruct,
)
from .baselines import (
    count_pair_fit,
    fit_known_w,
    fit_naive,
    perturb_dataset,
)
from .gaps import build_gap_tables, fit_gaps, gap_distribution
from .gibbs import FitResult, GibbsConfig, Priors, joint_loglik
from .inference import LabelResult, label_sequence, viterbi_with_placement
from .matching import fit_matching
from .model import (
    CategoricalEmissions,
    GaussianEmissions,
    HmmModel,
    aligned_l1,
    align_states,
    l1_transition_distance,
    load_model,
    permute_states,
    sample_trajectories,
    save_model,
    stationary_distribution,
)
from .omission import (
    ConstantOmission,
    MarkovOmission,
    OmittedSentence,
    SentenceNormalOmission,
    StateOmission,
    apply_omission,
    generate_dataset,
    load_dataset,
    make_dataset,
    save_dataset,
    strip_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "CategoricalEmissions",
    "ConstantOmission",
    "FitResult",
    "GaussianEmissions",
    "GibbsConfig",
    "HmmModel",
    "LabelResult",
    "MarkovOmission",
    "OmittedSentence",
    "Priors",
    "SentenceNormalOmission",
    "StateOmission",
    "align_states",
    "aligned_l1",
    "apply_omission",
    "build_gap_tables",
    "composed_mismatch",
    "count_pair_fit",
    "estimate_keep_prob",
    "fit_gaps",
    "fit_known_w",
    "fit_matching",
    "fit_naive",
    "gap_distribution",
    "generate_dataset",
    "invert_omit_transform",
    "joint_loglik",
    "l1_transition_distance",
    "label_sequence",
    "load_dataset",
    "load_model",
    "make_dataset",
    "naive_limit_markov_omission",
    "omit_transform",
    "omit_transform_truncated",
    "permute_states",
    "perturb_dataset",
    "sample_trajectories",
    "save_dataset",
    "save_model",
    "semi_analytic_reconstruct",
    "stationary_distribution",
    "strip_dataset",
    "viterbi_with_placement",
]
