"""Differentially private multi-agent communication toolkit.

Noise calibration through Renyi-DP accounting, local privacy mechanisms with
de-biasing receivers, noise-aware Gaussian message senders, and the
communication games they induce (single-round binary sums, a two-player
collaborative game over privacy levels, and a multi-round Markov potential
game), each verified against analytic or brute-force oracles at desk scale.
"""

__version__ = "0.1.0"

from .accountant import (
    CalibrationResult,
    MechanismParams,
    PrivacyBudget,
    RdpPoint,
    calibrate_episode,
    calibrate_step,
    compose,
    gaussian_rdp,
    rdp_to_dp,
    round_trip,
    subsampled_gaussian_rdp,
)
from .binary_sums import BinarySumsInstance, BinarySumsOutcome, analytic_outcome, run_game
from .cgp import (
    CgpInstance,
    NashResult,
    StrategyProfile,
    best_response,
    find_nash,
    is_potential_game,
    make_binary_sums_cgp,
    max_unilateral_gain,
    utility,
    value_partials_match,
)
from .errors import (
    CalibrationInfeasibleError,
    CompositionOrderError,
    DegenerateMechanismError,
    EnumerationBudgetError,
    EvaluationError,
    InfeasibleOrderError,
    InvalidActionError,
    InvalidParameterError,
    SingularTargetError,
    StepSizeError,
)
from .gaussian_sender import (
    GaussianMessageDist,
    SenderProblem,
    SenderSolution,
    aware_optimum,
    aware_optimum_gd,
    kl_gaussian,
    oblivious_optimum,
    sample_message,
)
from .mechanisms import (
    ClippedVector,
    RrMechanism,
    aware_guess,
    clip,
    gaussian_perturb,
    naive_bias,
    naive_guess,
    rr_flip_prob,
    rr_perturb,
    subsample,
)
from .multi_round import (
    MpgNashResult,
    MrsAction,
    MrsConfig,
    MrsState,
    TabularPolicy,
    best_response_policy,
    find_mpg_nash,
    policy_value,
    potential,
    potential_value,
    step_reward,
    theta,
    transition,
    verify_mpg,
)
