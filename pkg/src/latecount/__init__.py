"""Forensic tests of the claim that a late-count turnaround came from remote voters counted last."""

from .ballots import BallotSummary, TallyRow, load_tallies, summarize
from .errors import ConfigError, DataError, DegenerateError
from .fairwin import LogProb, fair_win_probability, fair_win_probability_quadrature
from .geodata import (
    DistanceDistribution,
    Placement,
    Region,
    Settlement,
    VotingCenters,
    distance_distribution,
    haversine_distance,
    load_settlements,
    merge_distributions,
    place_voting_centers,
)
from .inference import (
    ResampleMode,
    ResamplePlan,
    bootstrap_c_over_m,
    fit_h_linear,
    probability_all_geo,
    probability_gip_form,
    probability_gip_window,
    resample,
)
from .model import (
    Form,
    ModelSpec,
    conjecture_all_geo,
    eval_final_shares,
    eval_halftime_shares,
    gip_estimate,
    gip_lower_bound,
    moment_fair_win,
    moment_halftime_lead,
    sweep_model_params,
)

__version__ = "0.1.0"

__all__ = [
    "BallotSummary",
    "ConfigError",
    "DataError",
    "DegenerateError",
    "DistanceDistribution",
    "Form",
    "LogProb",
    "ModelSpec",
    "Placement",
    "Region",
    "ResampleMode",
    "ResamplePlan",
    "Settlement",
    "TallyRow",
    "VotingCenters",
    "bootstrap_c_over_m",
    "conjecture_all_geo",
    "distance_distribution",
    "eval_final_shares",
    "eval_halftime_shares",
    "fair_win_probability",
    "fair_win_probability_quadrature",
    "fit_h_linear",
    "gip_estimate",
    "gip_lower_bound",
    "haversine_distance",
    "load_settlements",
    "load_tallies",
    "merge_distributions",
    "moment_fair_win",
    "moment_halftime_lead",
    "place_voting_centers",
    "probability_all_geo",
    "probability_gip_form",
    "probability_gip_window",
    "resample",
    "summarize",
    "sweep_model_params",
]
