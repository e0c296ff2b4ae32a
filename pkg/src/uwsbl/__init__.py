"""Semi-blind localization of an underwater acoustic source under a three-ray
(direct, surface, bottom) shallow-water model, with matched-field and
GCC-PHAT baselines, the Cramer-Rao bound and a Monte-Carlo harness."""

__version__ = "0.1.0"

from .baselines import (
    MfpChannelModel,
    gccphat_localize,
    gccphat_objective,
    mfp3_localize,
    mfp3_objective,
)
from .channel import (
    ChannelCoefficients,
    FrequencyRecord,
    perturb_mismatch,
    perturb_occlusion,
    physical_channel,
    random_channel,
    synthesize,
)
from .crlb import FisherInformation, PositionBound, fisher_information, mean_derivatives, position_crlb
from .geometry import DegenerateGeometryError, Position, Scenario, ScenarioError, ray_geometry, steering_matrices
from .sbl import estimate_channel_given, sbl_localize, sbl_objective
from .search import EstimationFailure, LocalizationResult, RefineOptions, SearchGrid
from .waveform import NoiseModel, Waveform, draw_noise, make_cn_waveform, make_flat_waveform, make_gaussian_pulse

__all__ = [
    "ChannelCoefficients",
    "DegenerateGeometryError",
    "EstimationFailure",
    "FisherInformation",
    "FrequencyRecord",
    "LocalizationResult",
    "MfpChannelModel",
    "NoiseModel",
    "Position",
    "PositionBound",
    "RefineOptions",
    "Scenario",
    "ScenarioError",
    "SearchGrid",
    "Waveform",
    "draw_noise",
    "estimate_channel_given",
    "fisher_information",
    "gccphat_localize",
    "gccphat_objective",
    "make_cn_waveform",
    "make_flat_waveform",
    "make_gaussian_pulse",
    "mean_derivatives",
    "mfp3_localize",
    "mfp3_objective",
    "perturb_mismatch",
    "perturb_occlusion",
    "physical_channel",
    "position_crlb",
    "random_channel",
    "ray_geometry",
    "sbl_localize",
    "sbl_objective",
    "steering_matrices",
    "synthesize",
]
