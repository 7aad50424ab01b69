"""Regularity dimensions, doubling constants and stable-process graph measures."""
from .errors import ArgumentError, ConfigError, ResolutionError, ToleranceError
from .estimators import (DimEstimate, DoublingProfile, RatioSample, ScaleGrid, decaying_exponent,
                         default_thetas, doubling_constant, doubling_profile, heinonen_check,
                         heinonen_lower_bound, lower_regdim_pair_scan, lower_regdim_theta_scan,
                         scale_restricted_doubling, scale_restricted_perfectness,
                         space_perfectness_constant, uniform_perfectness_constant,
                         upper_regdim_pair_scan, upper_regdim_theta_scan)
from .levy import (EventReport, EventSpec, GraphMeasure, Rectangle, SamplePath, StableProcessSpec,
                   blowup_experiment, detect_event, event_ratio_witness, graph_pushforward,
                   sample_path, scaling_check, synthetic_event_path)
from .measures import (EmpiricalMeasure, Lebesgue, MeasureOracle, MonotoneMap, PushforwardMeasure,
                       SelfSimilarMeasure, cantor_measure, pushforward)
from .qsmaps import EtaModulus, PowerMap, check_pushforward_sandwich, estimate_eta, inverse_eta

__version__ = "0.1.0"
