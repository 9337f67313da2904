"""Appearance-based teach-and-repeat visual navigation.

Teach: drive a path once, capturing feature keyframes indexed by driven
distance. Repeat: localize 1D along the taught path with a particle filter
fed by two-stage visual place recognition (global-descriptor filtering plus
histogram-of-shifts re-ranking), and steer by converting the pixel shift
between the live view and the matched keyframe into velocity commands.
Includes a deterministic synthetic-camera simulator and the shift-accuracy
evaluation used to validate the matcher.
"""

from .belief import (Belief, BeliefConfig, Mode, PathBeliefFilter,
                     certainty_at, estimate_position, mode_transition)
from .control import (ControlConfig, Platform, RepeatController,
                      VelocityCommand, control_tick, shift_to_angle)
from .errors import (ConfigurationError, DegenerateDescriptorError,
                     EmptyFrameError, FeatureFileError, MapError)
from .features import (Feature, FeatureSet, Match, cosine_similarity,
                       global_descriptor_from_locals, match_mutual_nn,
                       read_feature_file, unit_normalize, write_feature_file)
from .geometry import (CameraModel, PathGeometry, Pose, path_from_waypoints,
                       project, project_many, unproject, wrap_angle)
from .harness import (RunConfig, Scenario, WorldConfig, cmd_generate_dataset,
                      cmd_repeat, cmd_simulate, cmd_teach)
from .histogram import (HistogramConfig, ShiftEstimate, ShiftHistogram,
                        estimate_shift, similarity_only)
from .metrics import MetricConfig, MetricReport, evaluate, ground_truth_range
from .sim import (NoiseModel, RobotState, World, generate_shift_dataset,
                  render_features, save_dataset, step_kinematics)
from .teach import (CaptureConfig, Keyframe, KeyframeRecorder, TaughtPath,
                    finalize_map, load_map, save_map)
from .vpr import VprConfig, VprResult, filter_candidates, recognize

__version__ = "0.1.0"

__all__ = [
    "Belief", "BeliefConfig", "Mode", "PathBeliefFilter", "certainty_at",
    "estimate_position", "mode_transition",
    "ControlConfig", "Platform", "RepeatController", "VelocityCommand",
    "control_tick", "shift_to_angle",
    "ConfigurationError", "DegenerateDescriptorError", "EmptyFrameError",
    "FeatureFileError", "MapError",
    "Feature", "FeatureSet", "Match", "cosine_similarity",
    "global_descriptor_from_locals", "match_mutual_nn", "read_feature_file",
    "unit_normalize", "write_feature_file",
    "CameraModel", "PathGeometry", "Pose", "path_from_waypoints", "project",
    "project_many", "unproject", "wrap_angle",
    "RunConfig", "Scenario", "WorldConfig", "cmd_generate_dataset",
    "cmd_repeat", "cmd_simulate", "cmd_teach",
    "HistogramConfig", "ShiftEstimate", "ShiftHistogram", "estimate_shift",
    "similarity_only",
    "MetricConfig", "MetricReport", "evaluate", "ground_truth_range",
    "NoiseModel", "RobotState", "World", "generate_shift_dataset",
    "render_features", "save_dataset", "step_kinematics",
    "CaptureConfig", "Keyframe", "KeyframeRecorder", "TaughtPath",
    "finalize_map", "load_map", "save_map",
    "VprConfig", "VprResult", "filter_candidates", "recognize",
    "__version__",
]
