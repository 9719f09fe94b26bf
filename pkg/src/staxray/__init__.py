"""staxray: lateral-access shelf search benchmark.

First-order shelf simulator, depth renderer, target-occupancy engine,
discrete action generation, search policies, and a reproducible benchmark
harness.
"""

from .actions import Action, ActionKind, BinningSpec, gen_all
from .bench import (
    ExperimentSpec,
    GeneratorConfig,
    compute_metrics,
    generate_scene,
    run_experiment,
    write_reports,
)
from .camera import CameraSpec
from .geometry import GEOM_TOL, CircleFootprint, RectFootprint
from .occupancy import (
    ASPECT_RATIOS,
    CandidateGrid,
    OccupancyDistribution,
    compute_occupancy,
    default_target_shapes,
    outcome_probabilities,
)
from .policies import MctsConfig, make_policy
from .render import Observation, render
from .scene import (
    SHELF,
    ObjectInstance,
    ObjectShape,
    SceneState,
    ShelfSpec,
    StackTree,
    load_scene,
    save_scene,
    stack_top,
    support_height,
    validate_scene,
)
from .sim import EpisodeConfig, EpisodeRecord, apply, run_episode

__all__ = [
    "ASPECT_RATIOS",
    "Action",
    "ActionKind",
    "BinningSpec",
    "CameraSpec",
    "CandidateGrid",
    "CircleFootprint",
    "EpisodeConfig",
    "EpisodeRecord",
    "ExperimentSpec",
    "GEOM_TOL",
    "GeneratorConfig",
    "MctsConfig",
    "Observation",
    "OccupancyDistribution",
    "RectFootprint",
    "SHELF",
    "ObjectInstance",
    "ObjectShape",
    "SceneState",
    "ShelfSpec",
    "StackTree",
    "apply",
    "compute_metrics",
    "compute_occupancy",
    "default_target_shapes",
    "gen_all",
    "generate_scene",
    "load_scene",
    "make_policy",
    "outcome_probabilities",
    "render",
    "run_episode",
    "run_experiment",
    "save_scene",
    "stack_top",
    "support_height",
    "validate_scene",
    "write_reports",
]
