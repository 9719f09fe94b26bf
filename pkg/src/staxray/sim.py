"""First-order shelf simulator: action execution and the episode loop.

Quasi-static world: actions teleport the subject along the decomposed linear
motions with swept-volume checks (no dynamics). The episode loop renders,
checks the visibility threshold, asks the policy for a ranking, and executes
the first feasible action, one unit of cost per action.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .actions import Action, ActionKind, BinningSpec, check_action, gen_all
from .camera import CameraSpec
from .occupancy import (
    CandidateGrid,
    OccupancyDistribution,
    compute_occupancy,
    default_target_shapes,
)
from .render import Observation, background_depth, render, shape_hit_depths, _window_of
from .scene import SHELF, ObjectShape, SceneState, validate_scene

TARGET_REVEALED = "TARGET_REVEALED"
HORIZON = "HORIZON"
NO_FEASIBLE_ACTION = "NO_FEASIBLE_ACTION"


class InfeasibleActionError(ValueError):
    """Raised by apply when the feasibility re-check fails; names the check."""


class PolicyContractError(RuntimeError):
    """Policy returned an empty ranking although feasible actions exist."""


@dataclass(frozen=True)
class EpisodeConfig:
    visibility_threshold: float = 0.8
    horizon: int = 1
    bins: BinningSpec = field(default_factory=BinningSpec)
    seed: int = 0
    target_ratio: int = 0
    grid: CandidateGrid = field(default_factory=CandidateGrid)
    target_shapes: tuple[ObjectShape, ...] = field(default_factory=default_target_shapes)

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not 0 < self.visibility_threshold <= 1:
            raise ValueError("visibility threshold must be in (0, 1]")


@dataclass(frozen=True)
class StepRecord:
    t: int
    action: Action
    score: float
    v_t: float
    wallclock_s: float


@dataclass(frozen=True)
class EpisodeRecord:
    success: bool
    steps: int
    terminal_reason: str
    step_records: tuple[StepRecord, ...]
    final_visibility: float

    @property
    def cost(self) -> int:
        return self.steps


def apply(state: SceneState, action: Action) -> SceneState:
    """Execute one action; raises InfeasibleActionError with the failed check."""
    reason = check_action(state, action)
    if reason is not None:
        raise InfeasibleActionError(reason)

    if action.kind == ActionKind.PUSH:
        members = state.stacks.stack_ids(action.subject)
        objects = tuple(
            o.at(o.x + action.dx, o.y, o.z) if o.id in members else o for o in state.objects
        )
        new_state = replace(state, objects=objects)
    else:
        subject = state.object_by_id(action.subject)
        x, y, z = action.place_pose
        new_state = state.with_object(subject.at(x, y, z))
        if action.kind == ActionKind.STACK:
            new_state = new_state.with_stacks(new_state.stacks.with_parent(action.subject, action.supporter))
        else:  # Rearrange keeps SHELF; Destack lowers to SHELF
            new_state = new_state.with_stacks(new_state.stacks.with_parent(action.subject, SHELF))

    report = validate_scene(new_state)
    if not report.ok:
        raise InfeasibleActionError(
            "resulting scene invalid: " + "; ".join(v.code for v in report.violations)
        )
    return new_state


def hypothesize_mask(
    state: SceneState, obs: Observation, action: Action, camera: CameraSpec
) -> tuple[np.ndarray, tuple[int, int] | None]:
    """Predicted visible mask of the subject at the action's placement pose.

    The subject's current pixels are vacated (replaced by the scene
    background) and its new surface is z-buffered against everything else
    unmoved. Returns (mask, column extent or None when empty).
    """
    subject = state.object_by_id(action.subject)
    depth = obs.depth
    old_mask = obs.masks.get(action.subject)
    if old_mask is not None and old_mask.any():
        bg = background_depth(camera, state.shelf)
        depth = np.where(old_mask, bg, depth)

    x, y, z = action.place_pose
    rows, cols = _window_of(subject.shape, x, y, z, camera)
    t = shape_hit_depths(subject.shape, x, y, z, camera, cols, rows)
    visible = t < depth[rows, cols]
    mask = np.zeros(depth.shape, dtype=bool)
    mask[rows, cols] = visible
    if not visible.any():
        return mask, None
    col_hits = np.flatnonzero(mask.any(axis=0))
    return mask, (int(col_hits[0]), int(col_hits[-1]))


def run_episode(
    initial: SceneState,
    policy,
    config: EpisodeConfig,
    camera: CameraSpec,
    trace_path=None,
    include_timing: bool = True,
) -> EpisodeRecord:
    """POMDP episode loop; ends at reveal, horizon, or action starvation."""
    if initial.target is None:
        raise ValueError("initial scene has no target object")
    report = validate_scene(initial)
    if not report.ok:
        raise ValueError("initial scene invalid: " + "; ".join(v.code for v in report.violations))

    state = initial
    rng = np.random.default_rng(config.seed)
    dist: OccupancyDistribution | None = None
    steps: list[StepRecord] = []
    trace_lines: list[str] = []
    target_id = initial.target.id

    needs_occupancy = getattr(policy, "needs_occupancy", True)

    success = False
    reason = HORIZON
    v_t = 0.0
    t = 0
    while True:
        obs = render(state, camera)
        v_t = obs.target_visibility
        if v_t >= config.visibility_threshold:
            success = True
            reason = TARGET_REVEALED
            break
        if t >= config.horizon:
            reason = HORIZON
            break

        started = time.perf_counter()
        if needs_occupancy:
            current = compute_occupancy(
                obs,
                config.target_shapes,
                config.grid,
                camera,
                state.shelf,
                target_id=target_id,
                target_ratio=config.target_ratio,
            )
            dist = current if dist is None else dist.advance(current.current)

        actions = gen_all(state, obs, config.bins)
        if not actions:
            reason = NO_FEASIBLE_ACTION
            break

        ranked = policy.rank(
            PolicyContext(
                state=state,
                obs=obs,
                dist=dist,
                actions=actions,
                camera=camera,
                config=config,
                rng=rng,
                step=t,
            )
        )
        if not ranked:
            if getattr(policy, "restricts_actions", False):
                # Ablated policies may legitimately have nothing left to do.
                reason = NO_FEASIBLE_ACTION
                break
            raise PolicyContractError(
                f"policy returned an empty ranking with {len(actions)} feasible actions"
            )

        executed = None
        score = 0.0
        for action, action_score in ranked:
            try:
                state = apply(state, action)
            except InfeasibleActionError:
                continue
            executed = action
            score = float(action_score)
            break
        elapsed = time.perf_counter() - started

        if executed is None:
            reason = NO_FEASIBLE_ACTION
            break

        rec = StepRecord(t=t, action=executed, score=score, v_t=v_t, wallclock_s=elapsed)
        steps.append(rec)
        if trace_path is not None:
            doc = {
                "t": rec.t,
                "action": json.loads(rec.action.to_json()),
                "v_t": rec.v_t,
                "score": rec.score,
            }
            if include_timing:
                doc["wallclock_s"] = rec.wallclock_s
            trace_lines.append(json.dumps(doc))
        t += 1

    record = EpisodeRecord(
        success=success,
        steps=len(steps),
        terminal_reason=reason,
        step_records=tuple(steps),
        final_visibility=v_t,
    )
    if trace_path is not None:
        summary = {
            "success": record.success,
            "steps": record.steps,
            "reason": record.terminal_reason,
            "final_v": record.final_visibility,
        }
        with open(trace_path, "w") as f:
            for line in trace_lines:
                f.write(line + "\n")
            f.write(json.dumps(summary) + "\n")
    return record


@dataclass
class PolicyContext:
    """Everything a policy may consult when ranking the action set."""

    state: SceneState
    obs: Observation
    dist: OccupancyDistribution | None
    actions: list[Action]
    camera: CameraSpec
    config: EpisodeConfig
    rng: np.random.Generator
    step: int
