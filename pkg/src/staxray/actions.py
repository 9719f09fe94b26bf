"""Discrete action generation: pushes, rearrangements, stacking, destacking.

Feasibility is one shared predicate used both here and at execution time, so
every generated action is executable by construction. Suction moves decompose
into four linear motions — pull the subject to the shelf opening, shift
across, shift vertically, insert to the placement depth — each checked as a
swept volume, with the tool modeled as a vertical capsule above the grasp
point (the subject's top center).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import IntEnum

from .geometry import GEOM_TOL, RectFootprint, footprint_contains, footprints_overlap, interval_overlap, slide_limit
from .render import Observation
from .scene import SHELF, ObjectInstance, SceneState, support_height

MIN_PUSH = 1e-3  # pushes shorter than this are dropped
POSE_EQ_TOL = 1e-6  # dedup tolerance on placement poses


class ActionKind(IntEnum):
    PUSH = 0
    REARRANGE = 1
    DESTACK = 2
    STACK = 3


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    subject: int
    place_pose: tuple[float, float, float]
    dx: float = 0.0
    dy: float = 0.0
    dz: float = 0.0
    supporter: int | None = None  # Stack only
    bin_index: int | None = None  # Rearrange/Destack only

    def to_json(self) -> str:
        doc = {
            "kind": self.kind.name.lower(),
            "subject": self.subject,
            "supporter": self.supporter,
            "dx": self.dx,
            "dy": self.dy,
            "dz": self.dz,
            "place_pose": list(self.place_pose),
            "bin": self.bin_index,
        }
        return json.dumps(doc)

    @staticmethod
    def from_json(line: str) -> "Action":
        doc = json.loads(line)
        return Action(
            kind=ActionKind[doc["kind"].upper()],
            subject=doc["subject"],
            place_pose=tuple(doc["place_pose"]),
            dx=doc.get("dx", 0.0),
            dy=doc.get("dy", 0.0),
            dz=doc.get("dz", 0.0),
            supporter=doc.get("supporter"),
            bin_index=doc.get("bin"),
        )


@dataclass(frozen=True)
class BinningSpec:
    bins: int = 10
    wall_clearance: float = 0.005  # standoff from the back wall for placements
    tool_radius: float = 0.02

    def __post_init__(self):
        if self.bins < 1:
            raise ValueError("need at least one bin")

    def centers(self, shelf) -> list[float]:
        step = shelf.width / self.bins
        return [shelf.x_min + (i + 0.5) * step for i in range(self.bins)]


def _visible(obs: Observation | None, obj_id: int) -> bool:
    if obs is None:
        return True
    m = obs.masks.get(obj_id)
    return m is not None and bool(m.any())


def _z_overlaps(a_lo, a_hi, b_lo, b_hi) -> bool:
    return interval_overlap(a_lo, a_hi, b_lo, b_hi, GEOM_TOL)


# ---------------------------------------------------------------------------
# Shared feasibility predicate. Each check returns None when ok, else a short
# reason string naming the violated condition.
# ---------------------------------------------------------------------------


def _swept_rect(half_x: float, half_y: float, xa: float, ya: float, xb: float, yb: float) -> RectFootprint:
    """Bounding rectangle of a footprint swept along an axis-aligned segment."""
    cx = 0.5 * (xa + xb)
    cy = 0.5 * (ya + yb)
    return RectFootprint(cx, cy, half_x + 0.5 * abs(xb - xa), half_y + 0.5 * abs(yb - ya))


def _segment_collides(
    statics: list[ObjectInstance],
    rect: RectFootprint,
    z_lo: float,
    z_hi: float,
) -> int | None:
    for o in statics:
        if _z_overlaps(z_lo, z_hi, o.z, o.z_top) and footprints_overlap(rect, o.footprint(), GEOM_TOL):
            return o.id
    return None


def check_push(state: SceneState, subject_id: int, dx: float) -> str | None:
    subject = state.object_by_id(subject_id)
    if not state.stacks.on_shelf(subject_id):
        return "push subject not resting on the shelf floor"
    if abs(dx) < MIN_PUSH:
        return "push distance below minimum"
    direction = 1 if dx > 0 else -1
    limit = push_limit(state, subject_id, direction)
    if abs(dx) > limit + 1e-9:
        return "push exceeds collision-free translation"
    return None


def push_limit(state: SceneState, subject_id: int, direction: int) -> float:
    """Maximal collision-free |d_x| for the subject's whole stack."""
    members = state.stacks.stack_ids(subject_id)
    shelf = state.shelf
    limit = math.inf
    for mid in members:
        m = state.object_by_id(mid)
        if direction > 0:
            wall = shelf.x_max - m.shape.half_x - m.x
        else:
            wall = m.x - (shelf.x_min + m.shape.half_x)
        limit = min(limit, wall - GEOM_TOL)
        for o in state.objects:
            if o.id in members:
                continue
            if not _z_overlaps(m.z, m.z_top, o.z, o.z_top):
                continue
            limit = min(limit, slide_limit(m.footprint(), o.footprint(), "x", direction, GEOM_TOL))
    return max(limit, 0.0)


def _transfer_segments(subject: ObjectInstance, dest, y_stage: float):
    """The four linear motions: pull out, shift across, shift vertically, insert."""
    x0, y0, z0 = subject.x, subject.y, subject.z
    x1, y1, z1 = dest
    return (
        ((x0, y0, z0), (x0, y_stage, z0)),
        ((x0, y_stage, z0), (x1, y_stage, z0)),
        ((x1, y_stage, z0), (x1, y_stage, z1)),
        ((x1, y_stage, z1), (x1, y1, z1)),
    )


def check_suction_transfer(
    state: SceneState,
    subject_id: int,
    dest: tuple[float, float, float],
    tool_radius: float,
) -> str | None:
    """Swept-volume feasibility of the 4-motion suction move to dest."""
    subject = state.object_by_id(subject_id)
    shelf = state.shelf
    h = subject.shape.height
    hx, hy = subject.shape.half_x, subject.shape.half_y
    y_stage = shelf.y_front - hy
    statics = [o for o in state.objects if o.id != subject_id]

    for (xa, ya, za), (xb, yb, zb) in _transfer_segments(subject, dest, y_stage):
        rect = _swept_rect(hx, hy, xa, ya, xb, yb)
        z_lo = min(za, zb)
        z_hi = max(za, zb) + h
        hit = _segment_collides(statics, rect, z_lo, z_hi)
        if hit is not None:
            return f"transfer sweep collides with object {hit}"
        # Tool capsule above the grasp point, from the subject top to the ceiling.
        tool_rect = _swept_rect(tool_radius, tool_radius, xa, ya, xb, yb)
        tool_bottom = min(za, zb) + h
        for o in statics:
            if o.z_top > tool_bottom + GEOM_TOL and footprints_overlap(tool_rect, o.footprint(), GEOM_TOL):
                return f"tool sweep collides with object {o.id}"
    return None


def check_placement(
    state: SceneState,
    subject_id: int,
    dest: tuple[float, float, float],
    supporter: int | None,
) -> str | None:
    """Static validity of the subject resting at dest on the given supporter."""
    subject = state.object_by_id(subject_id)
    shelf = state.shelf
    x, y, z = dest
    hx, hy, h = subject.shape.half_x, subject.shape.half_y, subject.shape.height
    if (
        x - hx < shelf.x_min - GEOM_TOL
        or x + hx > shelf.x_max + GEOM_TOL
        or y - hy < shelf.y_back - GEOM_TOL
        or y + hy > shelf.y_front + GEOM_TOL
    ):
        return "placement outside shelf walls"
    if z < -GEOM_TOL or z + h > shelf.height + GEOM_TOL:
        return "placement outside shelf height"

    if supporter is SHELF:
        if abs(z) > GEOM_TOL:
            return "floor placement not at floor height"
    else:
        sup = state.object_by_id(supporter)
        if abs(z - sup.z_top) > GEOM_TOL:
            return "placement not resting on supporter top"
        if not footprint_contains(sup.footprint(), subject.shape.footprint(x, y), GEOM_TOL):
            return "containment violated"
        if subject.shape.footprint_area > sup.shape.footprint_area + GEOM_TOL:
            return "stack area ordering violated"

    placed = subject.shape.footprint(x, y)
    for o in state.objects:
        if o.id == subject_id or (supporter is not SHELF and o.id == supporter):
            continue
        if _z_overlaps(z, z + h, o.z, o.z_top) and footprints_overlap(placed, o.footprint(), GEOM_TOL):
            return f"placement overlaps object {o.id}"
    return None


def check_action(state: SceneState, action: Action, bins: BinningSpec | None = None) -> str | None:
    """Full feasibility re-check; the simulator calls this before committing."""
    tool_radius = (bins or BinningSpec()).tool_radius
    subject_id = action.subject
    try:
        subject = state.object_by_id(subject_id)
    except KeyError:
        return "unknown subject"

    if action.kind == ActionKind.PUSH:
        return check_push(state, subject_id, action.dx)

    if state.stacks.has_child(subject_id):
        return "subject has an object stacked on it"

    if action.kind == ActionKind.REARRANGE:
        if not state.stacks.on_shelf(subject_id):
            return "rearrange subject not resting on the shelf floor"
        supporter = SHELF
    elif action.kind == ActionKind.DESTACK:
        if state.stacks.on_shelf(subject_id):
            return "destack subject already on the shelf floor"
        supporter = SHELF
    elif action.kind == ActionKind.STACK:
        if action.supporter is None:
            return "stack action missing supporter"
        if action.supporter == subject_id:
            return "cannot stack an object onto itself"
        try:
            sup = state.object_by_id(action.supporter)
        except KeyError:
            return "unknown supporter"
        if state.stacks.has_child(action.supporter):
            return "supporter already has an object on it"
        if action.supporter in state.stacks.stack_ids(subject_id):
            return "supporter belongs to the subject's own stack"
        supporter = action.supporter
    else:
        return "unknown action kind"

    reason = check_placement(state, subject_id, action.place_pose, supporter)
    if reason is not None:
        return reason
    return check_suction_transfer(state, subject_id, action.place_pose, tool_radius)


# ---------------------------------------------------------------------------
# Generators.
# ---------------------------------------------------------------------------


def _floor_subjects(state: SceneState, obs: Observation | None):
    """Objects eligible for suction off the floor: on SHELF, childless, seen."""
    for o in state.objects:
        if o.is_target:
            continue
        if state.stacks.on_shelf(o.id) and not state.stacks.has_child(o.id) and _visible(obs, o.id):
            yield o


def _deepest_y(state: SceneState, subject: ObjectInstance, x: float, bins: BinningSpec) -> float | None:
    """Deepest y reachable by inserting from the opening at column x (floor level)."""
    shelf = state.shelf
    hx, hy, h = subject.shape.half_x, subject.shape.half_y, subject.shape.height
    if x - hx < shelf.x_min - GEOM_TOL or x + hx > shelf.x_max + GEOM_TOL:
        return None
    y_stage = shelf.y_front - hy
    deepest_allowed = shelf.y_back + hy + bins.wall_clearance
    moving = subject.shape.footprint(x, y_stage)
    slide = math.inf
    for o in state.objects:
        if o.id == subject.id:
            continue
        if not _z_overlaps(0.0, h, o.z, o.z_top):
            continue
        slide = min(slide, slide_limit(moving, o.footprint(), "y", -1, GEOM_TOL))
    if slide < 0:
        return None  # blocked even at the opening
    y = max(deepest_allowed, y_stage - slide)
    if y > y_stage + GEOM_TOL:
        return None
    return min(y, y_stage)


def gen_pushes(state: SceneState, obs: Observation | None = None) -> list[Action]:
    out = []
    for o in state.objects:
        if o.is_target or not state.stacks.on_shelf(o.id) or not _visible(obs, o.id):
            continue
        for direction in (1, -1):
            d = push_limit(state, o.id, direction)
            if d < MIN_PUSH:
                continue
            dx = direction * d
            out.append(
                Action(
                    kind=ActionKind.PUSH,
                    subject=o.id,
                    place_pose=(o.x + dx, o.y, o.z),
                    dx=dx,
                )
            )
    return out


def gen_rearrangements(state: SceneState, obs: Observation | None, bins: BinningSpec) -> list[Action]:
    out = []
    for o in _floor_subjects(state, obs):
        for i, cx in enumerate(bins.centers(state.shelf)):
            y = _deepest_y(state, o, cx, bins)
            if y is None:
                continue
            dest = (cx, y, 0.0)
            if check_placement(state, o.id, dest, SHELF) is not None:
                continue
            if check_suction_transfer(state, o.id, dest, bins.tool_radius) is not None:
                continue
            out.append(
                Action(
                    kind=ActionKind.REARRANGE,
                    subject=o.id,
                    place_pose=dest,
                    dx=cx - o.x,
                    dy=y - o.y,
                    bin_index=i,
                )
            )
    return out


def gen_destacks(state: SceneState, obs: Observation | None, bins: BinningSpec) -> list[Action]:
    out = []
    for o in state.objects:
        if o.is_target or state.stacks.on_shelf(o.id) or state.stacks.has_child(o.id):
            continue
        if not _visible(obs, o.id):
            continue
        for i, cx in enumerate(bins.centers(state.shelf)):
            y = _deepest_y(state, o, cx, bins)
            if y is None:
                continue
            dest = (cx, y, 0.0)
            if check_placement(state, o.id, dest, SHELF) is not None:
                continue
            if check_suction_transfer(state, o.id, dest, bins.tool_radius) is not None:
                continue
            out.append(
                Action(
                    kind=ActionKind.DESTACK,
                    subject=o.id,
                    place_pose=dest,
                    dx=cx - o.x,
                    dy=y - o.y,
                    dz=-o.z,
                    bin_index=i,
                )
            )
    return out


def gen_stacks(state: SceneState, obs: Observation | None = None, bins: BinningSpec | None = None) -> list[Action]:
    bins = bins or BinningSpec()
    out = []
    for o in state.objects:
        if o.is_target or state.stacks.has_child(o.id) or not _visible(obs, o.id):
            continue
        own_stack = state.stacks.stack_ids(o.id)
        for sup in state.objects:
            if sup.is_target or sup.id == o.id or sup.id in own_stack:
                continue
            if state.stacks.has_child(sup.id) or not _visible(obs, sup.id):
                continue
            dest = (sup.x, sup.y, sup.z_top)
            if check_placement(state, o.id, dest, sup.id) is not None:
                continue
            if check_suction_transfer(state, o.id, dest, bins.tool_radius) is not None:
                continue
            out.append(
                Action(
                    kind=ActionKind.STACK,
                    subject=o.id,
                    place_pose=dest,
                    dx=sup.x - o.x,
                    dy=sup.y - o.y,
                    dz=sup.z_top - o.z,
                    supporter=sup.id,
                )
            )
    return out


def _action_sort_key(a: Action):
    return (
        int(a.kind),
        a.subject,
        a.bin_index if a.bin_index is not None else -1,
        a.supporter if a.supporter is not None else -1,
        a.place_pose,
    )


def gen_all(state: SceneState, obs: Observation | None, bins: BinningSpec) -> list[Action]:
    """All feasible actions, canonically ordered and deduplicated."""
    actions = (
        gen_pushes(state, obs)
        + gen_rearrangements(state, obs, bins)
        + gen_destacks(state, obs, bins)
        + gen_stacks(state, obs, bins)
    )
    actions.sort(key=_action_sort_key)
    unique: list[Action] = []
    for a in actions:
        dup = False
        for b in unique:
            if (
                a.kind == b.kind
                and a.subject == b.subject
                and a.supporter == b.supporter
                and all(abs(p - q) <= POSE_EQ_TOL for p, q in zip(a.place_pose, b.place_pose))
            ):
                dup = True
                break
        if dup:
            continue
        unique.append(a)
    return unique


def save_actions_jsonl(actions: list[Action], path) -> None:
    with open(path, "w") as f:
        for a in actions:
            f.write(a.to_json() + "\n")


def load_actions_jsonl(path) -> list[Action]:
    with open(path) as f:
        return [Action.from_json(line) for line in f if line.strip()]
