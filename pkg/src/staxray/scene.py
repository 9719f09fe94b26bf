"""Shelf world model: object shapes, poses, stack chains, and validation.

The shelf frame has its origin at the center of the shelf floor, y toward
the opening, z up. Object poses give the footprint center (x, y) and the
height z of the object's bottom face; cuboids are axis-aligned.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .geometry import (
    GEOM_TOL,
    CircleFootprint,
    Footprint,
    RectFootprint,
    footprint_contains,
    footprints_overlap,
    interval_overlap,
)

# Supporter sentinel for objects resting directly on the shelf floor.
SHELF = None

CUBOID = "cuboid"
CYLINDER = "cylinder"


@dataclass(frozen=True)
class ShelfSpec:
    """Shelf interior box: x in [-width/2, width/2], y in [-depth/2, depth/2], z in [0, height]."""

    width: float
    height: float
    depth: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0 and self.depth > 0):
            raise ValueError("shelf dimensions must be positive")

    @property
    def x_min(self) -> float:
        return -0.5 * self.width

    @property
    def x_max(self) -> float:
        return 0.5 * self.width

    @property
    def y_back(self) -> float:
        return -0.5 * self.depth

    @property
    def y_front(self) -> float:
        return 0.5 * self.depth


@dataclass(frozen=True)
class ObjectShape:
    """Upright cylinder or axis-aligned cuboid.

    dims: (extent_x, extent_y, extent_z) for cuboids, (radius, height) for
    cylinders, all in meters.
    """

    kind: str
    dims: tuple[float, ...]

    def __post_init__(self):
        if self.kind == CUBOID:
            if len(self.dims) != 3:
                raise ValueError("cuboid needs (extent_x, extent_y, extent_z)")
        elif self.kind == CYLINDER:
            if len(self.dims) != 2:
                raise ValueError("cylinder needs (radius, height)")
        else:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if any(d <= 0 for d in self.dims):
            raise ValueError("shape dimensions must be positive")

    @staticmethod
    def cuboid(extent_x: float, extent_y: float, extent_z: float) -> "ObjectShape":
        return ObjectShape(CUBOID, (extent_x, extent_y, extent_z))

    @staticmethod
    def cylinder(radius: float, height: float) -> "ObjectShape":
        return ObjectShape(CYLINDER, (radius, height))

    @property
    def height(self) -> float:
        return self.dims[2] if self.kind == CUBOID else self.dims[1]

    @property
    def half_x(self) -> float:
        return 0.5 * self.dims[0] if self.kind == CUBOID else self.dims[0]

    @property
    def half_y(self) -> float:
        return 0.5 * self.dims[1] if self.kind == CUBOID else self.dims[0]

    def footprint(self, cx: float, cy: float) -> Footprint:
        if self.kind == CUBOID:
            return RectFootprint(cx, cy, 0.5 * self.dims[0], 0.5 * self.dims[1])
        return CircleFootprint(cx, cy, self.dims[0])

    @property
    def footprint_area(self) -> float:
        if self.kind == CUBOID:
            return self.dims[0] * self.dims[1]
        return math.pi * self.dims[0] ** 2


@dataclass(frozen=True)
class ObjectInstance:
    """One object: id, shape, pose (footprint center x, y and bottom height z)."""

    id: int
    shape: ObjectShape
    x: float
    y: float
    z: float
    is_target: bool = False

    @property
    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    @property
    def z_top(self) -> float:
        return self.z + self.shape.height

    def footprint(self) -> Footprint:
        return self.shape.footprint(self.x, self.y)

    def at(self, x: float, y: float, z: float) -> "ObjectInstance":
        return replace(self, x=x, y=y, z=z)


class StackTree:
    """Support relations: each object rests on the shelf or on one object.

    Chains only: a supporter has at most one direct child. The tree is an
    immutable value; mutating operations return a new tree.
    """

    __slots__ = ("_parent", "_child")

    def __init__(self, parent: dict[int, int | None] | None = None):
        self._parent: dict[int, int | None] = dict(parent or {})
        self._child: dict[int, int] = {}
        for obj_id, sup in self._parent.items():
            if sup is not SHELF:
                if sup in self._child:
                    raise ValueError(f"supporter {sup} has more than one direct child")
                self._child[sup] = obj_id

    def parent_of(self, obj_id: int) -> int | None:
        return self._parent[obj_id]

    def child_of(self, obj_id: int) -> int | None:
        return self._child.get(obj_id)

    def has_child(self, obj_id: int) -> bool:
        return obj_id in self._child

    def on_shelf(self, obj_id: int) -> bool:
        return self._parent[obj_id] is SHELF

    def ids(self):
        return self._parent.keys()

    def chain_above(self, obj_id: int) -> list[int]:
        """Objects stacked above obj_id, bottom to top (excluding obj_id)."""
        out = []
        cur = self._child.get(obj_id)
        while cur is not None:
            out.append(cur)
            cur = self._child.get(cur)
        return out

    def stack_ids(self, obj_id: int) -> set[int]:
        """All members of the stack containing obj_id (including itself)."""
        base = obj_id
        seen = {base}
        while self._parent.get(base) is not SHELF:
            base = self._parent[base]
            if base in seen:
                break  # cyclic; validate_scene reports it
            seen.add(base)
        members = {base}
        members.update(self.chain_above(base))
        return members

    def with_parent(self, obj_id: int, supporter: int | None) -> "StackTree":
        parent = dict(self._parent)
        parent[obj_id] = supporter
        return StackTree(parent)

    def as_pairs(self) -> list[tuple[int, int]]:
        """(child, parent) pairs for object-supported objects, sorted by child."""
        return sorted((c, p) for c, p in self._parent.items() if p is not SHELF)

    def __eq__(self, other):
        return isinstance(other, StackTree) and self._parent == other._parent

    def __repr__(self):
        return f"StackTree({self._parent!r})"


@dataclass(frozen=True)
class SceneState:
    """Ground-truth world: shelf, objects (occluders + optional target), stacks."""

    shelf: ShelfSpec
    objects: tuple[ObjectInstance, ...]
    stacks: StackTree = field(default_factory=StackTree)

    def __post_init__(self):
        ids = [o.id for o in self.objects]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate object ids")
        missing = set(ids) - set(self.stacks.ids())
        if missing:
            # Objects absent from the parent map rest on the shelf.
            parent = {o.id: self.stacks._parent.get(o.id, SHELF) for o in self.objects}
            object.__setattr__(self, "stacks", StackTree(parent))

    def object_by_id(self, obj_id: int) -> ObjectInstance:
        for o in self.objects:
            if o.id == obj_id:
                return o
        raise KeyError(f"no object with id {obj_id}")

    @property
    def target(self) -> ObjectInstance | None:
        for o in self.objects:
            if o.is_target:
                return o
        return None

    @property
    def occluders(self) -> tuple[ObjectInstance, ...]:
        return tuple(o for o in self.objects if not o.is_target)

    def with_object(self, updated: ObjectInstance) -> "SceneState":
        objs = tuple(updated if o.id == updated.id else o for o in self.objects)
        return replace(self, objects=objs)

    def with_stacks(self, stacks: StackTree) -> "SceneState":
        return replace(self, stacks=stacks)


@dataclass(frozen=True)
class Violation:
    code: str
    ids: tuple[int, ...]
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def support_height(state: SceneState, supporter: int | None) -> float:
    """Top-surface height of a supporter: 0 for the shelf floor."""
    if supporter is SHELF:
        return 0.0
    return state.object_by_id(supporter).z_top


def stack_top(state: SceneState, obj_id: int) -> int:
    """Topmost object of the stack containing obj_id (itself when unstacked)."""
    state.object_by_id(obj_id)  # raises on unknown id
    cur = obj_id
    seen = set()
    while True:
        child = state.stacks.child_of(cur)
        if child is None or child in seen:
            return cur
        seen.add(cur)
        cur = child


def validate_scene(state: SceneState, tol: float = GEOM_TOL) -> ValidationReport:
    """Check all scene and stack invariants; violations are data, not errors."""
    v: list[Violation] = []
    shelf = state.shelf
    by_id = {o.id: o for o in state.objects}

    for o in state.objects:
        if (
            o.x - o.shape.half_x < shelf.x_min - tol
            or o.x + o.shape.half_x > shelf.x_max + tol
            or o.y - o.shape.half_y < shelf.y_back - tol
            or o.y + o.shape.half_y > shelf.y_front + tol
        ):
            v.append(Violation("outside shelf bounds", (o.id,), f"object {o.id} crosses a shelf wall"))
        if o.z < -tol:
            v.append(Violation("below shelf floor", (o.id,), f"object {o.id} has z < 0"))
        if o.z_top > shelf.height + tol:
            v.append(Violation("above shelf ceiling", (o.id,), f"object {o.id} exceeds shelf height"))

    # Stack structure: known supporters, acyclicity (chains are enforced by
    # StackTree construction), resting heights, containment, area ordering.
    for o in state.objects:
        sup = state.stacks.parent_of(o.id)
        if sup is SHELF:
            if abs(o.z) > tol:
                v.append(Violation("not resting on supporter", (o.id,), f"object {o.id} floats above the floor"))
            continue
        if sup not in by_id:
            v.append(Violation("unknown supporter", (o.id,), f"object {o.id} rests on missing id {sup}"))
            continue
        # Walk up the support chain; revisiting a node means a cycle.
        seen = {o.id}
        cur = sup
        cyclic = False
        while cur is not SHELF and cur in by_id:
            if cur in seen:
                cyclic = True
                break
            seen.add(cur)
            cur = state.stacks._parent.get(cur, SHELF)
        if cyclic:
            v.append(Violation("cyclic stack", tuple(sorted(seen)), "support chain contains a cycle"))
            continue
        supporter = by_id[sup]
        if abs(o.z - supporter.z_top) > tol:
            v.append(
                Violation(
                    "not resting on supporter",
                    (o.id, sup),
                    f"object {o.id} z={o.z:.6f} != top of {sup} ({supporter.z_top:.6f})",
                )
            )
        if not footprint_contains(supporter.footprint(), o.footprint(), tol):
            v.append(
                Violation(
                    "footprint not contained",
                    (o.id, sup),
                    f"object {o.id} footprint exceeds supporter {sup}",
                )
            )
        if o.shape.footprint_area > supporter.shape.footprint_area + tol:
            v.append(
                Violation(
                    "stack area non-increasing",
                    (o.id, sup),
                    f"object {o.id} footprint area exceeds supporter {sup}",
                )
            )

    # Pairwise solid intersection: footprint overlap plus z-interval overlap.
    objs = state.objects
    for i in range(len(objs)):
        for j in range(i + 1, len(objs)):
            a, b = objs[i], objs[j]
            if interval_overlap(a.z, a.z_top, b.z, b.z_top, tol) and footprints_overlap(
                a.footprint(), b.footprint(), tol
            ):
                v.append(
                    Violation(
                        "volume intersection",
                        (a.id, b.id),
                        f"objects {a.id} and {b.id} interpenetrate",
                    )
                )
    unique = []
    seen_keys = set()
    for item in v:
        key = (item.code, item.ids)
        if key not in seen_keys:
            seen_keys.add(key)
            unique.append(item)
    return ValidationReport(tuple(unique))


# ---------------------------------------------------------------------------
# Scene files: JSON with a canonical field order and 17-significant-digit
# floats (enough to round-trip binary64 exactly), so load -> save is
# byte-stable.
# ---------------------------------------------------------------------------


def _canon_value(value, level: int) -> str:
    pad = "  " * level
    inner = "  " * (level + 1)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, int):
        return str(value)
    if value is None:
        return "null"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f'{inner}"{k}": {_canon_value(v, level + 1)}' for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [f"{inner}{_canon_value(v, level + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(value)!r}")


def scene_to_dict(state: SceneState) -> dict:
    return {
        "shelf": {
            "width": state.shelf.width,
            "height": state.shelf.height,
            "depth": state.shelf.depth,
        },
        "objects": [
            {
                "id": o.id,
                "kind": o.shape.kind,
                "dims": list(o.shape.dims),
                "pose": [o.x, o.y, o.z],
                "is_target": o.is_target,
            }
            for o in sorted(state.objects, key=lambda o: o.id)
        ],
        "stacks": [{"child": c, "parent": p} for c, p in state.stacks.as_pairs()],
    }


def scene_from_dict(doc: dict) -> SceneState:
    shelf = ShelfSpec(doc["shelf"]["width"], doc["shelf"]["height"], doc["shelf"]["depth"])
    objects = tuple(
        ObjectInstance(
            id=entry["id"],
            shape=ObjectShape(entry["kind"], tuple(entry["dims"])),
            x=entry["pose"][0],
            y=entry["pose"][1],
            z=entry["pose"][2],
            is_target=bool(entry.get("is_target", False)),
        )
        for entry in doc["objects"]
    )
    parent: dict[int, int | None] = {o.id: SHELF for o in objects}
    for edge in doc.get("stacks", []):
        parent[edge["child"]] = edge["parent"]
    return SceneState(shelf=shelf, objects=objects, stacks=StackTree(parent))


def dumps_scene(state: SceneState) -> str:
    return _canon_value(scene_to_dict(state), 0) + "\n"


def save_scene(state: SceneState, path: str | Path) -> None:
    Path(path).write_text(dumps_scene(state))


def load_scene(path: str | Path) -> SceneState:
    return scene_from_dict(json.loads(Path(path).read_text()))
