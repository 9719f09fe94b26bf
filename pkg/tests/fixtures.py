"""Hand-built scenes shared by the policy and acceptance tests."""

from __future__ import annotations

from staxray.scene import ObjectShape, SceneState

from oracles import make_scene


def one_hider_scene() -> SceneState:
    """Target fully hidden behind a single movable box; one move reveals."""
    target = ObjectShape.cuboid(0.06, 0.06, 0.06)
    hider = ObjectShape.cuboid(0.16, 0.08, 0.20)
    return make_scene([
        (0, target, 0.0, -0.15, 0.0, True),
        (1, hider, 0.0, 0.05, 0.0),
    ])


def two_wall_scene() -> SceneState:
    """Two independent walls cover the target; any single move leaves one."""
    target = ObjectShape.cuboid(0.06, 0.06, 0.06)
    wall = ObjectShape.cuboid(0.20, 0.08, 0.30)
    return make_scene([
        (0, target, 0.0, -0.18, 0.0, True),
        (1, wall, 0.0, -0.05, 0.0),
        (2, wall, 0.0, 0.08, 0.0),
    ])


def behind_stack_scene(variant: int) -> SceneState:
    """Target behind a two-object stack, wedged between flush shelf-wide walls.

    The stack's base carries a child (so it cannot be rearranged), every push
    is bounded by the 2 cm slack between the walls, and neither wall can move
    or be re-inserted anywhere else. Without destacking or stacking there is
    no action sequence that uncovers the target. Ten millimeter-scale variants
    keep the invariants while varying the exact geometry.
    """
    if not 0 <= variant <= 9:
        raise ValueError("variant must be in 0..9")
    d = 0.001 * variant
    target = ObjectShape.cuboid(0.06, 0.06, 0.06)
    base = ObjectShape.cuboid(0.24, 0.12, 0.14 + 2 * d)
    child = ObjectShape.cuboid(0.20 - 2 * d, 0.10, 0.12)
    wall = ObjectShape.cuboid(0.26, 0.30, 0.30 + 3 * d)
    return make_scene(
        [
            (0, target, 0.0, -0.20 - d, 0.0, True),
            (1, base, 0.0, -0.02, 0.0),
            (2, child, 0.0, -0.02, base.height),
            (3, wall, -0.27, -0.10, 0.0),
            (4, wall, 0.27, -0.10, 0.0),
        ],
        stacks={2: 1},
    )
