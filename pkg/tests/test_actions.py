"""Action generation: feasibility predicate, generators, bound, determinism."""

import numpy as np
import pytest

from staxray.actions import (
    MIN_PUSH,
    Action,
    ActionKind,
    BinningSpec,
    check_action,
    check_push,
    gen_all,
    gen_destacks,
    gen_pushes,
    gen_rearrangements,
    gen_stacks,
    push_limit,
)
from staxray.camera import CameraSpec
from staxray.geometry import GEOM_TOL
from staxray.render import render
from staxray.scene import ObjectShape, validate_scene
from staxray.sim import InfeasibleActionError, apply

from oracles import make_scene, random_scene, sweep_push_limit

CAM = CameraSpec()
BOX = ObjectShape.cuboid(0.10, 0.10, 0.10)
SMALL = ObjectShape.cuboid(0.06, 0.06, 0.06)
BIG = ObjectShape.cuboid(0.16, 0.16, 0.10)


def kind_counts(actions):
    out = {k: 0 for k in ActionKind}
    for a in actions:
        out[a.kind] += 1
    return out


class TestPushLimit:
    def test_free_object_reaches_wall(self):
        state = make_scene([(0, BOX, 0.0, 0.0, 0.0)])
        # x_max - half_x = 0.40 - 0.05 = 0.35 on either side.
        assert push_limit(state, 0, +1) == pytest.approx(0.35, abs=1e-5)
        assert push_limit(state, 0, -1) == pytest.approx(0.35, abs=1e-5)

    def test_flush_against_wall_no_push(self):
        state = make_scene([(0, BOX, 0.35, 0.0, 0.0)])
        assert push_limit(state, 0, +1) == pytest.approx(0.0, abs=1e-5)
        actions = gen_pushes(state)
        assert all(a.dx < 0 for a in actions)

    def test_neighbor_gap(self):
        # Faces at x = 0.05 and x = 0.10: a 0.05 m gap.
        state = make_scene([
            (0, BOX, 0.0, 0.0, 0.0),
            (1, BOX, 0.15, 0.0, 0.0),
        ])
        d = push_limit(state, 0, +1)
        assert d == pytest.approx(0.05, abs=1e-5)
        # Independent millimeter sweep agrees within its own resolution.
        swept = sweep_push_limit(state, 0, +1)
        assert abs(d - swept) <= 2e-3

    def test_out_of_lane_neighbor_ignored(self):
        state = make_scene([
            (0, BOX, 0.0, -0.10, 0.0),
            (1, BOX, 0.15, 0.15, 0.0),  # ahead in y, out of the sweep lane
        ])
        assert push_limit(state, 0, +1) == pytest.approx(0.35, abs=1e-5)

    def test_stack_moves_as_a_unit(self):
        # A wider base with a child: the child's own clearance also binds.
        base = ObjectShape.cuboid(0.10, 0.10, 0.05)
        child = ObjectShape.cuboid(0.08, 0.08, 0.05)
        tall = ObjectShape.cuboid(0.06, 0.06, 0.30)
        state = make_scene(
            [
                (0, base, 0.0, 0.0, 0.0),
                (1, child, 0.0, 0.0, 0.05),
                (2, tall, 0.12, 0.0, 0.0),
            ],
            stacks={1: 0},
        )
        d = push_limit(state, 0, +1)
        # The base contacts the tall pillar first: gap 0.12-0.05-0.03 = 0.04.
        assert d == pytest.approx(0.04, abs=1e-5)
        swept = sweep_push_limit(state, 0, +1)
        assert abs(d - swept) <= 2e-3

    def test_check_push_rejections(self):
        state = make_scene([
            (0, BOX, 0.0, 0.0, 0.0),
            (1, BOX, 0.15, 0.0, 0.0),
        ])
        assert check_push(state, 0, MIN_PUSH / 2) is not None
        assert check_push(state, 0, 0.06) is not None  # beyond the 0.05 gap
        assert check_push(state, 0, 0.049) is None
        assert check_push(state, 0, -0.30) is None


class TestRearrange:
    def test_lone_object_reaches_every_bin(self):
        state = make_scene([(0, BOX, 0.0, 0.0, 0.0)])
        bins = BinningSpec(bins=5)
        acts = gen_rearrangements(state, None, bins)
        assert len(acts) == 5
        assert sorted(a.bin_index for a in acts) == [0, 1, 2, 3, 4]
        centers = bins.centers(state.shelf)
        for a in acts:
            x, y, z = a.place_pose
            assert x == pytest.approx(centers[a.bin_index])
            assert z == 0.0
            # Deepest insertion on an empty shelf: flush with the back wall
            # plus the configured clearance.
            assert y == pytest.approx(-0.25 + 0.05 + bins.wall_clearance)

    def test_blocked_bin_stops_short(self):
        blocker = ObjectShape.cuboid(0.10, 0.10, 0.30)
        state = make_scene([
            (0, BOX, 0.30, 0.15, 0.0),
            (1, blocker, 0.0, -0.15, 0.0),
        ])
        bins = BinningSpec(bins=5)
        acts = gen_rearrangements(state, None, bins)
        by_bin = {a.bin_index: a for a in acts if a.subject == 0}
        # Bin 2 is centered on the blocker: insertion stops at its front face
        # (y = -0.10), so the subject center lands at -0.10 + 0.05 = -0.05.
        assert 2 in by_bin
        assert by_bin[2].place_pose[1] == pytest.approx(-0.05, abs=1e-5)
        # An unobstructed bin still reaches the back wall.
        assert by_bin[0].place_pose[1] == pytest.approx(-0.195, abs=1e-6)

    def test_target_and_stacked_subjects_excluded(self):
        state = make_scene(
            [
                (0, BOX, -0.2, 0.0, 0.0, True),  # target
                (1, BOX, 0.0, 0.0, 0.0),  # base with a child
                (2, SMALL, 0.0, 0.0, 0.10),  # the child, stacked
                (3, BOX, 0.25, 0.0, 0.0),  # free
            ],
            stacks={2: 1},
        )
        acts = gen_rearrangements(state, None, BinningSpec(bins=3))
        assert {a.subject for a in acts} == {3}

    def test_visibility_gating(self):
        hider = ObjectShape.cuboid(0.30, 0.10, 0.30)
        hidden = ObjectShape.cuboid(0.08, 0.08, 0.08)
        state = make_scene([
            (1, hider, 0.0, 0.10, 0.0),
            (2, hidden, 0.0, -0.10, 0.0),
        ])
        obs = render(state, CAM)
        assert 2 not in obs.masks
        gated = gen_all(state, obs, BinningSpec(bins=3))
        assert all(a.subject != 2 for a in gated)
        ungated = gen_all(state, None, BinningSpec(bins=3))
        assert any(a.subject == 2 for a in ungated)


class TestStacks:
    def test_smaller_onto_larger_only(self):
        state = make_scene([
            (0, SMALL, -0.2, 0.0, 0.0),
            (1, BIG, 0.2, 0.0, 0.0),
        ])
        acts = gen_stacks(state)
        assert len(acts) == 1
        a = acts[0]
        assert (a.subject, a.supporter) == (0, 1)
        assert a.place_pose == (0.2, 0.0, 0.10)

    def test_no_stack_onto_target_or_self(self):
        state = make_scene([
            (0, SMALL, -0.2, 0.0, 0.0),
            (1, BIG, 0.2, 0.0, 0.0, True),  # target may not support
        ])
        assert gen_stacks(state) == []

    def test_occupied_supporter_excluded(self):
        state = make_scene(
            [
                (0, SMALL, -0.2, 0.0, 0.0),
                (1, BIG, 0.2, 0.0, 0.0),
                (2, ObjectShape.cuboid(0.10, 0.10, 0.06), 0.2, 0.0, 0.10),
            ],
            stacks={2: 1},
        )
        acts = gen_stacks(state)
        # Supporter 1 is occupied; stacking 0 onto 2 (the stack top) is the
        # only remaining option.
        assert {(a.subject, a.supporter) for a in acts} == {(0, 2)}

    def test_stack_count_bounded_by_n_squared(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            state = random_scene(rng, 6)
            n = len(state.objects)
            assert len(gen_stacks(state)) <= n * n


class TestDestack:
    def test_stack_top_goes_to_bins(self):
        state = make_scene(
            [
                (0, BIG, 0.0, 0.0, 0.0),
                (1, SMALL, 0.0, 0.0, 0.10),
            ],
            stacks={1: 0},
        )
        acts = gen_destacks(state, None, BinningSpec(bins=5))
        assert acts
        assert all(a.subject == 1 for a in acts)
        assert all(a.place_pose[2] == 0.0 for a in acts)
        assert all(a.dz == pytest.approx(-0.10) for a in acts)
        # The base cannot destack (it is on the floor and carries a child).
        assert all(a.subject != 0 for a in acts)

    def test_floor_object_never_destacks(self):
        state = make_scene([(0, BOX, 0.0, 0.0, 0.0)])
        assert gen_destacks(state, None, BinningSpec(bins=5)) == []


class TestGenAll:
    def test_single_object_composition(self):
        state = make_scene([(0, BOX, 0.0, 0.0, 0.0)])
        acts = gen_all(state, None, BinningSpec(bins=5))
        counts = kind_counts(acts)
        assert counts[ActionKind.PUSH] == 2
        assert counts[ActionKind.REARRANGE] == 5
        assert counts[ActionKind.DESTACK] == 0
        assert counts[ActionKind.STACK] == 0

    def test_two_object_hand_enumeration(self):
        state = make_scene([
            (0, SMALL, -0.2, 0.0, 0.0),
            (1, BIG, 0.2, 0.0, 0.0),
        ])
        acts = gen_all(state, None, BinningSpec(bins=3))
        counts = kind_counts(acts)
        # Both objects can push either way (plenty of clearance), each can
        # reach all three bins (insertion may stop on the other's lane but
        # still lands), and only small-onto-big stacks.
        assert counts[ActionKind.PUSH] == 4
        assert counts[ActionKind.REARRANGE] == 6
        assert counts[ActionKind.DESTACK] == 0
        assert counts[ActionKind.STACK] == 1

    def test_canonical_order_and_dedup(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            state = random_scene(rng, 5)
            a = gen_all(state, None, BinningSpec(bins=6))
            b = gen_all(state, None, BinningSpec(bins=6))
            assert a == b
            keys = [
                (
                    int(x.kind),
                    x.subject,
                    -1 if x.bin_index is None else x.bin_index,
                    -1 if x.supporter is None else x.supporter,
                    x.place_pose,
                )
                for x in a
            ]
            assert keys == sorted(keys)
            for i, x in enumerate(a):
                for y in a[i + 1 :]:
                    if (
                        x.kind == y.kind
                        and x.subject == y.subject
                        and x.supporter == y.supporter
                    ):
                        assert max(
                            abs(p - q) for p, q in zip(x.place_pose, y.place_pose)
                        ) > 1e-6

    def test_bound_and_soundness_fuzz(self):
        # Every generated action must re-check clean, execute, and leave a
        # valid scene; the count must respect (2+B)N + N^2.
        rng = np.random.default_rng(1234)
        bins = BinningSpec(bins=4)
        checked = 0
        for i in range(1000):
            n = int(rng.integers(2, 7))
            state = random_scene(rng, n, stack_prob=0.4)
            n_actual = len(state.objects)
            obs = render(state, CAM) if i % 3 == 0 else None
            acts = gen_all(state, obs, bins)
            assert len(acts) <= (2 + bins.bins) * n_actual + n_actual * n_actual
            target = state.target
            for a in acts:
                if target is not None:
                    assert a.subject != target.id
                    assert a.supporter != target.id
                if obs is not None:
                    assert a.subject in obs.masks
                assert check_action(state, a, bins) is None, (a, check_action(state, a, bins))
                nxt = apply(state, a)
                report = validate_scene(nxt)
                assert report.ok, (a, report.violations)
                checked += 1
        assert checked > 3000  # the fuzz actually exercised many actions


class TestJsonRoundTrip:
    def test_all_kinds_round_trip(self):
        examples = [
            Action(ActionKind.PUSH, 3, (0.1, 0.0, 0.0), dx=0.05),
            Action(ActionKind.REARRANGE, 1, (0.2, -0.1, 0.0), dx=0.1, dy=-0.2, bin_index=4),
            Action(ActionKind.DESTACK, 2, (-0.3, 0.0, 0.0), dz=-0.12, bin_index=0),
            Action(ActionKind.STACK, 5, (0.0, 0.0, 0.08), dz=0.08, supporter=9),
        ]
        for a in examples:
            assert Action.from_json(a.to_json()) == a
