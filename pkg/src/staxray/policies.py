"""Search policies: DARSS, MCTSSS, Baseline, Oracle, and ablation variants.

All policies consume the generated action set and return a ranked list of
(action, score) pairs, sorted by descending score with a fixed deterministic
tie-break: action kind (push < rearrange < destack < stack), subject id, bin
index, supporter id, placement pose.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .actions import Action, ActionKind, BinningSpec, gen_all
from .camera import CameraSpec
from .occupancy import compute_occupancy_fast, encode_history, outcome_probabilities, support
from .reconstruct import reconstruct_scene
from .render import BACKWALL, HALFWAY, _window_of, predict_depth_after, shape_hit_depths
from .scene import SHELF, SceneState
from .sim import PolicyContext, apply, hypothesize_mask, InfeasibleActionError

FULL = "FULL"
NO_STACK = "NO_STACK"
NO_DESTACK = "NO_DESTACK"
DAR = "DAR"
DAR_DESTACKED_PREPROCESS = "DAR_DESTACKED_PREPROCESS"

_ABLATION_DROPS = {
    FULL: frozenset(),
    NO_STACK: frozenset({ActionKind.STACK}),
    NO_DESTACK: frozenset({ActionKind.DESTACK}),
    DAR: frozenset({ActionKind.STACK, ActionKind.DESTACK}),
    DAR_DESTACKED_PREPROCESS: frozenset({ActionKind.STACK, ActionKind.DESTACK}),
}


def ablation_filter(actions: list[Action], mode: str) -> list[Action]:
    dropped = _ABLATION_DROPS[mode]
    return [a for a in actions if a.kind not in dropped]


def _tie_key(action: Action):
    return (
        int(action.kind),
        action.subject,
        action.bin_index if action.bin_index is not None else -1,
        action.supporter if action.supporter is not None else -1,
        action.place_pose,
    )


def sort_ranked(pairs: list[tuple[Action, float]]) -> list[tuple[Action, float]]:
    return sorted(pairs, key=lambda p: (-p[1],) + _tie_key(p[0]))


# ---------------------------------------------------------------------------
# DARSS: rank by reduction of support of the moved object against the
# history-encoded distribution of the target's aspect ratio.
# ---------------------------------------------------------------------------


class DarssPolicy:
    needs_occupancy = True

    def __init__(self, filter_mode: str = FULL):
        self.filter_mode = filter_mode
        self.restricts_actions = filter_mode != FULL

    def rank(self, ctx: PolicyContext) -> list[tuple[Action, float]]:
        actions = ablation_filter(ctx.actions, self.filter_mode)
        if not actions:
            return []
        encoded = ctx.dist.encoded[ctx.config.target_ratio]
        sigma_now: dict[int, float] = {}
        pairs = []
        for action in actions:
            sid = action.subject
            if sid not in sigma_now:
                mask = ctx.obs.masks.get(sid)
                if mask is None or not mask.any():
                    sigma_now[sid] = 0.0
                else:
                    cols = np.flatnonzero(mask.any(axis=0))
                    sigma_now[sid] = support(encoded, int(cols[0]), int(cols[-1]))
            _, extent = hypothesize_mask(ctx.state, ctx.obs, action, ctx.camera)
            sigma_next = 0.0 if extent is None else support(encoded, extent[0], extent[1])
            pairs.append((action, sigma_now[sid] - sigma_next))
        return sort_ranked(pairs)


# ---------------------------------------------------------------------------
# Baseline: rank by current mask area minus the predicted overlap of the
# post-action mask with all other masks.
# ---------------------------------------------------------------------------


class BaselinePolicy:
    needs_occupancy = False
    restricts_actions = False

    def rank(self, ctx: PolicyContext) -> list[tuple[Action, float]]:
        if not ctx.actions:
            return []
        pairs = []
        union_other: dict[int, np.ndarray] = {}
        for action in ctx.actions:
            sid = action.subject
            if sid not in union_other:
                acc = np.zeros(ctx.obs.depth.shape, dtype=bool)
                for oid, m in ctx.obs.masks.items():
                    if oid != sid:
                        acc |= m
                union_other[sid] = acc
            area_now = ctx.obs.mask_area(sid)
            predicted, _ = hypothesize_mask(ctx.state, ctx.obs, action, ctx.camera)
            overlap = int((predicted & union_other[sid]).sum())
            pairs.append((action, float(area_now - overlap)))
        return sort_ranked(pairs)


# ---------------------------------------------------------------------------
# MCTSSS: Monte Carlo sampling over three-outcome image evolution.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MctsConfig:
    k_max: int = 2
    rollouts: int = 500
    gamma: float = 0.9

    def __post_init__(self):
        if self.k_max < 1 or self.rollouts < 1:
            raise ValueError("k_max and rollouts must be at least 1")


class _RolloutNode:
    """Interior rollout state: a predicted image plus everything derived."""

    __slots__ = ("depth", "masks", "encoded", "scene", "actions", "_probs", "_children", "_ctxdata")

    def __init__(self, depth, masks, encoded, ctxdata):
        self.depth = depth
        self.masks = masks
        self.encoded = encoded
        self._ctxdata = ctxdata  # (camera, shelf, bins, shapes, grid, target_ratio)
        camera, shelf, bins, shapes, grid, _ = ctxdata
        self.scene = reconstruct_scene(depth, masks, camera, shelf)
        self.actions = gen_all(self.scene, None, bins)
        self._probs: dict[int, tuple[float, float, float]] = {}
        self._children: dict[tuple[int, str], "_RolloutNode"] = {}

    def probs(self, idx: int):
        got = self._probs.get(idx)
        if got is None:
            subject = self.actions[idx].subject
            mask = self.masks.get(subject)
            cols = (
                mask.any(axis=0)
                if mask is not None
                else np.zeros(self.depth.shape[1], dtype=bool)
            )
            got = outcome_probabilities(self.encoded, cols, self._ctxdata[5])
            self._probs[idx] = got
        return got

    def child(self, idx: int, outcome: str) -> "_RolloutNode":
        got = self._children.get((idx, outcome))
        if got is None:
            camera, shelf, bins, shapes, grid, _ = self._ctxdata
            action = self.actions[idx]
            subject = self.scene.object_by_id(action.subject)
            predicted = predict_depth_after(
                self, camera, shelf, action.subject, subject.shape, action.place_pose, outcome
            )
            current = compute_occupancy_fast(predicted.depth, shapes, grid, camera, shelf)
            got = _RolloutNode(
                predicted.depth,
                predicted.masks,
                encode_history(current, self.encoded),
                self._ctxdata,
            )
            self._children[(idx, outcome)] = got
        return got


class MctsssPolicy:
    needs_occupancy = True
    restricts_actions = False

    def __init__(self, cfg: MctsConfig | None = None):
        self.cfg = cfg or MctsConfig()

    def rank(self, ctx: PolicyContext) -> list[tuple[Action, float]]:
        actions = ctx.actions
        if not actions:
            return []
        cfg = self.cfg
        rng = ctx.rng
        n = len(actions)
        scores = np.zeros(n, dtype=np.float64)
        encoded_root = ctx.dist.encoded
        ctxdata = (
            ctx.camera,
            ctx.state.shelf,
            ctx.config.bins,
            ctx.config.target_shapes,
            ctx.config.grid,
            ctx.config.target_ratio,
        )

        root_probs: dict[int, tuple[float, float, float]] = {}
        root_children: dict[tuple[int, str], _RolloutNode] = {}

        def root_prob(i: int):
            got = root_probs.get(i)
            if got is None:
                mask = ctx.obs.masks.get(actions[i].subject)
                cols = (
                    mask.any(axis=0)
                    if mask is not None
                    else np.zeros(ctx.camera.width, dtype=bool)
                )
                got = outcome_probabilities(encoded_root, cols, ctx.config.target_ratio)
                root_probs[i] = got
            return got

        def root_child(i: int, outcome: str) -> _RolloutNode:
            got = root_children.get((i, outcome))
            if got is None:
                action = actions[i]
                subject = ctx.state.object_by_id(action.subject)
                predicted = predict_depth_after(
                    ctx.obs,
                    ctx.camera,
                    ctx.state.shelf,
                    action.subject,
                    subject.shape,
                    action.place_pose,
                    outcome,
                )
                current = compute_occupancy_fast(
                    predicted.depth, ctx.config.target_shapes, ctx.config.grid,
                    ctx.camera, ctx.state.shelf,
                )
                got = _RolloutNode(
                    predicted.depth,
                    predicted.masks,
                    encode_history(current, encoded_root),
                    ctxdata,
                )
                root_children[(i, outcome)] = got
            return got

        for _ in range(cfg.rollouts):
            i = int(rng.integers(n))
            p1, p2, _ = root_prob(i)
            u = rng.random()
            if u < p1:
                scores[i] += cfg.gamma
                continue
            if cfg.k_max < 2:
                continue
            outcome = BACKWALL if u < p1 + p2 else HALFWAY
            node = root_child(i, outcome)
            depth_k = 1
            while depth_k < cfg.k_max:
                if not node.actions:
                    break
                j = int(rng.integers(len(node.actions)))
                q1, q2, _ = node.probs(j)
                u2 = rng.random()
                if u2 < q1:
                    scores[i] += cfg.gamma ** (depth_k + 1)
                    break
                if depth_k + 1 >= cfg.k_max:
                    break
                node = node.child(j, BACKWALL if u2 < q1 + q2 else HALFWAY)
                depth_k += 1

        return sort_ranked([(a, float(scores[i])) for i, a in enumerate(actions)])


# ---------------------------------------------------------------------------
# Oracle: minimum-length plan search over the true state.
# ---------------------------------------------------------------------------


class OracleNoPlanError(RuntimeError):
    """No revealing sequence found within the horizon."""


def _target_window(state: SceneState, camera: CameraSpec):
    target = state.target
    rows, cols = _window_of(target.shape, target.x, target.y, target.z, camera)
    t_target = shape_hit_depths(target.shape, target.x, target.y, target.z, camera, cols, rows)
    return rows, cols, t_target, np.isfinite(t_target)


def oracle_visibility(state: SceneState, camera: CameraSpec) -> float:
    """Target visibility computed inside the target's own projection window."""
    rows, cols, t_target, silhouette = _target_window(state, camera)
    full = int(silhouette.sum())
    if full == 0:
        return 0.0
    occluded = np.zeros_like(silhouette)
    for o in state.objects:
        if o.is_target:
            continue
        t_o = shape_hit_depths(o.shape, o.x, o.y, o.z, camera, cols, rows)
        occluded |= silhouette & (t_o < t_target)
    return 1.0 - occluded.sum() / full


def _blockers(state: SceneState, camera: CameraSpec) -> list[int]:
    """Objects occluding at least one target pixel, ordered by pixels hidden."""
    rows, cols, t_target, silhouette = _target_window(state, camera)
    counts = []
    for o in state.objects:
        if o.is_target:
            continue
        t_o = shape_hit_depths(o.shape, o.x, o.y, o.z, camera, cols, rows)
        hidden = int((silhouette & (t_o < t_target)).sum())
        if hidden > 0:
            counts.append((hidden, o.id))
    counts.sort(reverse=True)
    return [oid for _, oid in counts]


def _quantized_key(state: SceneState, bins: BinningSpec):
    shelf = state.shelf
    step = shelf.width / bins.bins
    third = shelf.depth / 3.0
    poses = []
    for o in sorted(state.objects, key=lambda o: o.id):
        xb = min(bins.bins - 1, max(0, int((o.x - shelf.x_min) / step)))
        yb = min(2, max(0, int((o.y - shelf.y_back) / third)))
        poses.append((o.id, xb, yb))
    return tuple(poses), tuple(state.stacks.as_pairs())


def _actions_for_subjects(state: SceneState, bins: BinningSpec, subjects: set[int]) -> list[Action]:
    return [a for a in gen_all(state, None, bins) if a.subject in subjects]


def _try(state: SceneState, action: Action) -> SceneState | None:
    try:
        return apply(state, action)
    except InfeasibleActionError:
        return None


def oracle_plan(
    state: SceneState,
    camera: CameraSpec,
    config,
    max_nodes: int = 4000,
) -> list[Action]:
    """Shortest revealing action sequence within the horizon.

    Levels 1 and 2 are exhaustive: the final action of any minimal plan must
    move a current blocker (visibility can only increase by moving an
    occluding surface), so level-2 search is stage-1 over all actions and
    stage-2 over blocker actions without loss. Deeper plans use breadth-first
    search over quantized states with a node budget, then a greedy
    visibility-maximizing fallback.
    """
    threshold = config.visibility_threshold
    horizon = config.horizon
    bins = config.bins
    if oracle_visibility(state, camera) >= threshold:
        return []
    if horizon < 1:
        raise OracleNoPlanError("horizon exhausted")

    # Level 1: any single blocker move that reveals.
    root_blockers = set(_blockers(state, camera))
    level1 = _actions_for_subjects(state, bins, root_blockers)
    for a in level1:
        s1 = _try(state, a)
        if s1 is not None and oracle_visibility(s1, camera) >= threshold:
            return [a]

    if horizon >= 2:
        all_root = gen_all(state, None, bins)
        for a in all_root:
            s1 = _try(state, a)
            if s1 is None:
                continue
            b1 = set(_blockers(s1, camera))
            for b in _actions_for_subjects(s1, bins, b1):
                s2 = _try(s1, b)
                if s2 is not None and oracle_visibility(s2, camera) >= threshold:
                    return [a, b]

    if horizon >= 3:
        # Breadth-first over quantized states, depth 3..horizon, bounded.
        visited = {_quantized_key(state, bins)}
        queue = deque([(state, [])])
        expanded = 0
        while queue and expanded < max_nodes:
            cur, path = queue.popleft()
            if len(path) + 1 > horizon:
                continue
            expanded += 1
            for a in gen_all(cur, None, bins):
                nxt = _try(cur, a)
                if nxt is None:
                    continue
                if oracle_visibility(nxt, camera) >= threshold:
                    return path + [a]
                key = _quantized_key(nxt, bins)
                if key in visited or len(path) + 2 > horizon:
                    continue
                visited.add(key)
                queue.append((nxt, path + [a]))

        # Greedy fallback: maximize visibility per step, never revisit.
        plan: list[Action] = []
        cur = state
        seen = {_quantized_key(cur, bins)}
        while len(plan) < horizon:
            best = None
            for a in gen_all(cur, None, bins):
                nxt = _try(cur, a)
                if nxt is None:
                    continue
                key = _quantized_key(nxt, bins)
                if key in seen:
                    continue
                v = oracle_visibility(nxt, camera)
                if best is None or v > best[0]:
                    best = (v, a, nxt, key)
            if best is None:
                break
            _, a, cur, key = best
            seen.add(key)
            plan.append(a)
            if oracle_visibility(cur, camera) >= threshold:
                return plan

    raise OracleNoPlanError(f"no revealing sequence within {horizon} steps")


class OraclePolicy:
    needs_occupancy = False
    restricts_actions = False

    def __init__(self, max_nodes: int = 4000):
        self.max_nodes = max_nodes

    def rank(self, ctx: PolicyContext) -> list[tuple[Action, float]]:
        plan = oracle_plan(ctx.state, ctx.camera, ctx.config, self.max_nodes)
        if not plan:
            # Already revealed; the episode loop terminates before asking, so
            # reaching here means the window test and full render disagree on
            # a boundary pixel. Fall back to the first action deterministically.
            return sort_ranked([(a, 0.0) for a in ctx.actions])[:1]
        return [(plan[0], -float(len(plan)))]


# ---------------------------------------------------------------------------
# Scene preprocessing for the destacked ablation.
# ---------------------------------------------------------------------------


def preprocess_destack_all(state: SceneState, bins: BinningSpec) -> SceneState:
    """Greedily destack until no stacks remain or no destack is feasible."""
    from .actions import gen_destacks

    while True:
        stacked = [o.id for o in state.objects if not state.stacks.on_shelf(o.id)]
        if not stacked:
            return state
        options = gen_destacks(state, None, bins)
        done = False
        for a in options:
            nxt = _try(state, a)
            if nxt is not None:
                state = nxt
                done = True
                break
        if not done:
            return state  # insufficient space


# ---------------------------------------------------------------------------
# Registry.
# ---------------------------------------------------------------------------

POLICY_NAMES = (
    "darss",
    "mctsss",
    "baseline",
    "oracle",
    "darss-nostack",
    "darss-nodestack",
    "dar",
    "dar-destacked",
)


def make_policy(name: str, mcts: MctsConfig | None = None):
    """Instantiate a policy by its benchmark name."""
    if name == "darss":
        return DarssPolicy(FULL)
    if name == "darss-nostack":
        return DarssPolicy(NO_STACK)
    if name == "darss-nodestack":
        return DarssPolicy(NO_DESTACK)
    if name == "dar":
        return DarssPolicy(DAR)
    if name == "dar-destacked":
        policy = DarssPolicy(DAR_DESTACKED_PREPROCESS)
        policy.preprocess = True
        return policy
    if name == "mctsss":
        return MctsssPolicy(mcts)
    if name == "baseline":
        return BaselinePolicy()
    if name == "oracle":
        return OraclePolicy()
    raise ValueError(f"unknown policy {name!r}")
