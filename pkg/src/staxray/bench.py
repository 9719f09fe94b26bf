"""Scene generation, experiment orchestration, metrics, and CSV reporting.

Scenes are rejection-sampled with an adaptive blocker construction: occluders
are placed in front of the target's still-visible columns (stacking when a
single object cannot reach high enough) until the target is fully hidden,
then the remaining objects are scattered. Experiments are resumable: every
(policy, N, trial) writes its own record file and completed trials are
skipped on re-run.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .actions import BinningSpec
from .camera import CameraSpec
from .geometry import GEOM_TOL, footprints_overlap, footprint_contains, interval_overlap
from .occupancy import ASPECT_RATIOS, CandidateGrid, default_target_shapes
from .policies import MctsConfig, OracleNoPlanError, make_policy, preprocess_destack_all
from .render import render, shape_hit_depths, _window_of
from .scene import (
    SHELF,
    ObjectInstance,
    ObjectShape,
    SceneState,
    ShelfSpec,
    StackTree,
    dumps_scene,
    load_scene,
    save_scene,
    validate_scene,
)
from .sim import EpisodeConfig, run_episode

DEFAULT_SHELF = ShelfSpec(width=0.80, height=0.50, depth=0.50)
DEFAULT_CAMERA = CameraSpec()


class GenerationBudgetError(RuntimeError):
    """Rejection sampling exhausted its attempt budget for one scene."""


@dataclass(frozen=True)
class GeneratorConfig:
    n_occluders: int = 6
    target_ratio: int = 0
    target_width: float = 0.06
    require_full_occlusion: bool = True
    stack_prob: float = 0.35
    cuboid_prob: float = 0.7
    min_xy: float = 0.05
    max_xy: float = 0.13
    min_h: float = 0.06
    max_h: float = 0.20
    # Engineered cover pieces (tall-target scenes only) may exceed max_h:
    # with the camera at z=0.25 the rays grazing a 0.24-tall target's top are
    # near-horizontal, so no 0.20-tall object can ever hide it alone.
    cover_max_h: float = 0.28
    min_r: float = 0.025
    max_r: float = 0.06
    budget: int = 10_000

    def __post_init__(self):
        if self.n_occluders < 1:
            raise ValueError("need at least one occluder")
        if not 0 <= self.target_ratio < len(ASPECT_RATIOS):
            raise ValueError("bad target ratio index")


def _target_visible_region(state: SceneState, camera: CameraSpec):
    """(rows, cols, visible silhouette bool window) of the current target."""
    target = state.target
    rows, cols, t_target = None, None, None
    rows, cols = _window_of(target.shape, target.x, target.y, target.z, camera)
    t_target = shape_hit_depths(target.shape, target.x, target.y, target.z, camera, cols, rows)
    silhouette = np.isfinite(t_target)
    visible = silhouette.copy()
    for o in state.objects:
        if o.is_target:
            continue
        t_o = shape_hit_depths(o.shape, o.x, o.y, o.z, camera, cols, rows)
        visible &= ~(t_o < t_target)
    visible &= silhouette
    return rows, cols, visible


def _fits_floor(state: SceneState, shape: ObjectShape, x: float, y: float) -> bool:
    shelf = state.shelf
    hx, hy = shape.half_x, shape.half_y
    if x - hx < shelf.x_min or x + hx > shelf.x_max:
        return False
    if y - hy < shelf.y_back or y + hy > shelf.y_front:
        return False
    fp = shape.footprint(x, y)
    for o in state.objects:
        if interval_overlap(0.0, shape.height, o.z, o.z_top, GEOM_TOL) and footprints_overlap(
            fp, o.footprint(), GEOM_TOL
        ):
            return False
    return True


def _sample_shape(cfg: GeneratorConfig, rng: np.random.Generator) -> ObjectShape:
    if rng.random() < cfg.cuboid_prob:
        ex = rng.uniform(cfg.min_xy, cfg.max_xy)
        ey = rng.uniform(cfg.min_xy, cfg.max_xy)
        ez = rng.uniform(cfg.min_h, cfg.max_h)
        return ObjectShape.cuboid(ex, ey, ez)
    r = rng.uniform(cfg.min_r, cfg.max_r)
    h = rng.uniform(cfg.min_h, cfg.max_h)
    return ObjectShape.cylinder(r, h)


def _try_stack(state: SceneState, shape: ObjectShape, rng: np.random.Generator):
    """Pick a childless supporter that can hold the shape; return pose or None."""
    shelf = state.shelf
    candidates = []
    for o in state.objects:
        if o.is_target or state.stacks.has_child(o.id):
            continue
        if shape.footprint_area > o.shape.footprint_area:
            continue
        if o.z_top + shape.height > shelf.height:
            continue
        if not footprint_contains(o.footprint(), shape.footprint(o.x, o.y), GEOM_TOL):
            continue
        candidates.append(o)
    if not candidates:
        return None
    sup = candidates[int(rng.integers(len(candidates)))]
    # Jitter within the containment margin.
    if sup.shape.kind == "cuboid":
        mx = max(sup.shape.half_x - shape.half_x, 0.0)
        my = max(sup.shape.half_y - shape.half_y, 0.0)
    else:
        mx = my = 0.0
    x = sup.x + rng.uniform(-mx, mx) if mx > 0 else sup.x
    y = sup.y + rng.uniform(-my, my) if my > 0 else sup.y
    if not footprint_contains(sup.footprint(), shape.footprint(x, y), GEOM_TOL):
        x, y = sup.x, sup.y
    return sup.id, x, y, sup.z_top


def _place_blocker(
    state: SceneState,
    cfg: GeneratorConfig,
    camera: CameraSpec,
    rng: np.random.Generator,
    next_id: int,
) -> SceneState | None:
    """Place one occluder over the target's widest visible region."""
    target = state.target
    rows, cols, visible = _target_visible_region(state, camera)
    if not visible.any():
        return None
    vis_cols = np.flatnonzero(visible.any(axis=0))
    vis_rows = np.flatnonzero(visible.any(axis=1))
    t_front_target = camera.depth_of_y(target.y + target.shape.half_y)

    for _ in range(24):
        y = rng.uniform(
            min(target.y + target.shape.half_y + 0.03, state.shelf.y_front - cfg.min_xy),
            state.shelf.y_front - cfg.min_xy,
        )
        shape0 = _sample_shape(cfg, rng)
        t_blocker = camera.depth_of_y(y + shape0.half_y)
        if t_blocker <= 0 or t_blocker >= t_front_target:
            continue
        # Width needed to span the visible columns at the blocker's depth.
        u_lo = cols.start + vis_cols[0]
        u_hi = cols.start + vis_cols[-1]
        x_span_hi = camera.x_of_column(u_lo - 0.5, t_blocker)
        x_span_lo = camera.x_of_column(u_hi + 0.5, t_blocker)
        needed_w = (x_span_hi - x_span_lo) + 0.01
        width = min(max(needed_w, cfg.min_xy), cfg.max_xy + 0.03)
        # Height needed to reach the highest visible row at the blocker's depth.
        v_top = rows.start + vis_rows[0]
        needed_h = camera.z_of_row(v_top - 0.5, t_blocker) + 0.005
        height = min(max(needed_h, cfg.min_h), cfg.cover_max_h)
        shape = ObjectShape.cuboid(width, rng.uniform(cfg.min_xy, cfg.max_xy), height)

        x = 0.5 * (x_span_lo + x_span_hi) + rng.uniform(-0.01, 0.01)
        x = min(max(x, state.shelf.x_min + shape.half_x), state.shelf.x_max - shape.half_x)
        if _fits_floor(state, shape, x, y):
            obj = ObjectInstance(next_id, shape, x, y, 0.0)
            return SceneState(state.shelf, state.objects + (obj,), state.stacks)

        # Not enough floor room: try stacking a cover on an existing blocker.
        stacked = _try_stack(state, shape, rng)
        if stacked is not None:
            sup_id, sx, sy, sz = stacked
            sup = state.object_by_id(sup_id)
            if sup.y > target.y + target.shape.half_y:
                obj = ObjectInstance(next_id, shape, sx, sy, sz)
                return SceneState(
                    state.shelf,
                    state.objects + (obj,),
                    state.stacks.with_parent(next_id, sup_id),
                )
    return None


def _scatter(state: SceneState, cfg: GeneratorConfig, rng: np.random.Generator,
             next_id: int, count: int) -> SceneState | None:
    """Add `count` randomly placed occluders (floor or stacked)."""
    shelf = state.shelf
    for _ in range(count):
        shape = _sample_shape(cfg, rng)
        done = False
        if rng.random() < cfg.stack_prob:
            stacked = _try_stack(state, shape, rng)
            if stacked is not None:
                sup_id, sx, sy, sz = stacked
                state = SceneState(
                    shelf, state.objects + (ObjectInstance(next_id, shape, sx, sy, sz),),
                    state.stacks.with_parent(next_id, sup_id),
                )
                done = True
        if not done:
            for _ in range(60):
                x = rng.uniform(shelf.x_min + shape.half_x, shelf.x_max - shape.half_x)
                y = rng.uniform(shelf.y_back + shape.half_y, shelf.y_front - shape.half_y)
                if _fits_floor(state, shape, x, y):
                    state = SceneState(
                        shelf, state.objects + (ObjectInstance(next_id, shape, x, y, 0.0),),
                        state.stacks,
                    )
                    done = True
                    break
        if not done:
            return None
        next_id += 1
    return state


def generate_scene(cfg: GeneratorConfig, rng: np.random.Generator,
                   shelf: ShelfSpec = DEFAULT_SHELF,
                   camera: CameraSpec = DEFAULT_CAMERA) -> SceneState:
    """Rejection-sample a valid scene, fully hiding the target when required.

    Targets of aspect 1:1 and 2:1 are hidden by plain rejection over random
    scatters. A 4:1 target is taller than any single sampleable object, so a
    covering wall (stacked where needed) is constructed in front of it first
    and the remaining objects are scattered.
    """
    target_shape = default_target_shapes(cfg.target_width)[cfg.target_ratio]
    build_wall = target_shape.height > cfg.max_h

    for _ in range(cfg.budget):
        # Back-half target placement: shelves hide things at the back, and it
        # keeps the rejection rate workable at low N.
        hx, hy = target_shape.half_x, target_shape.half_y
        tx = rng.uniform(shelf.x_min + hx + 0.02, shelf.x_max - hx - 0.02)
        ty = rng.uniform(shelf.y_back + hy + 0.005, shelf.y_back + 0.5 * shelf.depth)
        target = ObjectInstance(0, target_shape, tx, ty, 0.0, is_target=True)
        state = SceneState(shelf, (target,))

        placed = 0
        if cfg.require_full_occlusion and build_wall:
            ok = True
            while placed < cfg.n_occluders:
                _, _, visible = _target_visible_region(state, camera)
                if not visible.any():
                    break
                grown = _place_blocker(state, cfg, camera, rng, placed + 1)
                if grown is None or placed + 1 > cfg.n_occluders:
                    ok = False
                    break
                state = grown
                placed += 1
            if not ok:
                continue
            _, _, visible = _target_visible_region(state, camera)
            if visible.any():
                continue

        state = _scatter(state, cfg, rng, placed + 1, cfg.n_occluders - placed)
        if state is None:
            continue
        if cfg.require_full_occlusion:
            _, _, visible = _target_visible_region(state, camera)
            if visible.any():
                continue
            if render(state, camera).target_visibility > 0:
                continue
        if not validate_scene(state).ok:
            continue
        return state

    raise GenerationBudgetError(
        f"no valid scene within {cfg.budget} attempts (N={cfg.n_occluders})"
    )


# ---------------------------------------------------------------------------
# Experiment orchestration.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSpec:
    policies: tuple[str, ...] = ("oracle", "darss", "mctsss", "baseline")
    ns: tuple[int, ...] = (6, 8, 10, 12, 14, 16)
    trials: int = 50
    visibility_threshold: float = 0.8
    horizon_rule: str = "2N"  # or a fixed integer encoded as str
    target_ratio: int = 0
    seed: int = 0
    bins: int = 10
    grid_resolution: float = 0.01
    mcts_k_max: int = 2
    mcts_rollouts: int = 500
    mcts_gamma: float = 0.9
    ablation_ns: tuple[int, ...] = ()  # extra Ns for any ablation policies listed

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")

    def horizon_for(self, n: int) -> int:
        if self.horizon_rule == "2N":
            return 2 * n
        return int(self.horizon_rule)

    @staticmethod
    def from_json(doc: dict) -> "ExperimentSpec":
        known = {f: doc[f] for f in doc if f in ExperimentSpec.__dataclass_fields__}
        for key in ("policies", "ns", "ablation_ns"):
            if key in known:
                known[key] = tuple(known[key])
        return ExperimentSpec(**known)


_POLICY_SEED_IDS = {
    "oracle": 0, "darss": 1, "mctsss": 2, "baseline": 3,
    "darss-nostack": 4, "darss-nodestack": 5, "dar": 6, "dar-destacked": 7,
}

ABLATION_POLICIES = ("darss", "darss-nostack", "darss-nodestack", "dar", "dar-destacked")


def scene_seed(master: int, n: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((master, n, trial)))


def episode_seed(master: int, n: int, trial: int, policy: str) -> int:
    ss = np.random.SeedSequence((master, n, trial, _POLICY_SEED_IDS[policy]))
    return int(ss.generate_state(1)[0])


def ensure_scene(out_dir: Path, spec: ExperimentSpec, n: int, trial: int,
                 camera: CameraSpec = DEFAULT_CAMERA) -> Path:
    scene_path = out_dir / "scenes" / f"n{n:02d}" / f"t{trial:03d}.json"
    if scene_path.exists():
        return scene_path
    scene_path.parent.mkdir(parents=True, exist_ok=True)
    cfg = GeneratorConfig(n_occluders=n, target_ratio=spec.target_ratio)
    state = generate_scene(cfg, scene_seed(spec.seed, n, trial), camera=camera)
    save_scene(state, scene_path)
    return scene_path


def _cells(spec: ExperimentSpec):
    for policy in spec.policies:
        ns = spec.ns
        if policy in ABLATION_POLICIES and policy != "darss" and spec.ablation_ns:
            ns = spec.ablation_ns
        for n in ns:
            for trial in range(spec.trials):
                yield policy, n, trial


def run_trial(spec: ExperimentSpec, out_dir: Path, policy_name: str, n: int, trial: int,
              camera: CameraSpec = DEFAULT_CAMERA) -> dict:
    record_path = out_dir / "records" / policy_name / f"n{n:02d}" / f"t{trial:03d}.json"
    if record_path.exists():
        return json.loads(record_path.read_text())
    record_path.parent.mkdir(parents=True, exist_ok=True)

    scene_path = ensure_scene(out_dir, spec, n, trial, camera)
    state = load_scene(scene_path)
    horizon = spec.horizon_for(n)
    config = EpisodeConfig(
        visibility_threshold=spec.visibility_threshold,
        horizon=horizon,
        bins=BinningSpec(bins=spec.bins),
        seed=episode_seed(spec.seed, n, trial, policy_name),
        target_ratio=spec.target_ratio,
        grid=CandidateGrid(resolution=spec.grid_resolution),
        target_shapes=default_target_shapes(),
    )
    policy = make_policy(
        policy_name,
        mcts=MctsConfig(spec.mcts_k_max, spec.mcts_rollouts, spec.mcts_gamma),
    )
    if getattr(policy, "preprocess", False):
        state = preprocess_destack_all(state, config.bins)

    trace_path = out_dir / "traces" / policy_name / f"n{n:02d}" / f"t{trial:03d}.jsonl"
    trace_path.parent.mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()
    doc = {
        "policy": policy_name,
        "n": n,
        "trial": trial,
        "horizon": horizon,
        "scene": str(scene_path),
        "trace": str(trace_path),
    }
    try:
        rec = run_episode(state, policy, config, camera, trace_path=trace_path)
        doc.update(
            success=rec.success,
            steps=rec.steps,
            reason=rec.terminal_reason,
            final_v=rec.final_visibility,
            seconds_total=time.perf_counter() - started,
            action_seconds=[s.wallclock_s for s in rec.step_records],
        )
    except OracleNoPlanError as e:
        doc.update(
            success=False, steps=horizon, reason=f"ORACLE_NO_PLAN: {e}",
            final_v=0.0, seconds_total=time.perf_counter() - started, action_seconds=[],
        )
    except Exception as e:  # an episode crash is a failure, never a batch abort
        doc.update(
            success=False, steps=horizon, reason=f"CRASH: {type(e).__name__}: {e}",
            final_v=0.0, seconds_total=time.perf_counter() - started, action_seconds=[],
        )
    record_path.write_text(json.dumps(doc, indent=1) + "\n")
    return doc


def run_experiment(spec: ExperimentSpec, out_dir: str | Path,
                   camera: CameraSpec = DEFAULT_CAMERA, progress=None) -> list[dict]:
    """Run all (policy, N, trial) cells; resumable, returns all records."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "spec.json").write_text(json.dumps(asdict(spec), indent=1) + "\n")
    records = []
    for policy, n, trial in _cells(spec):
        rec = run_trial(spec, out_dir, policy, n, trial, camera)
        records.append(rec)
        if progress is not None:
            progress(rec)
    return records


# ---------------------------------------------------------------------------
# Metrics and reporting.
# ---------------------------------------------------------------------------


def _quartiles(values: list[float]) -> tuple[float, float, float]:
    # Quantile convention pinned for byte-stable outputs: linear interpolation
    # between order statistics at rank h = (n+1)p, so {1,2,2,3} -> (1.25, 2, 2.75).
    q1, med, q3 = np.percentile(
        np.asarray(values, dtype=np.float64), [25, 50, 75], method="weibull"
    )
    return float(q1), float(med), float(q3)


@dataclass(frozen=True)
class MetricsRow:
    policy: str
    n: int
    trials: int
    sr: float  # percent
    steps_q1: float
    steps_median: float
    steps_q3: float
    seconds_per_action: float


def compute_metrics(records: list[dict]) -> list[MetricsRow]:
    """Per (policy, N) success rate, step quartiles (failures count the full
    horizon), and mean planning seconds per action."""
    groups: dict[tuple[str, int], list[dict]] = {}
    for rec in records:
        groups.setdefault((rec["policy"], rec["n"]), []).append(rec)
    rows = []
    for (policy, n), recs in sorted(groups.items()):
        successes = sum(1 for r in recs if r["success"])
        steps = [r["steps"] if r["success"] else r["horizon"] for r in recs]
        q1, med, q3 = _quartiles(steps)
        all_action_seconds = [s for r in recs for s in r.get("action_seconds", [])]
        mean_spa = float(np.mean(all_action_seconds)) if all_action_seconds else math.nan
        rows.append(
            MetricsRow(
                policy=policy,
                n=n,
                trials=len(recs),
                sr=100.0 * successes / len(recs),
                steps_q1=q1,
                steps_median=med,
                steps_q3=q3,
                seconds_per_action=mean_spa,
            )
        )
    return rows


def load_records(out_dir: str | Path) -> list[dict]:
    out_dir = Path(out_dir)
    records = []
    for path in sorted((out_dir / "records").rglob("t*.json")):
        records.append(json.loads(path.read_text()))
    return records


TABLE_FOOTER = (
    "# failed trials contribute the full horizon H to step quartiles\n"
    "# quartiles interpolate order statistics at rank h = (n+1)p\n"
)
MAIN_POLICIES = ("oracle", "darss", "mctsss", "baseline")


def write_reports(records: list[dict], out_dir: str | Path) -> dict[str, Path]:
    """table1.csv (policy x N metrics), table2.csv (ablation SRs), runtime.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = compute_metrics(records)

    t1 = out_dir / "table1.csv"
    with open(t1, "w") as f:
        f.write("policy,n,trials,sr,steps_median,steps_q1,steps_q3\n")
        for r in rows:
            if r.policy in MAIN_POLICIES:
                f.write(
                    f"{r.policy},{r.n},{r.trials},{r.sr:.1f},"
                    f"{r.steps_median:.2f},{r.steps_q1:.2f},{r.steps_q3:.2f}\n"
                )
        f.write(TABLE_FOOTER)

    t2 = out_dir / "table2.csv"
    with open(t2, "w") as f:
        f.write("policy,n,trials,sr\n")
        for r in rows:
            if r.policy in ABLATION_POLICIES:
                f.write(f"{r.policy},{r.n},{r.trials},{r.sr:.1f}\n")

    rt = out_dir / "runtime.csv"
    with open(rt, "w") as f:
        f.write("policy,n,seconds_per_action\n")
        for r in rows:
            if not math.isnan(r.seconds_per_action):
                f.write(f"{r.policy},{r.n},{r.seconds_per_action:.4f}\n")

    return {"table1": t1, "table2": t2, "runtime": rt}
