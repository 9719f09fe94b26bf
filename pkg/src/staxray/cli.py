"""Command-line entry points: generate scenes, run experiments, report, replay.

Exit codes: 0 success, 1 invalid configuration, 2 scene-generation budget
exhausted, 3 internal error. STAXRAY_SEED overrides any configured seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bench
from .actions import Action
from .camera import CameraSpec
from .occupancy import CandidateGrid, default_target_shapes
from .render import render
from .scene import load_scene, save_scene
from .sim import apply as apply_action

EXIT_OK = 0
EXIT_BAD_CONFIG = 1
EXIT_GENERATION = 2
EXIT_INTERNAL = 3


def _seed_override(seed: int) -> int:
    env = os.environ.get("STAXRAY_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise SystemExit(EXIT_BAD_CONFIG)
    return seed


def cmd_generate(args) -> int:
    seed = _seed_override(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = bench.GeneratorConfig(
        n_occluders=args.n,
        target_ratio=args.ratio,
        require_full_occlusion=args.occluded,
    )
    for i in range(args.count):
        rng = bench.scene_seed(seed, args.n, i)
        state = bench.generate_scene(cfg, rng)
        path = out / f"scene_n{args.n:02d}_{i:03d}.json"
        save_scene(state, path)
        print(path)
    return EXIT_OK


def cmd_run(args) -> int:
    spec_doc = json.loads(Path(args.spec).read_text())
    spec = bench.ExperimentSpec.from_json(spec_doc)
    spec = dataclasses.replace(spec, seed=_seed_override(spec.seed))
    done = {"count": 0}

    def progress(rec):
        done["count"] += 1
        print(
            f"[{done['count']}] {rec['policy']} n={rec['n']} trial={rec['trial']} "
            f"success={rec['success']} steps={rec['steps']}",
            flush=True,
        )

    records = bench.run_experiment(spec, args.out, progress=progress if args.verbose else None)
    failures = sum(1 for r in records if r["reason"].startswith("CRASH"))
    print(f"{len(records)} trials complete ({failures} crashed)")
    return EXIT_OK


def cmd_report(args) -> int:
    records = bench.load_records(args.indir)
    if not records:
        print("no trial records found", file=sys.stderr)
        return EXIT_BAD_CONFIG
    paths = bench.write_reports(records, args.indir)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return EXIT_OK


def cmd_replay(args) -> int:
    """Re-execute a trial's trace against its scene and verify the summary."""
    record = json.loads(Path(args.trial).read_text())
    state = load_scene(record["scene"])
    camera = CameraSpec()
    lines = [json.loads(l) for l in Path(record["trace"]).read_text().splitlines() if l.strip()]
    steps = [l for l in lines if "t" in l]
    summary = next((l for l in lines if "success" in l and "t" not in l), None)

    for entry in steps:
        action = Action.from_json(json.dumps(entry["action"]))
        obs = render(state, camera)
        if abs(obs.target_visibility - entry["v_t"]) > 1e-9:
            print(f"replay mismatch at t={entry['t']}: pre-action visibility", file=sys.stderr)
            return EXIT_INTERNAL
        state = apply_action(state, action)
        print(f"t={entry['t']} {action.kind.name.lower()} subject={action.subject} "
              f"v_before={entry['v_t']:.4f}")

    final_v = render(state, camera).target_visibility
    if summary is not None and abs(final_v - summary["final_v"]) > 1e-9:
        print("replay mismatch: final visibility", file=sys.stderr)
        return EXIT_INTERNAL
    print(f"replay ok: {len(steps)} steps, final visibility {final_v:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="staxray",
                                description="shelf mechanical-search benchmark")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate benchmark scenes")
    g.add_argument("--n", type=int, required=True, help="number of occluders")
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--ratio", type=int, default=0, choices=(0, 1, 2),
                   help="target aspect ratio index (1:1, 2:1, 4:1)")
    g.add_argument("--occluded", action=argparse.BooleanOptionalAction, default=True,
                   help="require the target to start fully hidden")
    g.add_argument("--out", default="scenes")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run an experiment spec")
    r.add_argument("--spec", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--workers", type=int, default=1,
                   help="reserved; trials run sequentially and deterministically")
    r.add_argument("--verbose", action="store_true")
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="write metric CSVs from trial records")
    rep.add_argument("--in", dest="indir", required=True)
    rep.set_defaults(func=cmd_report)

    rp = sub.add_parser("replay", help="re-execute one trial from its record")
    rp.add_argument("--trial", required=True)
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_BAD_CONFIG if e.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except bench.GenerationBudgetError as e:
        print(f"generation failed: {e}", file=sys.stderr)
        return EXIT_GENERATION
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except Exception as e:
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
