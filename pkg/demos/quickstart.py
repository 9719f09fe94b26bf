"""Build a tiny shelf scene, look at it, and let the search policy run.

Usage: python3 demos/quickstart.py [outdir]
Writes a depth image (PGM) plus the episode trace, and prints each step.
"""

import sys
from pathlib import Path

from staxray import (
    CameraSpec,
    EpisodeConfig,
    ObjectInstance,
    ObjectShape,
    SceneState,
    ShelfSpec,
    StackTree,
    make_policy,
    render,
    run_episode,
)
from staxray.render import dump_depth_pgm

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out")
out.mkdir(parents=True, exist_ok=True)

# A 0.06 m cube target hides behind a box, with a second box stacked on top
# and one more standing to the side.
shelf = ShelfSpec(width=0.80, height=0.50, depth=0.50)
target = ObjectInstance(0, ObjectShape.cuboid(0.06, 0.06, 0.06), 0.0, -0.15, 0.0,
                        is_target=True)
hider = ObjectInstance(1, ObjectShape.cuboid(0.16, 0.10, 0.12), 0.0, 0.02, 0.0)
lid = ObjectInstance(2, ObjectShape.cuboid(0.12, 0.08, 0.10), 0.0, 0.02, 0.12)
side = ObjectInstance(3, ObjectShape.cuboid(0.08, 0.08, 0.10), 0.28, 0.10, 0.0)
state = SceneState(shelf, (target, hider, lid, side), StackTree({2: 1}))

camera = CameraSpec()
obs = render(state, camera)
print(f"initial target visibility: {obs.target_visibility:.2f}")
dump_depth_pgm(obs.depth, out / "initial_depth.pgm")
print(f"depth image written to {out / 'initial_depth.pgm'}")

config = EpisodeConfig(horizon=8, seed=7)
record = run_episode(state, make_policy("darss"), config, camera,
                     trace_path=out / "trace.jsonl")

for step in record.step_records:
    a = step.action
    print(f"  t={step.t}: {a.kind.name.lower()} object {a.subject} "
          f"-> visibility {step.v_t:.2f}")
print(f"revealed={record.success} in {record.steps} steps "
      f"({record.terminal_reason}), final visibility {record.final_visibility:.2f}")
print(f"trace written to {out / 'trace.jsonl'}")
