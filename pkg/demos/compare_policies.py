"""Race the four search policies on the same generated scenes.

Usage: python3 demos/compare_policies.py [n_occluders] [trials]
"""

import sys
import time

import numpy as np

from staxray import (
    CameraSpec,
    EpisodeConfig,
    GeneratorConfig,
    generate_scene,
    make_policy,
    run_episode,
)
from staxray.bench import episode_seed, scene_seed

n = int(sys.argv[1]) if len(sys.argv) > 1 else 8
trials = int(sys.argv[2]) if len(sys.argv) > 2 else 3
camera = CameraSpec()

scenes = [
    generate_scene(GeneratorConfig(n_occluders=n), scene_seed(0, n, t))
    for t in range(trials)
]
print(f"{trials} scenes with {n} occluders each\n")
print(f"{'policy':<10} {'solved':>6} {'median steps':>13} {'s/action':>9}")

for name in ("oracle", "darss", "mctsss", "baseline"):
    steps, solved, secs = [], 0, []
    for t, scene in enumerate(scenes):
        config = EpisodeConfig(horizon=2 * n, seed=episode_seed(0, n, t, name))
        started = time.perf_counter()
        rec = run_episode(scene, make_policy(name), config, camera)
        elapsed = time.perf_counter() - started
        solved += rec.success
        steps.append(rec.steps if rec.success else 2 * n)
        if rec.steps:
            secs.append(elapsed / rec.steps)
    print(f"{name:<10} {solved:>3}/{trials:<2} {np.median(steps):>13.1f} "
          f"{np.mean(secs):>9.2f}")
