"""Watch the occupancy distribution narrow as actions rule out hiding spots.

The engine enumerates every pose where the hidden target could stand, keeps
the per-column mass for three target aspect ratios, and folds observations
together with a pointwise minimum so mass can only ever shrink.
"""

import numpy as np

from staxray import (
    CameraSpec,
    CandidateGrid,
    GeneratorConfig,
    compute_occupancy,
    default_target_shapes,
    generate_scene,
    render,
)
from staxray.actions import BinningSpec, gen_all
from staxray.occupancy import encode_history
from staxray.sim import apply

BARS = " .:-=+*#%@"


def sparkline(mass: np.ndarray, width: int = 64) -> str:
    bins = np.array_split(mass, width)
    vals = np.array([b.mean() for b in bins])
    top = vals.max()
    if top <= 0:
        return " " * width
    idx = np.minimum((vals / top * (len(BARS) - 1)).astype(int), len(BARS) - 1)
    return "".join(BARS[i] for i in idx)


camera = CameraSpec()
rng = np.random.default_rng(4)
state = generate_scene(GeneratorConfig(n_occluders=6), rng)
shapes = default_target_shapes()
grid = CandidateGrid(resolution=0.02)

encoded = None
for t in range(4):
    obs = render(state, camera)
    dist = compute_occupancy(obs, shapes, grid, camera, state.shelf,
                             target_id=0, target_ratio=0)
    encoded = encode_history(dist.current, encoded)
    total = encoded[0].sum()
    print(f"t={t} visibility={obs.target_visibility:.2f} "
          f"remaining 1:1 mass={total:8.0f}")
    print(f"      |{sparkline(encoded[0])}|")
    if obs.target_visibility >= 0.8:
        print("target revealed")
        break
    # take a random feasible action just to churn the scene
    actions = gen_all(state, obs, BinningSpec())
    if not actions:
        print("no feasible actions remain")
        break
    state = apply(state, actions[int(rng.integers(len(actions)))])
