import numpy as np

from .locomotion import (LOCO_ACTION_DIM, LOCO_STATE_DIM, LocoState,
                         LocoSystem, collect_loco_rollout, compose_loco,
                         loco_step, random_policy, sample_loco_system)
from .pushing import (ACTION_MAG_RANGE, PUSH_ACTION_DIM, PUSH_DT,
                      PUSH_STATE_DIM, TABLE_SIZE, PushAction, PushState,
                      PushSystem, Trajectory, collect_push_trajectory,
                      compose_push, first_contact, initial_push_state,
                      moment_of_inertia, object_bbox_world, points_in_object,
                      push_delta, push_step, sample_push_action,
                      sample_push_system, wrap_angle)
from .shapes import (CELL_SIZE, GRID_N, TEST_SHAPES, TRAIN_SHAPES,
                     interior_mask, occupied_cell_offsets, random_shape_id,
                     rotate_grid, shape_grid)


def sample_system(rng: np.random.Generator, env_kind: str, split: str = "train"):
    """Draw one system instance from the split's parameter ranges."""
    if env_kind == "push":
        return sample_push_system(rng, split)
    if env_kind in ("loco_slope", "loco_pier"):
        return sample_loco_system(rng, env_kind.removeprefix("loco_"), split)
    raise ValueError(f"unknown environment kind {env_kind!r}")
