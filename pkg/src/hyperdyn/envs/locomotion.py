"""1-D locomotion over piecewise terrains.

Two variants: Slope (per-segment incline derived from heights sampled in
[0.5, 3.5] for training, [0, 0.25] u [3.75, 4.0] for testing; segment
length 15) and Pier (per-segment damping in [0.2, 0.8] train,
[0, 0.1] u [0.9, 1.0] test; segment length 4). Dynamics:

    v' = v + dt * (a * F_max / m - g * sin(phi(x)) - c(x) * v)
    x' = x + dt * v'
    reward = (x' - x) / dt_r - lambda * a^2
"""

from dataclasses import dataclass

import math
import numpy as np

LOCO_DT = 0.05
LOCO_MASS = 1.0
LOCO_FMAX = 2.0
LOCO_G = 1.0
LOCO_DTR = 1.0
LOCO_ACTION_PENALTY = 0.05
SLOPE_DRAG = 0.3
SLOPE_SEG_LEN = 15.0
PIER_SEG_LEN = 4.0
SLOPE_N_SEGMENTS = 24
PIER_N_SEGMENTS = 60
SLOPE_TRAIN_RANGE = (0.5, 3.5)
SLOPE_TEST_RANGES = ((0.0, 0.25), (3.75, 4.0))
PIER_TRAIN_RANGE = (0.2, 0.8)
PIER_TEST_RANGES = ((0.0, 0.1), (0.9, 1.0))
LOCO_STATE_DIM = 2
LOCO_ACTION_DIM = 1


@dataclass(frozen=True)
class LocoSystem:
    """One terrain instance: a contiguous list of per-segment parameters
    starting at x = 0 (heights for Slope, damping for Pier)."""

    variant: str  # "slope" | "pier"
    segments: np.ndarray

    def __post_init__(self):
        if self.variant not in ("slope", "pier"):
            raise ValueError(f"unknown locomotion variant {self.variant!r}")

    @property
    def segment_length(self) -> float:
        return SLOPE_SEG_LEN if self.variant == "slope" else PIER_SEG_LEN

    def segment_index(self, x: float) -> int:
        i = int(math.floor(x / self.segment_length))
        return min(max(i, 0), len(self.segments) - 1)

    def local_param(self, x: float) -> float:
        return float(self.segments[self.segment_index(x)])

    def terrain_at(self, x: float):
        """(incline angle phi, drag coefficient c) at position x."""
        if self.variant == "slope":
            height = self.local_param(x)
            return math.atan2(height, SLOPE_SEG_LEN), SLOPE_DRAG
        return 0.0, self.local_param(x)


@dataclass(frozen=True)
class LocoState:
    x: float
    v: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.x, self.v])

    @staticmethod
    def from_vector(vec) -> "LocoState":
        return LocoState(x=float(vec[0]), v=float(vec[1]))


def loco_step(sys: LocoSystem, s: LocoState, a: float):
    """One control step; returns (next state, reward)."""
    a = float(np.clip(a, -1.0, 1.0))
    phi, c = sys.terrain_at(s.x)
    v_next = s.v + LOCO_DT * (a * LOCO_FMAX / LOCO_MASS
                              - LOCO_G * math.sin(phi) - c * s.v)
    x_next = s.x + LOCO_DT * v_next
    reward = (x_next - s.x) / LOCO_DTR - LOCO_ACTION_PENALTY * a * a
    return LocoState(x=x_next, v=v_next), reward


def compose_loco(state_vec: np.ndarray, delta_vec: np.ndarray) -> np.ndarray:
    return np.asarray(state_vec, dtype=np.float64) + np.asarray(delta_vec)


def _sample_union(rng: np.random.Generator, ranges) -> float:
    widths = [hi - lo for lo, hi in ranges]
    u = rng.uniform(0.0, sum(widths))
    for (lo, hi), w in zip(ranges, widths):
        if u <= w:
            return lo + u
        u -= w
    return ranges[-1][1]


def sample_loco_system(rng: np.random.Generator, variant: str,
                       split: str = "train") -> LocoSystem:
    if variant == "slope":
        n, train_range, test_ranges = (SLOPE_N_SEGMENTS, SLOPE_TRAIN_RANGE,
                                       SLOPE_TEST_RANGES)
    else:
        n, train_range, test_ranges = (PIER_N_SEGMENTS, PIER_TRAIN_RANGE,
                                       PIER_TEST_RANGES)
    if split == "train":
        segs = rng.uniform(train_range[0], train_range[1], size=n)
    else:
        segs = np.array([_sample_union(rng, test_ranges) for _ in range(n)])
    return LocoSystem(variant=variant, segments=segs)


def collect_loco_rollout(sys: LocoSystem, policy, T: int,
                         rng: np.random.Generator):
    """Roll the policy for T steps from rest at x = 0.

    `policy(state_vec, t)` returns a scalar action in [-1, 1]; recomposition
    of the recorded (state, delta) pairs is exact by construction."""
    from .pushing import Trajectory

    state = LocoState(x=0.0, v=0.0)
    states = [state.as_vector()]
    actions, deltas, rewards = [], [], []
    for t in range(T):
        a = float(policy(states[-1], t))
        nxt, reward = loco_step(sys, state, a)
        delta = nxt.as_vector() - states[-1]
        next_vec = compose_loco(states[-1], delta)
        states.append(next_vec)
        actions.append([a])
        deltas.append(delta)
        rewards.append(reward)
        state = LocoState.from_vector(next_vec)
    return Trajectory(system=sys, states=np.array(states),
                      actions=np.array(actions), deltas=np.array(deltas),
                      rewards=np.array(rewards))


def random_policy(rng: np.random.Generator):
    return lambda state, t: rng.uniform(-1.0, 1.0)
