"""Planar pushing world with variable mass, friction, and shape.

A point effector is position-controlled across a 0.6 m square table; the
object is a rigid occupancy grid. One step lasts 0.8 s:

1. the effector travels along its commanded displacement at constant
   speed; the first contact against the object's occupancy (at the pose
   held at the start of the step) is found by sampling the path at 0.1
   cell resolution;
2. at contact the object receives the impulse dv = u * m_e/(m+m_e) * n
   and the angular impulse cross(c - p, m*dv)/I about its centre of mass;
3. if the effector's final position still penetrates the object, the
   object is translated minimally along the push direction (quasi-static
   regime);
4. the object slides freely for the remaining time: speed decays at
   mu*g, spin decays at mu*g/r_gyr, both integrated in closed form and
   clamped to exactly zero at their stopping times.

Mass and friction are rescaled from simulator-style units (mass
[300, 1000] -> kg [0.3, 1.0], friction [8e-4, 12e-4] -> [0.008, 0.012],
both scaled by 1e-3 and 10 respectively) so that one push produces
centimetre-scale motion within a step.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .shapes import (CELL_SIZE, GRID_N, TRAIN_SHAPES, TEST_SHAPES,
                     occupied_cell_offsets, shape_grid)

TABLE_SIZE = 0.6
PUSH_DT = 0.8
EFFECTOR_MASS = 0.5
GRAVITY = 9.81
CONTACT_RES = 0.1 * CELL_SIZE
MASS_RANGE = (0.3, 1.0)
MU_RANGE = (0.008, 0.012)
ACTION_MAG_RANGE = (0.03, 0.06)
PUSH_STATE_DIM = 8   # p(2), theta, v(2), omega, e(2)
PUSH_ACTION_DIM = 2


def wrap_angle(x):
    """Wrap to (-pi, pi]."""
    y = x - 2.0 * np.pi * np.round(x / (2.0 * np.pi))
    if np.ndim(y) == 0:
        return float(y + 2.0 * np.pi) if y <= -np.pi else float(y)
    return np.where(y <= -np.pi, y + 2.0 * np.pi, y)


@dataclass(frozen=True)
class PushSystem:
    """Hidden physical parameters of one pushing instance."""

    mass: float
    mu: float
    shape_id: tuple
    grid: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not (self.grid > 0.5).any():
            raise ValueError("occupancy grid is empty")
        offsets = occupied_cell_offsets(self.grid)
        object.__setattr__(self, "_offsets", offsets)
        # centre of mass relative to the grid centre, metres
        rows, cols = np.nonzero(self.grid > 0.5)
        com = np.array([(cols - (GRID_N - 1) / 2).mean(),
                        (rows - (GRID_N - 1) / 2).mean()]) * CELL_SIZE
        object.__setattr__(self, "com_offset", com)
        mean_sq = float((offsets ** 2).sum(axis=1).mean())
        inertia = self.mass * (CELL_SIZE ** 2 / 6.0 + mean_sq)
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(self, "gyration_radius", math.sqrt(inertia / self.mass))
        object.__setattr__(self, "bounding_radius",
                           float(np.linalg.norm(offsets, axis=1).max())
                           + CELL_SIZE * math.sqrt(2.0) / 2.0)


@dataclass(frozen=True)
class PushState:
    """Object pose/velocities plus effector position; 8 numbers."""

    p: np.ndarray
    theta: float
    v: np.ndarray
    omega: float
    e: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.array([self.p[0], self.p[1], self.theta,
                         self.v[0], self.v[1], self.omega,
                         self.e[0], self.e[1]])

    @staticmethod
    def from_vector(vec) -> "PushState":
        vec = np.asarray(vec, dtype=np.float64)
        return PushState(p=vec[0:2].copy(), theta=float(vec[2]),
                         v=vec[3:5].copy(), omega=float(vec[5]),
                         e=vec[6:8].copy())


@dataclass(frozen=True)
class PushAction:
    """Effector displacement over one step; magnitude 3-6 cm when sampled."""

    delta: np.ndarray

    @staticmethod
    def sampled(rng: np.random.Generator, direction) -> "PushAction":
        mag = rng.uniform(*ACTION_MAG_RANGE)
        return PushAction(delta=mag * np.asarray(direction))


def moment_of_inertia(sys: PushSystem) -> float:
    """Second moment of the occupied cells about the centre of mass,
    treating each cell as a uniform square plate of the object's material."""
    return sys.inertia


def cross2(a, b) -> float:
    """z-component of the planar cross product."""
    return float(a[0] * b[1] - a[1] * b[0])


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def points_in_object(sys: PushSystem, p, theta, points) -> np.ndarray:
    """Occupancy test for world points against the object at pose (p, theta)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    rel = (pts - np.asarray(p)) @ _rot(theta)  # world -> object frame (R^-1 x)
    grid_xy = rel + sys.com_offset             # relative to the grid centre
    cols = np.floor(grid_xy[:, 0] / CELL_SIZE + GRID_N / 2.0).astype(int)
    rows = np.floor(grid_xy[:, 1] / CELL_SIZE + GRID_N / 2.0).astype(int)
    ok = (rows >= 0) & (rows < GRID_N) & (cols >= 0) & (cols < GRID_N)
    out = np.zeros(len(pts), dtype=bool)
    occ = sys.grid > 0.5
    out[ok] = occ[rows[ok], cols[ok]]
    return out


def first_contact(sys: PushSystem, p, theta, e, delta):
    """First penetration of the effector path into the object, or None.

    Returns (path_parameter in [0, 1], contact_point). The path is sampled
    at 0.1-cell resolution; ties cannot occur (first index wins).
    """
    mag = float(np.linalg.norm(delta))
    if mag < 1e-12:
        return None
    n_samples = int(math.ceil(mag / CONTACT_RES)) + 1
    ts = np.linspace(0.0, 1.0, n_samples)
    pts = np.asarray(e) + ts[:, None] * np.asarray(delta)
    inside = points_in_object(sys, p, theta, pts)
    hits = np.flatnonzero(inside)
    if hits.size == 0:
        return None
    i = int(hits[0])
    return float(ts[i]), pts[i]


def _resolve_penetration(sys: PushSystem, p, theta, point, n) -> float:
    """Smallest translation of the object along n that frees `point`."""
    if not points_in_object(sys, p, theta, [point])[0]:
        return 0.0
    max_shift = 2.0 * GRID_N * CELL_SIZE
    shifts = np.arange(CONTACT_RES, max_shift, CONTACT_RES)
    # moving the object by +s*n equals testing the point shifted by -s*n
    pts = np.asarray(point) - shifts[:, None] * np.asarray(n)
    inside = points_in_object(sys, p, theta, pts)
    free = np.flatnonzero(~inside)
    return float(shifts[free[0]]) if free.size else float(max_shift)


def _slide(speed: float, decel: float, dt: float):
    """Closed-form decay of a speed under constant deceleration.

    Returns (distance, final_speed); the final speed is exactly zero once
    the stopping time fits in dt."""
    if speed <= 0.0 or dt <= 0.0:
        return 0.0, speed
    t_stop = speed / decel
    if t_stop <= dt:
        return speed * t_stop - 0.5 * decel * t_stop * t_stop, 0.0
    return speed * dt - 0.5 * decel * dt * dt, speed - decel * dt


def _clamp_table(pos: np.ndarray, vel: np.ndarray):
    pos = pos.copy()
    vel = vel.copy()
    for i in range(2):
        if pos[i] < 0.0:
            pos[i] = 0.0
            vel[i] = max(vel[i], 0.0)
        elif pos[i] > TABLE_SIZE:
            pos[i] = TABLE_SIZE
            vel[i] = min(vel[i], 0.0)
    return pos, vel


def push_step(sys: PushSystem, s: PushState, a) -> PushState:
    """Deterministic next state under the contact model above."""
    delta = np.asarray(a.delta if isinstance(a, PushAction) else a,
                       dtype=np.float64)
    mag = float(np.linalg.norm(delta))
    p = s.p.astype(np.float64).copy()
    theta = float(s.theta)
    v = s.v.astype(np.float64).copy()
    omega = float(s.omega)
    remaining = PUSH_DT

    hit = first_contact(sys, p, theta, s.e, delta) if mag >= 1e-12 else None
    if hit is not None:
        t_c, c = hit
        u = mag / PUSH_DT
        n = delta / mag
        dv = (u * EFFECTOR_MASS / (sys.mass + EFFECTOR_MASS)) * n
        r = c - p
        domega = cross2(r, sys.mass * dv) / sys.inertia
        v = v + dv
        omega = omega + domega
        shift = _resolve_penetration(sys, p, theta, np.asarray(s.e) + delta, n)
        p = p + shift * n
        remaining = PUSH_DT * (1.0 - t_c)

    speed = float(np.linalg.norm(v))
    if speed > 0.0:
        dist, new_speed = _slide(speed, sys.mu * GRAVITY, remaining)
        direction = v / speed
        p = p + dist * direction
        v = direction * new_speed
    if omega != 0.0:
        alpha = sys.mu * GRAVITY / sys.gyration_radius
        angle, new_rate = _slide(abs(omega), alpha, remaining)
        theta = theta + math.copysign(angle, omega)
        omega = math.copysign(new_rate, omega) if new_rate > 0.0 else 0.0

    p, v = _clamp_table(p, v)
    e = np.clip(np.asarray(s.e) + delta, 0.0, TABLE_SIZE)
    return PushState(p=p, theta=wrap_angle(theta), v=v, omega=omega, e=e)


# --- vector composition -----------------------------------------------------

THETA_IDX = 2


def compose_push(state_vec: np.ndarray, delta_vec: np.ndarray) -> np.ndarray:
    """state (+) delta: plain sums, angle wrapped to (-pi, pi]."""
    out = np.asarray(state_vec, dtype=np.float64) + np.asarray(delta_vec)
    out[THETA_IDX] = wrap_angle(state_vec[THETA_IDX] + delta_vec[THETA_IDX])
    return out


def push_delta(next_vec: np.ndarray, state_vec: np.ndarray) -> np.ndarray:
    d = np.asarray(next_vec, dtype=np.float64) - np.asarray(state_vec)
    d[THETA_IDX] = wrap_angle(next_vec[THETA_IDX] - state_vec[THETA_IDX])
    return d


def object_bbox_world(sys: PushSystem, p, theta):
    pts = np.asarray(p) + (_rot(theta) @ sys._offsets.T).T
    return pts.min(axis=0), pts.max(axis=0)


def sample_push_action(rng: np.random.Generator, sys: PushSystem,
                       s: PushState) -> PushAction:
    """Data-collection policy: probability 0.2 a fully random direction,
    0.8 a push towards a point sampled in the object's bounding box."""
    if rng.uniform() < 0.2:
        phi = rng.uniform(0.0, 2.0 * np.pi)
        direction = np.array([math.cos(phi), math.sin(phi)])
    else:
        lo, hi = object_bbox_world(sys, s.p, s.theta)
        target = rng.uniform(lo, hi)
        towards = target - s.e
        dist = np.linalg.norm(towards)
        if dist < 1e-9:
            phi = rng.uniform(0.0, 2.0 * np.pi)
            direction = np.array([math.cos(phi), math.sin(phi)])
        else:
            direction = towards / dist
    return PushAction.sampled(rng, direction)


def initial_push_state(sys: PushSystem, rng: np.random.Generator) -> PushState:
    p = rng.uniform(0.18, TABLE_SIZE - 0.18, size=2)
    theta = wrap_angle(rng.uniform(-np.pi, np.pi))
    phi = rng.uniform(0.0, 2.0 * np.pi)
    dist = rng.uniform(0.06, 0.10)
    e = p + dist * np.array([math.cos(phi), math.sin(phi)])
    e = np.clip(e, 0.0, TABLE_SIZE)
    return PushState(p=p, theta=float(theta), v=np.zeros(2), omega=0.0, e=e)


@dataclass
class Trajectory:
    """Ordered (state, action, delta) triples from one system.

    Recomposition is exact by construction: the recorded state t+1 is
    defined as compose(state_t, delta_t)."""

    system: object
    states: np.ndarray   # [T+1, state_dim]
    actions: np.ndarray  # [T, action_dim]
    deltas: np.ndarray   # [T, state_dim]
    rewards: np.ndarray | None = None

    def __len__(self):
        return self.actions.shape[0]

    def validate(self, compose=compose_push):
        for t in range(len(self)):
            recomposed = compose(self.states[t], self.deltas[t])
            if not np.array_equal(recomposed, self.states[t + 1]):
                raise AssertionError(f"trajectory inconsistent at step {t}")
        return True


def collect_push_trajectory(sys: PushSystem, rng: np.random.Generator,
                            T: int = 5) -> Trajectory:
    state = initial_push_state(sys, rng)
    states = [state.as_vector()]
    actions, deltas = [], []
    for _ in range(T):
        action = sample_push_action(rng, sys, state)
        raw_next = push_step(sys, state, action).as_vector()
        delta = push_delta(raw_next, states[-1])
        next_vec = compose_push(states[-1], delta)
        states.append(next_vec)
        actions.append(action.delta)
        deltas.append(delta)
        state = PushState.from_vector(next_vec)
    return Trajectory(system=sys, states=np.array(states),
                      actions=np.array(actions), deltas=np.array(deltas))


def sample_push_system(rng: np.random.Generator, split: str = "train",
                       shape_index: int | None = None) -> PushSystem:
    catalog = TRAIN_SHAPES if split == "train" else TEST_SHAPES
    if shape_index is None:
        shape_index = int(rng.integers(len(catalog)))
    shape_id = catalog[shape_index]
    return PushSystem(mass=float(rng.uniform(*MASS_RANGE)),
                      mu=float(rng.uniform(*MU_RANGE)),
                      shape_id=shape_id,
                      grid=shape_grid(shape_id))
