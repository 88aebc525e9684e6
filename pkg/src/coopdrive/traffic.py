"""World advancement: HDV behavior, CAV action application, collisions,
spawning and despawning.

HDVs follow a Krauss safe-speed car-following law with bounded deceleration
and a two-rule lane-change heuristic (strategic pull toward the lane their
intention requires, tactical change for a clear speed gain).  `step` is a
pure function: it copies the world, delegates to the compiled kernel and
returns the successor plus the step's events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import ContractViolation
from .kinematics import (
    ACCEL_CMD,
    LC_DURATION,
    V_MAX,
    VEHICLE_LENGTH,
    DiscreteAction,
    JointAction,
    Lateral,
    VehicleKind,
    VehicleState,
    WorldState,
    _row_to_vehicle,
)

SENSING_RADIUS = 50.0   # [m] closed-ball local observation range


@dataclass(frozen=True)
class HdvParams:
    b_decel: float = 9.0        # [m/s^2] braking capability assumed by the safe-speed law
    t_react: float = 1.1        # [s] driver reaction time
    eps_imperfection: float = 0.5
    v_max: float = V_MAX
    a_free: float = 2.5         # [m/s^2] free-flow acceleration
    lc_gain: float = 2.0        # [m/s] tactical lane-change speed-gain threshold

    def __post_init__(self):
        if min(self.b_decel, self.t_react, self.v_max, self.a_free) <= 0:
            raise ValueError("HDV parameters must be positive")
        if not 0.0 <= self.eps_imperfection <= 1.0:
            raise ValueError("eps_imperfection must lie in [0, 1]")


@dataclass(frozen=True)
class SpawnConfig:
    arrival_rate_per_lane: float = 0.1   # [vehicles/s]
    cav_fraction: float = 0.4
    v0_min: float = 8.0
    v0_max: float = 12.0
    min_spawn_gap_m: float = 10.0

    def __post_init__(self):
        if self.arrival_rate_per_lane < 0:
            raise ValueError("arrival_rate_per_lane must be nonnegative")
        if not 0.0 <= self.cav_fraction <= 1.0:
            raise ValueError("cav_fraction must lie in [0, 1]")
        if not 0.0 <= self.v0_min <= self.v0_max <= V_MAX:
            raise ValueError("v0 range must lie within [0, v_max]")


@dataclass
class StepOutcome:
    next_state: WorldState
    collisions: list[tuple[int, int]] = field(default_factory=list)
    despawned: list[tuple[int, bool]] = field(default_factory=list)
    spawned: list[int] = field(default_factory=list)
    lane_changes: list[int] = field(default_factory=list)


@dataclass
class Observation:
    own: VehicleState
    neighbors: list[VehicleState]   # egocentric x/y offsets within the radius


def hdv_follow_speed(self_v: VehicleState, leader: VehicleState | None,
                     p: HdvParams, dt: float, u: float = 0.0) -> float:
    """Krauss safe-speed update for one follower.

    `u` is the uniform(ary) imperfection draw in [0, 1); the simulator feeds
    it from the world RNG stream.  Without a leader the safe speed is
    unbounded.  The result is not decel-clamped here; `step` bounds the drop
    at b_decel*dt.
    """
    if leader is None:
        return K.krauss_speed(self_v.v_x, False, 0.0, 0.0, p.b_decel, p.t_react,
                              p.eps_imperfection, p.a_free, p.v_max, dt, u)
    gap = leader.x_m - self_v.x_m - VEHICLE_LENGTH
    return K.krauss_speed(self_v.v_x, True, leader.v_x, gap, p.b_decel, p.t_react,
                          p.eps_imperfection, p.a_free, p.v_max, dt, u)


def hdv_lane_change_decision(self_v: VehicleState, neighbors: list[VehicleState],
                             p: HdvParams, world: WorldState | None = None,
                             dt: float = 0.1) -> Lateral:
    """Lateral action for one HDV given its local neighborhood.

    Strategic rule: when the current lane does not permit the intention, move
    one lane toward the target lane provided the reaction-time gaps hold
    (follower gap > v_follower*t_react, leader gap > v_self*t_react).
    Tactical rule: otherwise change only for a free-speed gain above lc_gain
    into a lane that still permits the intention.
    """
    geometry = world.geometry if world is not None else None
    from .kinematics import RoadGeometry

    geometry = geometry or RoadGeometry()
    S = np.zeros((K.MAXV, K.NF))
    from .kinematics import _vehicle_to_row

    _vehicle_to_row(self_v, S[0])
    n = 1
    for v in neighbors:
        _vehicle_to_row(v, S[n])
        n += 1
    code = K.hdv_lane_decision(S, n, 0, geometry.permission_table(), geometry.lane_count,
                               VEHICLE_LENGTH, p.b_decel, p.t_react, p.a_free,
                               p.v_max, p.lc_gain, dt)
    return Lateral(code)


def _action_arrays(world: WorldState, cav_actions: JointAction) -> tuple[np.ndarray, np.ndarray]:
    ids = set(world.cav_ids())
    if set(cav_actions) != ids:
        raise ContractViolation(
            f"action keys {sorted(cav_actions)} do not match CAV ids {sorted(ids)}")
    act_lat = np.full(K.MAXV, -1, dtype=np.int8)
    act_long = np.full(K.MAXV, -1, dtype=np.int8)
    for i in range(world._n):
        if world._S[i, K.C_KIND] == K.KIND_CAV:
            a = cav_actions[int(world._S[i, K.C_ID])]
            act_lat[i] = int(a.lateral)
            act_long[i] = int(a.longitudinal)
    return act_lat, act_long


def _step_arrays(world: WorldState, act_lat: np.ndarray, act_long: np.ndarray,
                 spawn: SpawnConfig, p: HdvParams):
    """Advance `world` in place through the kernel; returns raw event buffers."""
    g = world.geometry
    ev_coll = np.empty(2 * K.MAXV)
    ev_desp_id = np.empty(K.MAXV)
    ev_desp_ok = np.empty(K.MAXV)
    ev_spawn = np.empty(K.MAXV)
    ev_lc = np.empty(K.MAXV)
    p_arrival = 1.0 - math.exp(-spawn.arrival_rate_per_lane * world.dt_s)
    n, next_id, n_coll, n_desp, n_spawn, n_lc = K.step_world(
        world._S, world._n, world.next_id, world.step_index, world.seed, world.dt_s,
        g.length_m, g.lane_count, g.lane_width_m, g.permission_table(),
        V_MAX, ACCEL_CMD, LC_DURATION, VEHICLE_LENGTH,
        p.b_decel, p.t_react, p.eps_imperfection, p.a_free, p.lc_gain,
        p_arrival, spawn.cav_fraction, spawn.v0_min, spawn.v0_max, spawn.min_spawn_gap_m,
        act_lat, act_long,
        ev_coll, ev_desp_id, ev_desp_ok, ev_spawn, ev_lc)
    world._n = n
    world.next_id = next_id
    world.step_index += 1
    world.t_s += world.dt_s
    collisions = [(int(ev_coll[2 * k]), int(ev_coll[2 * k + 1])) for k in range(n_coll)]
    despawned = [(int(ev_desp_id[k]), bool(ev_desp_ok[k])) for k in range(n_desp)]
    spawned = [int(ev_spawn[k]) for k in range(n_spawn)]
    lane_changes = [int(ev_lc[k]) for k in range(n_lc)]
    return collisions, despawned, spawned, lane_changes


def step(world: WorldState, cav_actions: JointAction, spawn: SpawnConfig | None = None,
         p: HdvParams | None = None) -> StepOutcome:
    """Advance the world one decision interval.

    Phases run in a fixed order: HDV lane decisions, HDV speeds, kinematics,
    collision detection (same-lane or laterally overlapping within half a
    lane width, longitudinal overlap under one vehicle length), despawning at
    the road end with a success flag, Poisson spawning with min-gap rejection.
    Raises ContractViolation when the action keys do not match the CAV ids.
    """
    spawn = spawn or SpawnConfig()
    p = p or HdvParams()
    act_lat, act_long = _action_arrays(world, cav_actions)
    nxt = world.copy()
    collisions, despawned, spawned, lane_changes = _step_arrays(nxt, act_lat, act_long, spawn, p)
    return StepOutcome(next_state=nxt, collisions=collisions, despawned=despawned,
                       spawned=spawned, lane_changes=lane_changes)


def observe(world: WorldState, vid: int, radius: float = SENSING_RADIUS) -> Observation:
    """Local observation for one vehicle: itself plus every vehicle within
    the closed longitudinal ball of `radius`, positions made egocentric."""
    own = world.vehicle(vid)
    neighbors = []
    for i in range(world._n):
        if world._S[i, K.C_ID] == vid:
            continue
        if abs(world._S[i, K.C_X] - own.x_m) <= radius:
            v = _row_to_vehicle(world._S[i])
            v.x_m -= own.x_m
            v.y_m -= own.y_m
            neighbors.append(v)
    return Observation(own=own, neighbors=neighbors)


def nearest_leader(world: WorldState, vid: int) -> VehicleState | None:
    """Nearest same-lane vehicle ahead (lane-change targets included)."""
    for i in range(world._n):
        if world._S[i, K.C_ID] == vid:
            j = K.leader_in_lane(world._S, world._n, i, world._S[i, K.C_LANE])
            return _row_to_vehicle(world._S[j]) if j >= 0 else None
    raise KeyError(f"no vehicle with id {vid}")
