"""Core domain types and the single-step kinematic update.

Vehicles, worlds and actions are plain dataclasses; the world additionally
keeps its vehicles in the packed array form the compiled kernels operate on,
so conversions happen only at the API boundary.  Worlds are values: stepping
never mutates its input.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .errors import ContractViolation


class Intention(enum.IntEnum):
    LEFT = K.INT_LEFT
    STRAIGHT = K.INT_STRAIGHT
    RIGHT = K.INT_RIGHT


class VehicleKind(enum.IntEnum):
    HDV = K.KIND_HDV
    CAV = K.KIND_CAV


class Lateral(enum.IntEnum):
    LC = K.LAT_LC   # change left (toward higher lane index)
    LK = K.LAT_LK
    RC = K.LAT_RC   # change right (toward lane 0)


class Longitudinal(enum.IntEnum):
    AC = K.LONG_AC
    MT = K.LONG_MT
    DC = K.LONG_DC


@dataclass(frozen=True)
class DiscreteAction:
    lateral: Lateral
    longitudinal: Longitudinal

    @property
    def index(self) -> int:
        return int(self.lateral) * 3 + int(self.longitudinal)


#: The full 9-element action space, in canonical index order.
ALL_ACTIONS = tuple(
    DiscreteAction(lat, lon) for lat in Lateral for lon in Longitudinal
)

#: Joint action: one DiscreteAction per CAV id currently in the zone.
JointAction = dict[int, DiscreteAction]

V_MAX = 30.0            # [m/s]
A_MAX_CAV = 3.5         # [m/s^2] CAV acceleration bound
ACCEL_CMD = 2.5         # [m/s^2] magnitude commanded by AC/DC
LC_DURATION = 1.0       # [s] lane-change duration
VEHICLE_LENGTH = 5.0    # [m]


def _default_permissions(lane_count: int) -> tuple[frozenset[Intention], ...]:
    """Lane 0 permits right turns, the top lane left turns, all permit straight."""
    perms = []
    for lane in range(lane_count):
        allowed = {Intention.STRAIGHT}
        if lane == 0:
            allowed.add(Intention.RIGHT)
        if lane == lane_count - 1:
            allowed.add(Intention.LEFT)
        perms.append(frozenset(allowed))
    return tuple(perms)


@dataclass(frozen=True)
class RoadGeometry:
    length_m: float = 250.0
    lane_count: int = 4
    lane_width_m: float = 3.2
    lane_permissions: tuple[frozenset[Intention], ...] = ()

    def __post_init__(self):
        if self.length_m <= 0:
            raise ValueError("length_m must be positive")
        if self.lane_count < 2:
            raise ValueError("lane_count must be at least 2")
        if not self.lane_permissions:
            object.__setattr__(self, "lane_permissions", _default_permissions(self.lane_count))
        if len(self.lane_permissions) != self.lane_count:
            raise ValueError("lane_permissions must have one entry per lane")
        if any(not p for p in self.lane_permissions):
            raise ValueError("every lane must permit at least one intention")

    def permits(self, lane: int, intention: Intention) -> bool:
        return intention in self.lane_permissions[lane]

    def permission_table(self) -> np.ndarray:
        """lane x intention boolean table in the kernels' int8 form."""
        tbl = np.zeros((self.lane_count, 3), dtype=np.int8)
        for lane, perms in enumerate(self.lane_permissions):
            for it in perms:
                tbl[lane, int(it)] = 1
        return tbl


@dataclass(slots=True)
class VehicleState:
    id: int
    kind: VehicleKind
    x_m: float
    lane: int
    y_m: float
    v_x: float
    v_y: float
    a_x: float
    intention: Intention
    y_targ_lane: int
    t_since_lc_s: float = 0.0
    lc_in_progress: tuple[int, float] | None = None   # (target lane, remaining s)
    degraded: bool = False


def _vehicle_to_row(v: VehicleState, row: np.ndarray) -> None:
    row[K.C_ID] = v.id
    row[K.C_KIND] = int(v.kind)
    row[K.C_X] = v.x_m
    row[K.C_Y] = v.y_m
    row[K.C_LANE] = v.lane
    row[K.C_VX] = v.v_x
    row[K.C_VY] = v.v_y
    row[K.C_AX] = v.a_x
    row[K.C_INT] = int(v.intention)
    row[K.C_YT] = v.y_targ_lane
    row[K.C_TLC] = v.t_since_lc_s
    if v.lc_in_progress is None:
        row[K.C_LCT] = -1.0
        row[K.C_LCR] = 0.0
    else:
        row[K.C_LCT] = v.lc_in_progress[0]
        row[K.C_LCR] = v.lc_in_progress[1]
    row[K.C_FLAG] = 1.0 if v.degraded else 0.0


def _row_to_vehicle(row: np.ndarray) -> VehicleState:
    lcr = row[K.C_LCR]
    return VehicleState(
        id=int(row[K.C_ID]),
        kind=VehicleKind(int(row[K.C_KIND])),
        x_m=row[K.C_X],
        lane=int(row[K.C_LANE]),
        y_m=row[K.C_Y],
        v_x=row[K.C_VX],
        v_y=row[K.C_VY],
        a_x=row[K.C_AX],
        intention=Intention(int(row[K.C_INT])),
        y_targ_lane=int(row[K.C_YT]),
        t_since_lc_s=row[K.C_TLC],
        lc_in_progress=(int(row[K.C_LCT]), lcr) if lcr > 0.0 else None,
        degraded=row[K.C_FLAG] != 0.0,
    )


@dataclass
class WorldState:
    """Time-stamped vehicle set plus road geometry and RNG stream state.

    The RNG stream is (seed, step_index): every step derives its draws from
    that pair alone, so equal seeds and equal action sequences reproduce
    trajectories bit for bit.
    """

    geometry: RoadGeometry = field(default_factory=RoadGeometry)
    t_s: float = 0.0
    dt_s: float = 0.1
    seed: int = 0
    step_index: int = 0
    next_id: int = 0
    _S: np.ndarray = field(default_factory=lambda: np.zeros((K.MAXV, K.NF)))
    _n: int = 0

    @classmethod
    def from_vehicles(cls, vehicles: list[VehicleState], geometry: RoadGeometry | None = None,
                      dt_s: float = 0.1, seed: int = 0, t_s: float = 0.0,
                      step_index: int = 0) -> "WorldState":
        if len(vehicles) > K.MAXV:
            raise ContractViolation(f"world capacity is {K.MAXV} vehicles")
        ids = [v.id for v in vehicles]
        if len(set(ids)) != len(ids):
            raise ContractViolation("vehicle ids must be unique")
        w = cls(geometry=geometry or RoadGeometry(), t_s=t_s, dt_s=dt_s,
                seed=seed, step_index=step_index,
                next_id=max(ids, default=-1) + 1, _n=len(vehicles))
        for i, v in enumerate(sorted(vehicles, key=lambda v: v.id)):
            _vehicle_to_row(v, w._S[i])
        return w

    @property
    def vehicles(self) -> list[VehicleState]:
        return [_row_to_vehicle(self._S[i]) for i in range(self._n)]

    @property
    def n_vehicles(self) -> int:
        return self._n

    def cav_ids(self) -> list[int]:
        return [int(self._S[i, K.C_ID]) for i in range(self._n)
                if self._S[i, K.C_KIND] == K.KIND_CAV]

    def vehicle(self, vid: int) -> VehicleState:
        for i in range(self._n):
            if self._S[i, K.C_ID] == vid:
                return _row_to_vehicle(self._S[i])
        raise KeyError(f"no vehicle with id {vid}")

    def copy(self) -> "WorldState":
        return replace(self, _S=self._S.copy())

    def digest(self) -> int:
        """Cheap content hash of the live state (for planner debugging)."""
        return hash((self._n, self.step_index, self._S[: self._n].tobytes()))


def target_lane_for(intention: Intention, spawn_lane: int, geometry: RoadGeometry) -> int:
    """Target lane by intention: left turns aim at the top lane, right turns
    at lane 0, straight traffic keeps its spawn lane."""
    if not 0 <= spawn_lane < geometry.lane_count:
        raise ValueError(f"spawn_lane {spawn_lane} outside road")
    if intention == Intention.LEFT:
        return geometry.lane_count - 1
    if intention == Intention.RIGHT:
        return 0
    return spawn_lane


def apply_action_kinematics(v: VehicleState, a: DiscreteAction, dt: float,
                            geometry: RoadGeometry) -> VehicleState:
    """One kinematic step for a single vehicle under a discrete action.

    AC/MT/DC command +2.5/0/-2.5 m/s^2 with speed clamped to [0, V_MAX];
    displacement is the exact constant-acceleration integral of the realized
    acceleration.  LC/RC start (or continue) a 1 s lane change; requests that
    would leave the road degrade to lane keeping and set the degraded flag.
    """
    if a.longitudinal == Longitudinal.AC:
        a_cmd = ACCEL_CMD
    elif a.longitudinal == Longitudinal.DC:
        a_cmd = -ACCEL_CMD
    else:
        a_cmd = 0.0
    v1, dx, a_eff = K.advance_longitudinal(v.v_x, a_cmd, dt, V_MAX)
    lct = -1.0 if v.lc_in_progress is None else float(v.lc_in_progress[0])
    lcr = 0.0 if v.lc_in_progress is None else v.lc_in_progress[1]
    lane, y, vy, lct, lcr, tlc, degraded, _completed = K.lateral_transition(
        float(v.lane), v.y_m, lct, lcr, v.t_since_lc_s, int(a.lateral),
        dt, geometry.lane_width_m, LC_DURATION, geometry.lane_count)
    return VehicleState(
        id=v.id, kind=v.kind, x_m=v.x_m + dx, lane=int(lane), y_m=y,
        v_x=v1, v_y=vy, a_x=a_eff, intention=v.intention,
        y_targ_lane=v.y_targ_lane, t_since_lc_s=tlc,
        lc_in_progress=(int(lct), lcr) if lcr > 0.0 else None,
        degraded=degraded != 0.0,
    )
