"""Numba-compiled core of the simulator.

Vehicles live in a fixed-capacity float64 matrix (one row per vehicle, column
constants below); every integer-valued field is stored as an exact small
float.  All randomness is counter-based splitmix64 keyed by
(seed, step_index, draw counter), which makes every kernel a pure function of
its arguments: replaying a step with the same seed and actions reproduces the
successor bit for bit.

The scalar helpers (`advance_longitudinal`, `lateral_transition`,
`krauss_speed`, `potential`, ...) are the only implementations of their
formulas; both the public dataclass API and the step/rollout loops call them,
so there is no duplicated physics to drift apart.
"""

import numpy as np
from numba import njit

# ---------------------------------------------------------------------------
# Layout and codes
# ---------------------------------------------------------------------------

MAXV = 64            # vehicle capacity of one world
NF = 14              # columns per vehicle row

C_ID = 0
C_KIND = 1           # 0 = HDV, 1 = CAV
C_X = 2              # longitudinal position [m]
C_Y = 3              # lateral position [m]
C_LANE = 4           # current integer lane
C_VX = 5             # [m/s]
C_VY = 6             # [m/s]
C_AX = 7             # effective longitudinal acceleration of last step [m/s^2]
C_INT = 8            # intention code
C_YT = 9             # target lane
C_TLC = 10           # seconds since last completed lane change (spawn age before any)
C_LCT = 11           # lane-change target lane, -1 when not changing
C_LCR = 12           # lane-change remaining duration [s]
C_FLAG = 13          # 1 when the last action request was degraded

KIND_HDV = 0
KIND_CAV = 1

INT_LEFT = 0
INT_STRAIGHT = 1
INT_RIGHT = 2

LAT_LC = 0           # change left (toward higher lane index)
LAT_LK = 1
LAT_RC = 2           # change right (toward lane 0)

LONG_AC = 0
LONG_MT = 1
LONG_DC = 2

VARIANT_HDR = 0
VARIANT_GNR = 1
VARIANT_CTR = 2
VARIANT_CTH = 3

ROLLOUT_UNIFORM = 0
ROLLOUT_GREEDY_ARG = 1

_U64 = np.uint64
_GOLD = _U64(0x9E3779B97F4A7C15)


# ---------------------------------------------------------------------------
# Counter-based RNG (splitmix64)
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _mix64(z):
    z = (z + _GOLD) & _U64(0xFFFFFFFFFFFFFFFF)
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


@njit(cache=True, inline="always")
def rng_base(seed, stream):
    """Per-(seed, stream) base state; streams are e.g. world step indices."""
    return _mix64(_mix64(_U64(seed)) ^ _mix64(_U64(stream) + _GOLD))


@njit(cache=True, inline="always")
def rng_u01(base, ctr):
    """ctr-th uniform draw in [0, 1) for a given base state."""
    return float(_mix64(base + _U64(ctr) * _GOLD) >> _U64(11)) * (1.0 / 9007199254740992.0)


# ---------------------------------------------------------------------------
# Scalar kinematics
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def advance_longitudinal(v, a, dt, v_max):
    """One constant-acceleration step with speed clamped to [0, v_max].

    Returns (new_v, dx, a_eff).  When the clamp does not bind, dx equals
    v*dt + 0.5*a*dt^2 exactly, so two accelerations differing by da displace
    by 0.5*da*dt^2.  When it binds, a_eff is the acceleration actually
    realized and dx stays consistent with it.
    """
    v1 = v + a * dt
    if 0.0 <= v1 <= v_max:
        a_eff = a
    else:
        if v1 > v_max:
            v1 = v_max
        else:
            v1 = 0.0
        a_eff = (v1 - v) / dt
    dx = v * dt + 0.5 * a_eff * dt * dt
    return v1, dx, a_eff


@njit(cache=True)
def lateral_transition(lane, y, lct, lcr, tlc, lat, dt, lane_width, lc_duration, lane_count):
    """Advance the lateral state of one vehicle by dt under lateral action `lat`.

    A lane change runs for `lc_duration` at constant lateral speed
    +-lane_width/lc_duration; requests while one is in progress continue it,
    out-of-range requests degrade to lane keeping.  On completion the lane
    index updates, y snaps to the lane center and tlc resets to 0; otherwise
    tlc advances by dt.

    Returns (lane, y, vy, lct, lcr, tlc, degraded, completed).
    """
    degraded = 0.0
    completed = False
    if lcr > 0.0:
        # in progress: any request degrades to "continue"
        vy = (lct - lane) * lane_width / lc_duration
        y = y + vy * dt
        lcr = lcr - dt
        if lcr <= 0.5 * dt:
            lane = lct
            y = lane * lane_width
            lct = -1.0
            lcr = 0.0
            completed = True
    elif lat == LAT_LC or lat == LAT_RC:
        step = 1.0 if lat == LAT_LC else -1.0
        tgt = lane + step
        if tgt < 0.0 or tgt > lane_count - 1.0:
            vy = 0.0
            y = lane * lane_width
            degraded = 1.0
        else:
            lct = tgt
            lcr = lc_duration
            vy = step * lane_width / lc_duration
            y = y + vy * dt
            lcr = lcr - dt
            if lcr <= 0.5 * dt:     # only reachable when lc_duration <= 1.5*dt
                lane = lct
                y = lane * lane_width
                lct = -1.0
                lcr = 0.0
                completed = True
    else:
        vy = 0.0
        y = lane * lane_width
    if completed:
        tlc = 0.0
    else:
        tlc = tlc + dt
    return lane, y, vy, lct, lcr, tlc, degraded, completed


@njit(cache=True, inline="always")
def lane_permits(perm, lane, intention):
    return perm[int(lane), int(intention)] != 0


@njit(cache=True, inline="always")
def occupies(S, i, lane):
    """A vehicle occupies its lane and, while changing, its target lane."""
    if S[i, C_LANE] == lane:
        return True
    return S[i, C_LCR] > 0.0 and S[i, C_LCT] == lane


@njit(cache=True)
def leader_in_lane(S, n, i, lane):
    """Index of the nearest vehicle ahead of i occupying `lane`, or -1."""
    best = -1
    bx = 1.0e18
    xi = S[i, C_X]
    for j in range(n):
        if j == i:
            continue
        if S[j, C_X] > xi and occupies(S, j, lane) and S[j, C_X] < bx:
            bx = S[j, C_X]
            best = j
    return best


@njit(cache=True)
def follower_in_lane(S, n, i, lane):
    best = -1
    bx = -1.0e18
    xi = S[i, C_X]
    for j in range(n):
        if j == i:
            continue
        if S[j, C_X] <= xi and occupies(S, j, lane) and S[j, C_X] > bx:
            bx = S[j, C_X]
            best = j
    return best


# ---------------------------------------------------------------------------
# HDV behavior (Krauss car following + two-rule lane changing)
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def krauss_safe_speed(v_self, v_leader, gap, b_decel, t_react):
    return v_leader + (gap - v_leader * t_react) / (v_self / b_decel + t_react)


@njit(cache=True)
def krauss_speed(v_self, has_leader, v_leader, gap, b_decel, t_react, eps, a_free, v_max, dt, u):
    """Krauss safe-speed update; `u` is the uniform imperfection draw."""
    v_des = v_self + a_free * dt
    if v_des > v_max:
        v_des = v_max
    if has_leader:
        v_safe = krauss_safe_speed(v_self, v_leader, gap, b_decel, t_react)
        if v_safe < v_des:
            v_des = v_safe
    v = v_des - eps * a_free * dt * u
    if v < 0.0:
        v = 0.0
    return v


@njit(cache=True)
def _free_speed(S, n, i, lane, veh_len, b_decel, t_react, a_free, v_max, dt):
    """Deterministic Krauss speed i could drive in `lane` (no imperfection)."""
    j = leader_in_lane(S, n, i, lane)
    if j < 0:
        return krauss_speed(S[i, C_VX], False, 0.0, 0.0, b_decel, t_react, 0.0, a_free, v_max, dt, 0.0)
    gap = S[j, C_X] - S[i, C_X] - veh_len
    return krauss_speed(S[i, C_VX], True, S[j, C_VX], gap, b_decel, t_react, 0.0, a_free, v_max, dt, 0.0)


@njit(cache=True)
def _gap_safe(S, n, i, lane, veh_len, t_react):
    """Reaction-time gap checks for moving vehicle i into `lane`."""
    j = leader_in_lane(S, n, i, lane)
    if j >= 0:
        if S[j, C_X] - S[i, C_X] - veh_len <= S[i, C_VX] * t_react:
            return False
    k = follower_in_lane(S, n, i, lane)
    if k >= 0:
        if S[i, C_X] - S[k, C_X] - veh_len <= S[k, C_VX] * t_react:
            return False
    return True


@njit(cache=True)
def hdv_lane_decision(S, n, i, perm, lane_count, veh_len, b_decel, t_react, a_free, v_max, lc_gain, dt):
    """Lateral action for HDV i: strategic pull toward the target lane when the
    current lane does not permit the intention, otherwise a tactical change
    when an adjacent permitted lane is faster by more than lc_gain."""
    lane = S[i, C_LANE]
    if S[i, C_LCR] > 0.0:
        return LAT_LK
    if not lane_permits(perm, lane, S[i, C_INT]):
        step = 1.0 if S[i, C_YT] > lane else -1.0
        tgt = lane + step
        if 0.0 <= tgt <= lane_count - 1.0 and _gap_safe(S, n, i, tgt, veh_len, t_react):
            return LAT_LC if step > 0.0 else LAT_RC
        return LAT_LK
    v_here = _free_speed(S, n, i, lane, veh_len, b_decel, t_react, a_free, v_max, dt)
    best_gain = lc_gain
    best = LAT_LK
    for step in (1.0, -1.0):
        tgt = lane + step
        if tgt < 0.0 or tgt > lane_count - 1.0:
            continue
        if not lane_permits(perm, tgt, S[i, C_INT]):
            continue
        gain = _free_speed(S, n, i, tgt, veh_len, b_decel, t_react, a_free, v_max, dt) - v_here
        if gain > best_gain and _gap_safe(S, n, i, tgt, veh_len, t_react):
            best_gain = gain
            best = LAT_LC if step > 0.0 else LAT_RC
    return best


# ---------------------------------------------------------------------------
# Reward components
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def potential_xy(x, y_lanes, y_targ, x_goal, sigma, zeta):
    """Driving potential at longitudinal position x and lateral position
    y_lanes (in lane-width units); peaks at (x_goal, y_targ)."""
    d = x_goal - x
    dy = y_lanes - y_targ
    if dy < 0.0:
        dy = -dy
    return np.exp(-(d * d) / (2.0 * sigma * sigma)) / (zeta * dy + 1.0)


@njit(cache=True, inline="always")
def potential_grad_xy(x, y_lanes, y_targ, x_goal, sigma, zeta):
    """(d/dx, d/dy) of the potential; the lateral derivative is 0 at dy = 0."""
    phi = potential_xy(x, y_lanes, y_targ, x_goal, sigma, zeta)
    gx = phi * (x_goal - x) / (sigma * sigma)
    dy = y_lanes - y_targ
    if dy > 0.0:
        gy = -phi * zeta / (zeta * dy + 1.0)
    elif dy < 0.0:
        gy = phi * zeta / (-zeta * dy + 1.0)
    else:
        gy = 0.0
    return gx, gy


@njit(cache=True, inline="always")
def trd_rate(x, y_lanes, y_targ, vx, vy_lanes, x_goal, sigma, zeta):
    gx, gy = potential_grad_xy(x, y_lanes, y_targ, x_goal, sigma, zeta)
    return gx * vx + gy * vy_lanes


@njit(cache=True, inline="always")
def arg_indicator(long_act, vx, v_thres):
    if long_act == LONG_AC:
        return 1.0
    if long_act == LONG_MT and vx >= v_thres:
        return 1.0
    return 0.0


@njit(cache=True, inline="always")
def ttc_penalty(ttc, ttc_crit):
    if 0.0 < ttc < ttc_crit:
        return -1.0 + np.exp(1.0 / ttc_crit - 1.0 / ttc)
    return 0.0


@njit(cache=True, inline="always")
def ttc_of(gap, v_self, v_leader):
    if v_self > v_leader and gap > 0.0:
        return gap / (v_self - v_leader)
    return np.inf


@njit(cache=True, inline="always")
def freq_penalty(t_since_lc, lambda_lc):
    return -np.exp(-lambda_lc * t_since_lc)


@njit(cache=True)
def reward_terms(S, n, act_long, n_collided, veh_len,
                 x_goal, sigma, zeta, v_thres, ttc_crit, lambda_lc,
                 w_trd, w_arg, w_hdr, w_flow, w_safe, w_freq,
                 lane_width, v_max, hdr_family):
    """Global reward of a post-step world.

    `act_long[i]` is the longitudinal action of row i, -1 for vehicles that
    took none this step (HDVs, fresh spawns).  `n_collided` vehicles were
    removed by collision this step and contribute -1 each to the safety sum.
    With hdr_family the per-vehicle term is the weighted TRD/ARG mix; without
    it the term is the bare potential of the reached state.

    Returns (total, flow, safe, cav_term_mean).
    """
    cav_sum = 0.0
    n_cav = 0
    flow_sum = 0.0
    safe = -1.0 * n_collided
    for i in range(n):
        flow_sum += S[i, C_VX] / v_max
        lane = S[i, C_LANE]
        j = leader_in_lane(S, n, i, lane)
        ttc = np.inf
        if j >= 0:
            gap = S[j, C_X] - S[i, C_X] - veh_len
            ttc = ttc_of(gap, S[i, C_VX], S[j, C_VX])
        if S[i, C_LCR] > 0.0:
            j2 = leader_in_lane(S, n, i, S[i, C_LCT])
            if j2 >= 0:
                gap2 = S[j2, C_X] - S[i, C_X] - veh_len
                t2 = ttc_of(gap2, S[i, C_VX], S[j2, C_VX])
                if t2 < ttc:
                    ttc = t2
        safe += ttc_penalty(ttc, ttc_crit)
        if S[i, C_KIND] == KIND_CAV and act_long[i] >= 0:
            y_lanes = S[i, C_Y] / lane_width
            if hdr_family:
                trd = trd_rate(S[i, C_X], y_lanes, S[i, C_YT], S[i, C_VX],
                               S[i, C_VY] / lane_width, x_goal, sigma, zeta)
                term = w_trd * trd + w_arg * arg_indicator(act_long[i], S[i, C_VX], v_thres)
            else:
                term = potential_xy(S[i, C_X], y_lanes, S[i, C_YT], x_goal, sigma, zeta)
            cav_sum += w_hdr * term + w_freq * freq_penalty(S[i, C_TLC], lambda_lc)
            n_cav += 1
    flow = flow_sum / n if n > 0 else 0.0
    cav_term = cav_sum / n_cav if n_cav > 0 else 0.0
    total = cav_term + w_flow * flow + w_safe * safe
    return total, flow, safe, cav_term


# ---------------------------------------------------------------------------
# World step
# ---------------------------------------------------------------------------

@njit(cache=True)
def step_world(S, n, next_id, step_idx, seed, dt,
               road_length, lane_count, lane_width, perm,
               v_max, accel_cmd, lc_duration, veh_len,
               b_decel, t_react, eps, a_free, lc_gain,
               p_arrival, cav_fraction, v0_min, v0_max, min_spawn_gap,
               act_lat, act_long,
               ev_coll, ev_desp_id, ev_desp_ok, ev_spawn, ev_lc):
    """Advance the world one decision interval in place.

    Phase order is fixed: HDV lane decisions, HDV speeds, per-vehicle
    kinematics (all computed from the pre-step state, then applied),
    collision detection, despawning at the road end, Poisson spawning.
    act_lat/act_long hold per-row action codes for CAV rows.

    Event buffers are filled and their counts returned:
    (n, next_id, n_coll_pairs, n_desp, n_spawn, n_lc).
    Collided rows are removed in pairs; a row joins at most one pair.
    On return act_lat/act_long are re-aligned to the surviving rows
    (-1 for rows without an action this step, e.g. fresh spawns).
    """
    base = rng_base(seed, step_idx)
    ctr = 0

    # phase 1: HDV lateral decisions (from the pre-step state)
    for i in range(n):
        if S[i, C_KIND] == KIND_HDV:
            act_lat[i] = hdv_lane_decision(S, n, i, perm, lane_count, veh_len,
                                           b_decel, t_react, a_free, v_max, lc_gain, dt)

    # phase 2: new speeds (simultaneous, from the pre-step state)
    new_vx = np.empty(n, dtype=np.float64)
    for i in range(n):
        if S[i, C_KIND] == KIND_HDV:
            u = 0.0
            if eps > 0.0:
                ctr += 1
                u = rng_u01(base, ctr)
            v_here = S[i, C_VX]
            best = -1
            best_gap = 0.0
            j = leader_in_lane(S, n, i, S[i, C_LANE])
            if j >= 0:
                best = j
                best_gap = S[j, C_X] - S[i, C_X] - veh_len
            if S[i, C_LCR] > 0.0:
                j2 = leader_in_lane(S, n, i, S[i, C_LCT])
                if j2 >= 0:
                    gap2 = S[j2, C_X] - S[i, C_X] - veh_len
                    if best < 0 or krauss_safe_speed(v_here, S[j2, C_VX], gap2, b_decel, t_react) < \
                            krauss_safe_speed(v_here, S[best, C_VX], best_gap, b_decel, t_react):
                        best = j2
                        best_gap = gap2
            v = krauss_speed(v_here, best >= 0, S[best, C_VX] if best >= 0 else 0.0,
                             best_gap, b_decel, t_react, eps, a_free, v_max, dt, u)
            # deceleration capability is bounded by b_decel
            if v < v_here - b_decel * dt:
                v = v_here - b_decel * dt
            new_vx[i] = v
        else:
            new_vx[i] = 0.0  # CAVs handled in phase 3

    # phase 3+4: kinematics, applied per vehicle
    n_lc = 0
    for i in range(n):
        v0 = S[i, C_VX]
        if S[i, C_KIND] == KIND_CAV:
            a_cmd = accel_cmd if act_long[i] == LONG_AC else (-accel_cmd if act_long[i] == LONG_DC else 0.0)
            v1, dx, a_eff = advance_longitudinal(v0, a_cmd, dt, v_max)
        else:
            v1 = new_vx[i]
            dx = v1 * dt
            a_eff = (v1 - v0) / dt
        lane, y, vy, lct, lcr, tlc, degraded, completed = lateral_transition(
            S[i, C_LANE], S[i, C_Y], S[i, C_LCT], S[i, C_LCR], S[i, C_TLC],
            act_lat[i], dt, lane_width, lc_duration, lane_count)
        S[i, C_X] += dx
        S[i, C_VX] = v1
        S[i, C_AX] = a_eff
        S[i, C_LANE] = lane
        S[i, C_Y] = y
        S[i, C_VY] = vy
        S[i, C_LCT] = lct
        S[i, C_LCR] = lcr
        S[i, C_TLC] = tlc
        S[i, C_FLAG] = degraded
        if completed:
            ev_lc[n_lc] = S[i, C_ID]
            n_lc += 1

    # phase 5: collisions (pairs; each row in at most one pair)
    dead = np.zeros(n, dtype=np.int8)
    n_coll = 0
    for i in range(n):
        if dead[i] == 1:
            continue
        for j in range(i + 1, n):
            if dead[j] == 1:
                continue
            dxp = S[i, C_X] - S[j, C_X]
            if dxp < 0.0:
                dxp = -dxp
            if dxp >= veh_len:
                continue
            dyp = S[i, C_Y] - S[j, C_Y]
            if dyp < 0.0:
                dyp = -dyp
            if dyp < 0.5 * lane_width:
                ev_coll[2 * n_coll] = S[i, C_ID]
                ev_coll[2 * n_coll + 1] = S[j, C_ID]
                n_coll += 1
                dead[i] = 1
                dead[j] = 1
                break

    # phase 6: despawn at the road end (collision removal takes precedence)
    n_desp = 0
    for i in range(n):
        if dead[i] == 0 and S[i, C_X] >= road_length:
            dead[i] = 2
            ev_desp_id[n_desp] = S[i, C_ID]
            ev_desp_ok[n_desp] = 1.0 if lane_permits(perm, S[i, C_LANE], S[i, C_INT]) else 0.0
            n_desp += 1

    # compact surviving rows, keeping id order; realign action codes
    w = 0
    for i in range(n):
        if dead[i] == 0:
            if w != i:
                for c in range(NF):
                    S[w, c] = S[i, c]
                act_lat[w] = act_lat[i]
                act_long[w] = act_long[i]
            w += 1
    n = w

    # phase 7: Poisson spawning with min-gap rejection and safe entry speed
    n_spawn = 0
    if p_arrival > 0.0:
        for lane in range(lane_count):
            ctr += 1
            if rng_u01(base, ctr) >= p_arrival:
                continue
            ctr += 1
            u_v0 = rng_u01(base, ctr)
            ctr += 1
            u_kind = rng_u01(base, ctr)
            ctr += 1
            u_int = rng_u01(base, ctr)
            if n >= MAXV:
                continue
            # nearest occupant downstream of the entry point
            gap = 1.0e18
            v_lead = 0.0
            has_lead = False
            for j in range(n):
                if occupies(S, j, float(lane)) and S[j, C_X] - veh_len < gap:
                    gap = S[j, C_X] - veh_len
                    v_lead = S[j, C_VX]
                    has_lead = True
            if has_lead and gap < min_spawn_gap:
                continue
            v0 = v0_min + (v0_max - v0_min) * u_v0
            if has_lead:
                v_safe = krauss_safe_speed(v0, v_lead, gap, b_decel, t_react)
                if v_safe < v0:
                    v0 = v_safe
                if v0 < 2.0:
                    continue    # too congested to enter safely
            kind = KIND_CAV if u_kind < cav_fraction else KIND_HDV
            intent = int(u_int * 3.0)
            if intent > 2:
                intent = 2
            if intent == INT_LEFT:
                y_targ = lane_count - 1
            elif intent == INT_RIGHT:
                y_targ = 0
            else:
                y_targ = lane
            S[n, C_ID] = next_id
            S[n, C_KIND] = kind
            S[n, C_X] = 0.0
            S[n, C_Y] = lane * lane_width
            S[n, C_LANE] = lane
            S[n, C_VX] = v0
            S[n, C_VY] = 0.0
            S[n, C_AX] = 0.0
            S[n, C_INT] = intent
            S[n, C_YT] = y_targ
            S[n, C_TLC] = 0.0
            S[n, C_LCT] = -1.0
            S[n, C_LCR] = 0.0
            S[n, C_FLAG] = 0.0
            act_lat[n] = -1
            act_long[n] = -1
            ev_spawn[n_spawn] = next_id
            n_spawn += 1
            next_id += 1
            n += 1

    return n, next_id, n_coll, n_desp, n_spawn, n_lc


# ---------------------------------------------------------------------------
# Planner simulation (tree-path replay + rollout) in one kernel call
# ---------------------------------------------------------------------------

@njit(cache=True)
def rollout_actions(S, n, base, ctr, policy, lat_out, long_out):
    """Fill per-row actions for every CAV row; returns the updated draw ctr."""
    for i in range(n):
        if S[i, C_KIND] != KIND_CAV:
            lat_out[i] = -1
            long_out[i] = -1
            continue
        if policy == ROLLOUT_GREEDY_ARG:
            if S[i, C_LANE] < S[i, C_YT]:
                lat_out[i] = LAT_LC
            elif S[i, C_LANE] > S[i, C_YT]:
                lat_out[i] = LAT_RC
            else:
                lat_out[i] = LAT_LK
            long_out[i] = LONG_AC
        else:
            ctr += 1
            k = int(rng_u01(base, ctr) * 9.0)
            if k > 8:
                k = 8
            lat_out[i] = k // 3
            long_out[i] = k % 3
    return ctr


@njit(cache=True)
def run_simulation(S, n, next_id, step_idx, world_seed, dt,
                   road_length, lane_count, lane_width, perm,
                   v_max, accel_cmd, lc_duration, veh_len,
                   b_decel, t_react, eps, a_free, lc_gain,
                   p_arrival, cav_fraction, v0_min, v0_max, min_spawn_gap,
                   x_goal, sigma, zeta, v_thres, ttc_crit, lambda_lc,
                   w_trd, w_arg, w_hdr, w_flow, w_safe, w_freq,
                   variant, rho, beta,
                   root_ids, n_root, path_lat, path_long, path_len,
                   rollout_steps, rollout_seed, rollout_policy,
                   rewards_out):
    """Replay a joint-action path from the current state, then roll out.

    S is mutated.  path_lat/path_long are [depth, root-slot] action codes for
    the CAVs listed in root_ids; root CAVs absent at some depth are skipped,
    CAVs not in the root set (later spawns) act under the rollout policy.
    Rewards (centered when the variant calls for it) are written per depth to
    rewards_out; returns (steps_done, rho).
    """
    act_lat = np.full(MAXV, -1, dtype=np.int8)
    act_long = np.full(MAXV, -1, dtype=np.int8)
    ev_coll = np.empty(2 * MAXV, dtype=np.float64)
    ev_desp_id = np.empty(MAXV, dtype=np.float64)
    ev_desp_ok = np.empty(MAXV, dtype=np.float64)
    ev_spawn = np.empty(MAXV, dtype=np.float64)
    ev_lc = np.empty(MAXV, dtype=np.float64)
    hdr_family = variant == VARIANT_HDR or variant == VARIANT_CTH
    centered = variant == VARIANT_CTR or variant == VARIANT_CTH
    rbase = rng_base(rollout_seed, 0xC0FFEE)
    rctr = 0
    total_steps = path_len + rollout_steps
    k = 0
    while k < total_steps:
        rctr = rollout_actions(S, n, rbase, rctr, rollout_policy, act_lat, act_long)
        if k < path_len:
            for s in range(n_root):
                vid = root_ids[s]
                for i in range(n):
                    if S[i, C_ID] == vid:
                        act_lat[i] = path_lat[k, s]
                        act_long[i] = path_long[k, s]
                        break
        n, next_id, n_coll, n_desp, n_spawn, n_lc = step_world(
            S, n, next_id, step_idx, world_seed, dt,
            road_length, lane_count, lane_width, perm,
            v_max, accel_cmd, lc_duration, veh_len,
            b_decel, t_react, eps, a_free, lc_gain,
            p_arrival, cav_fraction, v0_min, v0_max, min_spawn_gap,
            act_lat, act_long,
            ev_coll, ev_desp_id, ev_desp_ok, ev_spawn, ev_lc)
        step_idx += 1
        raw, flow, safe, cav_term = reward_terms(
            S, n, act_long, 2 * n_coll, veh_len,
            x_goal, sigma, zeta, v_thres, ttc_crit, lambda_lc,
            w_trd, w_arg, w_hdr, w_flow, w_safe, w_freq,
            lane_width, v_max, hdr_family)
        if centered:
            rewards_out[k] = raw - rho
            rho = rho + beta * (raw - rho)
        else:
            rewards_out[k] = raw
        k += 1
    return k, rho
