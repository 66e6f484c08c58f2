#!/usr/bin/env python3
"""Generates the scenario fixtures in scenarios/.

Geometry is modeled by hand: straight lanelets and circular turn connectors,
3.5 m lanes, right-hand traffic.
"""

import json
import math
import os
import sys

LANE = 3.5
OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "scenarios")


def r4(v):
    return round(v + 0.0, 4)


def pt(x, y):
    return [r4(x), r4(y)]


def bounds(center, width=LANE):
    """Left and right bounds of a centerline given as (x, y, heading) samples."""
    h = width / 2
    left = [pt(x - h * math.sin(a), y + h * math.cos(a)) for x, y, a in center]
    right = [pt(x + h * math.sin(a), y - h * math.cos(a)) for x, y, a in center]
    return left, right


def straight(x0, y0, x1, y1):
    a = math.atan2(y1 - y0, x1 - x0)
    return [(x0, y0, a), (x1, y1, a)]


def arc(cx, cy, r, a0, a1, step=0.5):
    """Arc around (cx, cy) from polar angle a0 to a1; heading follows travel."""
    n = max(2, int(math.ceil(abs(a1 - a0) * r / step)) + 1)
    ccw = a1 > a0
    out = []
    for i in range(n):
        a = a0 + (a1 - a0) * i / (n - 1)
        heading = a + (math.pi / 2 if ccw else -math.pi / 2)
        out.append((cx + r * math.cos(a), cy + r * math.sin(a), heading))
    return out


def lanelet(id_, center, limit, successors=(), priority_over=(), width=LANE):
    left, right = bounds(center, width)
    return {
        "id": id_,
        "left_bound": left,
        "right_bound": right,
        "successors": list(successors),
        "speed_limit_mps": limit,
        "has_priority_over": list(priority_over),
    }


def rect(x0, y0, x1, y1):
    return [pt(x0, y0), pt(x1, y0), pt(x1, y1), pt(x0, y1)]


def scenario(name, lanelets, ego, static=(), dynamic=(), duration=12.0, planner=None, sensor=None):
    out = {
        "schema_version": 1,
        "name": name,
        "map": {"lanelets": lanelets},
        "static_obstacles": [{"id": i, "polygon": p} for i, p in static],
        "dynamic_obstacles": list(dynamic),
        "ego": ego,
        "prediction": {
            "t_f_s": 2.4,
            "fan_segments": 3,
            "a_max_mps2": 10.0,
            "v_switch_mps": None,
            "v_min_mps": 0.0,
            "overspeed_factor": 1.1,
            "psi_half_width_deg": 22.5,
        },
        "sim": {"duration_s": duration, "dt_s": 0.1},
    }
    if planner:
        out["planner"] = planner
    if sensor:
        out["sensor"] = sensor
    return out


def lane_follower(id_, route, s0, v):
    return {
        "id": id_,
        "length_m": 4.5,
        "width_m": 1.8,
        "motion": {"type": "lane_following", "route": route, "s0_m": s0, "v_mps": v},
    }


# T junction: major road east-west (y in [-3.5, 3.5]), minor one-way road from
# the north (x in [-3.5, 0]). Westbound major lane at y in [0, 3.5].
T_LIMIT = 14.0
T_CONTAINER = (8.5, 5.9, 20.5, 10.9)
T_BUILDING = (0.5, 11.0, 45.0, 60.0)
T_EGO_S0 = 40.0
T_HIDDEN_S0 = 9.0


def t_junction_map():
    c = LANE / 2
    r = 6.0 - c  # turn radius so the connector ends on the westbound centerline
    return [
        # westbound: east approach, junction, west exit
        lanelet(1, straight(90.0, c, 6.0, c), T_LIMIT, [2]),
        lanelet(2, straight(6.0, c, -6.0, c), T_LIMIT, [3], priority_over=[11]),
        lanelet(3, straight(-6.0, c, -90.0, c), T_LIMIT),
        # eastbound
        lanelet(4, straight(-90.0, -c, -6.0, -c), T_LIMIT, [5]),
        lanelet(5, straight(-6.0, -c, 6.0, -c), T_LIMIT, [6]),
        lanelet(6, straight(6.0, -c, 90.0, -c), T_LIMIT),
        # minor road southbound and right turn onto the westbound lane
        lanelet(10, straight(-c, 80.0, -c, 6.0), T_LIMIT, [11]),
        lanelet(11, arc(-c - r, 6.0, r, 0.0, -math.pi / 2), T_LIMIT, [3]),
    ]


def t_junction(hidden=True, name="t_junction"):
    dyn = [lane_follower("hidden", [1, 2, 3], T_HIDDEN_S0, T_LIMIT)] if hidden else []
    return scenario(
        name,
        t_junction_map(),
        {"route": [10, 11, 3], "s0_m": T_EGO_S0, "v0_mps": 9.0, "length_m": 4.5, "width_m": 1.8},
        static=[("container", rect(*T_CONTAINER)), ("building", rect(*T_BUILDING))],
        dynamic=dyn,
        duration=12.0,
    )


# X junction: north-south and east-west roads crossing at the origin, approach
# lanelets end 7 m from the center. Priority to the right.
X_LIMIT = 11.0
X_BUILDING = (5.0, -60.0, 60.0, -5.0)
X_EGO_S0 = 35.0


def x_junction_map():
    c = LANE / 2
    j = 7.0
    r = j + c  # left turn from the northbound lane to the westbound lane
    return [
        # northbound (ego approach), straight through, north exit
        lanelet(1, straight(c, -80.0, c, -j), X_LIMIT, [2, 20]),
        lanelet(2, straight(c, -j, c, j), X_LIMIT, [3], priority_over=[8]),
        lanelet(3, straight(c, j, c, 80.0), X_LIMIT),
        # southbound
        lanelet(4, straight(-c, 80.0, -c, j), X_LIMIT, [5]),
        lanelet(5, straight(-c, j, -c, -j), X_LIMIT, [6], priority_over=[11, 20]),
        lanelet(6, straight(-c, -j, -c, -80.0), X_LIMIT),
        # westbound (from the east)
        lanelet(10, straight(80.0, c, j, c), X_LIMIT, [11]),
        lanelet(11, straight(j, c, -j, c), X_LIMIT, [12], priority_over=[2, 20]),
        lanelet(12, straight(-j, c, -80.0, c), X_LIMIT),
        # eastbound (from the west)
        lanelet(7, straight(-80.0, -c, -j, -c), X_LIMIT, [8]),
        lanelet(8, straight(-j, -c, j, -c), X_LIMIT, [9], priority_over=[5]),
        lanelet(9, straight(j, -c, 80.0, -c), X_LIMIT),
        # ego left turn
        lanelet(20, arc(c - r, -j, r, 0.0, math.pi / 2), X_LIMIT, [12], priority_over=[8]),
    ]


def x_junction_crossing():
    return scenario(
        "x_junction_crossing",
        x_junction_map(),
        {"route": [1, 2, 3], "s0_m": X_EGO_S0, "v0_mps": 9.0, "length_m": 4.5, "width_m": 1.8},
        static=[("building", rect(*X_BUILDING))],
        duration=12.0,
    )


X_CROSSER_S0 = 40.0
X_CROSSER_V = 8.0


def x_junction_turning():
    return scenario(
        "x_junction_turning",
        x_junction_map(),
        {"route": [1, 20, 12], "s0_m": X_EGO_S0, "v0_mps": 9.0, "length_m": 4.5, "width_m": 1.8},
        static=[("building", rect(*X_BUILDING))],
        dynamic=[lane_follower("crosser", [7, 8, 9], X_CROSSER_S0, X_CROSSER_V)],
        duration=12.0,
    )


def edge_classification():
    """Edge classification fixture: one occluder, five border segments on lanes."""
    c = LANE / 2
    lanelets = [
        # ego route northbound through the junction
        lanelet(1, straight(c, -40.0, c, 0.0), 14.0, [2]),
        lanelet(2, straight(c, 0.0, c, LANE), 14.0, [3]),
        lanelet(3, straight(c, LANE, c, 25.0), 14.0),
        # westbound road crossing the junction
        lanelet(10, straight(70.0, c, 42.0, c), 14.0, [11]),
        lanelet(11, straight(42.0, c, LANE, c), 14.0, [12]),
        lanelet(12, straight(LANE, c, 0.0, c), 14.0, [13], priority_over=[2]),
        lanelet(13, straight(0.0, c, -30.0, c), 14.0),
        # second approach joining the westbound road from the northeast
        lanelet(14, straight(64.0, 13.4, 42.0, c), 14.0, [11]),
        # dead-end road leading away
        lanelet(20, straight(-10.0, -25.0, -70.0, -25.0), 14.0),
    ]
    return scenario(
        "edge_classification",
        lanelets,
        {"route": [1, 2, 3], "s0_m": 20.0, "v0_mps": 0.0, "length_m": 4.5, "width_m": 1.8},
        static=[("occluder", rect(5.0, -12.0, 15.0, -2.0))],
        duration=0.1,
    )


def main():
    os.makedirs(OUT, exist_ok=True)
    files = {
        "t_junction.json": t_junction(),
        "t_junction_clear.json": t_junction(hidden=False, name="t_junction_clear"),
        "x_junction_crossing.json": x_junction_crossing(),
        "x_junction_turning.json": x_junction_turning(),
        "edge_classification.json": edge_classification(),
    }
    for name, data in files.items():
        with open(os.path.join(OUT, name), "w") as f:
            json.dump(data, f, indent=1)
            f.write("\n")
    print(f"wrote {len(files)} scenarios to {os.path.normpath(OUT)}", file=sys.stderr)


if __name__ == "__main__":
    main()
