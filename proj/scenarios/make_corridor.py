#!/usr/bin/env python3
"""Generates corridor.json: a three-intersection arterial with two opposing
transit lines, short side streets, and four-phase signals at every node.

Run from this directory: python3 make_corridor.py > corridor.json
"""
import json

JAM = 133  # veh/km/lane
NODES = ["A", "B", "C"]
MAIN_LEN = 900
ENTRY_LEN = 600
SIDE_LEN = {"A": (360, 420), "B": (280, 300), "C": (340, 450)}  # (north, south) approach lengths


def link(lid, length, speed=50, lanes=1, stations=None):
    d = {"id": lid, "length_m": length, "jam_density_veh_per_km": JAM, "speed_kmh": speed, "lanes": lanes}
    if stations:
        d["stations_m"] = stations
    return d


links, sources = [], []
# Arterial, eastbound: W_in -> A -> AB -> B -> BC -> C -> E_out; westbound mirrors it.
links += [link("W_in", ENTRY_LEN, lanes=2, stations=[300]), link("AB", MAIN_LEN, lanes=2, stations=[500]),
          link("BC", MAIN_LEN, lanes=2, stations=[450]), link("E_out", 300, lanes=2)]
links += [link("E_in", ENTRY_LEN, lanes=2, stations=[250]), link("CB", MAIN_LEN, lanes=2, stations=[520]),
          link("BA", MAIN_LEN, lanes=2, stations=[400]), link("W_out", 300, lanes=2)]
sources += [{"id": "src_W", "link": "W_in", "saturation_flow_veh_per_h": 3600},
            {"id": "src_E", "link": "E_in", "saturation_flow_veh_per_h": 3600}]
for n in NODES:
    north, south = SIDE_LEN[n]
    links += [link(f"N{n}_in", north, speed=40), link(f"S{n}_in", south, speed=40),
              link(f"N{n}_out", 200, speed=40), link(f"S{n}_out", 200, speed=40)]
    sources += [{"id": f"src_N{n}", "link": f"N{n}_in"}, {"id": f"src_S{n}", "link": f"S{n}_in"}]

# Incoming/outgoing links per node and direction.
east_in = {"A": "W_in", "B": "AB", "C": "BC"}      # travelling east
east_out = {"A": "AB", "B": "BC", "C": "E_out"}
west_in = {"A": "BA", "B": "CB", "C": "E_in"}      # travelling west
west_out = {"A": "W_out", "B": "BA", "C": "CB"}

MAIN = {"through": (0.8, 3200), "right": (0.1, 600), "left": (0.1, 500)}
SIDE = {"through": (0.6, 1500), "right": (0.2, 600), "left": (0.2, 500)}

nodes = []
for n in NODES:
    approaches = {
        # approach: (incoming link, {turn: outgoing link}, turn table)
        "EB": (east_in[n], {"through": east_out[n], "right": f"S{n}_out", "left": f"N{n}_out"}, MAIN),
        "WB": (west_in[n], {"through": west_out[n], "right": f"N{n}_out", "left": f"S{n}_out"}, MAIN),
        "SB": (f"N{n}_in", {"through": f"S{n}_out", "right": west_out[n], "left": east_out[n]}, SIDE),
        "NB": (f"S{n}_in", {"through": f"N{n}_out", "right": east_out[n], "left": west_out[n]}, SIDE),
    }
    movements = []
    for app, (src, outs, table) in approaches.items():
        for turn, dst in outs.items():
            ratio, sat = table[turn]
            movements.append({"id": f"{n}_{app}_{turn}", "from": src, "to": dst,
                              "saturation_flow_veh_per_h": sat, "turning_ratio": ratio})
    phases = [
        [f"{n}_EB_through", f"{n}_EB_right", f"{n}_WB_through", f"{n}_WB_right"],
        [f"{n}_EB_left", f"{n}_WB_left", f"{n}_EB_right", f"{n}_WB_right"],
        [f"{n}_SB_through", f"{n}_SB_right", f"{n}_NB_through", f"{n}_NB_right"],
        [f"{n}_SB_left", f"{n}_NB_left", f"{n}_SB_right", f"{n}_NB_right"],
    ]
    nodes.append({"id": n, "movements": movements, "phases": phases})


def ramp(peak, side=False):
    # Demand ramps up over the first 20 minutes, holds, and eases for the last half hour.
    return [{"until_s": 600, "rate_veh_per_h": peak * 0.5}, {"until_s": 1200, "rate_veh_per_h": peak * 0.8},
            {"until_s": 9000, "rate_veh_per_h": peak}, {"until_s": 10800, "rate_veh_per_h": peak * 0.8}]


profiles = [{"source": "src_W", "segments": ramp(700)}, {"source": "src_E", "segments": ramp(650)}]
side_peak = {"A": (150, 120), "B": (160, 170), "C": (160, 110)}
for n in NODES:
    north, south = side_peak[n]
    profiles += [{"source": f"src_N{n}", "segments": ramp(north)}, {"source": f"src_S{n}", "segments": ramp(south)}]

transit = [
    {"id": "line_east", "route": ["W_in", "AB", "BC", "E_out"],
     "stops": [{"link": "W_in", "position_m": 300}, {"link": "AB", "position_m": 500},
               {"link": "BC", "position_m": 450}],
     "headway_s": 360, "first_departure_s": 60, "dwell": {"base_s": 8, "per_passenger_s": 2},
     "capacity": 80, "initial_passengers": 30,
     "passenger_demand": [{"from_stop": 0, "to_stop": 1, "rate_per_h": 40}, {"from_stop": 0, "to_stop": 2, "rate_per_h": 60},
                          {"from_stop": 1, "to_stop": 2, "rate_per_h": 40}]},
    {"id": "line_west", "route": ["E_in", "CB", "BA", "W_out"],
     "stops": [{"link": "E_in", "position_m": 250}, {"link": "CB", "position_m": 520},
               {"link": "BA", "position_m": 400}],
     "headway_s": 420, "first_departure_s": 120, "dwell": {"base_s": 8, "per_passenger_s": 2},
     "capacity": 80, "initial_passengers": 25,
     "passenger_demand": [{"from_stop": 0, "to_stop": 1, "rate_per_h": 30}, {"from_stop": 0, "to_stop": 2, "rate_per_h": 50},
                          {"from_stop": 1, "to_stop": 2, "rate_per_h": 40}]},
]

scenario = {
    "name": "corridor",
    "links": links,
    "sources": sources,
    "nodes": nodes,
    "demand": {"mode": "poisson", "profiles": profiles},
    "transit_lines": transit,
    "controller": {"variant": "transit-mp", "segmentation": "S0", "queue_anchor": "ground-truth"},
    "simulation": {"horizon_s": 10800, "warmup_s": 600, "penetration": 0.1,
                   "car_occupancy_weights": [0.7, 0.2, 0.1]},
}
print(json.dumps(scenario, indent=2))
