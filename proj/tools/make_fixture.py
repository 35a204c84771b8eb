#!/usr/bin/env python3
"""Generate the bundled 30-substation synthetic geography fixture.

The output is deterministic for a given seed. Coordinates are laid out on a
local kilometre grid and projected to latitude/longitude around a fixed origin.
"""

import argparse
import csv
import json
import math
from pathlib import Path

import numpy as np

ORIGIN_LAT = 36.0
ORIGIN_LON = -119.5
HOURS = 8760

SUBSTATIONS = {
    "A1": (0, 0), "A2": (30, -25), "A3": (-20, 35), "A4": (35, 35), "A5": (70, 5), "A6": (15, -50),
    "B1": (150, 0), "B2": (120, 70), "B3": (180, 45), "B4": (150, -45), "B5": (190, -70),
    "C1": (240, 10), "C2": (285, 50), "C3": (290, -30), "C4": (260, -75), "C5": (320, 10),
    "D1": (100, 140), "D2": (55, 150), "D3": (150, 175), "D4": (80, 195), "D5": (200, 130),
    "E1": (70, -95), "E2": (35, -120), "E3": (115, -120), "E4": (20, -75), "E5": (140, -100),
    "F1": (250, 110), "X1": (420, 200), "X2": (440, 215), "Z1": (-60, -60),
}

# Line endpoints that are not substations.
EXTRA_POINTS = {"W1": (110, 225), "T1": (-40, 10)}

COASTAL = "Coastal Power"
VALLEY = "Valley Electric"

LINES = [
    (500, "A5", "B1", VALLEY), (500, "B1", "C1", VALLEY),
    (230, "A1", "A5", COASTAL), (230, "A5", "E1", COASTAL), (230, "E1", "E5", COASTAL),
    (230, "A5", "B2", VALLEY), (230, "B2", "B3", VALLEY), (230, "B3", "C1", VALLEY), (230, "B1", "B4", VALLEY),
    (230, "B4", "E5", VALLEY), (230, "C1", "C2", VALLEY), (230, "C1", "C3", VALLEY), (230, "C1", "C5", VALLEY),
    (230, "B2", "D1", VALLEY), (230, "D1", "D3", VALLEY), (230, "D3", "D5", VALLEY), (230, "D5", "F1", VALLEY),
    (230, "F1", "C2", VALLEY), (230, "B3", "D5", VALLEY),
    (115, "A1", "A2", COASTAL), (115, "A1", "A3", COASTAL), (115, "A1", "A4", COASTAL), (115, "A3", "A4", COASTAL),
    (115, "A2", "E4", COASTAL), (115, "E4", "E1", COASTAL), (115, "E1", "E2", COASTAL), (115, "E1", "E3", COASTAL),
    (115, "B4", "B5", VALLEY), (115, "B4", "E3", VALLEY), (115, "C3", "C4", VALLEY), (115, "D1", "D2", VALLEY),
    (115, "D1", "D4", VALLEY), (115, "D2", "D4", VALLEY), (115, "D4", "W1", VALLEY),
    (66, "A2", "A6", COASTAL),
    (115, "X1", "X2", VALLEY),
]

# The tap leaves the A1-A3 line at its middle vertex.
TAP = (115, ("A1", "A3"), "T1", COASTAL)

GENERATORS = [
    # id, site, fuel, pmax, pf, plant_code, unit_id
    ("NUC1", "B1", "nuclear", 600, 0.90, "6001", "1"),
    ("CC1", "B2", "ng_cc", 300, 0.85, "5001", "CC1"),
    ("CC2", "A5", "ng_cc", 300, 0.85, "", ""),
    ("CC3", "E5", "ng_cc", 300, 0.85, "", ""),
    ("CT1", "A1", "ng_ct", 100, 0.85, "", ""),
    ("CT2", "D1", "ng_ct", 100, 0.85, "", ""),
    ("CT3", "E1", "ng_ct", 100, 0.85, "", ""),
    ("CT4", "B4", "ng_ct", 100, 0.85, "", ""),
    ("ST1", "A1", "ng_st", 200, 0.85, "", ""),
    ("NG5", "D5", "ng_other", 150, 0.85, "", ""),
    ("HY1", "D3", "hydro", 300, 0.90, "", ""),
    ("GEO1", "D4", "geothermal", 100, 0.90, "", ""),
    ("PV1", "C2", "solar", 400, 0.95, "", ""),
    ("PV2", "C4", "solar", 300, 0.95, "", ""),
    ("PV3", "B5", "solar", 200, 0.95, "", ""),
    ("WT1", "C3", "wind", 400, 0.95, "", ""),
    ("WT2", "W1", "wind", 200, 0.95, "", ""),
    ("IMP1", "C5", "import", 300, 0.90, "", ""),
    ("BIO1", "E2", "biomass", 50, 0.85, "", ""),
    ("ISL1", "X1", "ng_ct", 50, 0.85, "", ""),
]

COST_CATALOG = [
    ("5001", "CC1", "ng_cc", 300, 0.004, 28.0, 500.0),
    ("5100", "1", "ng_cc", 500, 0.003, 26.0, 800.0),
    ("5200", "1", "ng_ct", 80, 0.020, 45.0, 200.0),
    ("5201", "2", "ng_ct", 150, 0.015, 42.0, 300.0),
    ("5300", "1", "ng_st", 250, 0.006, 35.0, 400.0),
    ("5400", "1", "biomass", 40, 0.0, 40.0, 50.0),
    ("5500", "1", "landfill_gas", 10, 0.0, 30.0, 0.0),
]

FORM1 = [
    # utility, kv, miles, conductors_per_phase, kcmil, material
    (COASTAL, 230, 20, 1, 795, "ACSR"), (COASTAL, 230, 45, 1, 954, "ACSR"), (COASTAL, 230, 70, 2, 795, "ACSR"),
    (COASTAL, 115, 8, 1, 336.4, "ACSR"), (COASTAL, 115, 20, 1, 477, "ACSR"), (COASTAL, 115, 35, 1, 795, "ACSR"),
    (COASTAL, 66, 5, 1, 336.4, "ACSR"),
    (VALLEY, 500, 60, 2, 1590, "ACSR"),
    (VALLEY, 230, 30, 1, 795, "ACSR"), (VALLEY, 230, 60, 1, 1113, "ACSR"), (VALLEY, 230, 90, 2, 954, "ACSR"),
    (VALLEY, 115, 15, 1, 477, "ACSR"), (VALLEY, 115, 40, 1, 795, "ACSR"),
]

# Share of peak system load by site; every substation in the main network
# gets at least one tract so that each eligible bus can be served.
LOAD_SITES = {
    "A1": 0.10, "A2": 0.06, "A3": 0.06, "A4": 0.06, "A5": 0.03, "A6": 0.03, "T1": 0.02,
    "B1": 0.01, "B2": 0.02, "B3": 0.03, "B4": 0.04, "B5": 0.02,
    "C1": 0.01, "C2": 0.01, "C3": 0.01, "C4": 0.02, "C5": 0.01,
    "D1": 0.07, "D2": 0.04, "D3": 0.02, "D4": 0.03, "D5": 0.03,
    "E1": 0.07, "E2": 0.05, "E3": 0.04, "E4": 0.04, "E5": 0.03,
    "F1": 0.06, "X1": 0.005, "X2": 0.005,
}
PEAK_MW = 2200.0
EXTRA_TRACTS = {"A1": 3, "A2": 1, "A3": 1, "A4": 1, "D1": 2, "E1": 2, "F1": 1, "E2": 1}


def to_latlon(xy):
    x, y = xy
    lat = ORIGIN_LAT + y / 111.0
    lon = ORIGIN_LON + x / (111.0 * math.cos(math.radians(ORIGIN_LAT)))
    return lat, lon


def site(name):
    return SUBSTATIONS.get(name) or EXTRA_POINTS[name]


def wiggle_path(a, b, rng, vertices=3):
    ax, ay = a
    bx, by = b
    length = math.hypot(bx - ax, by - ay)
    nx, ny = -(by - ay) / length, (bx - ax) / length
    pts = [a]
    for k in range(1, vertices + 1):
        f = k / (vertices + 1)
        off = rng.uniform(-0.02, 0.02) * length
        pts.append((ax + f * (bx - ax) + off * nx, ay + f * (by - ay) + off * ny))
    pts.append(b)
    return pts


def system_profile(rng):
    h = np.arange(HOURS)
    day = h // 24
    hod = h % 24
    seasonal = 0.5 + 0.5 * np.cos(2 * np.pi * (day - 200) / 365.0)
    daily = np.clip(np.sin(np.pi * (hod - 6) / 16.0), 0.0, None)
    noise = 1.0 + 0.02 * rng.standard_normal(HOURS)
    shape = (0.42 + 0.30 * seasonal + 0.28 * daily * (0.6 + 0.4 * seasonal)) * noise
    return PEAK_MW * shape / shape.max()


def solar_profile(rng, installed):
    h = np.arange(HOURS)
    day = h // 24
    hod = h % 24 + 0.5
    season = 0.5 + 0.5 * np.cos(2 * np.pi * (day - 172) / 365.0)
    daylen = 10.0 + 4.0 * season
    sunrise = 12.0 - daylen / 2
    clear = np.clip(np.sin(np.pi * (hod - sunrise) / daylen), 0.0, None)
    clouds = np.repeat(rng.uniform(0.55, 1.0, HOURS // 24 + 1), 24)[:HOURS]
    return installed * 0.92 * clear * (0.75 + 0.25 * season) * clouds


def wind_profile(rng, installed):
    x = np.empty(HOURS)
    level = 0.4
    for t in range(HOURS):
        level = 0.97 * level + 0.03 * 0.4 + 0.05 * rng.standard_normal()
        level = min(max(level, 0.02), 0.95)
        x[t] = level
    hod = np.arange(HOURS) % 24
    diurnal = 1.0 + 0.15 * np.cos(2 * np.pi * (hod - 2) / 24.0)
    return installed * np.clip(x * diurnal, 0.0, 0.98)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/fixture30")
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "substations.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "lat", "lon", "name"])
        for sid, xy in SUBSTATIONS.items():
            lat, lon = to_latlon(xy)
            w.writerow([sid, f"{lat:.7f}", f"{lon:.7f}", f"Substation {sid}"])

    features = []
    paths = {}
    for n, (kv, a, b, owner) in enumerate(LINES, start=1):
        pts = wiggle_path(site(a), site(b), rng)
        paths[(a, b)] = pts
        features.append((f"LN{n:03d}", kv, owner, f"{a}-{b}", pts))
    kv, (a, b), end, owner = TAP
    mid = paths[(a, b)][2]
    features.append((f"LN{len(features) + 1:03d}", kv, owner, f"{a}-{b} tap", wiggle_path(mid, site(end), rng, 1)))

    geo = {"type": "FeatureCollection", "features": []}
    for lid, kv, owner, name, pts in features:
        coords = []
        for p in pts:
            lat, lon = to_latlon(p)
            coords.append([round(lon, 7), round(lat, 7)])
        geo["features"].append({
            "type": "Feature",
            "properties": {"id": lid, "kv": kv, "owner": owner, "name": name},
            "geometry": {"type": "LineString", "coordinates": coords},
        })
    (out / "lines.geojson").write_text(json.dumps(geo, indent=1) + "\n")

    with open(out / "generators.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "lat", "lon", "fuel", "pmax_mw", "pmin_mw", "pf", "plant_code", "unit_id"])
        for gid, where, fuel, pmax, pf, plant, unit in GENERATORS:
            x, y = site(where)
            lat, lon = to_latlon((x + rng.uniform(-0.6, 0.6), y + rng.uniform(-0.6, 0.6)))
            w.writerow([gid, f"{lat:.7f}", f"{lon:.7f}", fuel, pmax, 0, pf, plant, unit])

    with open(out / "cost_catalog.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["plant_code", "unit_id", "fuel", "pmax_mw", "c2", "c1", "c0"])
        w.writerows(COST_CATALOG)

    with open(out / "form1.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["utility", "voltage_kv", "length_miles", "conductors_per_phase", "size_kcmil", "material"])
        w.writerows(FORM1)

    system = system_profile(rng)
    tracts = []
    for where, share in LOAD_SITES.items():
        count = 1 + EXTRA_TRACTS.get(where, 0)
        for k in range(count):
            x, y = site(where)
            pos = to_latlon((x + rng.uniform(-4, 4), y + rng.uniform(-4, 4)))
            tracts.append((f"T{where}{k + 1}", pos, share / count))
    total_share = sum(t[2] for t in tracts)
    with open(out / "loads.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["tract_id", "lat", "lon"] + [f"h{h}" for h in range(HOURS)])
        for tid, (lat, lon), share in tracts:
            series = system * share / total_share
            w.writerow([tid, f"{lat:.7f}", f"{lon:.7f}"] + [f"{v:.3f}" for v in series])

    solar_cap = sum(g[3] for g in GENERATORS if g[2] == "solar")
    wind_cap = sum(g[3] for g in GENERATORS if g[2] == "wind")
    solar = solar_profile(rng, solar_cap)
    wind = wind_profile(rng, wind_cap)
    with open(out / "renewables.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["hour", "solar_mw", "wind_mw"])
        for h in range(HOURS):
            w.writerow([h, f"{solar[h]:.3f}", f"{wind[h]:.3f}"])

    config = {
        "inputs": {
            "lines": "lines.geojson",
            "substations": "substations.csv",
            "generators": "generators.csv",
            "loads": "loads.csv",
            "renewables": "renewables.csv",
            "form1": "form1.csv",
            "cost_catalog": "cost_catalog.csv",
            "conductors": "../../config/conductors.csv",
            "transformer_impedance": "../../config/transformer_impedance.csv",
            "transformer_xr": "../../config/transformer_xr.csv",
        },
        "assignment": {"nuclear_per_mwh": 20.0, "import_per_mwh": 35.0},
        "evaluation": {
            "first_hour": 4344,
            "hours": 744,
            "stack_windows": [
                {"name": "winter", "first_hour": 336, "last_hour": 383},
                {"name": "summer", "first_hour": 4680, "last_hour": 4727},
            ],
        },
        "rng_seed": 1,
        "output_dir": "../../out/fixture30",
        "case_name": "fixture30",
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    main()
