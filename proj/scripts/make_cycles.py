#!/usr/bin/env python3
"""Generate the shipped synthetic drive cycles and the default cell table.

Cycles are strings of micro-trips (accelerate, cruise, brake, dwell) with
smooth cosine speed ramps, sampled at 1 s. Output is deterministic.
"""

import argparse
import math
from pathlib import Path


def ramp(v0, v1, accel):
    """Cosine ramp from v0 to v1 whose peak acceleration is `accel`."""
    if v0 == v1:
        return []
    duration = max(1, round(math.pi * abs(v1 - v0) / (2.0 * accel)))
    return [v0 + (v1 - v0) * 0.5 * (1.0 - math.cos(math.pi * i / duration)) for i in range(1, duration + 1)]


def build(trips, accel, brake, dwell_start=3):
    speed = [0.0] * dwell_start
    for v_kmh, cruise_s, dwell_s in trips:
        v = v_kmh / 3.6
        speed += ramp(0.0, v, accel)
        speed += [v] * cruise_s
        speed += ramp(v, 0.0, brake)
        speed += [0.0] * dwell_s
    return speed


def write_cycle(path, speed):
    with open(path, "w", encoding="utf-8") as f:
        f.write("t_s,v_mps,grade\n")
        for t, v in enumerate(speed):
            f.write(f"{t},{v:.6f},0\n")


# Urban scooter commute, about 300 s, top speed 25 km/h.
SCOOTER = [(15, 12, 8), (25, 45, 10), (20, 20, 6), (25, 60, 12), (18, 15, 5), (25, 30, 4)]

# Moped ride with 50 km/h stretches that the config caps at 45 km/h.
MOPED = [(30, 20, 10), (50, 60, 12), (40, 30, 8), (50, 90, 15), (35, 25, 6), (45, 70, 10), (25, 15, 5)]


def write_cell(path):
    """Li-ion NMC-like cell: Voc in volts, resistance in ohm, current limit in A."""
    soe = [i / 20 for i in range(21)]
    with open(path, "w", encoding="utf-8") as f:
        f.write("soe,voc_v,r_ohm,i_max_a\n")
        for s in soe:
            voc = 3.0 + 1.2 * s - 0.35 * math.exp(-12.0 * s) + 0.02 * math.sin(2.0 * math.pi * s)
            r = 0.022 + 0.010 * math.exp(-8.0 * s)
            f.write(f"{s:.2f},{voc:.4f},{r:.5f},20\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    args = ap.parse_args()
    out = Path(args.out)
    (out / "cycles").mkdir(parents=True, exist_ok=True)
    (out / "cells").mkdir(parents=True, exist_ok=True)
    write_cycle(out / "cycles" / "scooter_urban.csv", build(SCOOTER, accel=0.8, brake=1.0))
    write_cycle(out / "cycles" / "moped_urban.csv", build(MOPED, accel=1.0, brake=1.2))
    write_cell(out / "cells" / "default_cell.csv")


if __name__ == "__main__":
    main()
