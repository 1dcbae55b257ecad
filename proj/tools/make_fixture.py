#!/usr/bin/env python3
"""Writes a small synthetic AIS extract around the default projection origin.

Tracks follow a main channel, a secondary lane and a few random crossings,
with GPS-like jitter. Output is deterministic for a given seed.
"""

import argparse
import csv
import datetime as dt
import math
import random

LAT0, LON0 = 37.009825, -76.099335
KM_PER_DEG = 6371.0 * math.pi / 180.0


def to_latlon(x, y):
    lat = LAT0 + y / KM_PER_DEG
    lon = LON0 + x / (KM_PER_DEG * math.cos(math.radians(LAT0)))
    return lat, lon


def lane_track(rng, heading, offset, heading_sd, lateral_sd):
    # heading is the direction of travel; offset is measured along its normal.
    h = heading + rng.gauss(0.0, heading_sd)
    d = offset + rng.gauss(0.0, lateral_sd)
    ux, uy = math.cos(h), math.sin(h)
    return (-uy * d, ux * d), (ux, uy)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--tracks", type=int, default=60)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    start = dt.datetime(2023, 6, 1, 0, 0, 0)
    rows = []
    for k in range(args.tracks):
        u = rng.random()
        if u < 0.6:
            base, direction = lane_track(rng, 0.15, 0.5, 0.05, 0.35)
        elif u < 0.85:
            base, direction = lane_track(rng, 0.8 - math.pi / 2, -2.0, 0.08, 0.5)
        else:
            h = rng.uniform(0.0, 2.0 * math.pi)
            d = rng.uniform(-9.0, 9.0)
            base, direction = (-math.sin(h) * d, math.cos(h) * d), (math.cos(h), math.sin(h))
        if rng.random() < 0.5:
            direction = (-direction[0], -direction[1])
        speed = rng.uniform(0.2, 0.4)  # km per minute
        mmsi = 366000000 + k
        t0 = start + dt.timedelta(minutes=37 * k)
        steps = int(30.0 / speed)
        for s in range(steps + 1):
            along = -15.0 + s * speed
            x = base[0] + along * direction[0] + rng.gauss(0.0, 0.01)
            y = base[1] + along * direction[1] + rng.gauss(0.0, 0.01)
            lat, lon = to_latlon(x, y)
            t = t0 + dt.timedelta(minutes=s)
            rows.append((mmsi, t.strftime("%Y-%m-%dT%H:%M:%S"), f"{lat:.6f}", f"{lon:.6f}", f"{speed * 32.4:.1f}"))

    with open(args.out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["MMSI", "BaseDateTime", "LAT", "LON", "SOG"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
